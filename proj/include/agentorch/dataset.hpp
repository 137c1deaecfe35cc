#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentorch/retriever.hpp"

namespace agentorch {

struct QaExample {
    std::string id;
    std::string question;
    std::string gold_answer;
    std::vector<std::pair<std::string, std::vector<std::string>>> context;
};

/// Parses HotpotQA distractor-format records (_id, question, answer, context).
/// Throws DatasetError on malformed input.
std::vector<QaExample> parse_dataset(const nlohmann::json& doc);

/// Seeded Fisher-Yates shuffle of positions, first `sample_size` taken,
/// returned in original file order.
std::vector<QaExample> sample_examples(std::vector<QaExample> examples, std::size_t sample_size,
                                       std::uint64_t seed);

/// Reads and samples a dataset file. A missing sample_size keeps everything.
std::vector<QaExample> load_dataset(const std::filesystem::path& path,
                                    std::optional<std::size_t> sample_size, std::uint64_t seed);

/// One document per distinct context title across the examples, in first-seen
/// order. Body is the paragraph's sentences joined by spaces.
std::vector<Document> corpus_from_examples(std::span<const QaExample> examples);

}  // namespace agentorch
