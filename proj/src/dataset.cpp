#include "agentorch/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "agentorch/errors.hpp"

namespace agentorch {

using nlohmann::json;

namespace {

std::string required_string(const json& rec, const char* key, std::size_t index) {
    auto it = rec.find(key);
    if (it == rec.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw DatasetError("record " + std::to_string(index) + ": missing or empty '" + key + "'");
    }
    return it->get<std::string>();
}

// Unbiased draw from [0, bound) using the raw 64-bit engine output, so the
// sample is identical across standard library implementations.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

}  // namespace

std::vector<QaExample> parse_dataset(const json& doc) {
    if (!doc.is_array()) throw DatasetError("dataset must be a JSON array of records");
    std::vector<QaExample> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& rec = doc[i];
        if (!rec.is_object()) throw DatasetError("record " + std::to_string(i) + " is not an object");
        QaExample ex;
        ex.id = required_string(rec, "_id", i);
        ex.question = required_string(rec, "question", i);
        ex.gold_answer = required_string(rec, "answer", i);
        if (auto ctx = rec.find("context"); ctx != rec.end()) {
            if (!ctx->is_array()) throw DatasetError("record " + ex.id + ": context must be a list");
            for (const json& para : *ctx) {
                if (!para.is_array() || para.size() != 2 || !para[0].is_string() ||
                    !para[1].is_array()) {
                    throw DatasetError("record " + ex.id +
                                       ": context entries must be [title, [sentences]]");
                }
                std::vector<std::string> sentences;
                for (const json& s : para[1]) {
                    if (!s.is_string()) throw DatasetError("record " + ex.id + ": bad sentence");
                    sentences.push_back(s.get<std::string>());
                }
                ex.context.emplace_back(para[0].get<std::string>(), std::move(sentences));
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<QaExample> sample_examples(std::vector<QaExample> examples, std::size_t sample_size,
                                       std::uint64_t seed) {
    if (sample_size > examples.size()) {
        throw DatasetError("sample_size " + std::to_string(sample_size) + " exceeds dataset size " +
                           std::to_string(examples.size()));
    }
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[draw_below(rng, i)]);
    }
    order.resize(sample_size);
    std::sort(order.begin(), order.end());

    std::vector<QaExample> out;
    out.reserve(sample_size);
    for (std::size_t i : order) out.push_back(std::move(examples[i]));
    return out;
}

std::vector<QaExample> load_dataset(const std::filesystem::path& path,
                                    std::optional<std::size_t> sample_size, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DatasetError("dataset " + path.string() + " is not valid JSON: " + e.what());
    }
    auto examples = parse_dataset(doc);
    const std::size_t n = sample_size.value_or(examples.size());
    return sample_examples(std::move(examples), n, seed);
}

std::vector<Document> corpus_from_examples(std::span<const QaExample> examples) {
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    for (const auto& ex : examples) {
        for (const auto& [title, sentences] : ex.context) {
            if (!seen.insert(title).second) continue;
            std::string body;
            for (const auto& s : sentences) {
                if (!body.empty() && !s.empty() && s.front() != ' ') body.push_back(' ');
                body += s;
            }
            docs.push_back({title, title, std::move(body)});
        }
    }
    return docs;
}

}  // namespace agentorch
