#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentorch/experiment.hpp"
#include "agentorch/llm_backend.hpp"
#include "agentorch/retriever.hpp"

namespace agentorch {

enum class BackendKind { scripted, http };
enum class CorpusMode { dataset_contexts, directory };

struct RunConfig {
    std::filesystem::path dataset;
    std::optional<std::size_t> sample_size;
    std::uint64_t seed = 0;
    CorpusMode corpus_mode = CorpusMode::dataset_contexts;
    std::filesystem::path corpus_directory;
    BackendKind backend = BackendKind::scripted;
    std::filesystem::path script;
    HttpBackendConfig http;
    Bm25Params bm25;
    ExperimentOptions experiment;
    std::filesystem::path output_dir = "runs";
};

/// Tree form of a RunConfig; `config_to_json(RunConfig{})` is the default file.
nlohmann::json config_to_json(const RunConfig& config);

/// Strict: unknown keys, wrong types and invalid values raise ConfigError
/// naming the dotted key path.
RunConfig parse_run_config(const nlohmann::json& tree);

/// Applies "dotted.key=value". The value is read as JSON when it parses,
/// otherwise as a plain string.
void apply_override(nlohmann::json& tree, std::string_view assignment);

/// Defaults, then the config file (relative paths resolved against its
/// directory), then each override in order.
nlohmann::json resolve_config(const std::optional<std::filesystem::path>& file,
                              std::span<const std::string> overrides);

/// Builds the per-episode backend factory for a validated config.
BackendFactory make_backend_factory(const RunConfig& config);

struct RunOutcome {
    std::filesystem::path report_dir;
    Report report;
};

/// Loads data, runs the configured grid and writes report.json plus CSVs to a
/// fresh timestamped directory under output_dir. Nothing is written if any
/// step before the report fails.
RunOutcome execute_run(const RunConfig& config, const nlohmann::json& effective_tree);

/// Re-renders CSVs for a report file into `out_dir` (default: alongside it).
std::vector<std::filesystem::path> render_report_csvs(
    const std::filesystem::path& report_file, const std::optional<std::filesystem::path>& out_dir);

struct IndexSummary {
    std::size_t documents = 0;
    double avgdl = 0.0;
    std::size_t vocabulary = 0;
};

/// Indexes a corpus directory and writes the serialized index to `output`.
IndexSummary index_corpus(const std::filesystem::path& corpus_dir,
                          const std::filesystem::path& output, const Bm25Params& params = {});

/// Command-line entry point. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace agentorch
