#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentorch/dataset.hpp"
#include "agentorch/metrics.hpp"
#include "agentorch/orchestrators.hpp"

namespace agentorch {

struct MethodSummary {
    std::string method;
    std::size_t episodes = 0;
    double mean_f1 = 0.0;
    double mean_tokens = 0.0;
    double mean_wall_seconds = 0.0;
    std::optional<double> efficiency;  // absent when mean_tokens == 0
    double mean_tool_calls = 0.0;
    double mean_redundant_tool_calls = 0.0;
    std::optional<int> max_steps;  // set for depth-sweep rows
};

/// Arithmetic means over the episodes. Episodes without an F1 count as 0.
/// Throws AggregationError on empty input.
MethodSummary aggregate(std::span<const EpisodeResult> results, std::string method);

enum class Grid { main, cost, fairness, redundancy, signals, ablation, depth };

std::string_view to_string(Grid grid);
std::optional<Grid> parse_grid(std::string_view name);

struct MethodSpec {
    std::string name;
    StrategyConfig config;
    std::optional<int> max_steps;
};

/// Method rows for a grid, derived from `base`, in a fixed order with
/// stable display names.
std::vector<MethodSpec> grid_methods(Grid grid, const StrategyConfig& base,
                                     std::span<const int> depth_steps);

struct SignalAnalysis {
    std::optional<double> pearson_gain;
    std::optional<double> pearson_uncertainty;
    std::size_t episodes = 0;
    std::vector<BucketStat> buckets;
    std::vector<std::string> notes;
};

/// Per-episode mean continuation gain (max gain over retrieve, tool_call and
/// verify) and mean uncertainty paired with final F1; buckets use per-step
/// continuation gain against whether the chosen action continued the episode.
SignalAnalysis analyze_signals(std::span<const EpisodeResult> episodes,
                               std::span<const double> bucket_edges);

struct ExperimentOptions {
    Grid grid = Grid::main;
    StrategyConfig base;
    std::vector<int> depth_steps = {1, 2, 3, 4, 6, 8};
    std::vector<double> bucket_edges = kDefaultBucketEdges;
    int jobs = 1;

    void validate() const;
};

/// Builds a backend for one episode. Scripted factories hand out a fresh
/// cursor each call; HTTP factories may return a shared client.
using BackendFactory = std::function<std::shared_ptr<Backend>()>;

struct Report {
    nlohmann::json metadata = nlohmann::json::object();
    nlohmann::json config = nlohmann::json::object();
    std::vector<MethodSummary> rows;
    std::optional<SignalAnalysis> signals;
    std::vector<EpisodeResult> episodes;
};

/// Runs every method of the grid over the examples (in parallel up to
/// `jobs`). Options are validated before any episode runs.
Report run_experiment(const ExperimentOptions& options, std::span<const QaExample> examples,
                      const Bm25Index& index, const BackendFactory& make_backend);

// --- serialization ---------------------------------------------------------

nlohmann::json to_json(const TrajectoryStep& step);
nlohmann::json to_json(const EpisodeResult& episode);
nlohmann::json to_json(const MethodSummary& row);
nlohmann::json to_json(const SignalAnalysis& analysis);
nlohmann::json to_json(const Report& report);

MethodSummary method_summary_from_json(const nlohmann::json& j);
SignalAnalysis signal_analysis_from_json(const nlohmann::json& j);

/// Rows and signals only; episodes are left empty.
Report report_summary_from_json(const nlohmann::json& j);

/// Copy of a report document with every wall-clock field removed.
nlohmann::json strip_timing(const nlohmann::json& doc);

struct CsvFile {
    std::string name;
    std::string content;
};

/// table.csv and pareto.csv always; buckets.csv with signal analysis;
/// depth.csv when rows carry max_steps.
std::vector<CsvFile> render_csvs(const Report& report);

}  // namespace agentorch
