#include "agentorch/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "agentorch/errors.hpp"

namespace agentorch {

using nlohmann::json;

MethodSummary aggregate(std::span<const EpisodeResult> results, std::string method) {
    if (results.empty()) throw AggregationError("cannot aggregate zero episodes for " + method);
    MethodSummary s;
    s.method = std::move(method);
    s.episodes = results.size();
    double f1 = 0.0;
    double tokens = 0.0;
    double wall = 0.0;
    double tools = 0.0;
    double redundant = 0.0;
    for (const auto& r : results) {
        f1 += r.f1.value_or(0.0);
        tokens += static_cast<double>(r.total_tokens);
        wall += r.wall_seconds;
        tools += static_cast<double>(r.tool_calls);
        redundant += static_cast<double>(r.redundant_tool_calls);
    }
    const double n = static_cast<double>(results.size());
    s.mean_f1 = f1 / n;
    s.mean_tokens = tokens / n;
    s.mean_wall_seconds = wall / n;
    s.mean_tool_calls = tools / n;
    s.mean_redundant_tool_calls = redundant / n;
    if (s.mean_tokens > 0.0) s.efficiency = efficiency(s.mean_f1, s.mean_tokens);
    return s;
}

namespace {

constexpr std::array<std::string_view, 7> kGridNames = {
    "main", "cost", "fairness", "redundancy", "signals", "ablation", "depth"};

StrategyConfig with_strategy(StrategyConfig config, Strategy strategy) {
    config.strategy = strategy;
    return config;
}

StrategyConfig policy_with(const StrategyConfig& base, CostMode mode) {
    StrategyConfig c = with_strategy(base, Strategy::policy);
    c.cost_mode = mode;
    return c;
}

double continuation_gain(const SignalEstimate& s) {
    return std::max({s.per_action_gain[ActionKind::retrieve],
                     s.per_action_gain[ActionKind::tool_call],
                     s.per_action_gain[ActionKind::verify]});
}

}  // namespace

std::string_view to_string(Grid grid) { return kGridNames[static_cast<std::size_t>(grid)]; }

std::optional<Grid> parse_grid(std::string_view name) {
    for (std::size_t i = 0; i < kGridNames.size(); ++i) {
        if (kGridNames[i] == name) return static_cast<Grid>(i);
    }
    return std::nullopt;
}

std::vector<MethodSpec> grid_methods(Grid grid, const StrategyConfig& base,
                                     std::span<const int> depth_steps) {
    const StrategyConfig step_policy = policy_with(base, CostMode::step);
    std::vector<MethodSpec> m;
    auto workflows = [&] {
        m.push_back({"workflow (minimal)", with_strategy(base, Strategy::workflow_minimal), {}});
        m.push_back({"workflow-search-twice", with_strategy(base, Strategy::workflow_search_twice), {}});
        m.push_back({"workflow-search-verify", with_strategy(base, Strategy::workflow_search_verify), {}});
    };
    switch (grid) {
        case Grid::main:
            m.push_back({"direct", with_strategy(base, Strategy::direct), {}});
            workflows();
            m.push_back({"threshold", with_strategy(base, Strategy::threshold), {}});
            m.push_back({"react", with_strategy(base, Strategy::react), {}});
            m.push_back({"policy (step-cost)", step_policy, {}});
            break;
        case Grid::cost:
            m.push_back({"react", with_strategy(base, Strategy::react), {}});
            m.push_back({"threshold", with_strategy(base, Strategy::threshold), {}});
            m.push_back({"policy (step-cost)", step_policy, {}});
            m.push_back({"policy (token-cost)", policy_with(base, CostMode::token), {}});
            m.push_back({"policy (latency-cost)", policy_with(base, CostMode::latency), {}});
            break;
        case Grid::fairness:
            workflows();
            break;
        case Grid::redundancy: {
            StrategyConfig exact = step_policy;
            exact.redundancy_mode.kind = RedundancyKind::exact;
            StrategyConfig semantic = step_policy;
            semantic.redundancy_mode.kind = RedundancyKind::semantic;
            m.push_back({"policy (step_cost)", exact, {}});
            m.push_back({"policy (semantic redundancy)", semantic, {}});
            break;
        }
        case Grid::signals:
            m.push_back({"policy (step-cost)", step_policy, {}});
            break;
        case Grid::ablation: {
            auto masked = [&](auto edit) {
                StrategyConfig c = step_policy;
                c.mask = AblationMask::full();
                edit(c.mask);
                return c;
            };
            m.push_back({"full policy", masked([](AblationMask&) {}), {}});
            m.push_back({"-expected-gain", masked([](AblationMask& k) { k.use_gain = false; }), {}});
            m.push_back({"-uncertainty", masked([](AblationMask& k) { k.use_uncertainty = false; }), {}});
            m.push_back({"-redundancy", masked([](AblationMask& k) { k.use_redundancy = false; }), {}});
            m.push_back({"-stop", masked([](AblationMask& k) { k.allow_stop = false; }), {}});
            break;
        }
        case Grid::depth:
            for (int steps : depth_steps) {
                StrategyConfig c = step_policy;
                c.budget.max_steps = steps;
                m.push_back({"policy (max_steps=" + std::to_string(steps) + ")", c, steps});
            }
            break;
    }
    return m;
}

SignalAnalysis analyze_signals(std::span<const EpisodeResult> episodes,
                               std::span<const double> bucket_edges) {
    SignalAnalysis out;
    std::vector<ContinueRecord> records;
    std::vector<double> gains;
    std::vector<double> uncertainties;
    std::vector<double> f1s;
    for (const auto& ep : episodes) {
        double gain_sum = 0.0;
        double unc_sum = 0.0;
        std::size_t n = 0;
        for (const auto& step : ep.steps) {
            if (!step.signals || !step.signals->parse_ok) continue;
            const double g = continuation_gain(*step.signals);
            records.push_back({g, !is_terminal_action(step.action.kind)});
            gain_sum += g;
            unc_sum += step.signals->uncertainty;
            ++n;
        }
        if (n == 0) continue;
        gains.push_back(gain_sum / static_cast<double>(n));
        uncertainties.push_back(unc_sum / static_cast<double>(n));
        f1s.push_back(ep.f1.value_or(0.0));
    }
    out.episodes = f1s.size();
    out.buckets = bucket_continue_rate(records, bucket_edges);
    auto correlate = [&](const std::vector<double>& xs, const char* name) -> std::optional<double> {
        try {
            return pearson(xs, f1s);
        } catch (const InvalidInputError& e) {
            out.notes.push_back(std::string(name) + " correlation undefined: " + e.what());
            return std::nullopt;
        }
    };
    out.pearson_gain = correlate(gains, "expected_gain");
    out.pearson_uncertainty = correlate(uncertainties, "uncertainty");
    return out;
}

void ExperimentOptions::validate() const {
    base.validate();
    if (jobs < 1) throw InvalidInputError("jobs must be >= 1");
    if (grid == Grid::depth) {
        if (depth_steps.empty()) throw InvalidInputError("depth grid needs depth_steps");
        for (int s : depth_steps) {
            if (s < 1) throw InvalidInputError("depth_steps entries must be >= 1");
        }
    }
    (void)bucket_index(0.0, bucket_edges);  // throws on malformed edges
}

Report run_experiment(const ExperimentOptions& options, std::span<const QaExample> examples,
                      const Bm25Index& index, const BackendFactory& make_backend) {
    options.validate();
    if (examples.empty()) throw InvalidInputError("no examples to run");
    const auto methods = grid_methods(options.grid, options.base, options.depth_steps);
    for (const auto& m : methods) m.config.validate();

    const std::size_t per_method = examples.size();
    const std::size_t total = methods.size() * per_method;
    std::vector<EpisodeResult> results(total);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t task = next++; task < total; task = next++) {
            try {
                const auto& method = methods[task / per_method];
                const auto& ex = examples[task % per_method];
                auto backend = make_backend();
                Question q{ex.id, ex.question, ex.gold_answer};
                EpisodeResult r = run_episode(q, EpisodeDeps{*backend, index}, method.config);
                r.method = method.name;
                results[task] = std::move(r);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    {
        const auto threads = static_cast<std::size_t>(options.jobs);
        std::vector<std::jthread> pool;
        for (std::size_t i = 1; i < std::min(threads, total); ++i) pool.emplace_back(worker);
        worker();
    }
    if (first_error) std::rethrow_exception(first_error);

    Report report;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        std::span<const EpisodeResult> slice(results.data() + m * per_method, per_method);
        MethodSummary row = aggregate(slice, methods[m].name);
        row.max_steps = methods[m].max_steps;
        report.rows.push_back(std::move(row));
    }
    if (options.grid == Grid::signals) {
        report.signals = analyze_signals(results, options.bucket_edges);
    }
    report.episodes = std::move(results);
    return report;
}

// --- serialization ---------------------------------------------------------

namespace {

json breakdown_json(const UtilityBreakdown& u) {
    return {{"action", to_string(u.action_kind)}, {"gain", u.gain},
            {"cost", u.cost},                     {"uncertainty", u.uncertainty},
            {"redundancy", u.redundancy},         {"total", u.total}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string num(double v) {
    std::ostringstream out;
    out << std::setprecision(10) << v;
    return out.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

json to_json(const TrajectoryStep& step) {
    json j;
    j["index"] = step.index;
    j["action"] = to_string(step.action.kind);
    j["argument"] = step.action.argument ? json(*step.action.argument) : json(nullptr);
    j["observation"] = {{"source", to_string(step.observation.source)},
                        {"content", step.observation.content},
                        {"token_count", step.observation.token_count},
                        {"latency_seconds", step.observation.latency_seconds}};
    j["tokens"] = step.tokens_this_step;
    j["latency_this_step_seconds"] = step.latency_this_step_seconds;
    if (step.signals) {
        json gains = json::object();
        for (ActionKind k : kAllActionKinds) gains[std::string(to_string(k))] = step.signals->per_action_gain[k];
        j["signals"] = {{"expected_gain", gains},
                        {"uncertainty", step.signals->uncertainty},
                        {"parse_ok", step.signals->parse_ok}};
    }
    if (step.utility) j["utility"] = breakdown_json(*step.utility);
    if (!step.candidates.empty()) {
        auto& arr = j["candidates"] = json::array();
        for (const auto& c : step.candidates) arr.push_back(breakdown_json(c));
    }
    if (!step.trace.empty()) j["trace"] = step.trace;
    return j;
}

json to_json(const EpisodeResult& ep) {
    json j;
    j["question_id"] = ep.question_id;
    j["method"] = ep.method;
    j["final_answer"] = ep.final_answer;
    j["termination_reason"] = to_string(ep.termination_reason);
    j["total_tokens"] = ep.total_tokens;
    j["wall_seconds"] = ep.wall_seconds;
    j["tool_calls"] = ep.tool_calls;
    j["redundant_tool_calls"] = ep.redundant_tool_calls;
    j["f1"] = optional_number(ep.f1);
    if (!ep.error.empty()) j["error"] = ep.error;
    auto& steps = j["steps"] = json::array();
    for (const auto& s : ep.steps) steps.push_back(to_json(s));
    return j;
}

json to_json(const MethodSummary& row) {
    json j = {{"method", row.method},
              {"episodes", row.episodes},
              {"mean_f1", row.mean_f1},
              {"mean_tokens", row.mean_tokens},
              {"mean_wall_seconds", row.mean_wall_seconds},
              {"efficiency", optional_number(row.efficiency)},
              {"mean_tool_calls", row.mean_tool_calls},
              {"mean_redundant_tool_calls", row.mean_redundant_tool_calls}};
    if (row.max_steps) j["max_steps"] = *row.max_steps;
    return j;
}

json to_json(const SignalAnalysis& a) {
    json buckets = json::array();
    for (const auto& b : a.buckets) {
        buckets.push_back({{"lower", b.lower},
                           {"upper", b.upper},
                           {"count", b.count},
                           {"continued", b.continued},
                           {"continue_rate", optional_number(b.continue_rate)}});
    }
    return {{"pearson_expected_gain_f1", optional_number(a.pearson_gain)},
            {"pearson_uncertainty_f1", optional_number(a.pearson_uncertainty)},
            {"episodes", a.episodes},
            {"buckets", buckets},
            {"notes", a.notes}};
}

json to_json(const Report& report) {
    json j;
    j["metadata"] = report.metadata;
    j["config"] = report.config;
    auto& rows = j["rows"] = json::array();
    for (const auto& r : report.rows) rows.push_back(to_json(r));
    if (report.signals) j["signals"] = to_json(*report.signals);
    auto& eps = j["episodes"] = json::array();
    for (const auto& e : report.episodes) eps.push_back(to_json(e));
    return j;
}

MethodSummary method_summary_from_json(const json& j) {
    MethodSummary s;
    s.method = j.at("method").get<std::string>();
    s.episodes = j.at("episodes").get<std::size_t>();
    s.mean_f1 = j.at("mean_f1").get<double>();
    s.mean_tokens = j.at("mean_tokens").get<double>();
    s.mean_wall_seconds = j.value("mean_wall_seconds", 0.0);
    s.efficiency = number_or_null(j, "efficiency");
    s.mean_tool_calls = j.at("mean_tool_calls").get<double>();
    s.mean_redundant_tool_calls = j.at("mean_redundant_tool_calls").get<double>();
    if (j.contains("max_steps")) s.max_steps = j["max_steps"].get<int>();
    return s;
}

SignalAnalysis signal_analysis_from_json(const json& j) {
    SignalAnalysis a;
    a.pearson_gain = number_or_null(j, "pearson_expected_gain_f1");
    a.pearson_uncertainty = number_or_null(j, "pearson_uncertainty_f1");
    a.episodes = j.value("episodes", std::size_t{0});
    for (const auto& b : j.at("buckets")) {
        BucketStat s;
        s.lower = b.at("lower").get<double>();
        s.upper = b.at("upper").get<double>();
        s.count = b.at("count").get<std::size_t>();
        s.continued = b.value("continued", std::size_t{0});
        s.continue_rate = number_or_null(b, "continue_rate");
        a.buckets.push_back(s);
    }
    if (j.contains("notes")) a.notes = j["notes"].get<std::vector<std::string>>();
    return a;
}

Report report_summary_from_json(const json& j) {
    Report r;
    r.metadata = j.value("metadata", json::object());
    r.config = j.value("config", json::object());
    for (const auto& row : j.at("rows")) r.rows.push_back(method_summary_from_json(row));
    if (j.contains("signals") && !j["signals"].is_null()) {
        r.signals = signal_analysis_from_json(j["signals"]);
    }
    return r;
}

json strip_timing(const json& doc) {
    static const std::array<std::string_view, 4> kTimingKeys = {
        "wall_seconds", "mean_wall_seconds", "latency_seconds", "latency_this_step_seconds"};
    if (doc.is_object()) {
        json out = json::object();
        for (const auto& [key, value] : doc.items()) {
            if (std::find(kTimingKeys.begin(), kTimingKeys.end(), key) != kTimingKeys.end()) continue;
            out[key] = strip_timing(value);
        }
        return out;
    }
    if (doc.is_array()) {
        json out = json::array();
        for (const auto& v : doc) out.push_back(strip_timing(v));
        return out;
    }
    return doc;
}

std::vector<CsvFile> render_csvs(const Report& report) {
    std::vector<CsvFile> files;

    std::ostringstream table;
    table << "method,f1,tokens,wall_time,efficiency,tool_calls,redundant_tool_calls,episodes\n";
    std::ostringstream pareto;
    pareto << "method,mean_f1,mean_tokens,mean_wall\n";
    std::ostringstream depth;
    depth << "max_steps,f1,tokens,wall\n";
    bool has_depth = false;
    for (const auto& r : report.rows) {
        table << csv_field(r.method) << ',' << num(r.mean_f1) << ',' << num(r.mean_tokens) << ','
              << num(r.mean_wall_seconds) << ',' << num(r.efficiency) << ','
              << num(r.mean_tool_calls) << ',' << num(r.mean_redundant_tool_calls) << ','
              << r.episodes << '\n';
        pareto << csv_field(r.method) << ',' << num(r.mean_f1) << ',' << num(r.mean_tokens) << ','
               << num(r.mean_wall_seconds) << '\n';
        if (r.max_steps) {
            has_depth = true;
            depth << *r.max_steps << ',' << num(r.mean_f1) << ',' << num(r.mean_tokens) << ','
                  << num(r.mean_wall_seconds) << '\n';
        }
    }
    files.push_back({"table.csv", table.str()});
    files.push_back({"pareto.csv", pareto.str()});
    if (has_depth) files.push_back({"depth.csv", depth.str()});

    if (report.signals) {
        std::ostringstream buckets;
        buckets << "bucket,lower,upper,count,continue_rate\n";
        for (std::size_t i = 0; i < report.signals->buckets.size(); ++i) {
            const auto& b = report.signals->buckets[i];
            buckets << i << ',' << num(b.lower) << ',' << num(b.upper) << ',' << b.count << ','
                    << num(b.continue_rate) << '\n';
        }
        files.push_back({"buckets.csv", buckets.str()});
    }
    return files;
}

}  // namespace agentorch
