#include "agentorch/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "agentorch/dataset.hpp"
#include "agentorch/errors.hpp"

namespace agentorch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kVersion = "0.1.0";

// Reads one JSON object of the config tree, tracking which keys were used so
// leftovers can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(label(), "expected an object");
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        auto it = node_.find(key);
        if (it == node_.end()) throw ConfigError(field(key), "required");
        return *it;
    }

    bool is_null(const std::string& key) {
        used_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() || it->is_null();
    }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        return v.get<double>();
    }

    long integer(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        return v.get<long>();
    }

    bool boolean(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        return v.get<std::string>();
    }

    Section child(const std::string& key) { return Section(raw(key), field(key)); }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!used_.contains(key)) throw ConfigError(field(key), "unknown key");
        }
    }

private:
    std::string label() const { return path_.empty() ? "config" : path_; }

    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

json per_action_json(const PerAction<double>& values) {
    json j = json::object();
    for (ActionKind k : kAllActionKinds) j[std::string(to_string(k))] = values[k];
    return j;
}

PerAction<double> per_action_from(Section s) {
    PerAction<double> out;
    for (ActionKind k : kAllActionKinds) out[k] = s.number(std::string(to_string(k)));
    s.finish();
    return out;
}

std::vector<int> int_list(Section& s, const std::string& key) {
    const json& v = s.raw(key);
    if (!v.is_array()) throw ConfigError(s.field(key), "expected a list of integers");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw ConfigError(s.field(key), "expected a list of integers");
        out.push_back(e.get<int>());
    }
    return out;
}

std::vector<double> number_list(Section& s, const std::string& key) {
    const json& v = s.raw(key);
    if (!v.is_array()) throw ConfigError(s.field(key), "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(s.field(key), "expected a list of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

template <typename Fn>
void check(const std::string& field, Fn&& validate) {
    try {
        validate();
    } catch (const InvalidInputError& e) {
        throw ConfigError(field, e.what());
    }
}

StrategyConfig parse_strategy_section(Section s) {
    StrategyConfig c;
    const std::string mode = s.string("cost_mode");
    auto cost_mode = parse_cost_mode(mode);
    if (!cost_mode) throw ConfigError(s.field("cost_mode"), "expected step, token or latency");
    c.cost_mode = *cost_mode;

    {
        Section r = s.child("redundancy");
        const std::string kind = r.string("mode");
        if (kind == "exact") c.redundancy_mode.kind = RedundancyKind::exact;
        else if (kind == "semantic") c.redundancy_mode.kind = RedundancyKind::semantic;
        else throw ConfigError(r.field("mode"), "expected exact or semantic");
        c.redundancy_mode.threshold = r.number("threshold");
        r.finish();
        check(r.field("threshold"), [&] { c.redundancy_mode.validate(); });
    }
    {
        Section w = s.child("weights");
        c.weights.cost = w.number("cost");
        c.weights.uncertainty = w.number("uncertainty");
        c.weights.redundancy = w.number("redundancy");
        w.finish();
        check(s.field("weights"), [&] { c.weights.validate(); });
    }
    {
        Section m = s.child("mask");
        c.mask.use_gain = m.boolean("use_gain");
        c.mask.use_uncertainty = m.boolean("use_uncertainty");
        c.mask.use_redundancy = m.boolean("use_redundancy");
        c.mask.allow_stop = m.boolean("allow_stop");
        m.finish();
    }
    {
        Section b = s.child("budget");
        c.budget.max_steps = static_cast<int>(b.integer("max_steps"));
        if (!b.is_null("max_total_tokens")) c.budget.max_total_tokens = b.integer("max_total_tokens");
        c.budget.max_consecutive_parse_failures =
            static_cast<int>(b.integer("max_consecutive_parse_failures"));
        b.finish();
        check(s.field("budget"), [&] { c.budget.validate(); });
    }
    {
        Section m = s.child("cost_model");
        c.cost_model.base_step_cost = per_action_from(m.child("base_step_cost"));
        c.cost_model.token_prior = per_action_from(m.child("token_prior"));
        c.cost_model.latency_prior_seconds = per_action_from(m.child("latency_prior_seconds"));
        c.cost_model.token_normalizer = m.integer("token_normalizer");
        c.cost_model.latency_normalizer_seconds = m.number("latency_normalizer_seconds");
        c.cost_model.latency_ewma_alpha = m.number("latency_ewma_alpha");
        m.finish();
        check(s.field("cost_model"), [&] { c.cost_model.validate(); });
    }
    c.threshold_tau = s.number("threshold_tau");
    c.react_max_steps = static_cast<int>(s.integer("react_max_steps"));
    c.retrieval_k = static_cast<int>(s.integer("retrieval_k"));
    const long snippet = s.integer("snippet_chars");
    if (snippet < 1) throw ConfigError(s.field("snippet_chars"), "must be >= 1");
    c.snippet_chars = static_cast<std::size_t>(snippet);
    c.max_output_tokens = static_cast<int>(s.integer("max_output_tokens"));
    c.temperature = s.number("temperature");
    s.finish();
    check(s.field("strategy"), [&] { c.validate(); });
    return c;
}

json strategy_to_json(const StrategyConfig& c) {
    return {
        {"cost_mode", to_string(c.cost_mode)},
        {"redundancy",
         {{"mode", c.redundancy_mode.kind == RedundancyKind::exact ? "exact" : "semantic"},
          {"threshold", c.redundancy_mode.threshold}}},
        {"weights",
         {{"cost", c.weights.cost},
          {"uncertainty", c.weights.uncertainty},
          {"redundancy", c.weights.redundancy}}},
        {"mask",
         {{"use_gain", c.mask.use_gain},
          {"use_uncertainty", c.mask.use_uncertainty},
          {"use_redundancy", c.mask.use_redundancy},
          {"allow_stop", c.mask.allow_stop}}},
        {"budget",
         {{"max_steps", c.budget.max_steps},
          {"max_total_tokens",
           c.budget.max_total_tokens ? json(*c.budget.max_total_tokens) : json(nullptr)},
          {"max_consecutive_parse_failures", c.budget.max_consecutive_parse_failures}}},
        {"cost_model",
         {{"base_step_cost", per_action_json(c.cost_model.base_step_cost)},
          {"token_prior", per_action_json(c.cost_model.token_prior)},
          {"latency_prior_seconds", per_action_json(c.cost_model.latency_prior_seconds)},
          {"token_normalizer", c.cost_model.token_normalizer},
          {"latency_normalizer_seconds", c.cost_model.latency_normalizer_seconds},
          {"latency_ewma_alpha", c.cost_model.latency_ewma_alpha}}},
        {"threshold_tau", c.threshold_tau},
        {"react_max_steps", c.react_max_steps},
        {"retrieval_k", c.retrieval_k},
        {"snippet_chars", c.snippet_chars},
        {"max_output_tokens", c.max_output_tokens},
        {"temperature", c.temperature}};
}

// Path-valued keys, resolved against the config file's directory.
const std::vector<std::vector<std::string>> kPathKeys = {
    {"dataset", "path"}, {"corpus", "directory"}, {"backend", "script"}, {"output", "dir"}};

void resolve_paths(json& tree, const fs::path& base) {
    for (const auto& key : kPathKeys) {
        json* node = &tree;
        for (const auto& part : key) {
            if (!node->is_object() || !node->contains(part)) {
                node = nullptr;
                break;
            }
            node = &(*node)[part];
        }
        if (node == nullptr || !node->is_string()) continue;
        const fs::path p = node->get<std::string>();
        if (!p.empty() && p.is_relative()) *node = (base / p).lexically_normal().string();
    }
}

json redact(json tree) {
    if (tree.is_object()) {
        for (auto& [key, value] : tree.items()) {
            if (key == "api_key" || key == "authorization") value = "<redacted>";
            else value = redact(value);
        }
    }
    return tree;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y%m%d-%H%M%S");
    return out.str();
}

fs::path fresh_run_dir(const fs::path& root, std::string_view grid) {
    fs::create_directories(root);
    const std::string stem = std::string(grid) + "-" + timestamp();
    for (int n = 0;; ++n) {
        fs::path candidate = root / (n == 0 ? stem : stem + "-" + std::to_string(n));
        if (fs::create_directory(candidate)) return candidate;
    }
}

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

json config_to_json(const RunConfig& c) {
    return {
        {"dataset",
         {{"path", c.dataset.string()},
          {"sample_size", c.sample_size ? json(*c.sample_size) : json(nullptr)},
          {"seed", c.seed}}},
        {"corpus",
         {{"mode", c.corpus_mode == CorpusMode::dataset_contexts ? "dataset" : "directory"},
          {"directory", c.corpus_directory.string()}}},
        {"backend",
         {{"kind", c.backend == BackendKind::scripted ? "scripted" : "http"},
          {"script", c.script.string()},
          {"endpoint", c.http.endpoint},
          {"model", c.http.model},
          {"api_key_env", c.http.api_key_env},
          {"max_in_flight", c.http.max_in_flight},
          {"timeout_seconds", c.http.timeout_seconds},
          {"retry_backoff_ms", c.http.retry_backoff_ms}}},
        {"bm25", {{"k1", c.bm25.k1}, {"b", c.bm25.b}}},
        {"strategy", strategy_to_json(c.experiment.base)},
        {"experiment",
         {{"grid", to_string(c.experiment.grid)},
          {"depth_steps", c.experiment.depth_steps},
          {"bucket_edges", c.experiment.bucket_edges},
          {"jobs", c.experiment.jobs}}},
        {"output", {{"dir", c.output_dir.string()}}}};
}

RunConfig parse_run_config(const json& tree) {
    RunConfig c;
    Section root(tree, "");
    {
        Section d = root.child("dataset");
        c.dataset = d.string("path");
        if (c.dataset.empty()) throw ConfigError("dataset.path", "required");
        if (!d.is_null("sample_size")) {
            const long n = d.integer("sample_size");
            if (n < 1) throw ConfigError("dataset.sample_size", "must be >= 1");
            c.sample_size = static_cast<std::size_t>(n);
        }
        const long seed = d.integer("seed");
        if (seed < 0) throw ConfigError("dataset.seed", "must be non-negative");
        c.seed = static_cast<std::uint64_t>(seed);
        d.finish();
    }
    {
        Section s = root.child("corpus");
        const std::string mode = s.string("mode");
        if (mode == "dataset") c.corpus_mode = CorpusMode::dataset_contexts;
        else if (mode == "directory") c.corpus_mode = CorpusMode::directory;
        else throw ConfigError("corpus.mode", "expected dataset or directory");
        c.corpus_directory = s.string("directory");
        if (c.corpus_mode == CorpusMode::directory && c.corpus_directory.empty()) {
            throw ConfigError("corpus.directory", "required when corpus.mode is directory");
        }
        s.finish();
    }
    {
        Section b = root.child("backend");
        const std::string kind = b.string("kind");
        if (kind == "scripted") c.backend = BackendKind::scripted;
        else if (kind == "http") c.backend = BackendKind::http;
        else throw ConfigError("backend.kind", "expected scripted or http");
        c.script = b.string("script");
        c.http.endpoint = b.string("endpoint");
        c.http.model = b.string("model");
        c.http.api_key_env = b.string("api_key_env");
        c.http.max_in_flight = static_cast<int>(b.integer("max_in_flight"));
        c.http.timeout_seconds = b.number("timeout_seconds");
        c.http.retry_backoff_ms = static_cast<int>(b.integer("retry_backoff_ms"));
        b.finish();
        if (c.backend == BackendKind::scripted && c.script.empty()) {
            throw ConfigError("backend.script", "required for the scripted backend");
        }
        if (c.backend == BackendKind::http && c.http.endpoint.empty()) {
            throw ConfigError("backend.endpoint", "required for the http backend");
        }
        if (c.http.max_in_flight < 1) throw ConfigError("backend.max_in_flight", "must be >= 1");
        if (!(c.http.timeout_seconds > 0.0)) throw ConfigError("backend.timeout_seconds", "must be > 0");
        if (c.http.retry_backoff_ms < 0) throw ConfigError("backend.retry_backoff_ms", "must be >= 0");
    }
    {
        Section b = root.child("bm25");
        c.bm25.k1 = b.number("k1");
        c.bm25.b = b.number("b");
        b.finish();
        check("bm25", [&] { c.bm25.validate(); });
    }
    c.experiment.base = parse_strategy_section(root.child("strategy"));
    {
        Section e = root.child("experiment");
        const std::string grid = e.string("grid");
        auto g = parse_grid(grid);
        if (!g) {
            throw ConfigError("experiment.grid",
                              "expected main, cost, fairness, redundancy, signals, ablation or depth");
        }
        c.experiment.grid = *g;
        c.experiment.depth_steps = int_list(e, "depth_steps");
        c.experiment.bucket_edges = number_list(e, "bucket_edges");
        c.experiment.jobs = static_cast<int>(e.integer("jobs"));
        e.finish();
        if (c.experiment.jobs < 1) throw ConfigError("experiment.jobs", "must be >= 1");
        check("experiment.bucket_edges",
              [&] { (void)bucket_index(0.0, c.experiment.bucket_edges); });
        check("experiment.depth_steps", [&] { c.experiment.validate(); });
    }
    {
        Section o = root.child("output");
        c.output_dir = o.string("dir");
        if (c.output_dir.empty()) throw ConfigError("output.dir", "required");
        o.finish();
    }
    root.finish();
    return c;
}

void apply_override(json& tree, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError(std::string(assignment), "override must look like key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &tree;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw ConfigError(key, "malformed key path");
        if (!node->is_object()) throw ConfigError(key, "parent is not an object");
        if (dot == std::string::npos) {
            if (!node->contains(part)) throw ConfigError(key, "unknown key");
            (*node)[part] = std::move(value);
            return;
        }
        if (!node->contains(part)) throw ConfigError(key, "unknown key");
        node = &(*node)[part];
        start = dot + 1;
    }
}

json resolve_config(const std::optional<fs::path>& file, std::span<const std::string> overrides) {
    json tree = config_to_json(RunConfig{});
    // The default output dir is relative to the working directory.
    tree["output"]["dir"] = fs::absolute(tree["output"]["dir"].get<std::string>()).string();
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("config", "cannot open " + file->string());
        json loaded = json::parse(in, nullptr, false);
        if (loaded.is_discarded() || !loaded.is_object()) {
            throw ConfigError("config", file->string() + " is not a JSON object");
        }
        resolve_paths(loaded, fs::absolute(*file).parent_path());
        tree.merge_patch(loaded);
    }
    for (const auto& o : overrides) apply_override(tree, o);
    resolve_paths(tree, fs::current_path());
    return tree;
}

BackendFactory make_backend_factory(const RunConfig& config) {
    if (config.backend == BackendKind::scripted) {
        auto entries = std::make_shared<const std::vector<ScriptEntry>>(load_script(config.script));
        return [entries] { return std::make_shared<ScriptedBackend>(*entries); };
    }
    auto shared = std::make_shared<HttpBackend>(config.http);
    return [shared]() -> std::shared_ptr<Backend> { return shared; };
}

RunOutcome execute_run(const RunConfig& config, const json& effective_tree) {
    const auto examples = load_dataset(config.dataset, config.sample_size, config.seed);
    std::vector<Document> corpus = config.corpus_mode == CorpusMode::directory
                                       ? load_corpus_directory(config.corpus_directory)
                                       : corpus_from_examples(examples);
    const Bm25Index index = Bm25Index::build(std::move(corpus), config.bm25);
    BackendFactory factory = make_backend_factory(config);

    Report report = run_experiment(config.experiment, examples, index, factory);

    json ids = json::array();
    for (const auto& ex : examples) ids.push_back(ex.id);
    report.metadata = {
        {"tool", "agentorch " + std::string(kVersion)},
        {"grid", to_string(config.experiment.grid)},
        {"dataset", config.dataset.string()},
        {"seed", config.seed},
        {"sample_size", config.sample_size ? json(*config.sample_size) : json(nullptr)},
        {"example_count", examples.size()},
        {"example_ids", ids},
        {"corpus_mode", config.corpus_mode == CorpusMode::dataset_contexts ? "dataset" : "directory"},
        {"corpus_documents", index.doc_count()},
        {"corpus_avgdl", index.avgdl()},
        {"retrieval_k", config.experiment.base.retrieval_k},
        {"backend", config.backend == BackendKind::scripted ? "scripted" : "http"},
        {"signal_pairing",
         "per-episode mean continuation gain (max over retrieve/tool_call/verify) and mean "
         "uncertainty vs final F1; buckets over per-step continuation gain"},
        {"tool_calls", "steps whose action is retrieve, tool_call or verify"},
        {"failed_episodes", std::count_if(report.episodes.begin(), report.episodes.end(),
                                          [](const auto& e) { return !e.error.empty(); })}};
    report.config = redact(effective_tree);

    const fs::path dir = fresh_run_dir(config.output_dir, to_string(config.experiment.grid));
    write_file(dir / "report.json", to_json(report).dump(2) + "\n");
    for (const auto& csv : render_csvs(report)) write_file(dir / csv.name, csv.content);
    return {dir, std::move(report)};
}

std::vector<fs::path> render_report_csvs(const fs::path& report_file,
                                         const std::optional<fs::path>& out_dir) {
    std::ifstream in(report_file);
    if (!in) throw Error("cannot open report " + report_file.string());
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(report_file.string() + " is not valid JSON");
    Report report;
    try {
        report = report_summary_from_json(doc);
    } catch (const json::exception& e) {
        throw Error(report_file.string() + " is not a report: " + e.what());
    }
    const fs::path dir = out_dir.value_or(fs::absolute(report_file).parent_path());
    fs::create_directories(dir);
    std::vector<fs::path> written;
    for (const auto& csv : render_csvs(report)) {
        write_file(dir / csv.name, csv.content);
        written.push_back(dir / csv.name);
    }
    return written;
}

IndexSummary index_corpus(const fs::path& corpus_dir, const fs::path& output,
                          const Bm25Params& params) {
    const Bm25Index index = Bm25Index::build(load_corpus_directory(corpus_dir), params);
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    write_file(output, index.to_json().dump() + "\n");
    return {index.doc_count(), index.avgdl(), index.vocabulary_size()};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Utility-guided orchestration for tool-using LLM agents"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path;
    std::vector<std::string> sets;
    std::string grid;
    std::string out_dir;
    int jobs = 0;

    auto add_run_flags = [&](CLI::App* cmd, bool with_grid) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--set", sets, "Override a config key: dotted.key=value (repeatable)");
        if (with_grid) cmd->add_option("--grid", grid, "Experiment grid to run");
        cmd->add_option("--out", out_dir, "Output root directory");
        cmd->add_option("--jobs", jobs, "Episodes to run in parallel")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "Run an experiment grid");
    add_run_flags(run, true);
    auto* ablate = app.add_subcommand("ablate", "Run the policy ablation grid");
    add_run_flags(ablate, false);

    std::string corpus_dir;
    std::string index_out;
    auto* index = app.add_subcommand("index", "Build and serialize a BM25 index");
    index->add_option("corpus", corpus_dir, "Directory with one document per file")->required();
    index->add_option("--out", index_out, "Where to write the index JSON")->required();

    std::string report_path;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Re-render CSV tables from a report file");
    report->add_option("report", report_path, "report.json from an earlier run")->required();
    report->add_option("--out", report_out, "Directory for the CSV files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run || *ablate) {
            std::vector<std::string> overrides = sets;
            if (*ablate) overrides.push_back("experiment.grid=\"ablation\"");
            else if (!grid.empty()) overrides.push_back("experiment.grid=" + json(grid).dump());
            if (!out_dir.empty()) overrides.push_back("output.dir=" + json(out_dir).dump());
            if (jobs > 0) overrides.push_back("experiment.jobs=" + std::to_string(jobs));

            std::optional<fs::path> file;
            if (!config_path.empty()) file = config_path;
            const json tree = resolve_config(file, overrides);
            const RunConfig config = parse_run_config(tree);
            const RunOutcome outcome = execute_run(config, tree);

            out << "grid: " << to_string(config.experiment.grid) << '\n';
            for (const auto& row : outcome.report.rows) {
                out << "  " << std::left << std::setw(32) << row.method << " f1=" << std::fixed
                    << std::setprecision(4) << row.mean_f1 << " tokens=" << std::setprecision(1)
                    << row.mean_tokens << " tool_calls=" << std::setprecision(2)
                    << row.mean_tool_calls << '\n';
                out.unsetf(std::ios::floatfield);
            }
            out << "report: " << (outcome.report_dir / "report.json").string() << '\n';
            return 0;
        }
        if (*index) {
            const IndexSummary s = index_corpus(corpus_dir, index_out);
            out << "documents: " << s.documents << '\n'
                << "avgdl: " << s.avgdl << '\n'
                << "vocabulary: " << s.vocabulary << '\n';
            return 0;
        }
        if (*report) {
            std::optional<fs::path> dir;
            if (!report_out.empty()) dir = report_out;
            for (const auto& p : render_report_csvs(report_path, dir)) out << p.string() << '\n';
            return 0;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace agentorch
