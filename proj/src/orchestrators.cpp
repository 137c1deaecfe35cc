#include "agentorch/orchestrators.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "agentorch/metrics.hpp"

namespace agentorch {

namespace {

constexpr std::array<std::string_view, 7> kStrategyNames = {
    "policy",   "direct", "workflow_minimal", "workflow_search_twice", "workflow_search_verify",
    "threshold", "react"};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// --- prompts ---------------------------------------------------------------

constexpr std::string_view kControlSystem =
    "You control a question-answering agent that can search a local document collection.\n"
    "Estimate how much each possible next action would improve the final answer and reply\n"
    "with one JSON object and nothing else:\n"
    "{\"expected_gain\": {\"respond\": g, \"retrieve\": g, \"tool_call\": g, \"verify\": g, "
    "\"stop\": g},\n"
    " \"uncertainty\": u,\n"
    " \"arguments\": {\"retrieve\": \"search query\", \"tool_call\": \"alternative search "
    "query\", \"verify\": \"claim to check\"},\n"
    " \"draft_answer\": \"short answer\"}\n"
    "All numbers lie in [0,1]. uncertainty is how unsure you are that the evidence so far\n"
    "is enough to answer.";

constexpr std::string_view kAnswerSystem =
    "Answer the question. Reply with the answer only, as a short phrase.";

constexpr std::string_view kVerifySystem =
    "Check the draft answer against the evidence and correct it if needed. Reply with one\n"
    "JSON object: {\"draft_answer\": \"short answer\", \"supported\": true|false}.";

constexpr std::string_view kReformulateSystem =
    "The first search did not settle the question. Write one different search query that\n"
    "would find the missing evidence. Reply with the query only.";

constexpr std::string_view kReactSystem =
    "Solve the question by interleaving Thought, Action and Observation steps.\n"
    "Each reply must contain one Thought line followed by one Action line.\n"
    "Action is either Search[query], which searches the document collection, or\n"
    "Finish[answer], which returns a short final answer.";

std::string render_evidence(const AgentState& state) {
    if (state.working_context.empty()) return "(none)\n";
    std::ostringstream out;
    for (std::size_t i = 0; i < state.working_context.size(); ++i) {
        out << '[' << i + 1 << "] (" << state.working_context[i].source_tag << ") "
            << state.working_context[i].text << '\n';
    }
    return out.str();
}

std::string render_history(const AgentState& state) {
    if (state.history.empty()) return "(none)\n";
    std::ostringstream out;
    for (const auto& step : state.history) {
        out << step.index << ". " << to_string(step.action.kind);
        if (step.action.argument) out << "(\"" << *step.action.argument << "\")";
        out << '\n';
    }
    return out.str();
}

std::string render_hits(const std::vector<RetrievalHit>& hits) {
    std::ostringstream out;
    for (const auto& h : hits) out << '[' << h.title << "] " << h.snippet << '\n';
    return out.str();
}

// Reads {"draft_answer": ...} when present, else the first line of the reply.
std::string parse_revised_draft(std::string_view text) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        const auto obj = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
        if (obj.is_object() && obj.contains("draft_answer") && obj["draft_answer"].is_string()) {
            return trim(obj["draft_answer"].get<std::string>());
        }
    }
    return clean_answer(text);
}

// --- episode runner --------------------------------------------------------

/// Shared bookkeeping for every strategy: usage accounting, tool execution,
/// step commits and result assembly.
class EpisodeRunner {
public:
    EpisodeRunner(const Question& question, EpisodeDeps deps, const StrategyConfig& config,
                  Budget budget)
        : question_(question),
          deps_(deps),
          config_(config),
          start_(Clock::now()),
          state_(init_state(question.text, budget, config.snippet_chars)) {}

    AgentState& state() { return state_; }
    const AgentState& state() const { return state_; }
    const std::string& draft() const { return draft_; }
    void set_draft(std::string draft) { draft_ = std::move(draft); }

    BackendResponse call(std::string_view purpose, std::string_view system, std::string user) {
        BackendRequest request;
        request.messages = {{Role::system, std::string(system)}, {Role::user, std::move(user)}};
        request.max_output_tokens = config_.max_output_tokens;
        request.temperature = config_.temperature;
        request.purpose = std::string(purpose);
        BackendResponse response = deps_.backend.complete(request);
        pending_tokens_ += response.total_tokens();
        pending_latency_ += response.latency_seconds;
        return response;
    }

    Observation search(std::string_view query, ObservationSource source) {
        const auto start = Clock::now();
        const auto hits =
            deps_.index.retrieve_top_k(query, static_cast<std::size_t>(config_.retrieval_k));
        Observation obs;
        obs.source = source;
        obs.content = render_hits(hits);
        obs.token_count = estimate_tokens(obs.content);
        obs.latency_seconds = seconds_since(start);
        pending_latency_ += obs.latency_seconds;
        return obs;
    }

    /// Runs `action` against the tools/backend and returns its observation.
    Observation execute(const Action& action) {
        switch (action.kind) {
            case ActionKind::retrieve:
                return search(*action.argument, ObservationSource::retrieval);
            case ActionKind::tool_call:
                return search(*action.argument, ObservationSource::tool);
            case ActionKind::verify: {
                const std::string claim = action.argument.value_or(draft_);
                Observation obs = search(trim(state_.query + " " + claim),
                                         ObservationSource::verification);
                std::ostringstream user;
                user << "Question: " << state_.query << "\n\nEvidence:\n" << render_evidence(state_)
                     << (obs.content.empty() ? "" : obs.content) << "\nDraft answer: "
                     << (draft_.empty() ? "(none)" : draft_) << '\n';
                const auto reply = call(purpose::verify, kVerifySystem, user.str());
                if (auto revised = parse_revised_draft(reply.text); !revised.empty()) {
                    draft_ = std::move(revised);
                }
                return obs;
            }
            case ActionKind::respond: {
                std::ostringstream user;
                user << "Question: " << state_.query << "\n\nEvidence:\n" << render_evidence(state_);
                if (!draft_.empty()) user << "\nDraft answer: " << draft_ << '\n';
                answer_ = clean_answer(call(purpose::answer, kAnswerSystem, user.str()).text);
                return Observation::none();
            }
            case ActionKind::stop:
                return Observation::none();
        }
        return Observation::none();
    }

    void set_answer(std::string answer) { answer_ = std::move(answer); }

    TrajectoryStep& commit(Action action, Observation observation) {
        TrajectoryStep step;
        step.index = state_.step_count;
        step.action = std::move(action);
        step.observation = std::move(observation);
        step.tokens_this_step = pending_tokens_;
        step.latency_this_step_seconds = pending_latency_;
        pending_tokens_ = 0;
        pending_latency_ = 0.0;
        apply_step(state_, std::move(step));
        return state_.history.back();
    }

    EpisodeResult finish(TerminationReason reason) {
        state_.status = AgentStatus::terminated;
        EpisodeResult result;
        result.question_id = question_.id;
        result.method = std::string(to_string(config_.strategy));
        result.final_answer = answer_.value_or(draft_);
        result.termination_reason = reason;
        // Usage from calls that never became a step (e.g. a failed retry) still counts.
        result.total_tokens = state_.cumulative_tokens + pending_tokens_;
        result.steps = state_.history;
        result.tool_calls = count_tool_calls(result.steps);
        result.redundant_tool_calls = count_redundant_calls(result.steps, config_.redundancy_mode);
        if (question_.gold) result.f1 = f1_score(result.final_answer, *question_.gold).f1;
        result.wall_seconds = seconds_since(start_);
        return result;
    }

    EpisodeResult fail(const BackendError& error) {
        EpisodeResult result = finish(TerminationReason::failure_fallback);
        result.error = error.what();
        return result;
    }

private:
    const Question& question_;
    EpisodeDeps deps_;
    const StrategyConfig& config_;
    Clock::time_point start_;
    AgentState state_;
    std::string draft_;
    std::optional<std::string> answer_;
    long pending_tokens_ = 0;
    double pending_latency_ = 0.0;
};

std::string control_prompt(const AgentState& state, std::string_view draft) {
    std::ostringstream user;
    user << "Question: " << state.query << "\n\nEvidence:\n" << render_evidence(state)
         << "\nActions so far:\n" << render_history(state) << "\nDraft answer: "
         << (draft.empty() ? "(none)" : draft) << "\nStep " << state.step_count + 1 << " of "
         << state.budget.max_steps << '\n';
    return user.str();
}

Action candidate_action(ActionKind kind, const ControlOutput& control, const AgentState& state,
                        const std::string& draft) {
    const auto& args = control.arguments;
    switch (kind) {
        case ActionKind::retrieve:
            return make_action(kind, args[ActionKind::retrieve].value_or(state.query));
        case ActionKind::tool_call:
            return make_action(
                kind, args[ActionKind::tool_call].value_or(
                          args[ActionKind::retrieve].value_or(state.query)));
        case ActionKind::verify:
            return make_action(kind, args[ActionKind::verify].value_or(
                                         draft.empty() ? state.query : draft));
        case ActionKind::respond:
        case ActionKind::stop:
            return make_action(kind);
    }
    return make_action(ActionKind::stop);
}

}  // namespace

std::string_view to_string(Strategy strategy) {
    return kStrategyNames[static_cast<std::size_t>(strategy)];
}

std::optional<Strategy> parse_strategy(std::string_view name) {
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i) {
        if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
    }
    return std::nullopt;
}

void StrategyConfig::validate() const {
    budget.validate();
    weights.validate();
    cost_model.validate();
    redundancy_mode.validate();
    if (!(threshold_tau >= 0.0 && threshold_tau <= 1.0)) {
        throw InvalidInputError("threshold_tau must lie in [0,1]");
    }
    if (react_max_steps < 1) throw InvalidInputError("react_max_steps must be >= 1");
    if (retrieval_k < 1) throw InvalidInputError("retrieval_k must be >= 1");
    if (snippet_chars < 1) throw InvalidInputError("snippet_chars must be >= 1");
    if (max_output_tokens < 1) throw InvalidInputError("max_output_tokens must be >= 1");
}

std::string clean_answer(std::string_view text) {
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        std::string t = trim(line);
        if (t.empty()) continue;
        for (std::string_view label : {"Final answer:", "Final Answer:", "Answer:", "answer:"}) {
            if (t.starts_with(label)) {
                t = trim(std::string_view(t).substr(label.size()));
                break;
            }
        }
        return t;
    }
    return {};
}

std::optional<ReactAction> parse_react_action(std::string_view text) {
    static const std::regex action_re(R"(Action\s*\d*\s*:\s*(Search|Finish)\s*\[([\s\S]*?)\]\s*$)",
                                      std::regex::icase);
    static const std::regex thought_re(R"(Thought\s*\d*\s*:\s*(.*))", std::regex::icase);

    std::istringstream in{std::string(text)};
    std::string thought;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (thought.empty() && std::regex_search(line, m, thought_re)) thought = trim(m[1].str());
        if (std::regex_search(line, m, action_re)) {
            ReactAction action;
            const std::string verb = m[1].str();
            action.kind = (verb[0] == 'S' || verb[0] == 's') ? ReactAction::Kind::search
                                                             : ReactAction::Kind::finish;
            action.argument = trim(m[2].str());
            action.thought = thought;
            if (action.kind == ReactAction::Kind::search && action.argument.empty()) {
                return std::nullopt;
            }
            return action;
        }
    }
    return std::nullopt;
}

EpisodeResult run_episode(const Question& question, EpisodeDeps deps,
                          const StrategyConfig& config) {
    switch (config.strategy) {
        case Strategy::policy: return run_policy_episode(question, deps, config);
        case Strategy::direct: return run_direct(question, deps, config);
        case Strategy::workflow_minimal:
        case Strategy::workflow_search_twice:
        case Strategy::workflow_search_verify: return run_workflow(question, deps, config);
        case Strategy::threshold: return run_threshold(question, deps, config);
        case Strategy::react: return run_react(question, deps, config);
    }
    throw InvalidInputError("unknown strategy");
}

EpisodeResult run_policy_episode(const Question& question, EpisodeDeps deps,
                                 const StrategyConfig& config) {
    if (config.strategy != Strategy::policy) throw InvalidInputError("strategy must be policy");
    EpisodeRunner run(question, deps, config, config.budget);
    AgentState& state = run.state();
    try {
        while (true) {
            const auto reply =
                run.call(purpose::control, kControlSystem, control_prompt(state, run.draft()));
            const ControlOutput control = parse_control_output(reply.text);
            record_parse_outcome(state, control.signals.parse_ok);
            if (control.draft_answer && !control.draft_answer->empty()) {
                run.set_draft(*control.draft_answer);
            }

            std::vector<UtilityBreakdown> candidates;
            ActionKind chosen = ActionKind::respond;
            // Repeated unreadable control output forces an answer.
            if (state.consecutive_parse_failures < state.budget.max_consecutive_parse_failures) {
                for (ActionKind kind : kAllActionKinds) {
                    if (kind == ActionKind::stop && !config.mask.allow_stop) continue;
                    const Action action = candidate_action(kind, control, state, run.draft());
                    UtilityInputs in;
                    in.kind = kind;
                    in.gain = control.signals.per_action_gain[kind];
                    in.cost = cost_of(config.cost_mode, kind, state, config.cost_model);
                    in.uncertainty = uncertainty_for(kind, control.signals);
                    in.redundancy = redundancy_score(action, state.history, config.redundancy_mode);
                    candidates.push_back(compute_utility(in, config.weights, config.mask));
                }
                chosen = select_action(candidates, config.mask);
            }

            const Action action = candidate_action(chosen, control, state, run.draft());
            Observation obs = run.execute(action);
            TrajectoryStep& step = run.commit(action, std::move(obs));
            step.signals = control.signals;
            for (const auto& c : candidates) {
                if (c.action_kind == chosen) step.utility = c;
            }
            step.candidates = std::move(candidates);

            if (auto reason = should_terminate(state, chosen)) return run.finish(*reason);
        }
    } catch (const BackendError& e) {
        return run.fail(e);
    }
}

EpisodeResult run_direct(const Question& question, EpisodeDeps deps, const StrategyConfig& config) {
    if (config.strategy != Strategy::direct) throw InvalidInputError("strategy must be direct");
    EpisodeRunner run(question, deps, config, config.budget);
    try {
        const auto reply =
            run.call(purpose::answer, kAnswerSystem, "Question: " + question.text + '\n');
        run.set_answer(clean_answer(reply.text));
        run.commit(make_action(ActionKind::respond), Observation::none());
        return run.finish(*should_terminate(run.state(), ActionKind::respond));
    } catch (const BackendError& e) {
        return run.fail(e);
    }
}

EpisodeResult run_workflow(const Question& question, EpisodeDeps deps,
                           const StrategyConfig& config) {
    std::vector<ActionKind> pipeline;
    switch (config.strategy) {
        case Strategy::workflow_minimal:
            pipeline = {ActionKind::retrieve, ActionKind::respond};
            break;
        case Strategy::workflow_search_twice:
            pipeline = {ActionKind::retrieve, ActionKind::retrieve, ActionKind::respond};
            break;
        case Strategy::workflow_search_verify:
            pipeline = {ActionKind::retrieve, ActionKind::verify, ActionKind::respond};
            break;
        default: throw InvalidInputError("strategy must be a workflow variant");
    }

    EpisodeRunner run(question, deps, config, config.budget);
    AgentState& state = run.state();
    try {
        for (ActionKind kind : pipeline) {
            Action action;
            if (kind == ActionKind::retrieve && state.step_count > 0) {
                std::ostringstream user;
                user << "Question: " << question.text << "\n\nFirst query: " << question.text
                     << "\n\nEvidence:\n" << render_evidence(state);
                std::string query =
                    clean_answer(run.call(purpose::reformulate, kReformulateSystem, user.str()).text);
                if (query.starts_with("Query:")) query = trim(query.substr(6));
                action = make_action(kind, query.empty() ? question.text : query);
            } else if (kind == ActionKind::retrieve) {
                action = make_action(kind, question.text);
            } else {
                action = make_action(kind);
            }
            Observation obs = run.execute(action);
            run.commit(action, std::move(obs));
            if (auto reason = should_terminate(state, kind)) return run.finish(*reason);
        }
    } catch (const BackendError& e) {
        return run.fail(e);
    }
    // Unreachable: the pipeline ends in respond, which always terminates.
    return run.finish(TerminationReason::responded);
}

EpisodeResult run_threshold(const Question& question, EpisodeDeps deps,
                            const StrategyConfig& config) {
    if (config.strategy != Strategy::threshold) throw InvalidInputError("strategy must be threshold");
    EpisodeRunner run(question, deps, config, config.budget);
    AgentState& state = run.state();
    try {
        while (true) {
            const auto reply =
                run.call(purpose::control, kControlSystem, control_prompt(state, run.draft()));
            const ControlOutput control = parse_control_output(reply.text);
            record_parse_outcome(state, control.signals.parse_ok);
            if (control.draft_answer && !control.draft_answer->empty()) {
                run.set_draft(*control.draft_answer);
            }
            const bool forced =
                state.consecutive_parse_failures >= state.budget.max_consecutive_parse_failures;
            const ActionKind chosen =
                !forced && control.signals.uncertainty > config.threshold_tau ? ActionKind::retrieve
                                                                              : ActionKind::respond;
            const Action action = candidate_action(chosen, control, state, run.draft());
            Observation obs = run.execute(action);
            TrajectoryStep& step = run.commit(action, std::move(obs));
            step.signals = control.signals;
            if (auto reason = should_terminate(state, chosen)) return run.finish(*reason);
        }
    } catch (const BackendError& e) {
        return run.fail(e);
    }
}

EpisodeResult run_react(const Question& question, EpisodeDeps deps, const StrategyConfig& config) {
    if (config.strategy != Strategy::react) throw InvalidInputError("strategy must be react");
    Budget budget = config.budget;
    budget.max_steps = std::min(budget.max_steps, config.react_max_steps);
    EpisodeRunner run(question, deps, config, budget);
    AgentState& state = run.state();
    std::string transcript;
    try {
        while (true) {
            const auto reply = run.call(purpose::react, kReactSystem,
                                        "Question: " + question.text + "\n" + transcript);
            const auto parsed = parse_react_action(reply.text);
            record_parse_outcome(state, parsed.has_value());

            if (!parsed) {
                transcript += trim(reply.text) +
                              "\nObservation: invalid action; use Search[query] or "
                              "Finish[answer].\n";
                if (state.consecutive_parse_failures < budget.max_consecutive_parse_failures) {
                    continue;
                }
                Observation obs = run.execute(make_action(ActionKind::respond));
                run.commit(make_action(ActionKind::respond), std::move(obs));
                return run.finish(*should_terminate(state, ActionKind::respond));
            }

            ActionKind chosen;
            if (parsed->kind == ReactAction::Kind::finish) {
                chosen = ActionKind::respond;
                run.set_answer(parsed->argument);
                run.commit(make_action(chosen), Observation::none()).trace = parsed->thought;
            } else {
                chosen = ActionKind::retrieve;
                const Action action = make_action(chosen, parsed->argument);
                Observation obs = run.execute(action);
                transcript += "Thought: " + parsed->thought + "\nAction: Search[" +
                              parsed->argument + "]\nObservation: " +
                              (obs.content.empty() ? std::string("no results\n") : obs.content);
                run.commit(action, std::move(obs)).trace = parsed->thought;
            }
            if (auto reason = should_terminate(state, chosen)) return run.finish(*reason);
        }
    } catch (const BackendError& e) {
        return run.fail(e);
    }
}

}  // namespace agentorch
