#include "agentorch/core_state.hpp"

#include <algorithm>

#include "agentorch/errors.hpp"

namespace agentorch {

namespace {

constexpr std::array<std::string_view, kActionKindCount> kActionNames = {
    "respond", "retrieve", "tool_call", "verify", "stop"};

constexpr std::array<std::string_view, 5> kReasonNames = {
    "stop_action", "responded", "step_budget", "token_budget", "failure_fallback"};

}  // namespace

std::string_view to_string(ActionKind kind) { return kActionNames[index_of(kind)]; }

std::optional<ActionKind> parse_action_kind(std::string_view name) {
    for (ActionKind kind : kAllActionKinds) {
        if (kActionNames[index_of(kind)] == name) return kind;
    }
    return std::nullopt;
}

std::string_view to_string(ObservationSource source) {
    switch (source) {
        case ObservationSource::retrieval: return "retrieval";
        case ObservationSource::tool: return "tool";
        case ObservationSource::verification: return "verification";
        case ObservationSource::none: return "none";
    }
    return "none";
}

std::string_view to_string(TerminationReason reason) {
    return kReasonNames[static_cast<std::size_t>(reason)];
}

std::optional<TerminationReason> parse_termination_reason(std::string_view name) {
    for (std::size_t i = 0; i < kReasonNames.size(); ++i) {
        if (kReasonNames[i] == name) return static_cast<TerminationReason>(i);
    }
    return std::nullopt;
}

Action make_action(ActionKind kind, std::optional<std::string> argument) {
    if (is_search_action(kind) && (!argument || argument->empty())) {
        throw InvalidInputError(std::string(to_string(kind)) + " requires a non-empty argument");
    }
    if (is_terminal_action(kind) && argument) {
        throw InvalidInputError(std::string(to_string(kind)) + " takes no argument");
    }
    return Action{kind, std::move(argument)};
}

void Budget::validate() const {
    if (max_steps < 1) throw InvalidInputError("budget.max_steps must be >= 1");
    if (max_total_tokens && *max_total_tokens < 1) {
        throw InvalidInputError("budget.max_total_tokens must be >= 1");
    }
    if (max_consecutive_parse_failures < 1) {
        throw InvalidInputError("budget.max_consecutive_parse_failures must be >= 1");
    }
}

AgentState init_state(std::string query, Budget budget, std::size_t snippet_char_cap) {
    if (query.empty()) throw InvalidInputError("query must be non-empty");
    budget.validate();
    AgentState state;
    state.query = std::move(query);
    state.budget = budget;
    state.snippet_char_cap = snippet_char_cap;
    return state;
}

void apply_step(AgentState& state, TrajectoryStep step) {
    if (state.status != AgentStatus::running) {
        throw SequencingError("cannot apply a step to a terminated episode");
    }
    if (step.index != state.step_count) {
        throw SequencingError("step index " + std::to_string(step.index) +
                              " does not follow step_count " +
                              std::to_string(state.step_count));
    }
    if (step.tokens_this_step < 0 || step.latency_this_step_seconds < 0.0) {
        throw InvalidInputError("step usage must be non-negative");
    }
    if (!step.observation.content.empty()) {
        state.working_context.push_back(
            {truncate_utf8(step.observation.content, state.snippet_char_cap),
             std::string(to_string(step.observation.source))});
    }
    state.cumulative_tokens += step.tokens_this_step;
    state.cumulative_latency_seconds += step.latency_this_step_seconds;
    state.history.push_back(std::move(step));
    state.step_count = state.history.size();
}

void record_parse_outcome(AgentState& state, bool parse_ok) {
    state.consecutive_parse_failures = parse_ok ? 0 : state.consecutive_parse_failures + 1;
}

std::optional<TerminationReason> should_terminate(const AgentState& state, ActionKind chosen) {
    const Budget& b = state.budget;
    if (state.step_count >= static_cast<std::size_t>(b.max_steps)) {
        return TerminationReason::step_budget;
    }
    if (b.max_total_tokens && state.cumulative_tokens >= *b.max_total_tokens) {
        return TerminationReason::token_budget;
    }
    if (state.consecutive_parse_failures >= b.max_consecutive_parse_failures) {
        return TerminationReason::failure_fallback;
    }
    if (chosen == ActionKind::stop) return TerminationReason::stop_action;
    if (chosen == ActionKind::respond) return TerminationReason::responded;
    return std::nullopt;
}

long count_tool_calls(std::span<const TrajectoryStep> steps) {
    return static_cast<long>(std::count_if(steps.begin(), steps.end(), [](const auto& s) {
        return invokes_tool(s.action.kind);
    }));
}

std::string truncate_utf8(std::string_view text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return std::string(text);
    std::size_t cut = max_bytes;
    // Back off over continuation bytes (10xxxxxx).
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

}  // namespace agentorch
