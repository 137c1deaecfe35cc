#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentorch {

// Canonical order matters: it is the tie-break order for action selection.
enum class ActionKind : std::uint8_t { respond = 0, retrieve, tool_call, verify, stop };

inline constexpr std::size_t kActionKindCount = 5;
inline constexpr std::array<ActionKind, kActionKindCount> kAllActionKinds = {
    ActionKind::respond, ActionKind::retrieve, ActionKind::tool_call, ActionKind::verify,
    ActionKind::stop};

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> parse_action_kind(std::string_view name);

constexpr std::size_t index_of(ActionKind kind) { return static_cast<std::size_t>(kind); }

/// Fixed-size table keyed by action kind.
template <typename T>
struct PerAction {
    std::array<T, kActionKindCount> values{};

    constexpr T& operator[](ActionKind kind) { return values[index_of(kind)]; }
    constexpr const T& operator[](ActionKind kind) const { return values[index_of(kind)]; }

    static constexpr PerAction filled(const T& v) {
        PerAction p;
        p.values.fill(v);
        return p;
    }

    bool operator==(const PerAction&) const = default;
};

/// Kinds that hit the external retrieval tool when executed.
constexpr bool invokes_tool(ActionKind kind) {
    return kind == ActionKind::retrieve || kind == ActionKind::tool_call ||
           kind == ActionKind::verify;
}

/// Kinds whose argument is a search query and is subject to redundancy scoring.
constexpr bool is_search_action(ActionKind kind) {
    return kind == ActionKind::retrieve || kind == ActionKind::tool_call;
}

constexpr bool is_terminal_action(ActionKind kind) {
    return kind == ActionKind::respond || kind == ActionKind::stop;
}

struct Action {
    ActionKind kind = ActionKind::stop;
    std::optional<std::string> argument;

    bool operator==(const Action&) const = default;
};

/// Builds an action, enforcing the argument rules for each kind.
Action make_action(ActionKind kind, std::optional<std::string> argument = std::nullopt);

enum class ObservationSource : std::uint8_t { retrieval, tool, verification, none };

std::string_view to_string(ObservationSource source);

struct Observation {
    ObservationSource source = ObservationSource::none;
    std::string content;
    long token_count = 0;
    double latency_seconds = 0.0;

    static Observation none() { return {}; }
};

struct Budget {
    int max_steps = 6;
    std::optional<long> max_total_tokens;
    int max_consecutive_parse_failures = 3;

    void validate() const;
};

/// Self-estimated control signals, always clipped into [0,1].
struct SignalEstimate {
    PerAction<double> per_action_gain = PerAction<double>::filled(0.5);
    double uncertainty = 0.5;
    bool parse_ok = false;

    bool operator==(const SignalEstimate&) const = default;
};

/// One candidate's utility. Component fields hold the raw inputs; `total`
/// reflects weights and the ablation mask in force when it was computed.
struct UtilityBreakdown {
    ActionKind action_kind = ActionKind::stop;
    double gain = 0.0;
    double cost = 0.0;
    double uncertainty = 0.0;
    double redundancy = 0.0;
    double total = 0.0;

    bool operator==(const UtilityBreakdown&) const = default;
};

struct TrajectoryStep {
    std::size_t index = 0;
    Action action;
    // Every candidate scored at this step; empty for non-policy strategies.
    std::vector<UtilityBreakdown> candidates;
    std::optional<UtilityBreakdown> utility;
    std::optional<SignalEstimate> signals;
    Observation observation;
    long tokens_this_step = 0;
    double latency_this_step_seconds = 0.0;
    std::string trace;
};

struct EvidenceSnippet {
    std::string text;
    std::string source_tag;
};

enum class AgentStatus : std::uint8_t { running, terminated };

struct AgentState {
    std::string query;
    std::vector<EvidenceSnippet> working_context;
    std::vector<TrajectoryStep> history;
    std::size_t step_count = 0;
    long cumulative_tokens = 0;
    double cumulative_latency_seconds = 0.0;
    int consecutive_parse_failures = 0;
    AgentStatus status = AgentStatus::running;
    Budget budget;
    std::size_t snippet_char_cap = 1500;
};

inline constexpr std::size_t kDefaultSnippetCharCap = 1500;

AgentState init_state(std::string query, Budget budget,
                      std::size_t snippet_char_cap = kDefaultSnippetCharCap);

/// Appends `step` to the trajectory and folds it into the counters.
void apply_step(AgentState& state, TrajectoryStep step);

/// Updates the consecutive parse-failure counter.
void record_parse_outcome(AgentState& state, bool parse_ok);

enum class TerminationReason : std::uint8_t {
    stop_action,
    responded,
    step_budget,
    token_budget,
    failure_fallback
};

std::string_view to_string(TerminationReason reason);
std::optional<TerminationReason> parse_termination_reason(std::string_view name);

/// nullopt means continue. Budget limits are checked before the chosen action.
std::optional<TerminationReason> should_terminate(const AgentState& state, ActionKind chosen);

struct EpisodeResult {
    std::string question_id;
    std::string method;
    std::string final_answer;
    TerminationReason termination_reason = TerminationReason::failure_fallback;
    long total_tokens = 0;
    double wall_seconds = 0.0;
    long tool_calls = 0;
    long redundant_tool_calls = 0;
    std::vector<TrajectoryStep> steps;
    std::optional<double> f1;
    std::string error;
};

/// Number of steps that invoked the retrieval tool.
long count_tool_calls(std::span<const TrajectoryStep> steps);

/// Truncates to at most `max_bytes` without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view text, std::size_t max_bytes);

}  // namespace agentorch
