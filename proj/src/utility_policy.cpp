#include "agentorch/utility_policy.hpp"

#include <algorithm>
#include <cmath>

#include "agentorch/errors.hpp"

namespace agentorch {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void UtilityWeights::validate() const {
    if (!finite_non_negative(cost) || !finite_non_negative(uncertainty) ||
        !finite_non_negative(redundancy)) {
        throw InvalidInputError("utility weights must be finite and non-negative");
    }
}

std::string_view to_string(CostMode mode) {
    switch (mode) {
        case CostMode::step: return "step";
        case CostMode::token: return "token";
        case CostMode::latency: return "latency";
    }
    return "step";
}

std::optional<CostMode> parse_cost_mode(std::string_view name) {
    if (name == "step") return CostMode::step;
    if (name == "token") return CostMode::token;
    if (name == "latency") return CostMode::latency;
    return std::nullopt;
}

void CostModelConfig::validate() const {
    for (double c : base_step_cost.values) {
        if (!(c >= 0.0 && c <= 1.0)) throw InvalidInputError("base step costs must lie in [0,1]");
    }
    for (double p : token_prior.values) {
        if (!finite_non_negative(p)) throw InvalidInputError("token priors must be non-negative");
    }
    for (double p : latency_prior_seconds.values) {
        if (!finite_non_negative(p)) throw InvalidInputError("latency priors must be non-negative");
    }
    if (token_normalizer <= 0) throw InvalidInputError("token_normalizer must be positive");
    if (!(latency_normalizer_seconds > 0.0) || !std::isfinite(latency_normalizer_seconds)) {
        throw InvalidInputError("latency_normalizer_seconds must be positive");
    }
    if (!(latency_ewma_alpha > 0.0 && latency_ewma_alpha <= 1.0)) {
        throw InvalidInputError("latency_ewma_alpha must lie in (0,1]");
    }
}

UtilityBreakdown compute_utility(const UtilityInputs& in, const UtilityWeights& weights,
                                 const AblationMask& mask) {
    for (double v : {in.gain, in.cost, in.uncertainty, in.redundancy, weights.cost,
                     weights.uncertainty, weights.redundancy}) {
        if (!std::isfinite(v)) throw NumericInputError("utility inputs must be finite");
    }
    UtilityBreakdown b{in.kind, in.gain, in.cost, in.uncertainty, in.redundancy, 0.0};
    b.total = recompute_total(b, weights, mask);
    return b;
}

double recompute_total(const UtilityBreakdown& b, const UtilityWeights& weights,
                       const AblationMask& mask) {
    const double gain_term = mask.use_gain ? b.gain : kAblatedGain;
    const double uncertainty_term = mask.use_uncertainty ? weights.uncertainty * b.uncertainty : 0.0;
    const double redundancy_term = mask.use_redundancy ? weights.redundancy * b.redundancy : 0.0;
    return gain_term - weights.cost * b.cost - uncertainty_term - redundancy_term;
}

double uncertainty_for(ActionKind kind, const SignalEstimate& signals) {
    return is_terminal_action(kind) ? signals.uncertainty : 0.0;
}

double step_cost_of(ActionKind kind, const AgentState& state, const CostModelConfig& config,
                    const Budget& budget) {
    const double depth = static_cast<double>(state.step_count) / budget.max_steps;
    return clip01(config.base_step_cost[kind] * (1.0 + depth) / 2.0);
}

double token_cost_of(ActionKind kind, const AgentState& state, const CostModelConfig& config) {
    long sum = 0;
    long count = 0;
    for (const auto& step : state.history) {
        if (step.action.kind != kind) continue;
        sum += step.tokens_this_step;
        ++count;
    }
    const double estimate = count > 0 ? static_cast<double>(sum) / static_cast<double>(count)
                                      : config.token_prior[kind];
    return clip01(estimate / static_cast<double>(config.token_normalizer));
}

double latency_cost_of(ActionKind kind, const AgentState& state, const CostModelConfig& config) {
    double ewma = config.latency_prior_seconds[kind];
    for (const auto& step : state.history) {
        if (step.action.kind != kind) continue;
        ewma = config.latency_ewma_alpha * step.latency_this_step_seconds +
               (1.0 - config.latency_ewma_alpha) * ewma;
    }
    return clip01(ewma / config.latency_normalizer_seconds);
}

double cost_of(CostMode mode, ActionKind kind, const AgentState& state,
               const CostModelConfig& config) {
    switch (mode) {
        case CostMode::step: return step_cost_of(kind, state, config, state.budget);
        case CostMode::token: return token_cost_of(kind, state, config);
        case CostMode::latency: return latency_cost_of(kind, state, config);
    }
    return 0.0;
}

ActionKind select_action(std::span<const UtilityBreakdown> candidates, const AblationMask& mask) {
    const UtilityBreakdown* best = nullptr;
    for (const auto& c : candidates) {
        if (!mask.allow_stop && c.action_kind == ActionKind::stop) continue;
        if (best == nullptr || c.total > best->total ||
            (c.total == best->total && index_of(c.action_kind) < index_of(best->action_kind))) {
            best = &c;
        }
    }
    if (best == nullptr) throw SelectionError("no selectable candidate actions");
    return best->action_kind;
}

}  // namespace agentorch
