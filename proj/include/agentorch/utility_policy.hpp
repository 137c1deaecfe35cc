#pragma once

#include <span>
#include <string_view>
#include <optional>

#include "agentorch/core_state.hpp"

namespace agentorch {

/// Weights on the cost, uncertainty and redundancy penalties.
struct UtilityWeights {
    double cost = 1.0;
    double uncertainty = 1.0;
    double redundancy = 1.0;

    void validate() const;
};

enum class CostMode { step, token, latency };

std::string_view to_string(CostMode mode);
std::optional<CostMode> parse_cost_mode(std::string_view name);

struct AblationMask {
    bool use_gain = true;
    bool use_uncertainty = true;
    bool use_redundancy = true;
    bool allow_stop = true;

    static AblationMask full() { return {}; }
    bool operator==(const AblationMask&) const = default;
};

// Gain used for every candidate when the gain term is ablated.
inline constexpr double kAblatedGain = 0.5;

struct CostModelConfig {
    PerAction<double> base_step_cost{{0.2, 0.5, 0.6, 0.4, 0.0}};
    PerAction<double> token_prior{{150.0, 250.0, 250.0, 200.0, 0.0}};
    PerAction<double> latency_prior_seconds{{0.4, 0.6, 0.6, 0.5, 0.0}};
    long token_normalizer = 1000;
    double latency_normalizer_seconds = 2.0;
    double latency_ewma_alpha = 0.5;

    void validate() const;
};

struct UtilityInputs {
    ActionKind kind = ActionKind::stop;
    double gain = 0.0;
    double cost = 0.0;
    double uncertainty = 0.0;
    double redundancy = 0.0;
};

/// gain - w.cost*cost - w.uncertainty*uncertainty - w.redundancy*redundancy,
/// with masked terms dropped (an ablated gain becomes kAblatedGain).
/// Throws NumericInputError on non-finite inputs.
UtilityBreakdown compute_utility(const UtilityInputs& inputs, const UtilityWeights& weights,
                                 const AblationMask& mask);

/// Re-derives `total` from a breakdown's logged components.
double recompute_total(const UtilityBreakdown& breakdown, const UtilityWeights& weights,
                       const AblationMask& mask);

/// Uncertainty penalty seen by `kind`: committing actions (respond, stop) carry
/// the estimated uncertainty, evidence-gathering actions carry none.
double uncertainty_for(ActionKind kind, const SignalEstimate& signals);

double step_cost_of(ActionKind kind, const AgentState& state, const CostModelConfig& config,
                    const Budget& budget);

/// Running mean of this episode's observed tokens for `kind`, else the prior.
double token_cost_of(ActionKind kind, const AgentState& state, const CostModelConfig& config);

/// EWMA of this episode's observed latency for `kind`, seeded with the prior.
double latency_cost_of(ActionKind kind, const AgentState& state, const CostModelConfig& config);

double cost_of(CostMode mode, ActionKind kind, const AgentState& state,
               const CostModelConfig& config);

/// Argmax over totals; ties go to the earliest kind in canonical order.
/// Stop is skipped when the mask disallows it.
ActionKind select_action(std::span<const UtilityBreakdown> candidates, const AblationMask& mask);

}  // namespace agentorch
