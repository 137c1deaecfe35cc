#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "agentorch/core_state.hpp"
#include "agentorch/llm_backend.hpp"
#include "agentorch/redundancy.hpp"
#include "agentorch/retriever.hpp"
#include "agentorch/utility_policy.hpp"

namespace agentorch {

enum class Strategy {
    policy,
    direct,
    workflow_minimal,
    workflow_search_twice,
    workflow_search_verify,
    threshold,
    react
};

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);

struct StrategyConfig {
    Strategy strategy = Strategy::policy;
    CostMode cost_mode = CostMode::step;
    RedundancyMode redundancy_mode = RedundancyMode::exact();
    UtilityWeights weights;
    AblationMask mask;
    Budget budget;
    CostModelConfig cost_model;
    double threshold_tau = 0.5;
    int react_max_steps = 6;
    int retrieval_k = 3;
    std::size_t snippet_chars = kDefaultSnippetCharCap;
    int max_output_tokens = 256;
    double temperature = 0.0;

    void validate() const;
};

struct Question {
    std::string id;
    std::string text;
    std::optional<std::string> gold;
};

/// Injected collaborators. The index is shared read-only; the backend must
/// not be shared with another running episode unless it is thread-safe.
struct EpisodeDeps {
    Backend& backend;
    const Bm25Index& index;
};

/// Dispatches on config.strategy.
EpisodeResult run_episode(const Question& question, EpisodeDeps deps,
                          const StrategyConfig& config);

EpisodeResult run_policy_episode(const Question& question, EpisodeDeps deps,
                                 const StrategyConfig& config);
EpisodeResult run_direct(const Question& question, EpisodeDeps deps, const StrategyConfig& config);
EpisodeResult run_workflow(const Question& question, EpisodeDeps deps,
                           const StrategyConfig& config);
EpisodeResult run_threshold(const Question& question, EpisodeDeps deps,
                            const StrategyConfig& config);
EpisodeResult run_react(const Question& question, EpisodeDeps deps, const StrategyConfig& config);

struct ReactAction {
    enum class Kind { search, finish } kind = Kind::finish;
    std::string argument;
    std::string thought;
};

/// Parses "Thought: ...\nAction: Search[q]" / "Action: Finish[a]".
/// Returns nullopt for anything else, including an empty search query.
std::optional<ReactAction> parse_react_action(std::string_view text);

/// First non-empty line, trimmed, without a leading "Answer:" label.
std::string clean_answer(std::string_view text);

}  // namespace agentorch
