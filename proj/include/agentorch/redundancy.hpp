#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agentorch/core_state.hpp"

namespace agentorch {

enum class RedundancyKind { exact, semantic };

struct RedundancyMode {
    RedundancyKind kind = RedundancyKind::exact;
    double threshold = 0.8;  // consulted only in semantic mode

    static RedundancyMode exact() { return {RedundancyKind::exact, 0.8}; }
    static RedundancyMode semantic(double threshold = 0.8) {
        return {RedundancyKind::semantic, threshold};
    }

    void validate() const;
};

using TokenSet = std::set<std::string, std::less<>>;

/// Lowercases ASCII letters and splits on maximal runs of non-alphanumerics.
/// Bytes >= 0x80 are kept as part of tokens so UTF-8 words survive intact.
std::vector<std::string> normalize_tokens(std::string_view text);

TokenSet token_set(std::string_view text);

/// |a ∩ b| / |a ∪ b|, with two empty sets scoring 1.
double jaccard(const TokenSet& a, const TokenSet& b);

/// How strongly `candidate` repeats an earlier action of the same kind.
/// Non-search kinds always score 0.
double redundancy_score(const Action& candidate, std::span<const TrajectoryStep> history,
                        const RedundancyMode& mode);

/// Search steps flagged as repeats of strictly earlier steps.
long count_redundant_calls(std::span<const TrajectoryStep> steps, const RedundancyMode& mode);

}  // namespace agentorch
