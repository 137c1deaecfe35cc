#include "agentorch/redundancy.hpp"

#include <algorithm>
#include <cmath>

#include "agentorch/errors.hpp"

namespace agentorch {

namespace {

bool is_token_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

// Exact repeats compare the sorted token bag, so word order never matters.
std::vector<std::string> canonical_bag(std::string_view text) {
    auto tokens = normalize_tokens(text);
    std::sort(tokens.begin(), tokens.end());
    return tokens;
}

}  // namespace

void RedundancyMode::validate() const {
    if (kind == RedundancyKind::semantic && !(threshold >= 0.0 && threshold <= 1.0)) {
        throw InvalidInputError("semantic redundancy threshold must lie in [0,1]");
    }
}

std::vector<std::string> normalize_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_token_byte(c)) {
            current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

TokenSet token_set(std::string_view text) {
    auto tokens = normalize_tokens(text);
    return TokenSet(std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end()));
}

double jaccard(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : a) common += b.count(t);
    const std::size_t unioned = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(unioned);
}

double redundancy_score(const Action& candidate, std::span<const TrajectoryStep> history,
                        const RedundancyMode& mode) {
    if (!is_search_action(candidate.kind)) return 0.0;
    const std::string_view arg = candidate.argument ? std::string_view(*candidate.argument) : "";

    if (mode.kind == RedundancyKind::exact) {
        const auto bag = canonical_bag(arg);
        for (const auto& step : history) {
            if (step.action.kind != candidate.kind) continue;
            if (canonical_bag(step.action.argument.value_or("")) == bag) return 1.0;
        }
        return 0.0;
    }

    const auto set = token_set(arg);
    double best = 0.0;
    for (const auto& step : history) {
        if (step.action.kind != candidate.kind) continue;
        best = std::max(best, jaccard(set, token_set(step.action.argument.value_or(""))));
    }
    return best;
}

long count_redundant_calls(std::span<const TrajectoryStep> steps, const RedundancyMode& mode) {
    long count = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!is_search_action(steps[i].action.kind)) continue;
        const auto earlier = steps.first(i);
        const bool has_prior = std::any_of(earlier.begin(), earlier.end(), [&](const auto& s) {
            return s.action.kind == steps[i].action.kind;
        });
        if (!has_prior) continue;
        const double score = redundancy_score(steps[i].action, earlier, mode);
        const bool flagged = mode.kind == RedundancyKind::exact ? score == 1.0
                                                                : score >= mode.threshold;
        if (flagged) ++count;
    }
    return count;
}

}  // namespace agentorch
