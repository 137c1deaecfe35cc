#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentorch {

/// SQuAD-style: lowercase, strip ASCII punctuation, drop the articles
/// a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

struct F1Score {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Token-level F1 over normalized token multisets.
F1Score f1_score(std::string_view prediction, std::string_view gold);

/// f1 / tokens. Throws NumericInputError when tokens <= 0.
double efficiency(double f1, double tokens);

/// Sample Pearson correlation. Throws InvalidInputError on length mismatch,
/// fewer than two points or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct ContinueRecord {
    double expected_gain = 0.0;
    bool continued = false;
};

struct BucketStat {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    std::size_t continued = 0;
    std::optional<double> continue_rate;  // absent for empty buckets
};

inline const std::vector<double> kDefaultBucketEdges = {0.0, 0.33, 0.66, 1.0};

/// Buckets are [edge_i, edge_{i+1}) with the last one closed.
/// Throws InvalidInputError on malformed edges.
std::vector<BucketStat> bucket_continue_rate(std::span<const ContinueRecord> records,
                                             std::span<const double> edges);

/// Index of the bucket holding `value`, or nullopt when outside [0,1].
std::optional<std::size_t> bucket_index(double value, std::span<const double> edges);

}  // namespace agentorch
