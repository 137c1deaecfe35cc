#include "agentorch/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "agentorch/errors.hpp"

namespace agentorch {

std::string normalize_answer(std::string_view text) {
    std::string stripped;
    stripped.reserve(text.size());
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::ispunct(c) != 0) continue;
        stripped.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream words(stripped);
    std::string out;
    for (std::string w; words >> w;) {
        if (w == "a" || w == "an" || w == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(std::move(w));
    return words;
}

}  // namespace

F1Score f1_score(std::string_view prediction, std::string_view gold) {
    const auto pred = split_words(normalize_answer(prediction));
    const auto ref = split_words(normalize_answer(gold));
    if (pred.empty() || ref.empty()) {
        const double v = (pred.empty() && ref.empty()) ? 1.0 : 0.0;
        return {v, v, v};
    }
    std::map<std::string, long> ref_counts;
    for (const auto& w : ref) ++ref_counts[w];
    long common = 0;
    for (const auto& w : pred) {
        auto it = ref_counts.find(w);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return {};
    const double p = static_cast<double>(common) / static_cast<double>(pred.size());
    const double r = static_cast<double>(common) / static_cast<double>(ref.size());
    return {2.0 * p * r / (p + r), p, r};
}

double efficiency(double f1, double tokens) {
    if (!(tokens > 0.0)) throw NumericInputError("efficiency needs a positive token count");
    return f1 / tokens;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidInputError("pearson: length mismatch");
    if (x.size() < 2) throw InvalidInputError("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw InvalidInputError("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

void validate_edges(std::span<const double> edges) {
    if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
        throw InvalidInputError("bucket edges must start at 0 and end at 1");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) {
            throw InvalidInputError("bucket edges must be strictly ascending");
        }
    }
}

}  // namespace

std::optional<std::size_t> bucket_index(double value, std::span<const double> edges) {
    validate_edges(edges);
    if (!(value >= 0.0 && value <= 1.0)) return std::nullopt;
    const std::size_t buckets = edges.size() - 1;
    for (std::size_t i = 0; i < buckets; ++i) {
        if (value >= edges[i] && value < edges[i + 1]) return i;
    }
    return buckets - 1;  // value == 1.0
}

std::vector<BucketStat> bucket_continue_rate(std::span<const ContinueRecord> records,
                                             std::span<const double> edges) {
    validate_edges(edges);
    std::vector<BucketStat> stats(edges.size() - 1);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        stats[i].lower = edges[i];
        stats[i].upper = edges[i + 1];
    }
    for (const auto& r : records) {
        auto idx = bucket_index(r.expected_gain, edges);
        if (!idx) continue;
        ++stats[*idx].count;
        if (r.continued) ++stats[*idx].continued;
    }
    for (auto& s : stats) {
        if (s.count > 0) {
            s.continue_rate = static_cast<double>(s.continued) / static_cast<double>(s.count);
        }
    }
    return stats;
}

}  // namespace agentorch
