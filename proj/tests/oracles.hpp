#pragma once

// Reference implementations used only by tests. They are written from the
// textbook definitions and share no code with the library.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct NaiveDoc {
    std::string id;
    std::vector<std::string> tokens;
};

// Straight BM25 from the formula: every statistic recomputed by scanning.
inline double bm25(const std::vector<NaiveDoc>& corpus, const std::vector<std::string>& query,
                   const std::string& doc_id, double k1 = 1.5, double b = 0.75) {
    const double n = static_cast<double>(corpus.size());
    double total_len = 0;
    for (const auto& d : corpus) total_len += static_cast<double>(d.tokens.size());
    const double avgdl = total_len / n;
    const NaiveDoc* doc = nullptr;
    for (const auto& d : corpus) {
        if (d.id == doc_id) doc = &d;
    }
    const std::set<std::string> terms(query.begin(), query.end());
    double score = 0;
    for (const auto& t : terms) {
        double df = 0;
        for (const auto& d : corpus) {
            if (std::find(d.tokens.begin(), d.tokens.end(), t) != d.tokens.end()) df += 1;
        }
        const double tf = static_cast<double>(std::count(doc->tokens.begin(), doc->tokens.end(), t));
        if (tf == 0) continue;
        const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
        const double len = static_cast<double>(doc->tokens.size());
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl));
    }
    return score;
}

// Ranking by scoring every document: descending score, ascending id, zero dropped.
inline std::vector<std::pair<std::string, double>> rank_all(const std::vector<NaiveDoc>& corpus,
                                                            const std::vector<std::string>& query) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& d : corpus) {
        const double s = bm25(corpus, query, d.id);
        if (s > 0) out.emplace_back(d.id, s);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& c) {
        return a.second != c.second ? a.second > c.second : a.first < c.first;
    });
    return out;
}

// SQuAD-style normalization written out by hand.
inline std::vector<std::string> answer_words(const std::string& text) {
    std::string kept;
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        kept += static_cast<char>(std::tolower(c));
    }
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") out.push_back(cur);
        cur.clear();
    };
    for (char c : kept) {
        if (std::isspace(static_cast<unsigned char>(c))) flush();
        else cur += c;
    }
    flush();
    return out;
}

// Multiset intersection by sorting both sides and merging.
inline double f1(const std::string& pred, const std::string& gold) {
    auto p = answer_words(pred);
    auto g = answer_words(gold);
    if (p.empty() || g.empty()) return (p.empty() && g.empty()) ? 1.0 : 0.0;
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::size_t i = 0, j = 0, common = 0;
    while (i < p.size() && j < g.size()) {
        if (p[i] == g[j]) {
            ++common;
            ++i;
            ++j;
        } else if (p[i] < g[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    if (common == 0) return 0.0;
    const double prec = static_cast<double>(common) / static_cast<double>(p.size());
    const double rec = static_cast<double>(common) / static_cast<double>(g.size());
    return 2 * prec * rec / (prec + rec);
}

// Pearson via raw sums: cov / (sd_x * sd_y) with n-1 denominators.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    const double cov = (sxy - sx * sy / n) / (n - 1);
    const double vx = (sxx - sx * sx / n) / (n - 1);
    const double vy = (syy - sy * sy / n) / (n - 1);
    return cov / std::sqrt(vx * vy);
}

struct SearchCall {
    int kind;  // calls only compare against the same kind
    std::string argument;
};

// Counts calls that repeat any earlier same-kind call, comparing every pair.
inline long redundant_calls(const std::vector<SearchCall>& calls, bool semantic, double threshold) {
    long count = 0;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        bool flagged = false;
        for (std::size_t j = 0; j < i; ++j) {
            if (calls[j].kind != calls[i].kind) continue;
            auto a = words(calls[i].argument);
            auto b = words(calls[j].argument);
            if (semantic) {
                std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
                std::size_t inter = 0;
                for (const auto& w : sa) inter += sb.count(w);
                const std::size_t uni = sa.size() + sb.size() - inter;
                const double jac = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
                if (jac >= threshold) flagged = true;
            } else {
                std::sort(a.begin(), a.end());
                std::sort(b.begin(), b.end());
                if (a == b) flagged = true;
            }
        }
        if (flagged) ++count;
    }
    return count;
}

}  // namespace oracle
