#include <doctest.h>

#include <random>

#include "agentorch/errors.hpp"
#include "agentorch/metrics.hpp"
#include "oracles.hpp"

using namespace agentorch;

namespace {

std::string random_answer(std::mt19937_64& rng) {
    static const std::vector<std::string> pool = {"the", "a",     "an",    "Paris", "paris,",
                                                  "France", "Barack", "Obama", "1998", "U.S.",
                                                  "river", "Seine.", "THE",  "An",   "tower"};
    std::string s;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) s += pool[rng() % pool.size()] + (rng() % 3 ? " " : "  ");
    return s;
}

}  // namespace

TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("The Eiffel Tower.") == "eiffel tower");
    CHECK(normalize_answer("A  B") == "b");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("  Theory, an apple  ") == "theory apple");
}

TEST_CASE("f1_score") {
    CHECK(f1_score("Paris", "paris.").f1 == 1.0);
    CHECK(f1_score("Berlin", "Paris").f1 == 0.0);
    const auto s = f1_score("Barack Obama", "Obama");
    CHECK(s.precision == 0.5);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == doctest::Approx(0.6667).epsilon(1e-4));
    CHECK(f1_score("", "").f1 == 1.0);
    CHECK(f1_score("the", "").f1 == 1.0);
    CHECK(f1_score("", "Paris").f1 == 0.0);
    // Multiset semantics: a repeated token only matches as often as it occurs in gold.
    CHECK(f1_score("paris paris", "paris").precision == 0.5);
}

TEST_CASE("efficiency") {
    CHECK(efficiency(0.0719, 93.0) == doctest::Approx(0.000773).epsilon(1e-3));
    CHECK(efficiency(0.2662, 546.6) == doctest::Approx(0.000487).epsilon(1e-3));
    CHECK(efficiency(0.236, 1294.2) == doctest::Approx(0.000182).epsilon(1e-3));
    CHECK_THROWS_AS(efficiency(0.5, 0.0), NumericInputError);
    CHECK_THROWS_AS(efficiency(0.5, -3.0), NumericInputError);
}

TEST_CASE("pearson") {
    const std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    CHECK(pearson(x, neg) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), InvalidInputError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), InvalidInputError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{2, 2, 2, 2}), InvalidInputError);
}

TEST_CASE("buckets") {
    const auto& e = kDefaultBucketEdges;
    CHECK(bucket_index(0.5, e) == 1u);
    CHECK(bucket_index(1.0, e) == 2u);
    CHECK(bucket_index(0.0, e) == 0u);
    CHECK(bucket_index(0.33, e) == 1u);
    CHECK_FALSE(bucket_index(1.2, e).has_value());

    const std::vector<ContinueRecord> recs = {{0.1, false}, {0.9, true}};
    const auto b = bucket_continue_rate(recs, e);
    REQUIRE(b.size() == 3);
    CHECK(b[0].continue_rate == 0.0);
    CHECK(b[1].count == 0);
    CHECK_FALSE(b[1].continue_rate.has_value());
    CHECK(b[2].continue_rate == 1.0);

    for (const std::vector<double>& bad :
         {std::vector<double>{0.0}, {0.1, 1.0}, {0.0, 0.9}, {0.0, 0.5, 0.5, 1.0}}) {
        CHECK_THROWS_AS(bucket_continue_rate(recs, bad), InvalidInputError);
    }
}

TEST_CASE("property: f1 agrees with the oracle and is bounded and symmetric") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::string p = random_answer(rng);
        const std::string g = random_answer(rng);
        const auto s = f1_score(p, g);
        CHECK(std::abs(s.f1 - oracle::f1(p, g)) < 1e-9);
        const auto t = f1_score(g, p);
        CHECK(s.f1 == doctest::Approx(t.f1).epsilon(1e-15));
        CHECK(s.precision == t.recall);
        CHECK(s.recall == t.precision);
        for (double v : {s.f1, s.precision, s.recall}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("property: pearson matches the oracle and is location-scale invariant") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 60;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = normal(rng);
            y[i] = 0.5 * x[i] + normal(rng);
        }
        const double r = pearson(x, y);
        CHECK(std::abs(r - oracle::pearson(x, y)) < 1e-9);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
        const double a = 0.1 + 10 * unit(rng);
        const double b = 20 * unit(rng) - 10;
        std::vector<double> ax(n);
        for (std::size_t i = 0; i < n; ++i) ax[i] = a * x[i] + b;
        CHECK(std::abs(pearson(ax, y) - r) < 1e-9);
    }
}

TEST_CASE("property: every in-range value lands in exactly one bucket") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ContinueRecord> recs;
    for (int i = 0; i < 500; ++i) recs.push_back({unit(rng), rng() % 2 == 0});
    recs.push_back({1.0, true});
    recs.push_back({0.0, false});
    const auto buckets = bucket_continue_rate(recs, kDefaultBucketEdges);
    std::size_t total = 0;
    for (const auto& b : buckets) {
        total += b.count;
        if (b.count) CHECK(*b.continue_rate == doctest::Approx(double(b.continued) / b.count));
    }
    CHECK(total == recs.size());
}
