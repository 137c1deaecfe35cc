#include <doctest.h>

#include <algorithm>
#include <random>

#include "agentorch/errors.hpp"
#include "agentorch/redundancy.hpp"
#include "oracles.hpp"

using namespace agentorch;

namespace {

TrajectoryStep step(std::size_t index, ActionKind kind, const std::string& arg = {}) {
    TrajectoryStep s;
    s.index = index;
    s.action = is_search_action(kind) ? make_action(kind, arg) : make_action(kind);
    return s;
}

std::vector<TrajectoryStep> retrieves(std::initializer_list<const char*> args) {
    std::vector<TrajectoryStep> out;
    for (const char* a : args) out.push_back(step(out.size(), ActionKind::retrieve, a));
    return out;
}

const std::vector<std::string> kVocab = {"capital", "france", "paris", "city", "of",
                                         "river", "seine", "who", "won"};

std::string random_query(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(1, 4);
    std::uniform_int_distribution<std::size_t> pick(0, kVocab.size() - 1);
    std::string q;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (i) q += (rng() % 2) ? " " : ", ";
        std::string w = kVocab[pick(rng)];
        if (rng() % 3 == 0) w[0] = static_cast<char>(std::toupper(w[0]));
        q += w;
    }
    return q;
}

}  // namespace

TEST_CASE("normalize_tokens") {
    CHECK(normalize_tokens("Who won, 1998?") == std::vector<std::string>{"who", "won", "1998"});
    CHECK(normalize_tokens("").empty());
    CHECK(normalize_tokens("A a A") == std::vector<std::string>{"a", "a", "a"});
    CHECK(normalize_tokens("--Zürich--") == std::vector<std::string>{"zürich"});
}

TEST_CASE("jaccard") {
    CHECK(jaccard({"who", "won"}, {"who", "won"}) == 1.0);
    CHECK(jaccard({"a", "b"}, {"c", "d"}) == 0.0);
    CHECK(jaccard({"a", "b"}, {"b", "c"}) == doctest::Approx(1.0 / 3.0));
    CHECK(jaccard({}, {}) == 1.0);
}

TEST_CASE("redundancy_score") {
    const auto hist = retrieves({"capital of France"});
    CHECK(redundancy_score(make_action(ActionKind::retrieve, "capital of France"), hist,
                           RedundancyMode::exact()) == 1.0);
    CHECK(redundancy_score(make_action(ActionKind::retrieve, "capital of France"), {},
                           RedundancyMode::exact()) == 0.0);
    CHECK(redundancy_score(make_action(ActionKind::retrieve, "capital of France"), {},
                           RedundancyMode::semantic()) == 0.0);

    const auto prior = retrieves({"france capital city"});
    CHECK(redundancy_score(make_action(ActionKind::retrieve, "capital of france"), prior,
                           RedundancyMode::semantic()) == doctest::Approx(0.5));
    CHECK(redundancy_score(make_action(ActionKind::retrieve, "capital of france"), prior,
                           RedundancyMode::exact()) == 0.0);

    // Only same-kind history counts, and non-search kinds never score.
    CHECK(redundancy_score(make_action(ActionKind::tool_call, "capital of France"), hist,
                           RedundancyMode::exact()) == 0.0);
    CHECK(redundancy_score(make_action(ActionKind::verify), hist, RedundancyMode::exact()) == 0.0);
    CHECK(redundancy_score(make_action(ActionKind::respond), hist, RedundancyMode::semantic(0)) ==
          0.0);
}

TEST_CASE("mode validation") {
    CHECK_THROWS_AS(RedundancyMode::semantic(1.5).validate(), InvalidInputError);
    CHECK_NOTHROW(RedundancyMode::semantic(0.0).validate());
}

TEST_CASE("count_redundant_calls") {
    CHECK(count_redundant_calls(retrieves({"x y", "x y", "x y"}), RedundancyMode::exact()) == 2);
    CHECK(count_redundant_calls(retrieves({"a", "b", "c"}), RedundancyMode::exact()) == 0);

    auto mixed = retrieves({"capital france"});
    mixed.push_back(step(1, ActionKind::tool_call, "capital france"));
    mixed.push_back(step(2, ActionKind::verify));
    mixed.push_back(step(3, ActionKind::tool_call, "France capital"));
    CHECK(count_redundant_calls(mixed, RedundancyMode::exact()) == 1);
    // A threshold of zero still needs a prior same-kind call.
    CHECK(count_redundant_calls(mixed, RedundancyMode::semantic(0.0)) == 1);
}

TEST_CASE("property: count_redundant_calls matches the pairwise oracle") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TrajectoryStep> steps;
        std::vector<oracle::SearchCall> calls;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            const int r = static_cast<int>(rng() % 5);
            if (r == 4) {
                steps.push_back(step(steps.size(), ActionKind::verify));
                continue;
            }
            const ActionKind kind = r < 3 ? ActionKind::retrieve : ActionKind::tool_call;
            const std::string q = random_query(rng);
            steps.push_back(step(steps.size(), kind, q));
            calls.push_back({static_cast<int>(kind), q});
        }
        CHECK(count_redundant_calls(steps, RedundancyMode::exact()) ==
              oracle::redundant_calls(calls, false, 0));
        for (double t : {0.0, 0.3, 0.5, 0.8, 1.0}) {
            CHECK(count_redundant_calls(steps, RedundancyMode::semantic(t)) ==
                  oracle::redundant_calls(calls, true, t));
        }
    }
}

TEST_CASE("property: scores are reorder-invariant, monotone in history and threshold") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TrajectoryStep> hist;
        const int n = static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) hist.push_back(step(hist.size(), ActionKind::retrieve, random_query(rng)));
        const std::string q = random_query(rng);
        auto toks = normalize_tokens(q);
        std::shuffle(toks.begin(), toks.end(), rng);
        std::string permuted;
        for (const auto& t : toks) permuted += t + " ";

        for (auto mode : {RedundancyMode::exact(), RedundancyMode::semantic(0.8)}) {
            const double a = redundancy_score(make_action(ActionKind::retrieve, q), hist, mode);
            const double b = redundancy_score(make_action(ActionKind::retrieve, permuted), hist, mode);
            CHECK(a == b);
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);

            auto longer = hist;
            longer.push_back(step(longer.size(), ActionKind::retrieve, random_query(rng)));
            CHECK(redundancy_score(make_action(ActionKind::retrieve, q), longer, mode) >= a);
        }

        // An exact character-level repeat is flagged by both modes.
        auto repeat = hist;
        repeat.push_back(step(repeat.size(), ActionKind::retrieve, q));
        repeat.push_back(step(repeat.size(), ActionKind::retrieve, q));
        const long exact = count_redundant_calls(repeat, RedundancyMode::exact());
        const long sem1 = count_redundant_calls(repeat, RedundancyMode::semantic(1.0));
        CHECK(exact >= 1);
        CHECK(sem1 >= exact);

        long previous = std::numeric_limits<long>::max();
        for (double t = 0.0; t <= 1.0; t += 0.1) {
            const long c = count_redundant_calls(repeat, RedundancyMode::semantic(t));
            CHECK(c <= previous);
            previous = c;
        }
    }
}
