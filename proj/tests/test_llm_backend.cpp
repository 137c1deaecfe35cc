#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "agentorch/llm_backend.hpp"

using namespace agentorch;

namespace {

BackendRequest request(std::string purpose = "answer", std::string content = "capital of France?") {
    BackendRequest r;
    r.messages = {{Role::user, std::move(content)}};
    r.purpose = std::move(purpose);
    return r;
}

void check_in_range(const SignalEstimate& s) {
    for (ActionKind k : kAllActionKinds) {
        CHECK(s.per_action_gain[k] >= 0.0);
        CHECK(s.per_action_gain[k] <= 1.0);
    }
    CHECK(s.uncertainty >= 0.0);
    CHECK(s.uncertainty <= 1.0);
}

}  // namespace

TEST_CASE("scripted backend pops entries in order") {
    auto backend = ScriptedBackend::from_texts({"Paris"});
    const auto r = backend.complete(request());
    CHECK(r.text == "Paris");
    CHECK(r.completion_tokens == 1);
    CHECK(r.prompt_tokens == 3);
    CHECK(r.latency_seconds == 0.0);
    CHECK(r.total_tokens() == 4);
    try {
        backend.complete(request());
        FAIL("expected exhaustion");
    } catch (const BackendError& e) {
        CHECK(e.category() == BackendErrorCategory::script_exhausted);
    }
}

TEST_CASE("scripted backend routes by purpose and honours repeat") {
    ScriptedBackend backend({{"control", "{c}", true}, {"answer", "A1", false}, {std::nullopt, "any", false}});
    CHECK(backend.complete(request("answer")).text == "A1");
    CHECK(backend.complete(request("control")).text == "{c}");
    CHECK(backend.complete(request("control")).text == "{c}");
    CHECK(backend.complete(request("answer")).text == "any");
    CHECK_THROWS_AS(backend.complete(request("answer")), BackendError);
    CHECK(backend.calls() == 5);
}

TEST_CASE("invalid requests are rejected") {
    auto backend = ScriptedBackend::from_texts({"x"});
    BackendRequest empty;
    try {
        backend.complete(empty);
        FAIL("expected invalid request");
    } catch (const BackendError& e) {
        CHECK(e.category() == BackendErrorCategory::invalid_request);
    }
    auto r = request();
    r.max_output_tokens = 0;
    CHECK_THROWS_AS(r.validate(), BackendError);
    r = request();
    r.temperature = -1;
    CHECK_THROWS_AS(r.validate(), BackendError);
}

TEST_CASE("property: scripted backend is deterministic and leaves requests untouched") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> texts;
        for (int i = 0; i < 6; ++i) texts.push_back(std::string(rng() % 7, 'w') + " x y");
        auto a = ScriptedBackend::from_texts(texts);
        auto b = ScriptedBackend::from_texts(texts);
        long ta = 0, tb = 0;
        for (int i = 0; i < 6; ++i) {
            const auto req = request("answer", std::to_string(rng()));
            const auto copy = req;
            const auto ra = a.complete(req);
            const auto rb = b.complete(req);
            CHECK(ra.text == rb.text);
            ta += ra.total_tokens();
            tb += rb.total_tokens();
            CHECK(req.messages[0].content == copy.messages[0].content);
            CHECK(req.purpose == copy.purpose);
        }
        CHECK(ta == tb);
    }
}

TEST_CASE("estimate_tokens") {
    CHECK(estimate_tokens("hello world") == 2);
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("  a   b  ") == 2);
    CHECK(estimate_tokens("a\tb\nc") == 3);
}

TEST_CASE("parse_signals") {
    auto s = parse_signals(R"({"expected_gain": 1.7, "uncertainty": -0.2})");
    for (ActionKind k : kAllActionKinds) CHECK(s.per_action_gain[k] == 1.0);
    CHECK(s.uncertainty == 0.0);
    CHECK(s.parse_ok);

    s = parse_signals(R"({"expected_gain": 0.4, "uncertainty": 0.6})");
    for (ActionKind k : kAllActionKinds) CHECK(s.per_action_gain[k] == 0.4);
    CHECK(s.uncertainty == 0.6);
    CHECK(s.parse_ok);

    s = parse_signals("no structured content here");
    for (ActionKind k : kAllActionKinds) CHECK(s.per_action_gain[k] == 0.5);
    CHECK(s.uncertainty == 0.5);
    CHECK_FALSE(s.parse_ok);
}

TEST_CASE("parse_control_output reads maps, arguments and drafts") {
    const auto out = parse_control_output(
        "Sure. {\"note\": \"{not this}\"} then "
        R"({"expected_gain": {"retrieve": 0.9, "respond": 2}, "uncertainty": 0.3,
            "arguments": {"retrieve": "capital France", "verify": ""},
            "draft_answer": "Paris"} trailing)");
    CHECK(out.signals.parse_ok);
    CHECK(out.signals.per_action_gain[ActionKind::retrieve] == 0.9);
    CHECK(out.signals.per_action_gain[ActionKind::respond] == 1.0);
    CHECK(out.signals.per_action_gain[ActionKind::stop] == 0.0);
    CHECK(out.arguments[ActionKind::retrieve] == "capital France");
    CHECK_FALSE(out.arguments[ActionKind::verify].has_value());
    CHECK(out.draft_answer == "Paris");

    const auto q = parse_control_output(R"({"expected_gain": 0.1, "uncertainty": 0.1, "query": "q1"})");
    CHECK(q.arguments[ActionKind::retrieve] == "q1");

    CHECK_FALSE(parse_control_output(R"({"expected_gain": "high", "uncertainty": 0.1})").signals.parse_ok);
    CHECK_FALSE(parse_control_output(R"({"expected_gain": 0.2)").signals.parse_ok);
}

TEST_CASE("property: parse_signals never leaves [0,1]") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> wide(-1e6, 1e6);
    const std::string alphabet = "{}[]\":,. 0123456789-eE+abcdefgnrstu_xyzpl";
    for (int trial = 0; trial < 2000; ++trial) {
        std::string text;
        if (trial % 2 == 0) {
            nlohmann::json j;
            if (rng() % 2) {
                j["expected_gain"] = wide(rng);
            } else {
                for (ActionKind k : kAllActionKinds) {
                    if (rng() % 3) j["expected_gain"][std::string(to_string(k))] = wide(rng);
                }
                if (!j.contains("expected_gain")) j["expected_gain"] = nlohmann::json::object();
            }
            j["uncertainty"] = wide(rng);
            text = "noise " + j.dump() + " noise";
        } else {
            const std::size_t n = rng() % 80;
            for (std::size_t i = 0; i < n; ++i) text += alphabet[rng() % alphabet.size()];
        }
        check_in_range(parse_signals(text));
    }
    check_in_range(parse_signals(R"({"expected_gain": 1e400, "uncertainty": -1e400})"));
}

TEST_CASE("chat wire format") {
    auto req = request("control", "hi there");
    req.messages.insert(req.messages.begin(), Message{Role::system, "be brief"});
    req.max_output_tokens = 64;
    const auto body = nlohmann::json::parse(build_chat_request_body(req, "m1"));
    CHECK(body["model"] == "m1");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "hi there");
    CHECK(body["max_tokens"] == 64);
    CHECK_FALSE(body.contains("purpose"));

    auto r = parse_chat_response_body(
        R"({"choices":[{"message":{"content":"Paris is it"}}],"usage":{"prompt_tokens":11,"completion_tokens":4}})",
        req);
    CHECK(r.text == "Paris is it");
    CHECK(r.prompt_tokens == 11);
    CHECK(r.completion_tokens == 4);

    r = parse_chat_response_body(R"({"choices":[{"message":{"content":"Paris is it"}}]})", req);
    CHECK(r.prompt_tokens == 4);
    CHECK(r.completion_tokens == 3);

    for (const char* bad : {"not json", "[]", R"({"choices":[]})", R"({"choices":[{"message":{}}]})"}) {
        try {
            parse_chat_response_body(bad, req);
            FAIL("expected malformed response");
        } catch (const BackendError& e) {
            CHECK(e.category() == BackendErrorCategory::malformed_response);
        }
    }
}

TEST_CASE("load_script accepts objects and bare strings") {
    const auto path = std::filesystem::temp_directory_path() / "agentorch_script_test.json";
    std::ofstream(path) << R"(["plain", {"match": "control", "text": "{}", "repeat": true}])";
    const auto entries = load_script(path);
    REQUIRE(entries.size() == 2);
    CHECK_FALSE(entries[0].match.has_value());
    CHECK(entries[1].match == "control");
    CHECK(entries[1].repeat);
    std::ofstream(path) << R"({"text": "x"})";
    CHECK_THROWS_AS(load_script(path), InvalidInputError);
    std::filesystem::remove(path);
}
