#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentorch/llm_backend.hpp"

using namespace agentorch;

namespace {

// In-process chat-completions server on an ephemeral port.
class FakeServer {
public:
    FakeServer() {
        server_.Post("/ok", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            res.set_content(
                R"({"choices":[{"message":{"content":"Paris"}}],"usage":{"prompt_tokens":12,"completion_tokens":1}})",
                "application/json");
        });
        server_.Post("/nousage", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"choices":[{"message":{"content":"two words"}}]})", "application/json");
        });
        server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
            if (flaky_hits_++ == 0) {
                res.status = 503;
                return;
            }
            res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
        });
        server_.Post("/down", [this](const httplib::Request&, httplib::Response& res) {
            ++down_hits_;
            res.status = 500;
        });
        server_.Post("/notfound", [this](const httplib::Request&, httplib::Response& res) {
            ++notfound_hits_;
            res.status = 404;
        });
        server_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("<html>oops</html>", "text/html");
        });
        server_.Post("/slow", [this](const httplib::Request&, httplib::Response& res) {
            const int now = ++in_flight_;
            int seen = max_in_flight_.load();
            while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
            --in_flight_;
            res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port_) + path;
    }

    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::string last_auth_;
    std::string last_body_;
    std::atomic<int> flaky_hits_{0};
    std::atomic<int> down_hits_{0};
    std::atomic<int> notfound_hits_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

HttpBackendConfig config_for(const std::string& url) {
    HttpBackendConfig c;
    c.endpoint = url;
    c.model = "test-model";
    c.api_key_env = "AGENTORCH_TEST_KEY";
    c.timeout_seconds = 5;
    c.retry_backoff_ms = 1;
    return c;
}

BackendRequest request() {
    BackendRequest r;
    r.messages = {{Role::user, "capital of France?"}};
    r.purpose = "answer";
    return r;
}

BackendErrorCategory category_of(HttpBackend& backend) {
    try {
        backend.complete(request());
    } catch (const BackendError& e) {
        return e.category();
    }
    FAIL("expected a backend error");
    return BackendErrorCategory::transport;
}

}  // namespace

TEST_CASE("server usage is reported and the key is sent") {
    FakeServer srv;
    ::setenv("AGENTORCH_TEST_KEY", "sk-test", 1);
    HttpBackend backend(config_for(srv.url("/ok")));
    ::unsetenv("AGENTORCH_TEST_KEY");
    const auto r = backend.complete(request());
    CHECK(r.text == "Paris");
    CHECK(r.prompt_tokens == 12);
    CHECK(r.completion_tokens == 1);
    CHECK(r.latency_seconds >= 0.0);
    CHECK(srv.last_auth_ == "Bearer sk-test");
    const auto sent = nlohmann::json::parse(srv.last_body_);
    CHECK(sent["model"] == "test-model");
    CHECK(sent["messages"][0]["content"] == "capital of France?");
}

TEST_CASE("missing usage falls back to estimates") {
    FakeServer srv;
    HttpBackend backend(config_for(srv.url("/nousage")));
    const auto r = backend.complete(request());
    CHECK(r.prompt_tokens == 3);
    CHECK(r.completion_tokens == 2);
    CHECK(srv.last_auth_.empty());
}

TEST_CASE("one retry on transient status") {
    FakeServer srv;
    HttpBackend flaky(config_for(srv.url("/flaky")));
    CHECK(flaky.complete(request()).text == "ok");
    CHECK(srv.flaky_hits_ == 2);

    HttpBackend down(config_for(srv.url("/down")));
    CHECK(category_of(down) == BackendErrorCategory::http_status);
    CHECK(srv.down_hits_ == 2);

    HttpBackend missing(config_for(srv.url("/notfound")));
    CHECK(category_of(missing) == BackendErrorCategory::http_status);
    CHECK(srv.notfound_hits_ == 1);
}

TEST_CASE("malformed body and transport failures") {
    FakeServer srv;
    HttpBackend garbage(config_for(srv.url("/garbage")));
    CHECK(category_of(garbage) == BackendErrorCategory::malformed_response);

    const std::string dead = srv.url("/ok");
    srv.server_.stop();
    HttpBackend unreachable(config_for(dead));
    CHECK(category_of(unreachable) == BackendErrorCategory::transport);
}

TEST_CASE("in-flight requests are capped") {
    FakeServer srv;
    auto cfg = config_for(srv.url("/slow"));
    cfg.max_in_flight = 2;
    HttpBackend backend(cfg);
    std::vector<std::thread> workers;
    for (int i = 0; i < 6; ++i) workers.emplace_back([&] { backend.complete(request()); });
    for (auto& w : workers) w.join();
    CHECK(srv.max_in_flight_ >= 1);
    CHECK(srv.max_in_flight_ <= 2);
}

TEST_CASE("endpoint validation") {
    CHECK_THROWS_AS(HttpBackend(config_for("localhost:8000/v1")), InvalidInputError);
    CHECK_THROWS_AS(HttpBackend(config_for("ftp://host/x")), InvalidInputError);
}
