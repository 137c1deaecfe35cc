#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "agentorch/llm_backend.hpp"

namespace agentorch {

struct HttpBackend::Endpoint {
    std::string scheme_host_port;
    std::string path;
};

namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)), slots_(std::max(1, config_.max_in_flight)) {
    const std::string& url = config_.endpoint;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidInputError("endpoint must be an absolute http(s) URL: " + url);
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw InvalidInputError("unsupported endpoint scheme: " + scheme);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    endpoint_ = std::make_unique<Endpoint>();
    endpoint_->scheme_host_port = url.substr(0, path_start);
    endpoint_->path = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            api_key_ = key;
        }
    }
}

HttpBackend::~HttpBackend() = default;

BackendResponse HttpBackend::complete(const BackendRequest& request) {
    request.validate();
    const std::string body = build_chat_request_body(request, config_.model);

    httplib::Headers headers;
    if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);

    slots_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{slots_};

    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    constexpr int kAttempts = 2;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry_backoff_ms << attempt));
        }
        httplib::Client client(endpoint_->scheme_host_port);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

        const auto start = std::chrono::steady_clock::now();
        auto result = client.Post(endpoint_->path, headers, body, "application/json");
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (!result) {
            if (attempt + 1 < kAttempts) continue;
            throw BackendError(BackendErrorCategory::transport, httplib::to_string(result.error()));
        }
        if (result->status < 200 || result->status >= 300) {
            if (transient_status(result->status) && attempt + 1 < kAttempts) continue;
            throw BackendError(BackendErrorCategory::http_status,
                               "status " + std::to_string(result->status));
        }
        BackendResponse response = parse_chat_response_body(result->body, request);
        response.latency_seconds = elapsed;
        return response;
    }
    throw BackendError(BackendErrorCategory::transport, "retries exhausted");
}

}  // namespace agentorch
