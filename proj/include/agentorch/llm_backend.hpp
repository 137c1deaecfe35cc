#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "agentorch/core_state.hpp"
#include "agentorch/errors.hpp"

namespace agentorch {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct Message {
    Role role = Role::user;
    std::string content;
};

/// Purpose tags route scripted responses; they are not sent over the wire.
namespace purpose {
inline constexpr std::string_view control = "control";
inline constexpr std::string_view answer = "answer";
inline constexpr std::string_view verify = "verify";
inline constexpr std::string_view reformulate = "reformulate";
inline constexpr std::string_view react = "react";
}  // namespace purpose

struct BackendRequest {
    std::vector<Message> messages;
    int max_output_tokens = 256;
    double temperature = 0.0;
    std::string purpose;

    /// Throws BackendError(invalid_request).
    void validate() const;
};

struct BackendResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double latency_seconds = 0.0;

    long total_tokens() const { return prompt_tokens + completion_tokens; }
};

enum class BackendErrorCategory {
    invalid_request,
    transport,
    http_status,
    malformed_response,
    script_exhausted
};

std::string_view to_string(BackendErrorCategory category);

class BackendError : public Error {
public:
    BackendError(BackendErrorCategory category, const std::string& message)
        : Error(std::string(to_string(category)) + ": " + message), category_(category) {}

    BackendErrorCategory category() const noexcept { return category_; }

private:
    BackendErrorCategory category_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
};

/// Whitespace-separated unit count; stands in for usage the server omits.
long estimate_tokens(std::string_view text);

struct ScriptEntry {
    std::optional<std::string> match;  // purpose tag; absent matches any request
    std::string text;
    bool repeat = false;  // served for every matching request, never consumed
};

/// Replays canned responses. Each request takes the first unconsumed entry
/// whose tag is absent or equals the request purpose. Usage is estimated
/// from the messages and the reply; latency is always zero.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> script);

    static ScriptedBackend from_texts(const std::vector<std::string>& texts);

    BackendResponse complete(const BackendRequest& request) override;

    std::size_t calls() const { return calls_; }

private:
    std::vector<ScriptEntry> script_;
    std::vector<bool> consumed_;
    std::size_t calls_ = 0;
};

/// Reads a JSON array of {"match"?, "text", "repeat"?} objects.
std::vector<ScriptEntry> load_script(const std::filesystem::path& path);

struct HttpBackendConfig {
    // Full URL of the chat-completions route, e.g.
    // http://localhost:8000/v1/chat/completions
    std::string endpoint;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    int max_in_flight = 4;
    double timeout_seconds = 60.0;
    int retry_backoff_ms = 500;
};

/// OpenAI-compatible chat-completions client. Safe for concurrent use; at most
/// `max_in_flight` requests are outstanding at once.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    BackendResponse complete(const BackendRequest& request) override;

private:
    struct Endpoint;

    HttpBackendConfig config_;
    std::unique_ptr<Endpoint> endpoint_;
    std::optional<std::string> api_key_;
    std::counting_semaphore<> slots_;
};

/// Serializes a request into the chat-completions JSON body.
std::string build_chat_request_body(const BackendRequest& request, std::string_view model);

/// Extracts text and usage from a chat-completions JSON body. Missing usage
/// falls back to estimate_tokens. Throws BackendError(malformed_response).
BackendResponse parse_chat_response_body(std::string_view body, const BackendRequest& request);

// ---------------------------------------------------------------------------
// Control signals

/// Everything the control prompt asks the model to emit.
struct ControlOutput {
    SignalEstimate signals;
    PerAction<std::optional<std::string>> arguments;
    std::optional<std::string> draft_answer;
};

/// Finds the first well-formed JSON object carrying both `expected_gain`
/// (number or per-action map) and `uncertainty`, clipping every value into
/// [0,1]. Failure yields the 0.5/0.5 defaults with parse_ok=false.
ControlOutput parse_control_output(std::string_view text);

SignalEstimate parse_signals(std::string_view text);

}  // namespace agentorch
