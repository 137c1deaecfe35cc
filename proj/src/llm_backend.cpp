#include "agentorch/llm_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace agentorch {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(BackendErrorCategory category) {
    switch (category) {
        case BackendErrorCategory::invalid_request: return "invalid_request";
        case BackendErrorCategory::transport: return "transport";
        case BackendErrorCategory::http_status: return "http_status";
        case BackendErrorCategory::malformed_response: return "malformed_response";
        case BackendErrorCategory::script_exhausted: return "script_exhausted";
    }
    return "transport";
}

void BackendRequest::validate() const {
    if (messages.empty()) {
        throw BackendError(BackendErrorCategory::invalid_request, "request has no messages");
    }
    if (max_output_tokens < 1) {
        throw BackendError(BackendErrorCategory::invalid_request, "max_output_tokens must be >= 1");
    }
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw BackendError(BackendErrorCategory::invalid_request, "temperature must be >= 0");
    }
}

long estimate_tokens(std::string_view text) {
    long count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

namespace {

long prompt_token_estimate(const BackendRequest& request) {
    long total = 0;
    for (const auto& m : request.messages) total += estimate_tokens(m.content);
    return total;
}

}  // namespace

// --- scripted --------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script)
    : script_(std::move(script)), consumed_(script_.size(), false) {}

ScriptedBackend ScriptedBackend::from_texts(const std::vector<std::string>& texts) {
    std::vector<ScriptEntry> entries;
    entries.reserve(texts.size());
    for (const auto& t : texts) entries.push_back({std::nullopt, t, false});
    return ScriptedBackend(std::move(entries));
}

BackendResponse ScriptedBackend::complete(const BackendRequest& request) {
    request.validate();
    ++calls_;
    for (std::size_t i = 0; i < script_.size(); ++i) {
        if (consumed_[i]) continue;
        const auto& entry = script_[i];
        if (entry.match && *entry.match != request.purpose) continue;
        if (!entry.repeat) consumed_[i] = true;
        return {entry.text, prompt_token_estimate(request), estimate_tokens(entry.text), 0.0};
    }
    throw BackendError(BackendErrorCategory::script_exhausted,
                       "no script entry left for purpose '" + request.purpose + "'");
}

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open script file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInputError("script file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) throw InvalidInputError("script file must hold a JSON array");
    std::vector<ScriptEntry> entries;
    for (const auto& item : doc) {
        if (item.is_string()) {
            entries.push_back({std::nullopt, item.get<std::string>(), false});
            continue;
        }
        if (!item.is_object() || !item.contains("text") || !item["text"].is_string()) {
            throw InvalidInputError("script entries need a string 'text' field");
        }
        ScriptEntry e;
        e.text = item["text"].get<std::string>();
        if (item.contains("match") && !item["match"].is_null()) {
            e.match = item["match"].get<std::string>();
        }
        e.repeat = item.value("repeat", false);
        entries.push_back(std::move(e));
    }
    return entries;
}

// --- wire format -----------------------------------------------------------

std::string build_chat_request_body(const BackendRequest& request, std::string_view model) {
    json body;
    if (!model.empty()) body["model"] = model;
    auto& messages = body["messages"] = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    return body.dump();
}

BackendResponse parse_chat_response_body(std::string_view body, const BackendRequest& request) {
    const json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw BackendError(BackendErrorCategory::malformed_response, "body is not a JSON object");
    }
    const auto choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty()) {
        throw BackendError(BackendErrorCategory::malformed_response, "missing choices");
    }
    const json& first = (*choices)[0];
    std::string text;
    if (first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content") && first["message"]["content"].is_string()) {
        text = first["message"]["content"].get<std::string>();
    } else if (first.contains("text") && first["text"].is_string()) {
        text = first["text"].get<std::string>();
    } else {
        throw BackendError(BackendErrorCategory::malformed_response, "choice has no content");
    }

    BackendResponse response;
    response.text = std::move(text);
    response.prompt_tokens = prompt_token_estimate(request);
    response.completion_tokens = estimate_tokens(response.text);
    if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
        if (auto p = usage->find("prompt_tokens"); p != usage->end() && p->is_number_integer()) {
            response.prompt_tokens = std::max<long>(0, p->get<long>());
        }
        if (auto c = usage->find("completion_tokens");
            c != usage->end() && c->is_number_integer()) {
            response.completion_tokens = std::max<long>(0, c->get<long>());
        }
    }
    return response;
}

// --- control signals -------------------------------------------------------

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// Index one past the brace matching text[open], or npos.
std::size_t matching_brace(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

std::optional<ControlOutput> read_control_object(const json& obj) {
    if (!obj.is_object() || !obj.contains("expected_gain") || !obj.contains("uncertainty")) {
        return std::nullopt;
    }
    const json& gain = obj["expected_gain"];
    const json& unc = obj["uncertainty"];
    if (!unc.is_number()) return std::nullopt;

    ControlOutput out;
    if (gain.is_number()) {
        out.signals.per_action_gain = PerAction<double>::filled(clip01(gain.get<double>()));
    } else if (gain.is_object()) {
        // Kinds the model leaves out are taken as offering no gain.
        out.signals.per_action_gain = PerAction<double>::filled(0.0);
        for (const auto& [key, value] : gain.items()) {
            auto kind = parse_action_kind(key);
            if (!kind) continue;
            if (!value.is_number()) return std::nullopt;
            out.signals.per_action_gain[*kind] = clip01(value.get<double>());
        }
    } else {
        return std::nullopt;
    }
    out.signals.uncertainty = clip01(unc.get<double>());
    out.signals.parse_ok = true;

    auto text_field = [](const json& o, std::string_view key) -> std::optional<std::string> {
        auto it = o.find(key);
        if (it == o.end() || !it->is_string()) return std::nullopt;
        return it->get<std::string>();
    };
    if (auto args = obj.find("arguments"); args != obj.end() && args->is_object()) {
        for (ActionKind kind : {ActionKind::retrieve, ActionKind::tool_call, ActionKind::verify}) {
            if (auto v = text_field(*args, to_string(kind)); v && !v->empty()) {
                out.arguments[kind] = std::move(v);
            }
        }
    }
    if (!out.arguments[ActionKind::retrieve]) {
        if (auto q = text_field(obj, "query"); q && !q->empty()) {
            out.arguments[ActionKind::retrieve] = std::move(q);
        }
    }
    out.draft_answer = text_field(obj, "draft_answer");
    return out;
}

}  // namespace

ControlOutput parse_control_output(std::string_view text) {
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
         pos = text.find('{', pos + 1)) {
        const std::size_t end = matching_brace(text, pos);
        if (end == std::string_view::npos) continue;
        const json obj = json::parse(text.substr(pos, end - pos), nullptr, false);
        if (obj.is_discarded()) continue;
        if (auto out = read_control_object(obj)) return *std::move(out);
    }
    return ControlOutput{};
}

SignalEstimate parse_signals(std::string_view text) { return parse_control_output(text).signals; }

}  // namespace agentorch
