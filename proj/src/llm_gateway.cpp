#include "dars/llm_gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "dars/errors.hpp"

namespace dars {

namespace profiles {

GenerationProfile eval(std::string model) {
    GenerationProfile p;
    p.model_name = std::move(model);
    p.temperature = 0.0;
    return p;
}

GenerationProfile baseline_critic(std::string model) {
    GenerationProfile p;
    p.model_name = std::move(model);
    p.temperature = 0.7;
    p.max_tokens = 1024;
    return p;
}

GenerationProfile synthesis(std::string model) {
    GenerationProfile p;
    p.model_name = std::move(model);
    return p;
}

}  // namespace profiles

const char* to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(const std::string& value) {
    if (value == "system") return Role::System;
    if (value == "user") return Role::User;
    if (value == "assistant") return Role::Assistant;
    throw ValidationError("role: unknown value \"" + value + "\"");
}

void validate_chat_messages(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw ValidationError("messages: empty");
    size_t start = 0;
    if (messages[0].role == Role::System) start = 1;
    if (start == messages.size())
        throw ValidationError("messages: system message without a conversation");
    for (size_t i = start; i < messages.size(); ++i) {
        const Role expected = ((i - start) % 2 == 0) ? Role::User : Role::Assistant;
        if (messages[i].role == Role::System)
            throw ValidationError("messages[" + std::to_string(i) +
                                  "]: system role only allowed in first position");
        if (messages[i].role != expected)
            throw ValidationError("messages[" + std::to_string(i) + "]: expected " +
                                  std::string(to_string(expected)) + " role, found " +
                                  to_string(messages[i].role));
        if (messages[i].content.empty())
            throw ValidationError("messages[" + std::to_string(i) + "]: empty content");
    }
}

ojson encode_chat_request(const ChatRequest& request) {
    ojson body;
    body["model"] = request.profile.model_name;
    ojson messages = ojson::array();
    for (const auto& m : request.messages) {
        messages.push_back(ojson{{"role", to_string(m.role)}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    if (request.profile.temperature) body["temperature"] = *request.profile.temperature;
    if (request.profile.max_tokens) body["max_tokens"] = *request.profile.max_tokens;
    if (request.profile.top_p) body["top_p"] = *request.profile.top_p;
    if (!request.profile.stop_sequences.empty()) body["stop"] = request.profile.stop_sequences;
    return body;
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
    double ms = static_cast<double>(policy.initial_backoff.count()) *
                std::pow(policy.backoff_multiplier, std::max(0, attempt - 1));
    ms = std::min(ms, static_cast<double>(policy.max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
}

// ---------------------------------------------------------------------------
// ScriptedBackend

void ScriptedBackend::push_reply(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.push_back(Entry{Entry::Kind::Reply, std::move(text)});
}

void ScriptedBackend::push_transient(int count) {
    std::lock_guard<std::mutex> lock(mu_);
    for (int i = 0; i < count; ++i) queue_.push_back(Entry{Entry::Kind::Transient, {}});
}

void ScriptedBackend::push_auth_failure() {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.push_back(Entry{Entry::Kind::Auth, {}});
}

void ScriptedBackend::push_malformed() {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.push_back(Entry{Entry::Kind::Malformed, {}});
}

void ScriptedBackend::add_rule(Rule rule) {
    std::lock_guard<std::mutex> lock(mu_);
    rules_.push_back(std::move(rule));
}

void ScriptedBackend::set_default_reply(std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    default_reply_ = std::move(text);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script) {
    if (!script.is_object()) throw ParseError("script: expected a JSON object");
    auto backend = std::make_shared<ScriptedBackend>();
    if (script.contains("replies")) {
        for (const auto& item : script.at("replies")) {
            if (item.is_string()) {
                backend->push_reply(item.get<std::string>());
            } else if (item.is_object() && item.contains("fail")) {
                const std::string kind = item.at("fail").get<std::string>();
                if (kind == "transient") backend->push_transient();
                else if (kind == "auth") backend->push_auth_failure();
                else if (kind == "malformed") backend->push_malformed();
                else throw ParseError("script.replies: unknown failure kind \"" + kind + "\"");
            } else {
                throw ParseError("script.replies: expected strings or {\"fail\": ...} objects");
            }
        }
    }
    if (script.contains("rules")) {
        for (const auto& r : script.at("rules")) {
            Rule rule;
            for (const auto& s : r.at("contains_all")) rule.contains_all.push_back(s.get<std::string>());
            rule.reply = r.at("reply").get<std::string>();
            rule.transient_failures = r.value("transient_failures", 0);
            backend->add_rule(std::move(rule));
        }
    }
    if (script.contains("default_reply"))
        backend->set_default_reply(script.at("default_reply").get<std::string>());
    return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    json doc = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ParseError("malformed script file: " + path);
    try {
        return from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

ChatResponse ScriptedBackend::complete_once(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    log_.push_back(request);

    auto respond = [](std::string text) {
        ChatResponse r;
        r.text = std::move(text);
        r.finish_reason = "stop";
        r.latency_ms = 0.0;
        return r;
    };

    if (!queue_.empty()) {
        Entry entry = std::move(queue_.front());
        queue_.pop_front();
        switch (entry.kind) {
            case Entry::Kind::Reply: return respond(std::move(entry.text));
            case Entry::Kind::Transient:
                throw TransientGatewayError("scripted transient failure", 503);
            case Entry::Kind::Auth:
                throw AuthError("scripted authentication failure", 401);
            case Entry::Kind::Malformed:
                throw WireFormatError("scripted malformed response", 200);
        }
    }

    if (!rules_.empty()) {
        std::string haystack;
        for (const auto& m : request.messages) {
            haystack += m.content;
            haystack += '\n';
        }
        for (auto& rule : rules_) {
            const bool matched = std::all_of(
                rule.contains_all.begin(), rule.contains_all.end(),
                [&](const std::string& needle) { return haystack.find(needle) != std::string::npos; });
            if (!matched) continue;
            if (rule.transient_failures > 0) {
                --rule.transient_failures;
                throw TransientGatewayError("scripted transient failure", 503);
            }
            return respond(rule.reply);
        }
    }

    if (default_reply_) return respond(*default_reply_);
    throw ScriptExhaustedError("scripted backend has no reply for this request");
}

size_t ScriptedBackend::request_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_.size();
}

std::vector<ChatRequest> ScriptedBackend::request_log() const {
    std::lock_guard<std::mutex> lock(mu_);
    return log_;
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(Options options) : options_(std::move(options)) {
    const std::string& url = options_.base_url;
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ValidationError("base_url: missing scheme: " + url);
    size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = url;
    } else {
        origin_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

ChatResponse HttpBackend::complete_once(const ChatRequest& request) {
    httplib::Client client(origin_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);

    httplib::Headers headers;
    if (!options_.api_key_env.empty()) {
        // refuse to fire an uncredentialed request at an endpoint that expects auth;
        // an explicitly empty api_key_env opts into unauthenticated local endpoints
        const char* key = std::getenv(options_.api_key_env.c_str());
        if (!key || !*key)
            throw AuthError("environment variable " + options_.api_key_env +
                                " is not set; export it, or set api_key_env to \"\" for "
                                "unauthenticated endpoints",
                            0);
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const std::string body = encode_chat_request(request).dump();
    const auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    const double latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    if (!result)
        throw TransientGatewayError("connection to " + origin_ + " failed: " +
                                    httplib::to_string(result.error()), 0);

    const int status = result->status;
    if (status == 401 || status == 403)
        throw AuthError("authentication rejected by " + origin_, status);
    if (status == 408 || status == 429 || status >= 500)
        throw TransientGatewayError("transient HTTP " + std::to_string(status) + " from " + origin_,
                                    status);
    if (status != 200)
        throw TransportError("HTTP " + std::to_string(status) + " from " + origin_, status);

    json doc = json::parse(result->body, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw WireFormatError("response body is not JSON", status);
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
        throw WireFormatError("response has no choices", status);
    const json& choice = doc["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string())
        throw WireFormatError("response choice has no message content", status);

    ChatResponse response;
    response.text = choice["message"]["content"].get<std::string>();
    response.finish_reason = choice.value("finish_reason", "stop");
    if (doc.contains("usage") && doc["usage"].is_object()) {
        const json& usage = doc["usage"];
        response.usage.prompt_tokens = usage.value("prompt_tokens", 0L);
        response.usage.completion_tokens = usage.value("completion_tokens", 0L);
        response.usage.total_tokens = usage.value("total_tokens", 0L);
    }
    response.latency_ms = latency_ms;
    return response;
}

// ---------------------------------------------------------------------------
// ChatGateway

ChatGateway::ChatGateway(std::shared_ptr<ChatBackend> backend, RetryPolicy policy, int parallelism)
    : backend_(std::move(backend)), policy_(policy), parallelism_(std::max(1, parallelism)) {
    if (!backend_) throw ValidationError("gateway: backend is null");
    if (policy_.max_attempts < 1) throw ValidationError("retry policy: max_attempts must be >= 1");
}

ChatResponse ChatGateway::complete(const ChatRequest& request) {
    if (request.messages.empty()) throw ValidationError("request: no messages");

    {
        std::unique_lock<std::mutex> lock(mu_);
        slot_free_.wait(lock, [&] { return in_flight_ < parallelism_; });
        ++in_flight_;
    }
    struct SlotGuard {
        ChatGateway* g;
        ~SlotGuard() {
            std::lock_guard<std::mutex> lock(g->mu_);
            --g->in_flight_;
            g->slot_free_.notify_one();
        }
    } guard{this};

    int last_status = 0;
    std::string last_message;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++attempts_;
        }
        try {
            ChatResponse response = backend_->complete_once(request);
            if (response.text.empty() && response.finish_reason == "stop")
                throw WireFormatError("empty completion with normal finish reason", 0);
            response.attempts = attempt;
            std::lock_guard<std::mutex> lock(mu_);
            totals_.prompt_tokens += response.usage.prompt_tokens;
            totals_.completion_tokens += response.usage.completion_tokens;
            totals_.total_tokens += response.usage.total_tokens;
            ++requests_;
            return response;
        } catch (const TransientGatewayError& e) {
            last_status = e.status;
            last_message = e.what();
            if (attempt == policy_.max_attempts) break;
            std::this_thread::sleep_for(backoff_delay(policy_, attempt));
        }
    }
    throw TransportExhaustedError("retries exhausted after " + std::to_string(policy_.max_attempts) +
                                      " attempts: " + last_message,
                                  last_status, policy_.max_attempts);
}

Usage ChatGateway::usage_totals() const {
    std::lock_guard<std::mutex> lock(mu_);
    return totals_;
}

long ChatGateway::requests_completed() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
}

long ChatGateway::attempts_made() const {
    std::lock_guard<std::mutex> lock(mu_);
    return attempts_;
}

}  // namespace dars
