#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dars/jsonl.hpp"

namespace dars {

/// Sampling parameters for one endpoint role. Unset fields are omitted from
/// the wire request so the provider's defaults apply.
struct GenerationProfile {
    std::string model_name;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
    std::optional<double> top_p;
    std::vector<std::string> stop_sequences;
};

namespace profiles {
/// Greedy decoding for scoring runs.
GenerationProfile eval(std::string model = "");
/// Prompted-critic runs: temperature 0.7, 1024 completion tokens.
GenerationProfile baseline_critic(std::string model = "");
/// Reflection synthesis: provider-default sampling.
GenerationProfile synthesis(std::string model = "");
}  // namespace profiles

enum class Role { System, User, Assistant };

const char* to_string(Role role);
Role role_from_string(const std::string& value);

struct ChatMessage {
    Role role = Role::User;
    std::string content;
};

/// Leading system message optional, then strictly alternating user/assistant
/// starting with user. Throws ValidationError.
void validate_chat_messages(const std::vector<ChatMessage>& messages);

struct ChatRequest {
    std::vector<ChatMessage> messages;
    GenerationProfile profile;
};

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long total_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string finish_reason;
    Usage usage;
    double latency_ms = 0.0;
    int attempts = 1;
};

/// Chat-completion request body: model, messages, then any set sampling
/// fields. Shared by the HTTP backend and the wire-shape tests.
ojson encode_chat_request(const ChatRequest& request);

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{250};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
};

/// Delay before retry number `attempt` (1-based). Non-decreasing in attempt.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    /// Single attempt, no retries. Throws TransientGatewayError for failures
    /// the gateway may retry.
    virtual ChatResponse complete_once(const ChatRequest& request) = 0;
};

/// Deterministic in-process backend for tests and offline pipelines.
///
/// Two modes that can be combined: a FIFO queue of canned entries consumed
/// first, then content-keyed rules matched against the concatenated message
/// contents (first rule whose substrings all appear wins, else the default
/// reply). Entries and rules can inject failures. Every request is logged.
class ScriptedBackend : public ChatBackend {
  public:
    struct Rule {
        std::vector<std::string> contains_all;
        std::string reply;
        int transient_failures = 0;  // consumed before the reply is served
    };

    ScriptedBackend() = default;

    void push_reply(std::string text);
    void push_transient(int count = 1);
    void push_auth_failure();
    void push_malformed();
    void add_rule(Rule rule);
    void set_default_reply(std::string text);

    /// Script file shape: {"replies": [...], "rules": [{"contains_all": [...],
    /// "reply": "...", "transient_failures": 0}], "default_reply": "..."}.
    /// Queue entries may also be {"fail": "transient"|"auth"|"malformed"}.
    static std::shared_ptr<ScriptedBackend> from_json(const json& script);
    static std::shared_ptr<ScriptedBackend> from_file(const std::string& path);

    ChatResponse complete_once(const ChatRequest& request) override;

    size_t request_count() const;
    std::vector<ChatRequest> request_log() const;

  private:
    struct Entry {
        enum class Kind { Reply, Transient, Auth, Malformed };
        Kind kind = Kind::Reply;
        std::string text;
    };

    mutable std::mutex mu_;
    std::deque<Entry> queue_;
    std::vector<Rule> rules_;
    std::optional<std::string> default_reply_;
    std::vector<ChatRequest> log_;
};

/// Talks to an OpenAI-compatible chat-completion endpoint over HTTP(S).
/// The API key is read from an environment variable, never from files.
class HttpBackend : public ChatBackend {
  public:
    struct Options {
        std::string base_url;  // e.g. "http://localhost:8000/v1"
        std::string api_key_env = "OPENAI_API_KEY";
        std::chrono::seconds timeout{120};
    };

    explicit HttpBackend(Options options);
    ChatResponse complete_once(const ChatRequest& request) override;

  private:
    Options options_;
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // path part of base_url, no trailing slash
};

/// Retry, backoff, and request-parallelism wrapper around a backend.
class ChatGateway {
  public:
    explicit ChatGateway(std::shared_ptr<ChatBackend> backend, RetryPolicy policy = {},
                         int parallelism = 4);

    /// Retries transient failures with exponential backoff; authentication
    /// and wire-format errors surface immediately. At most `parallelism`
    /// calls run concurrently.
    ChatResponse complete(const ChatRequest& request);

    Usage usage_totals() const;
    long requests_completed() const;
    long attempts_made() const;

  private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy policy_;
    int parallelism_;

    mutable std::mutex mu_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
    Usage totals_;
    long requests_ = 0;
    long attempts_ = 0;
};

}  // namespace dars
