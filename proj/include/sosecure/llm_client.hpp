#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sosecure::llm {

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model;
    double temperature = 0.0;
    int max_tokens = 0;  // 0 = leave unset
    std::vector<ChatMessage> messages;
};

struct ChatReply {
    std::string content;  // assistant message text
};

/// Connection-level failure; retryable.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Definitive API rejection (bad request, auth); not retryable.
class ApiError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatReply complete(const ChatRequest& request) = 0;
};

struct HttpClientOptions {
    std::string base_url;  // e.g. "https://api.openai.com/v1"
    std::string completion_path = "/chat/completions";
    std::string api_key;
    std::string auth_header = "Authorization";  // sent as "<header>: Bearer <key>"
    int timeout_seconds = 60;
};

/// JSON-over-HTTP client speaking the common chat-completions wire shape:
/// request {model, temperature, messages:[{role, content}]}, reply
/// choices[0].message.content. Server errors and connection failures raise
/// TransportError; other non-2xx statuses raise ApiError.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(HttpClientOptions options);

    ChatReply complete(const ChatRequest& request) override;

    /// Reads SOSECURE_API_BASE and SOSECURE_API_KEY; nullopt when the base
    /// URL is not configured.
    static std::optional<HttpClientOptions> options_from_env();

private:
    HttpClientOptions options_;
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // remainder of base_url
};

/// Deterministic stand-in for tests and offline runs.
///
/// Echo mode replies with the first fenced code block found in the last user
/// message, re-fenced. Map mode resolves replies from substring rules:
///   { "mode": "map"|"echo",
///     "replies": [ { "match": "<prompt substring>", "reply": "..." } ],
///     "default": "..." }          // optional; falls back to echo
class MockChatClient : public ChatClient {
public:
    static MockChatClient echo();
    static MockChatClient from_file(const std::filesystem::path& path);

    ChatReply complete(const ChatRequest& request) override;

    /// Number of completions served; handy for asserting retry behavior.
    int calls() const { return calls_.load(); }

    /// Fail the next n completions with TransportError before succeeding.
    void fail_next(int n) { fail_next_.store(n); }

    MockChatClient() = default;
    MockChatClient(MockChatClient&& other) noexcept
        : echo_mode_(other.echo_mode_),
          rules_(std::move(other.rules_)),
          default_reply_(std::move(other.default_reply_)),
          calls_(other.calls_.load()),
          fail_next_(other.fail_next_.load()) {}

private:
    struct Rule {
        std::string match;
        std::string reply;
    };
    bool echo_mode_ = true;
    std::vector<Rule> rules_;
    std::optional<std::string> default_reply_;
    std::atomic<int> calls_{0};
    std::atomic<int> fail_next_{0};
};

/// First fenced code block of a chat reply (``` ... ```); nullopt when the
/// text has no opening fence. A missing closing fence captures to the end.
std::optional<std::string> extract_first_fenced_block(std::string_view text);

/// Wraps code in a backtick fence long enough to contain it.
std::string fence_code(std::string_view code, std::string_view language_tag = "");

}  // namespace sosecure::llm
