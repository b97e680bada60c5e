#include "sosecure/llm_client.hpp"

#include <algorithm>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "sosecure/util.hpp"

namespace sosecure::llm {

namespace {

using nlohmann::json;

json request_to_json(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", request.model},
                 {"temperature", request.temperature},
                 {"messages", std::move(messages)}};
    if (request.max_tokens > 0) body["max_tokens"] = request.max_tokens;
    return body;
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::size_t fence_width(std::string_view line) {
    std::size_t n = 0;
    while (n < line.size() && line[n] == '`') ++n;
    return n >= 3 ? n : 0;
}

}  // namespace

std::optional<std::string> extract_first_fenced_block(std::string_view text) {
    std::size_t pos = 0;
    std::size_t open_width = 0;
    std::optional<std::size_t> body_start;
    while (pos <= text.size()) {
        const auto eol = std::min(text.find('\n', pos), text.size());
        const auto line = strip(text.substr(pos, eol - pos));
        const auto width = fence_width(line);
        if (!body_start) {
            if (width > 0) {
                open_width = width;
                body_start = eol + 1;
            }
        } else if (width >= open_width && line.find_first_not_of('`') == std::string_view::npos) {
            const auto start = std::min(*body_start, text.size());
            auto block = std::string(text.substr(start, pos > start ? pos - start : 0));
            if (!block.empty() && block.back() == '\n') block.pop_back();
            return block;
        }
        if (eol >= text.size()) break;
        pos = eol + 1;
    }
    if (body_start) {  // missing closing fence: take the remainder
        const auto start = std::min(*body_start, text.size());
        auto block = std::string(text.substr(start));
        if (!block.empty() && block.back() == '\n') block.pop_back();
        return block;
    }
    return std::nullopt;
}

std::string fence_code(std::string_view code, std::string_view language_tag) {
    std::size_t longest_run = 0;
    std::size_t run = 0;
    for (char c : code) {
        run = c == '`' ? run + 1 : 0;
        longest_run = std::max(longest_run, run);
    }
    const std::string fence(std::max<std::size_t>(3, longest_run + 1), '`');
    std::string out = fence;
    out += language_tag;
    out += '\n';
    out += code;
    if (!code.empty() && code.back() != '\n') out += '\n';
    out += fence;
    return out;
}

HttpChatClient::HttpChatClient(HttpClientOptions options) : options_(std::move(options)) {
    const auto scheme_end = options_.base_url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = options_.base_url.find('/', host_start);
    if (slash == std::string::npos) {
        host_ = options_.base_url;
    } else {
        host_ = options_.base_url.substr(0, slash);
        path_prefix_ = options_.base_url.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
    if (host_.empty()) throw std::invalid_argument("llm: endpoint base URL must not be empty");
}

ChatReply HttpChatClient::complete(const ChatRequest& request) {
    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    client.set_write_timeout(options_.timeout_seconds);

    httplib::Headers headers;
    if (!options_.api_key.empty())
        headers.emplace(options_.auth_header, "Bearer " + options_.api_key);

    const std::string body = request_to_json(request).dump();
    auto res = client.Post(path_prefix_ + options_.completion_path, headers, body,
                           "application/json");
    if (!res)
        throw TransportError("llm: connection to " + host_ +
                             " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("llm: server returned status " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300)
        throw ApiError("llm: request rejected with status " + std::to_string(res->status) + ": " +
                       res->body.substr(0, 200));

    try {
        const auto reply = json::parse(res->body);
        return {reply.at("choices").at(0).at("message").at("content").get<std::string>()};
    } catch (const json::exception& e) {
        throw ApiError("llm: malformed completion reply: " + std::string(e.what()));
    }
}

std::optional<HttpClientOptions> HttpChatClient::options_from_env() {
    const char* base = std::getenv("SOSECURE_API_BASE");
    if (!base || !*base) return std::nullopt;
    HttpClientOptions options;
    options.base_url = base;
    if (const char* key = std::getenv("SOSECURE_API_KEY")) options.api_key = key;
    return options;
}

MockChatClient MockChatClient::echo() {
    return MockChatClient{};
}

MockChatClient MockChatClient::from_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("mock llm file is not valid JSON: " + std::string(e.what()));
    }
    MockChatClient mock;
    mock.echo_mode_ = doc.value("mode", "map") == "echo";
    if (doc.contains("replies"))
        for (const auto& rule : doc["replies"])
            mock.rules_.push_back({rule.at("match").get<std::string>(),
                                   rule.at("reply").get<std::string>()});
    if (doc.contains("default") && doc["default"].is_string())
        mock.default_reply_ = doc["default"].get<std::string>();
    if (!mock.rules_.empty() || mock.default_reply_) mock.echo_mode_ = false;
    return mock;
}

ChatReply MockChatClient::complete(const ChatRequest& request) {
    calls_.fetch_add(1);
    if (fail_next_.load() > 0) {
        fail_next_.fetch_sub(1);
        throw TransportError("mock llm: injected transport failure");
    }
    std::string prompt;
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == "user") {
            prompt = it->content;
            break;
        }
    }
    if (!echo_mode_) {
        for (const auto& rule : rules_)
            if (prompt.find(rule.match) != std::string::npos) return {rule.reply};
        if (default_reply_) return {*default_reply_};
    }
    // echo: return the prompt's code block unchanged
    if (auto block = extract_first_fenced_block(prompt)) return {fence_code(*block)};
    return {prompt};
}

}  // namespace sosecure::llm
