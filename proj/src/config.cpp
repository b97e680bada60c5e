#include "sosecure/config.hpp"

#include <charconv>
#include <cstdlib>

#include "sosecure/util.hpp"

namespace sosecure::config {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

std::string parse_quoted(std::string_view raw, std::size_t line_no) {
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
        fail(line_no, "expected a quoted string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\\' && i + 2 < raw.size()) {
            char esc = raw[++i];
            switch (esc) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: fail(line_no, std::string("unsupported escape \\") + esc);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

TomlValue parse_value(std::string_view raw, std::size_t line_no) {
    raw = trim(raw);
    if (raw.empty()) fail(line_no, "missing value");
    if (raw.front() == '"') return parse_quoted(raw, line_no);
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '[') {
        if (raw.back() != ']') fail(line_no, "unterminated array");
        std::vector<std::string> items;
        std::string_view inner = trim(raw.substr(1, raw.size() - 2));
        while (!inner.empty()) {
            if (inner.front() != '"') fail(line_no, "arrays may contain only quoted strings");
            std::size_t close = inner.find('"', 1);
            while (close != std::string_view::npos && inner[close - 1] == '\\')
                close = inner.find('"', close + 1);
            if (close == std::string_view::npos) fail(line_no, "unterminated string in array");
            items.push_back(parse_quoted(inner.substr(0, close + 1), line_no));
            inner = trim(inner.substr(close + 1));
            if (!inner.empty()) {
                if (inner.front() != ',') fail(line_no, "expected ',' between array items");
                inner = trim(inner.substr(1));
            }
        }
        return items;
    }
    // number: int first, then float
    {
        std::int64_t iv = 0;
        auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
        if (ec == std::errc() && ptr == raw.data() + raw.size()) return iv;
    }
    {
        char* end = nullptr;
        const std::string copy(raw);
        const double dv = std::strtod(copy.c_str(), &end);
        if (end == copy.c_str() + copy.size() && !copy.empty()) return dv;
    }
    fail(line_no, "unrecognized value: " + std::string(raw));
}

// strips a trailing comment that starts outside all quotes
std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

struct Reader {
    const std::map<std::string, TomlValue>& values;
    std::map<std::string, bool> consumed;

    explicit Reader(const std::map<std::string, TomlValue>& v) : values(v) {
        for (const auto& [k, unused] : values) consumed[k] = false;
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        auto it = values.find(key);
        if (it == values.end()) return;
        consumed[key] = true;
        if (const T* v = std::get_if<T>(&it->second)) {
            out = *v;
            return;
        }
        // allow integer literals for double-typed keys
        if constexpr (std::is_same_v<T, double>) {
            if (const std::int64_t* iv = std::get_if<std::int64_t>(&it->second)) {
                out = static_cast<double>(*iv);
                return;
            }
        }
        throw ConfigError("config key '" + key + "' has the wrong type");
    }

    void get_int(const std::string& key, int& out) {
        std::int64_t v = out;
        get(key, v);
        out = static_cast<int>(v);
    }

    void check_all_consumed() const {
        for (const auto& [key, used] : consumed)
            if (!used) throw ConfigError("unknown config key: " + key);
    }
};

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
    std::map<std::string, TomlValue> values;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = std::min(text.find('\n', pos), text.size());
        ++line_no;
        std::string_view line = trim(strip_comment(std::string_view(text).substr(pos, eol - pos)));
        pos = eol + 1;
        if (line.empty()) {
            if (eol >= text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) fail(line_no, "empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) fail(line_no, "empty key");
        const std::string full_key = section.empty() ? key : section + "." + key;
        if (values.count(full_key)) fail(line_no, "duplicate key: " + full_key);
        values[full_key] = parse_value(line.substr(eq + 1), line_no);
        if (eol >= text.size()) break;
    }
    return values;
}

AppConfig AppConfig::from_file(const std::filesystem::path& path) {
    return from_toml(read_file(path));
}

AppConfig AppConfig::from_toml(const std::string& text) {
    AppConfig cfg;
    Reader reader(parse_toml(text));

    reader.get("kb_path", cfg.kb_path);
    reader.get("index_path", cfg.index_path);
    reader.get("keyword_file", cfg.keyword_file);

    reader.get("bm25.k1", cfg.bm25.k1);
    reader.get("bm25.b", cfg.bm25.b);
    reader.get("bm25.idf_floor_epsilon", cfg.bm25.idf_floor_epsilon);
    reader.get("bm25.split_subtokens", cfg.bm25.split_subtokens);

    reader.get_int("retrieval.k", cfg.retrieval_k);

    reader.get("llm.base_url", cfg.llm.base_url);
    reader.get("llm.model", cfg.llm.model);
    reader.get("llm.temperature", cfg.llm.temperature);
    reader.get_int("llm.max_tokens", cfg.llm.max_tokens);
    reader.get_int("llm.timeout_seconds", cfg.llm.timeout_seconds);
    reader.get_int("llm.retry_budget", cfg.llm.retry_budget);
    reader.get_int("llm.backoff_ms", cfg.llm.backoff_ms);
    reader.get_int("llm.parallel", cfg.llm.parallel);
    reader.get_int("llm.max_context_tokens", cfg.llm.max_context_tokens);

    reader.get("analyzer.python_template", cfg.analyzer.python);
    reader.get("analyzer.c_template", cfg.analyzer.c);
    reader.get_int("analyzer.jobs", cfg.analyzer.jobs);

    reader.get("eval.trust_labels", cfg.trust_labels);

    reader.check_all_consumed();
    cfg.validate();
    return cfg;
}

void AppConfig::validate() const {
    if (retrieval_k < 1) throw ConfigError("retrieval.k must be >= 1");
    try {
        bm25.validate();
        llm.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (analyzer.jobs < 1) throw ConfigError("analyzer.jobs must be >= 1");
}

}  // namespace sosecure::config
