#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sosecure/bm25.hpp"
#include "sosecure/revision.hpp"

namespace sosecure::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using TomlValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

/// Minimal TOML reader covering the config surface: [section] headers,
/// key = "string" | integer | float | true/false | ["array", "of", "strings"],
/// and # comments. Keys are returned as "section.key".
std::map<std::string, TomlValue> parse_toml(const std::string& text);

struct AnalyzerTemplates {
    std::string python;  // command template with {input_dir}/{output_sarif}/{language}
    std::string c;
    int jobs = 2;
};

struct AppConfig {
    std::string kb_path = "kb.jsonl";
    std::string index_path = "kb.index.json";
    std::string keyword_file;  // empty = built-in default keywords

    bm25::Bm25Params bm25;
    int retrieval_k = 3;

    revision::LlmConfig llm;
    AnalyzerTemplates analyzer;
    bool trust_labels = false;

    /// Parses a TOML config file; unknown keys are rejected. Secrets are
    /// never read from the file: SOSECURE_API_KEY / SOSECURE_API_BASE come
    /// from the environment.
    static AppConfig from_file(const std::filesystem::path& path);
    static AppConfig from_toml(const std::string& text);

    void validate() const;  // throws ConfigError
};

}  // namespace sosecure::config
