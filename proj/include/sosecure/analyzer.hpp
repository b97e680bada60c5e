#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sosecure::analyzer {

class BridgeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EnvironmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SarifError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Language { python, c };

std::string to_string(Language lang);
Language language_from_string(std::string_view name);  // throws std::invalid_argument

struct Finding {
    std::string tool;
    std::string rule_id;
    std::vector<std::string> cwes;  // sorted "CWE-NNN" ids; may be empty
    std::string file;
    int line = 1;
    std::string message;
};

struct AnalysisRun {
    std::string tool;
    Language language = Language::python;
    std::string input_id;  // content hash of the analyzed snippet
    std::vector<Finding> findings;
    int exit_status = 0;
    double wall_time_seconds = 0.0;
};

/// "external/cwe/cwe-78" (any case) -> "CWE-078"; empty string when the tag
/// is not a CWE tag.
std::string normalize_cwe_tag(std::string_view tag);

/// SARIF 2.1.0: rule ids from result.ruleId, CWEs from the owning rule's
/// properties.tags, location from the first physical location. Throws
/// SarifError when the runs array is missing or the input is not JSON.
std::vector<Finding> parse_sarif(std::string_view sarif_bytes);

/// Union of CWE ids across a run's findings.
std::set<std::string> cwe_set(const AnalysisRun& run);

struct CweDiff {
    std::vector<std::string> fixed;       // before \ after
    std::vector<std::string> persisted;   // before ∩ after
    std::vector<std::string> introduced;  // after \ before
};

CweDiff diff_cwe_sets(const std::set<std::string>& before, const std::set<std::string>& after);

struct FindingsDiff {
    CweDiff cwes;
    CweDiff rules;  // same triple over rule ids of findings that carry no CWE tag
};

/// Both runs must be on the same language (std::invalid_argument otherwise).
FindingsDiff diff_findings(const AnalysisRun& before, const AnalysisRun& after);

class Analyzer {
public:
    virtual ~Analyzer() = default;
    virtual AnalysisRun analyze(const std::string& code, Language language) = 0;
};

/// Runs an external tool over a private temp workspace holding one
/// snippet.py / snippet.c file. The command template may use {input_dir},
/// {output_sarif} and {language} placeholders.
class CommandAnalyzer : public Analyzer {
public:
    explicit CommandAnalyzer(std::string command_template, std::string tool_name = "");

    AnalysisRun analyze(const std::string& code, Language language) override;

private:
    std::string command_template_;
    std::string tool_name_;
};

/// Canned SARIF keyed by snippet hash or substring; hermetic and
/// deterministic, for tests and offline runs.
///
/// File format:
///   { "default": <sarif|null>,
///     "by_hash": { "<fnv1a64 hex of code>": <sarif>, ... },
///     "by_match": [ { "match": "<code substring>", "sarif": <sarif> }, ... ] }
class MockAnalyzer : public Analyzer {
public:
    static MockAnalyzer from_file(const std::filesystem::path& path);
    static MockAnalyzer empty();  // always reports zero findings

    AnalysisRun analyze(const std::string& code, Language language) override;

private:
    struct MatchRule {
        std::string match;
        std::string sarif;
    };
    std::string default_sarif_;                    // empty = no findings
    std::vector<std::pair<std::string, std::string>> by_hash_;
    std::vector<MatchRule> by_match_;
};

/// Content hash used to key mock responses and identify inputs in runs.
std::string snippet_hash(std::string_view code);

}  // namespace sosecure::analyzer
