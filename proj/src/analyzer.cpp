#include "sosecure/analyzer.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sosecure/util.hpp"

namespace sosecure::analyzer {

namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// rule id -> tags, collected from driver and extension rule arrays
void collect_rules(const json& component, std::map<std::string, std::vector<std::string>>& out) {
    if (!component.is_object() || !component.contains("rules")) return;
    for (const auto& rule : component["rules"]) {
        if (!rule.is_object() || !rule.contains("id")) continue;
        std::vector<std::string> tags;
        if (rule.contains("properties") && rule["properties"].contains("tags"))
            for (const auto& tag : rule["properties"]["tags"])
                if (tag.is_string()) tags.push_back(tag.get<std::string>());
        out[rule["id"].get<std::string>()] = std::move(tags);
    }
}

std::vector<std::string> cwes_from_tags(const std::vector<std::string>& tags) {
    std::set<std::string> cwes;
    for (const auto& tag : tags) {
        auto cwe = normalize_cwe_tag(tag);
        if (!cwe.empty()) cwes.insert(std::move(cwe));
    }
    return {cwes.begin(), cwes.end()};
}

struct TempWorkspace {
    std::filesystem::path dir;

    explicit TempWorkspace(const std::string& prefix) {
        auto pattern = (std::filesystem::temp_directory_path() / (prefix + "XXXXXX")).string();
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw BridgeError("cannot create temp workspace");
        dir = buf.data();
    }
    ~TempWorkspace() {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
    TempWorkspace(const TempWorkspace&) = delete;
    TempWorkspace& operator=(const TempWorkspace&) = delete;
};

std::string substitute(std::string templ, std::string_view key, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = templ.find(key, pos)) != std::string::npos) {
        templ.replace(pos, key.size(), value);
        pos += value.size();
    }
    return templ;
}

bool executable_on_path(const std::string& name) {
    if (name.find('/') != std::string::npos) return std::filesystem::exists(name);
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::stringstream ss{std::string(path)};
    std::string dir;
    while (std::getline(ss, dir, ':')) {
        if (dir.empty()) continue;
        std::error_code ec;
        if (std::filesystem::exists(std::filesystem::path(dir) / name, ec)) return true;
    }
    return false;
}

}  // namespace

std::string to_string(Language lang) {
    return lang == Language::python ? "python" : "c";
}

Language language_from_string(std::string_view name) {
    if (name == "python") return Language::python;
    if (name == "c") return Language::c;
    throw std::invalid_argument("unknown language: " + std::string(name));
}

std::string normalize_cwe_tag(std::string_view tag) {
    const std::string lowered = to_lower(tag);
    constexpr std::string_view prefix = "external/cwe/cwe-";
    if (lowered.rfind(prefix, 0) != 0) return "";
    std::string digits = lowered.substr(prefix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                       [](char c) { return c >= '0' && c <= '9'; }))
        return "";
    while (digits.size() > 1 && digits[0] == '0') digits.erase(digits.begin());
    while (digits.size() < 3) digits.insert(digits.begin(), '0');
    return "CWE-" + digits;
}

std::vector<Finding> parse_sarif(std::string_view sarif_bytes) {
    json doc;
    try {
        doc = json::parse(sarif_bytes);
    } catch (const json::exception& e) {
        throw SarifError(std::string("sarif: not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("runs") || !doc["runs"].is_array())
        throw SarifError("sarif: missing runs array");

    std::vector<Finding> findings;
    for (const auto& run : doc["runs"]) {
        std::string tool_name;
        std::map<std::string, std::vector<std::string>> rule_tags;
        if (run.contains("tool") && run["tool"].is_object()) {
            const auto& tool = run["tool"];
            if (tool.contains("driver") && tool["driver"].is_object()) {
                tool_name = tool["driver"].value("name", "");
                collect_rules(tool["driver"], rule_tags);
            }
            if (tool.contains("extensions"))
                for (const auto& ext : tool["extensions"]) collect_rules(ext, rule_tags);
        }
        if (!run.contains("results")) continue;
        for (const auto& result : run["results"]) {
            if (!result.is_object()) continue;
            Finding f;
            f.tool = tool_name;
            f.rule_id = result.value("ruleId", "");
            if (f.rule_id.empty() && result.contains("rule") && result["rule"].is_object())
                f.rule_id = result["rule"].value("id", "");
            if (auto it = rule_tags.find(f.rule_id); it != rule_tags.end())
                f.cwes = cwes_from_tags(it->second);
            if (result.contains("message") && result["message"].is_object())
                f.message = result["message"].value("text", "");
            if (result.contains("locations") && result["locations"].is_array() &&
                !result["locations"].empty()) {
                const auto& loc = result["locations"][0];
                if (loc.contains("physicalLocation")) {
                    const auto& phys = loc["physicalLocation"];
                    if (phys.contains("artifactLocation"))
                        f.file = phys["artifactLocation"].value("uri", "");
                    if (phys.contains("region")) f.line = phys["region"].value("startLine", 1);
                }
            }
            if (f.line < 1) f.line = 1;
            findings.push_back(std::move(f));
        }
    }
    return findings;
}

std::set<std::string> cwe_set(const AnalysisRun& run) {
    std::set<std::string> out;
    for (const auto& f : run.findings) out.insert(f.cwes.begin(), f.cwes.end());
    return out;
}

CweDiff diff_cwe_sets(const std::set<std::string>& before, const std::set<std::string>& after) {
    CweDiff diff;
    std::set_difference(before.begin(), before.end(), after.begin(), after.end(),
                        std::back_inserter(diff.fixed));
    std::set_intersection(before.begin(), before.end(), after.begin(), after.end(),
                          std::back_inserter(diff.persisted));
    std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                        std::back_inserter(diff.introduced));
    return diff;
}

FindingsDiff diff_findings(const AnalysisRun& before, const AnalysisRun& after) {
    if (before.language != after.language)
        throw std::invalid_argument("diff_findings: runs are on different languages");
    FindingsDiff diff;
    diff.cwes = diff_cwe_sets(cwe_set(before), cwe_set(after));

    auto untagged_rules = [](const AnalysisRun& run) {
        std::set<std::string> rules;
        for (const auto& f : run.findings)
            if (f.cwes.empty() && !f.rule_id.empty()) rules.insert(f.rule_id);
        return rules;
    };
    diff.rules = diff_cwe_sets(untagged_rules(before), untagged_rules(after));
    return diff;
}

std::string snippet_hash(std::string_view code) {
    return hex64(fnv1a64(code));
}

CommandAnalyzer::CommandAnalyzer(std::string command_template, std::string tool_name)
    : command_template_(std::move(command_template)), tool_name_(std::move(tool_name)) {
    if (command_template_.empty())
        throw std::invalid_argument("analyzer command template must not be empty");
    if (tool_name_.empty()) {
        const auto cut = command_template_.find_first_of(" \t");
        tool_name_ = command_template_.substr(0, cut);
    }
}

AnalysisRun CommandAnalyzer::analyze(const std::string& code, Language language) {
    if (!executable_on_path(tool_name_))
        throw EnvironmentError("analyzer binary not found: " + tool_name_);

    TempWorkspace workspace("sosecure-analyzer-");
    const auto snippet =
        workspace.dir / (language == Language::python ? "snippet.py" : "snippet.c");
    write_file(snippet, code);
    const auto sarif_path = workspace.dir / "results.sarif";

    std::string command = command_template_;
    command = substitute(std::move(command), "{input_dir}", workspace.dir.string());
    command = substitute(std::move(command), "{output_sarif}", sarif_path.string());
    command = substitute(std::move(command), "{language}", to_string(language));

    AnalysisRun run;
    run.tool = tool_name_;
    run.language = language;
    run.input_id = snippet_hash(code);

    const auto started = std::chrono::steady_clock::now();
    const int status = std::system(command.c_str());
    run.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    run.exit_status = status < 0 ? status : WEXITSTATUS(status);

    if (!std::filesystem::exists(sarif_path))
        throw BridgeError("analyzer produced no SARIF output (exit status " +
                          std::to_string(run.exit_status) + "): " + command);
    const std::string sarif = read_file(sarif_path);
    try {
        run.findings = parse_sarif(sarif);
    } catch (const SarifError& e) {
        throw BridgeError(std::string(e.what()) + "; first bytes: " + sarif.substr(0, 200));
    }
    return run;
}

MockAnalyzer MockAnalyzer::from_file(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw BridgeError("mock analyzer file is not valid JSON: " + std::string(e.what()));
    }
    MockAnalyzer mock;
    if (doc.contains("default") && !doc["default"].is_null())
        mock.default_sarif_ = doc["default"].dump();
    if (doc.contains("by_hash"))
        for (const auto& [hash, sarif] : doc["by_hash"].items())
            mock.by_hash_.emplace_back(hash, sarif.dump());
    if (doc.contains("by_match"))
        for (const auto& rule : doc["by_match"])
            mock.by_match_.push_back({rule.at("match").get<std::string>(), rule.at("sarif").dump()});
    return mock;
}

MockAnalyzer MockAnalyzer::empty() {
    return MockAnalyzer{};
}

AnalysisRun MockAnalyzer::analyze(const std::string& code, Language language) {
    AnalysisRun run;
    run.tool = "mock";
    run.language = language;
    run.input_id = snippet_hash(code);

    const std::string* sarif = nullptr;
    for (const auto& [hash, body] : by_hash_) {
        if (hash == run.input_id) {
            sarif = &body;
            break;
        }
    }
    if (!sarif)
        for (const auto& rule : by_match_) {
            if (code.find(rule.match) != std::string::npos) {
                sarif = &rule.sarif;
                break;
            }
        }
    if (!sarif && !default_sarif_.empty()) sarif = &default_sarif_;
    if (sarif) run.findings = parse_sarif(*sarif);
    return run;
}

}  // namespace sosecure::analyzer
