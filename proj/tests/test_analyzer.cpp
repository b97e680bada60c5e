#include "sosecure/analyzer.hpp"

#include <filesystem>
#include <random>

#include "doctest.h"
#include "sosecure/util.hpp"

using namespace sosecure;
using namespace sosecure::analyzer;

namespace {

const std::string kDataDir = SOSECURE_TEST_DATA;

AnalysisRun run_with(std::set<std::string> cwes, Language lang = Language::python) {
    AnalysisRun run;
    run.language = lang;
    for (const auto& cwe : cwes) {
        Finding f;
        f.rule_id = "rule-" + cwe;
        f.cwes = {cwe};
        run.findings.push_back(std::move(f));
    }
    return run;
}

}  // namespace

TEST_CASE("normalize_cwe_tag extracts and pads CWE ids") {
    CHECK(normalize_cwe_tag("external/cwe/cwe-078") == "CWE-078");
    CHECK(normalize_cwe_tag("EXTERNAL/CWE/CWE-78") == "CWE-078");
    CHECK(normalize_cwe_tag("external/cwe/cwe-5") == "CWE-005");
    CHECK(normalize_cwe_tag("external/cwe/cwe-1204") == "CWE-1204");
    CHECK(normalize_cwe_tag("security") == "");
    CHECK(normalize_cwe_tag("external/cwe/cwe-") == "");
    CHECK(normalize_cwe_tag("external/cwe/cwe-07x") == "");
}

TEST_CASE("parse_sarif reads results with rule tags") {
    const auto findings = parse_sarif(read_file(kDataDir + "/sarif_two_results.json"));
    REQUIRE(findings.size() == 2);
    CHECK(findings[0].rule_id == "py/command-line-injection");
    CHECK(findings[1].rule_id == findings[0].rule_id);
    CHECK(findings[0].cwes == std::vector<std::string>{"CWE-078", "CWE-088"});
    CHECK(findings[0].tool == "demo-analyzer");
    CHECK(findings[0].file == "snippet.py");
    CHECK(findings[0].line == 9);
    CHECK(findings[1].line == 14);
}

TEST_CASE("results without cwe tags yield empty cwe sets") {
    const auto findings = parse_sarif(read_file(kDataDir + "/sarif_cwe078.json"));
    REQUIRE(findings.size() == 2);
    CHECK(findings[0].cwes == std::vector<std::string>{"CWE-078"});
    CHECK(findings[1].cwes.empty());
}

TEST_CASE("parse_sarif rejects malformed input") {
    CHECK_THROWS_AS(parse_sarif("{\"version\":\"2.1.0\"}"), SarifError);
    CHECK_THROWS_AS(parse_sarif("not json at all"), SarifError);
    CHECK_THROWS_AS(parse_sarif("[1,2,3]"), SarifError);
}

TEST_CASE("parse_sarif is total over the fixture corpus") {
    for (const auto& entry : std::filesystem::directory_iterator(kDataDir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("sarif_", 0) != 0) continue;
        CHECK_NOTHROW(parse_sarif(read_file(entry.path())));
    }
}

TEST_CASE("diff_cwe_sets follows set algebra") {
    auto diff = diff_cwe_sets({"CWE-078"}, {});
    CHECK(diff.fixed == std::vector<std::string>{"CWE-078"});
    CHECK(diff.persisted.empty());
    CHECK(diff.introduced.empty());

    diff = diff_cwe_sets({"CWE-078"}, {"CWE-078"});
    CHECK(diff.fixed.empty());
    CHECK(diff.persisted == std::vector<std::string>{"CWE-078"});

    diff = diff_cwe_sets({"CWE-327"}, {"CWE-327"});
    CHECK(diff.persisted == std::vector<std::string>{"CWE-327"});

    diff = diff_cwe_sets({"CWE-078", "CWE-089"}, {"CWE-089", "CWE-022"});
    CHECK(diff.fixed == std::vector<std::string>{"CWE-078"});
    CHECK(diff.persisted == std::vector<std::string>{"CWE-089"});
    CHECK(diff.introduced == std::vector<std::string>{"CWE-022"});
}

TEST_CASE("diff partitions the before set") {
    std::mt19937 rng(13);
    const std::vector<std::string> universe = {"CWE-020", "CWE-022", "CWE-078", "CWE-079",
                                               "CWE-089", "CWE-094", "CWE-327", "CWE-502"};
    std::uniform_int_distribution<int> coin(0, 1);
    for (int round = 0; round < 100; ++round) {
        std::set<std::string> before, after;
        for (const auto& cwe : universe) {
            if (coin(rng)) before.insert(cwe);
            if (coin(rng)) after.insert(cwe);
        }
        const auto diff = diff_cwe_sets(before, after);

        std::set<std::string> fixed_and_persisted;
        fixed_and_persisted.insert(diff.fixed.begin(), diff.fixed.end());
        fixed_and_persisted.insert(diff.persisted.begin(), diff.persisted.end());
        CHECK(fixed_and_persisted == before);

        for (const auto& cwe : diff.introduced) CHECK(before.count(cwe) == 0);
        for (const auto& cwe : diff.fixed) CHECK(std::find(diff.persisted.begin(),
                                                           diff.persisted.end(),
                                                           cwe) == diff.persisted.end());
    }
}

TEST_CASE("diff_findings rejects mismatched languages") {
    const auto py = run_with({"CWE-078"}, Language::python);
    const auto c = run_with({"CWE-078"}, Language::c);
    CHECK_THROWS_AS(diff_findings(py, c), std::invalid_argument);
}

TEST_CASE("diff_findings tracks untagged findings by rule id") {
    AnalysisRun before = run_with({"CWE-078"});
    Finding untagged;
    untagged.rule_id = "py/untagged-rule";
    before.findings.push_back(untagged);

    AnalysisRun after;
    after.language = before.language;

    const auto diff = diff_findings(before, after);
    CHECK(diff.cwes.fixed == std::vector<std::string>{"CWE-078"});
    CHECK(diff.rules.fixed == std::vector<std::string>{"py/untagged-rule"});
}

TEST_CASE("mock analyzer resolves canned SARIF deterministically") {
    const auto path = std::filesystem::temp_directory_path() / "sosecure-mock-analyzer.json";
    const std::string sarif = read_file(kDataDir + "/sarif_cwe078.json");
    write_file(path, std::string("{") + "\"by_match\": [{\"match\": \"shell=True\", \"sarif\": " +
                         sarif + "}]}");
    auto mock = MockAnalyzer::from_file(path);

    const std::string vulnerable = "subprocess.call(cmd, shell=True)";
    const auto run1 = mock.analyze(vulnerable, Language::python);
    const auto run2 = mock.analyze(vulnerable, Language::python);
    REQUIRE(run1.findings.size() == 2);
    CHECK(cwe_set(run1) == std::set<std::string>{"CWE-078"});
    CHECK(run1.input_id == run2.input_id);
    CHECK(run1.findings.size() == run2.findings.size());

    // unmatched code has no findings
    CHECK(mock.analyze("print('hello')", Language::python).findings.empty());
    std::filesystem::remove(path);
}

TEST_CASE("mock analyzer honors hash keys before match rules") {
    const std::string code = "x = 1\n";
    const auto hash = snippet_hash(code);
    const std::string sarif = read_file(kDataDir + "/sarif_cwe078.json");
    const auto path = std::filesystem::temp_directory_path() / "sosecure-mock-hash.json";
    write_file(path, std::string("{\"by_hash\": {\"") + hash + "\": " + sarif + "}}");
    auto mock = MockAnalyzer::from_file(path);
    CHECK(!mock.analyze(code, Language::python).findings.empty());
    CHECK(mock.analyze("y = 2\n", Language::python).findings.empty());
    std::filesystem::remove(path);
}

TEST_CASE("empty mock analyzer reports zero findings for any input") {
    auto mock = MockAnalyzer::empty();
    CHECK(mock.analyze("", Language::python).findings.empty());
    CHECK(mock.analyze("anything", Language::c).findings.empty());
}

TEST_CASE("command analyzer reports a missing binary") {
    CommandAnalyzer missing("definitely-not-a-real-binary-xyz {input_dir}");
    try {
        missing.analyze("x = 1", Language::python);
        FAIL("expected EnvironmentError");
    } catch (const EnvironmentError& e) {
        CHECK(std::string(e.what()).find("definitely-not-a-real-binary-xyz") != std::string::npos);
    }
}

TEST_CASE("command analyzer invokes the template and parses the SARIF") {
    CommandAnalyzer fake("cp " + kDataDir + "/sarif_two_results.json {output_sarif}");
    const auto run = fake.analyze("print('hi')", Language::python);
    CHECK(run.exit_status == 0);
    CHECK(run.findings.size() == 2);
    CHECK(run.tool == "cp");
    CHECK(!run.input_id.empty());
    CHECK(run.wall_time_seconds >= 0.0);
}

TEST_CASE("non-zero analyzer exit with valid SARIF still yields findings") {
    CommandAnalyzer fake("sh -c 'cp " + kDataDir + "/sarif_cwe078.json {output_sarif}; exit 3'");
    const auto run = fake.analyze("code", Language::c);
    CHECK(run.exit_status == 3);
    CHECK(run.findings.size() == 2);
}

TEST_CASE("unparseable analyzer output raises a bridge error with a preview") {
    CommandAnalyzer fake("sh -c 'echo this-is-not-sarif > {output_sarif}'");
    try {
        fake.analyze("code", Language::python);
        FAIL("expected BridgeError");
    } catch (const BridgeError& e) {
        CHECK(std::string(e.what()).find("this-is-not-sarif") != std::string::npos);
    }
}
