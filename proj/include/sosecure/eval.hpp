#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosecure/analyzer.hpp"
#include "sosecure/bm25.hpp"
#include "sosecure/kb.hpp"
#include "sosecure/llm_client.hpp"
#include "sosecure/revision.hpp"

namespace sosecure::eval {

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SourceDataset { sallm, llmseceval, lmsys, custom };

std::string to_string(SourceDataset source);
SourceDataset source_from_string(std::string_view name);  // throws std::invalid_argument

struct SampleRecord {
    std::string sample_id;
    SourceDataset source_dataset = SourceDataset::custom;
    analyzer::Language language = analyzer::Language::python;
    std::optional<std::string> prompt_text;
    std::string code;
    std::vector<std::string> expected_cwes;  // sorted; non-empty for curated datasets
};

/// JSONL, one record per line:
///   {sample_id, source_dataset, language, prompt_text?, code, expected_cwes}
/// Schema violations and duplicate sample ids raise LoadError naming the line.
std::vector<SampleRecord> load_dataset(const std::filesystem::path& path);

enum class SampleOutcome {
    fixed,            // all pre-existing CWEs gone
    persisted,        // none gone
    mixed,            // some gone, some left
    originally_clean, // nothing flagged before revision
    errored,          // pipeline failure; excluded from rates
};

std::string to_string(SampleOutcome outcome);

struct LedgerRow {
    std::string sample_id;
    revision::VariantKind variant = revision::VariantKind::base;
    std::vector<std::string> before_cwes;
    std::vector<std::string> fixed;
    std::vector<std::string> persisted;
    std::vector<std::string> introduced;
    SampleOutcome outcome = SampleOutcome::originally_clean;
    bool changed = false;
    double similarity = 1.0;
    std::size_t context_tokens = 0;
    std::vector<std::int64_t> context_ids;
    std::string error;  // only for errored rows
};

struct Rates {
    double fr = 0.0;   // % of vulnerable samples with every before-CWE gone after
    double ir = 0.0;   // % of all samples that gained a new CWE
    double ncr = 0.0;  // % of individual before-findings that persist
    // the sample-based NCR reading, reported alongside for comparison
    double ncr_sample_based = 0.0;
    std::uint64_t vulnerable_samples = 0;
    std::uint64_t total_samples = 0;
    std::uint64_t before_findings = 0;
    std::uint64_t persisted_findings = 0;
};

/// Rates over non-errored rows; throws ReportError on an empty ledger.
Rates compute_rates(const std::vector<LedgerRow>& ledger);

/// 100 * C(n-v, k) / C(n, k): percentage chance that k draws out of n
/// generations (v of them vulnerable) are all clean. Requires 0 <= v <= n and
/// 1 <= k <= n (std::invalid_argument otherwise).
double secure_at_k_single(int n, int v, int k);

/// Mean of the per-problem values, as a percentage.
double secure_at_k(const std::vector<std::pair<int, int>>& per_problem_n_v, int k);
double vulnerable_at_k(const std::vector<std::pair<int, int>>& per_problem_n_v, int k);

struct PerCweRow {
    std::string cwe;
    std::uint64_t fixed = 0;
    std::uint64_t total = 0;
    double precision_pct = 0.0;
};

struct VariantReport {
    revision::VariantKind variant = revision::VariantKind::base;
    Rates rates;
    std::vector<PerCweRow> per_cwe;
    std::map<int, double> secure_at;      // k -> %
    std::map<int, double> vulnerable_at;  // k -> %
    double mean_similarity = 1.0;
    double mean_context_tokens = 0.0;
    std::uint64_t errored = 0;
    std::uint64_t originally_clean = 0;
    std::uint64_t fixed_count = 0;
    std::uint64_t persisted_count = 0;
    std::uint64_t mixed_count = 0;
};

struct SweepPoint {
    int k = 0;
    double fr = 0.0;
};

struct EvalReport {
    int report_version = 1;
    std::uint64_t samples = 0;
    std::vector<VariantReport> variants;
    std::vector<LedgerRow> ledger;
    std::vector<SweepPoint> k_sweep;  // filled by run_k_sweep
};

/// MITRE 2024 Top 25 most dangerous weakness ids, with short names.
const std::vector<std::pair<std::string, std::string>>& cwe_top25_2024();
std::string cwe_description(const std::string& cwe_id);  // id itself when unknown

struct EvalOptions {
    std::vector<revision::VariantKind> variants{revision::VariantKind::base};
    int retrieval_k = 3;
    bool trust_labels = false;              // use expected_cwes as the before set
    std::vector<std::string> cwe_allowlist; // empty = top-25 default
    double max_error_fraction = 0.10;       // abort threshold
};

struct EvalBackends {
    llm::ChatClient* client = nullptr;
    analyzer::Analyzer* analyzer = nullptr;
    const bm25::Bm25Index* index = nullptr;              // sosecure variant only
    const std::map<std::int64_t, kb::KbEntry>* kb = nullptr;  // sosecure variant only
};

/// Full pipeline per sample and variant: analyze (or trust labels), retrieve,
/// revise, analyze again, diff. Hard per-sample failures become errored rows;
/// more than max_error_fraction of them aborts with ReportError.
EvalReport run_eval(const std::vector<SampleRecord>& dataset, const EvalOptions& options,
                    const EvalBackends& backends, const revision::LlmConfig& llm_cfg);

/// One sosecure-only eval per k; returns (k, FR) points in the given order.
std::vector<SweepPoint> run_k_sweep(const std::vector<SampleRecord>& dataset,
                                    const EvalOptions& options, const EvalBackends& backends,
                                    const revision::LlmConfig& llm_cfg, const std::vector<int>& ks);

std::string report_to_json(const EvalReport& report);
std::string report_to_text(const EvalReport& report);

}  // namespace sosecure::eval
