#include "sosecure/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sosecure/util.hpp"

namespace sosecure::eval {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::set<std::string> to_set(const std::vector<std::string>& v) {
    return {v.begin(), v.end()};
}

double round2(double v) {
    return std::round(v * 100.0) / 100.0;
}

}  // namespace

std::string to_string(SourceDataset source) {
    switch (source) {
        case SourceDataset::sallm: return "sallm";
        case SourceDataset::llmseceval: return "llmseceval";
        case SourceDataset::lmsys: return "lmsys";
        case SourceDataset::custom: return "custom";
    }
    return "custom";
}

SourceDataset source_from_string(std::string_view name) {
    if (name == "sallm") return SourceDataset::sallm;
    if (name == "llmseceval") return SourceDataset::llmseceval;
    if (name == "lmsys") return SourceDataset::lmsys;
    if (name == "custom") return SourceDataset::custom;
    throw std::invalid_argument("unknown source dataset: " + std::string(name));
}

std::string to_string(SampleOutcome outcome) {
    switch (outcome) {
        case SampleOutcome::fixed: return "fixed";
        case SampleOutcome::persisted: return "persisted";
        case SampleOutcome::mixed: return "mixed";
        case SampleOutcome::originally_clean: return "originally_clean";
        case SampleOutcome::errored: return "errored";
    }
    return "errored";
}

std::vector<SampleRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open dataset: " + path.string());

    std::vector<SampleRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw LoadError(where + ": invalid JSON: " + e.what());
        }
        SampleRecord record;
        try {
            record.sample_id = j.at("sample_id").get<std::string>();
            record.source_dataset = source_from_string(j.at("source_dataset").get<std::string>());
            record.language = analyzer::language_from_string(j.at("language").get<std::string>());
            if (j.contains("prompt_text") && !j["prompt_text"].is_null())
                record.prompt_text = j["prompt_text"].get<std::string>();
            record.code = j.at("code").get<std::string>();
            if (j.contains("expected_cwes"))
                record.expected_cwes = j["expected_cwes"].get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw LoadError(where + ": schema violation: " + e.what());
        } catch (const std::invalid_argument& e) {
            throw LoadError(where + ": schema violation: " + e.what());
        }
        if (record.code.empty()) throw LoadError(where + ": code must be non-empty");
        if (record.source_dataset != SourceDataset::custom && record.expected_cwes.empty())
            throw LoadError(where + ": curated datasets require expected_cwes");
        if (!seen_ids.insert(record.sample_id).second)
            throw LoadError(where + ": duplicate sample_id '" + record.sample_id + "'");
        std::sort(record.expected_cwes.begin(), record.expected_cwes.end());
        record.expected_cwes.erase(
            std::unique(record.expected_cwes.begin(), record.expected_cwes.end()),
            record.expected_cwes.end());
        records.push_back(std::move(record));
    }
    return records;
}

Rates compute_rates(const std::vector<LedgerRow>& ledger) {
    std::vector<const LedgerRow*> rows;
    for (const auto& row : ledger)
        if (row.outcome != SampleOutcome::errored) rows.push_back(&row);
    if (rows.empty()) throw ReportError("compute_rates: ledger has no usable rows");

    Rates rates;
    rates.total_samples = rows.size();
    std::uint64_t fully_fixed = 0;
    std::uint64_t introduced_any = 0;
    std::uint64_t unchanged_samples = 0;
    for (const auto* row : rows) {
        if (!row->before_cwes.empty()) {
            ++rates.vulnerable_samples;
            if (row->persisted.empty()) ++fully_fixed;
            if (row->persisted.size() == row->before_cwes.size()) ++unchanged_samples;
            rates.before_findings += row->before_cwes.size();
            rates.persisted_findings += row->persisted.size();
        }
        if (!row->introduced.empty()) ++introduced_any;
    }
    rates.fr = rates.vulnerable_samples == 0
                   ? 0.0
                   : 100.0 * static_cast<double>(fully_fixed) / rates.vulnerable_samples;
    rates.ir = 100.0 * static_cast<double>(introduced_any) / rates.total_samples;
    rates.ncr = rates.before_findings == 0
                    ? 0.0
                    : 100.0 * static_cast<double>(rates.persisted_findings) / rates.before_findings;
    rates.ncr_sample_based =
        rates.vulnerable_samples == 0
            ? 0.0
            : 100.0 * static_cast<double>(unchanged_samples) / rates.vulnerable_samples;
    return rates;
}

double secure_at_k_single(int n, int v, int k) {
    if (n < 0 || v < 0 || v > n) throw std::invalid_argument("secure_at_k: need 0 <= v <= n");
    if (k < 1 || k > n) throw std::invalid_argument("secure_at_k: need 1 <= k <= n");
    // C(n-v, k) / C(n, k) = prod_{i=0..k-1} (n-v-i) / (n-i)
    if (n - v < k) return 0.0;
    double p = 1.0;
    for (int i = 0; i < k; ++i)
        p *= static_cast<double>(n - v - i) / static_cast<double>(n - i);
    return 100.0 * p;
}

double secure_at_k(const std::vector<std::pair<int, int>>& per_problem_n_v, int k) {
    if (per_problem_n_v.empty()) throw std::invalid_argument("secure_at_k: no problems");
    double sum = 0.0;
    for (const auto& [n, v] : per_problem_n_v) sum += secure_at_k_single(n, v, k);
    return sum / static_cast<double>(per_problem_n_v.size());
}

double vulnerable_at_k(const std::vector<std::pair<int, int>>& per_problem_n_v, int k) {
    return 100.0 - secure_at_k(per_problem_n_v, k);
}

const std::vector<std::pair<std::string, std::string>>& cwe_top25_2024() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"CWE-079", "Improper Neutralization of Input During Web Page Generation ('Cross-site Scripting')"},
        {"CWE-787", "Out-of-bounds Write"},
        {"CWE-089", "Improper Neutralization of Special Elements used in an SQL Command ('SQL Injection')"},
        {"CWE-352", "Cross-Site Request Forgery (CSRF)"},
        {"CWE-022", "Improper Limitation of a Pathname to a Restricted Directory ('Path Traversal')"},
        {"CWE-125", "Out-of-bounds Read"},
        {"CWE-078", "Improper Neutralization of Special Elements used in an OS Command ('OS Command Injection')"},
        {"CWE-416", "Use After Free"},
        {"CWE-862", "Missing Authorization"},
        {"CWE-434", "Unrestricted Upload of File with Dangerous Type"},
        {"CWE-094", "Improper Control of Generation of Code ('Code Injection')"},
        {"CWE-020", "Improper Input Validation"},
        {"CWE-077", "Improper Neutralization of Special Elements used in a Command ('Command Injection')"},
        {"CWE-287", "Improper Authentication"},
        {"CWE-269", "Improper Privilege Management"},
        {"CWE-502", "Deserialization of Untrusted Data"},
        {"CWE-200", "Exposure of Sensitive Information to an Unauthorized Actor"},
        {"CWE-863", "Incorrect Authorization"},
        {"CWE-918", "Server-Side Request Forgery (SSRF)"},
        {"CWE-119", "Improper Restriction of Operations within the Bounds of a Memory Buffer"},
        {"CWE-476", "NULL Pointer Dereference"},
        {"CWE-798", "Use of Hard-coded Credentials"},
        {"CWE-190", "Integer Overflow or Wraparound"},
        {"CWE-400", "Uncontrolled Resource Consumption"},
        {"CWE-306", "Missing Authentication for Critical Function"},
    };
    return table;
}

std::string cwe_description(const std::string& cwe_id) {
    for (const auto& [id, name] : cwe_top25_2024())
        if (id == cwe_id) return name;
    return cwe_id;
}

namespace {

SampleOutcome classify(const analyzer::CweDiff& diff, bool before_empty) {
    if (before_empty) return SampleOutcome::originally_clean;
    if (diff.persisted.empty()) return SampleOutcome::fixed;
    if (diff.fixed.empty()) return SampleOutcome::persisted;
    return SampleOutcome::mixed;
}

std::vector<PerCweRow> per_cwe_rollup(const std::vector<LedgerRow>& rows,
                                      const std::vector<std::string>& allowlist) {
    std::vector<PerCweRow> out;
    for (const auto& cwe : allowlist) {
        PerCweRow row;
        row.cwe = cwe;
        for (const auto& r : rows) {
            if (r.outcome == SampleOutcome::errored) continue;
            if (std::find(r.before_cwes.begin(), r.before_cwes.end(), cwe) == r.before_cwes.end())
                continue;
            ++row.total;
            if (std::find(r.fixed.begin(), r.fixed.end(), cwe) != r.fixed.end()) ++row.fixed;
        }
        if (row.total == 0) continue;
        row.precision_pct = 100.0 * static_cast<double>(row.fixed) / row.total;
        out.push_back(std::move(row));
    }
    return out;
}

LedgerRow eval_one(const SampleRecord& sample, revision::VariantKind kind,
                   const EvalOptions& options, const EvalBackends& backends,
                   const revision::LlmConfig& llm_cfg) {
    LedgerRow row;
    row.sample_id = sample.sample_id;
    row.variant = kind;

    // before set
    std::set<std::string> before;
    if (options.trust_labels) {
        before = to_set(sample.expected_cwes);
    } else {
        before = analyzer::cwe_set(backends.analyzer->analyze(sample.code, sample.language));
    }
    row.before_cwes.assign(before.begin(), before.end());

    // variant instance
    revision::PromptVariant variant;
    switch (kind) {
        case revision::VariantKind::base:
            variant = revision::PromptVariant::base();
            break;
        case revision::VariantKind::cwe:
        case revision::VariantKind::cwe_plus: {
            std::string cwe_id;
            if (!sample.expected_cwes.empty()) cwe_id = sample.expected_cwes.front();
            else if (!row.before_cwes.empty()) cwe_id = row.before_cwes.front();
            if (cwe_id.empty()) {
                variant = revision::PromptVariant::base();
            } else if (kind == revision::VariantKind::cwe) {
                variant = revision::PromptVariant::with_cwe(cwe_id);
            } else {
                variant = revision::PromptVariant::with_cwe_description(cwe_id,
                                                                        cwe_description(cwe_id));
            }
            break;
        }
        case revision::VariantKind::sosecure: {
            std::vector<kb::KbEntry> context;
            if (backends.index && backends.kb) {
                for (const auto& hit :
                     backends.index->query(sample.code, static_cast<std::size_t>(options.retrieval_k))) {
                    auto it = backends.kb->find(hit.answer_id);
                    if (it != backends.kb->end()) context.push_back(it->second);
                }
            }
            // nothing retrieved: fall back to the plain review prompt
            variant = context.empty() ? revision::PromptVariant::base()
                                      : revision::PromptVariant::with_context(std::move(context));
            break;
        }
    }

    const auto revised = revision::revise(sample.code, variant, llm_cfg, *backends.client);
    row.changed = revised.changed;
    row.similarity = revised.similarity;
    row.context_tokens = revised.context_tokens_estimate;
    row.context_ids = revised.retrieved_context_ids;

    const auto after = analyzer::cwe_set(backends.analyzer->analyze(revised.revised_code, sample.language));
    const auto diff = analyzer::diff_cwe_sets(before, after);
    row.fixed = diff.fixed;
    row.persisted = diff.persisted;
    row.introduced = diff.introduced;
    row.outcome = classify(diff, before.empty());
    return row;
}

VariantReport summarize_variant(revision::VariantKind kind, const std::vector<LedgerRow>& rows,
                                const std::vector<std::string>& allowlist) {
    VariantReport report;
    report.variant = kind;
    report.rates = compute_rates(rows);
    report.per_cwe = per_cwe_rollup(rows, allowlist);

    std::vector<std::pair<int, int>> per_problem;
    double sim_sum = 0.0;
    double ctx_sum = 0.0;
    std::uint64_t usable = 0;
    for (const auto& row : rows) {
        switch (row.outcome) {
            case SampleOutcome::fixed: ++report.fixed_count; break;
            case SampleOutcome::persisted: ++report.persisted_count; break;
            case SampleOutcome::mixed: ++report.mixed_count; break;
            case SampleOutcome::originally_clean: ++report.originally_clean; break;
            case SampleOutcome::errored: ++report.errored; continue;
        }
        ++usable;
        sim_sum += row.similarity;
        ctx_sum += static_cast<double>(row.context_tokens);
        const bool vulnerable_after = !row.persisted.empty() || !row.introduced.empty();
        per_problem.emplace_back(1, vulnerable_after ? 1 : 0);
    }
    if (usable > 0) {
        report.mean_similarity = sim_sum / static_cast<double>(usable);
        report.mean_context_tokens = ctx_sum / static_cast<double>(usable);
        report.secure_at[1] = secure_at_k(per_problem, 1);
        report.vulnerable_at[1] = vulnerable_at_k(per_problem, 1);
    }
    return report;
}

}  // namespace

EvalReport run_eval(const std::vector<SampleRecord>& dataset, const EvalOptions& options,
                    const EvalBackends& backends, const revision::LlmConfig& llm_cfg) {
    if (dataset.empty()) throw ReportError("run_eval: dataset is empty");
    if (!backends.client || !backends.analyzer)
        throw std::invalid_argument("run_eval: client and analyzer backends are required");
    if (options.variants.empty()) throw std::invalid_argument("run_eval: no variants requested");

    const std::vector<std::string> allowlist = [&] {
        if (!options.cwe_allowlist.empty()) return options.cwe_allowlist;
        std::vector<std::string> ids;
        for (const auto& [id, name] : cwe_top25_2024()) ids.push_back(id);
        return ids;
    }();

    EvalReport report;
    report.samples = dataset.size();
    std::uint64_t errored_total = 0;

    for (const auto kind : options.variants) {
        std::vector<LedgerRow> rows;
        rows.reserve(dataset.size());
        for (const auto& sample : dataset) {
            try {
                rows.push_back(eval_one(sample, kind, options, backends, llm_cfg));
            } catch (const std::exception& e) {
                LedgerRow row;
                row.sample_id = sample.sample_id;
                row.variant = kind;
                row.outcome = SampleOutcome::errored;
                row.error = e.what();
                rows.push_back(std::move(row));
                ++errored_total;
            }
        }
        const auto errored_here = static_cast<double>(std::count_if(
            rows.begin(), rows.end(),
            [](const LedgerRow& r) { return r.outcome == SampleOutcome::errored; }));
        if (errored_here / static_cast<double>(rows.size()) > options.max_error_fraction)
            throw ReportError("run_eval: more than " +
                              std::to_string(static_cast<int>(options.max_error_fraction * 100)) +
                              "% of samples errored for variant " + revision::to_string(kind));
        report.variants.push_back(summarize_variant(kind, rows, allowlist));
        report.ledger.insert(report.ledger.end(), rows.begin(), rows.end());
    }
    return report;
}

std::vector<SweepPoint> run_k_sweep(const std::vector<SampleRecord>& dataset,
                                    const EvalOptions& options, const EvalBackends& backends,
                                    const revision::LlmConfig& llm_cfg, const std::vector<int>& ks) {
    std::vector<SweepPoint> points;
    for (int k : ks) {
        EvalOptions sweep_options = options;
        sweep_options.variants = {revision::VariantKind::sosecure};
        sweep_options.retrieval_k = k;
        const auto report = run_eval(dataset, sweep_options, backends, llm_cfg);
        points.push_back({k, report.variants.front().rates.fr});
    }
    return points;
}

namespace {

ordered_json ledger_row_to_json(const LedgerRow& row) {
    ordered_json j;
    j["sample_id"] = row.sample_id;
    j["variant"] = revision::to_string(row.variant);
    j["before_cwes"] = row.before_cwes;
    j["fixed"] = row.fixed;
    j["persisted"] = row.persisted;
    j["introduced"] = row.introduced;
    j["outcome"] = to_string(row.outcome);
    j["changed"] = row.changed;
    j["similarity"] = row.similarity;
    j["context_tokens"] = row.context_tokens;
    j["context_ids"] = row.context_ids;
    if (!row.error.empty()) j["error"] = row.error;
    return j;
}

ordered_json rates_to_json(const Rates& rates) {
    ordered_json j;
    j["fr"] = round2(rates.fr);
    j["ir"] = round2(rates.ir);
    j["ncr"] = round2(rates.ncr);
    j["ncr_sample_based"] = round2(rates.ncr_sample_based);
    j["vulnerable_samples"] = rates.vulnerable_samples;
    j["total_samples"] = rates.total_samples;
    j["before_findings"] = rates.before_findings;
    j["persisted_findings"] = rates.persisted_findings;
    return j;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    ordered_json j;
    j["report_version"] = report.report_version;
    j["samples"] = report.samples;
    auto variants = ordered_json::array();
    for (const auto& v : report.variants) {
        ordered_json vj;
        vj["variant"] = revision::to_string(v.variant);
        vj["rates"] = rates_to_json(v.rates);
        auto per_cwe = ordered_json::array();
        for (const auto& row : v.per_cwe)
            per_cwe.push_back({{"cwe", row.cwe},
                               {"fixed", row.fixed},
                               {"total", row.total},
                               {"precision_pct", round2(row.precision_pct)}});
        vj["per_cwe"] = std::move(per_cwe);
        ordered_json secure;
        for (const auto& [k, pct] : v.secure_at) secure[std::to_string(k)] = round2(pct);
        vj["secure_at"] = std::move(secure);
        ordered_json vulnerable;
        for (const auto& [k, pct] : v.vulnerable_at) vulnerable[std::to_string(k)] = round2(pct);
        vj["vulnerable_at"] = std::move(vulnerable);
        vj["mean_similarity"] = round2(v.mean_similarity);
        vj["mean_context_tokens"] = round2(v.mean_context_tokens);
        vj["outcomes"] = {{"fixed", v.fixed_count},
                          {"persisted", v.persisted_count},
                          {"mixed", v.mixed_count},
                          {"originally_clean", v.originally_clean},
                          {"errored", v.errored}};
        variants.push_back(std::move(vj));
    }
    j["variants"] = std::move(variants);
    if (!report.k_sweep.empty()) {
        auto sweep = ordered_json::array();
        for (const auto& point : report.k_sweep)
            sweep.push_back({{"k", point.k}, {"fr", round2(point.fr)}});
        j["k_sweep"] = std::move(sweep);
    }
    auto ledger = ordered_json::array();
    for (const auto& row : report.ledger) ledger.push_back(ledger_row_to_json(row));
    j["ledger"] = std::move(ledger);
    return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << "samples: " << report.samples << "\n\n";
    out << "variant    FR%    IR%    NCR%   secure@1  vulnerable@1  mean_sim  ctx_tokens\n";
    out << "---------  -----  -----  -----  --------  ------------  --------  ----------\n";
    for (const auto& v : report.variants) {
        char line[160];
        const double s1 = v.secure_at.count(1) ? v.secure_at.at(1) : 0.0;
        const double v1 = v.vulnerable_at.count(1) ? v.vulnerable_at.at(1) : 0.0;
        std::snprintf(line, sizeof(line), "%-9s  %5.1f  %5.1f  %5.1f  %8.2f  %12.2f  %8.2f  %10.1f",
                      revision::to_string(v.variant).c_str(), v.rates.fr, v.rates.ir, v.rates.ncr,
                      s1, v1, v.mean_similarity, v.mean_context_tokens);
        out << line << "\n";
    }
    for (const auto& v : report.variants) {
        if (v.per_cwe.empty()) continue;
        out << "\n[" << revision::to_string(v.variant) << "] per-CWE\n";
        out << "  CWE       F/T      P%\n";
        for (const auto& row : v.per_cwe) {
            char line[96];
            std::snprintf(line, sizeof(line), "  %-8s  %llu/%llu    %5.1f", row.cwe.c_str(),
                          static_cast<unsigned long long>(row.fixed),
                          static_cast<unsigned long long>(row.total), row.precision_pct);
            out << line << "\n";
        }
    }
    if (!report.k_sweep.empty()) {
        out << "\nk-sweep (neighbors -> FR%)\n";
        for (const auto& point : report.k_sweep) {
            char line[64];
            std::snprintf(line, sizeof(line), "  k=%d  FR=%.1f", point.k, point.fr);
            out << line << "\n";
        }
    }
    return out.str();
}

}  // namespace sosecure::eval
