#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sosecure/analyzer.hpp"
#include "sosecure/bm25.hpp"
#include "sosecure/config.hpp"
#include "sosecure/eval.hpp"
#include "sosecure/ingest.hpp"
#include "sosecure/kb.hpp"
#include "sosecure/llm_client.hpp"
#include "sosecure/revision.hpp"
#include "sosecure/util.hpp"

namespace {

using namespace sosecure;

constexpr int kExitOk = 0;
constexpr int kExitErroredSamples = 1;
constexpr int kExitFailure = 2;
constexpr int kExitUsage = 64;

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        auto comma = csv.find(',', start);
        if (comma == std::string::npos) comma = csv.size();
        if (comma > start) out.push_back(csv.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

config::AppConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    return config::AppConfig::from_file(path);
}

revision::LlmConfig llm_config_from_env(revision::LlmConfig cfg) {
    if (const char* base = std::getenv("SOSECURE_API_BASE"); base && *base) cfg.base_url = base;
    return cfg;
}

std::unique_ptr<llm::ChatClient> make_client(const revision::LlmConfig& cfg,
                                             const std::string& mock_llm) {
    if (mock_llm == "echo") return std::make_unique<llm::MockChatClient>(llm::MockChatClient::echo());
    if (!mock_llm.empty())
        return std::make_unique<llm::MockChatClient>(llm::MockChatClient::from_file(mock_llm));
    if (cfg.base_url.empty())
        throw std::runtime_error(
            "no LLM endpoint configured: set SOSECURE_API_BASE (and SOSECURE_API_KEY), or pass "
            "--mock-llm");
    llm::HttpClientOptions options;
    options.base_url = cfg.base_url;
    options.timeout_seconds = cfg.timeout_seconds;
    if (const char* key = std::getenv("SOSECURE_API_KEY")) options.api_key = key;
    return std::make_unique<llm::HttpChatClient>(options);
}

// Routes each language to its configured command template.
class DispatchingAnalyzer : public analyzer::Analyzer {
public:
    explicit DispatchingAnalyzer(config::AnalyzerTemplates templates)
        : templates_(std::move(templates)) {}

    analyzer::AnalysisRun analyze(const std::string& code, analyzer::Language language) override {
        const std::string& templ =
            language == analyzer::Language::python ? templates_.python : templates_.c;
        if (templ.empty())
            throw analyzer::EnvironmentError("no analyzer template configured for language " +
                                             analyzer::to_string(language));
        analyzer::CommandAnalyzer cmd(templ);
        return cmd.analyze(code, language);
    }

private:
    config::AnalyzerTemplates templates_;
};

std::unique_ptr<analyzer::Analyzer> make_analyzer(const config::AppConfig& cfg,
                                                  const std::string& mock_analyzer) {
    if (mock_analyzer == "empty")
        return std::make_unique<analyzer::MockAnalyzer>(analyzer::MockAnalyzer::empty());
    if (!mock_analyzer.empty())
        return std::make_unique<analyzer::MockAnalyzer>(analyzer::MockAnalyzer::from_file(mock_analyzer));
    return std::make_unique<DispatchingAnalyzer>(cfg.analyzer);
}

kb::KeywordSet load_keywords(const std::string& keyword_file) {
    if (keyword_file.empty()) return kb::KeywordSet::default_set();
    return kb::KeywordSet::from_file(keyword_file);
}

std::map<std::int64_t, kb::KbEntry> kb_by_id(const std::string& path) {
    std::map<std::int64_t, kb::KbEntry> out;
    for (auto& entry : kb::load_kb_file(path)) out.emplace(entry.answer_id, std::move(entry));
    return out;
}

nlohmann::ordered_json revision_to_json(const revision::RevisionResult& result) {
    nlohmann::ordered_json j;
    j["variant"] = revision::to_string(result.variant);
    j["changed"] = result.changed;
    j["similarity"] = result.similarity;
    j["prompt_tokens_estimate"] = result.prompt_tokens_estimate;
    j["context_tokens_estimate"] = result.context_tokens_estimate;
    j["retrieved_context_ids"] = result.retrieved_context_ids;
    j["warning"] = result.warning;
    if (result.warning) j["warning_reason"] = result.warning_reason;
    j["truncated_context"] = result.truncated_context;
    j["revised_code"] = result.revised_code;
    return j;
}

nlohmann::ordered_json ingest_stats_to_json(const ingest::IngestStats& stats) {
    nlohmann::ordered_json j;
    j["posts_rows"] = stats.posts_rows;
    j["posts_skipped"] = stats.posts_skipped;
    j["posts_other_type"] = stats.posts_other_type;
    j["questions"] = stats.questions;
    j["answers"] = stats.answers;
    j["comments_rows"] = stats.comments_rows;
    j["comments_skipped"] = stats.comments_skipped;
    j["answers_missing_parent"] = stats.answers_missing_parent;
    j["answers_language_filtered"] = stats.answers_language_filtered;
    j["answers_dropped_no_code"] = stats.answers_dropped_no_code;
    j["answers_dropped_no_comment"] = stats.answers_dropped_no_comment;
    j["answers_emitted"] = stats.answers_emitted;
    return j;
}

nlohmann::ordered_json kb_stats_to_json(const kb::BuildStats& stats) {
    nlohmann::ordered_json j;
    j["answers_in"] = stats.answers_in;
    j["answers_out"] = stats.answers_out;
    j["comments_scanned"] = stats.comments_scanned;
    j["comments_on_retained"] = stats.comments_on_retained;
    nlohmann::ordered_json per_tag;
    for (const auto& [tag, count] : stats.per_tag)
        per_tag[tag] = {{"in", count.in}, {"out", count.out}};
    j["per_tag"] = std::move(per_tag);
    return j;
}

int cmd_ingest(const std::string& posts, const std::string& comments,
               const std::vector<std::string>& tags, const std::string& out,
               std::size_t min_code_len) {
    std::ofstream sink_file(out, std::ios::binary);
    if (!sink_file) {
        std::cerr << "error: cannot write output file: " << out << "\n";
        return kExitFailure;
    }
    ingest::IngestOptions options;
    options.min_code_block_len = min_code_len;
    const auto stats = ingest::join_answers(
        posts, comments, tags,
        [&](const ingest::CleanAnswer& answer) {
            sink_file << ingest::clean_answer_to_json(answer) << '\n';
        },
        options);
    sink_file.close();
    write_file(out + ".stats.json", ingest_stats_to_json(stats).dump(2) + "\n");
    std::cerr << "ingested " << stats.answers_emitted << " answers (" << stats.posts_rows
              << " post rows, " << stats.posts_skipped << " skipped)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Security-context retrieval and LLM code revision pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "TOML config file");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse dump XML into cleaned answer JSONL");
    std::string posts_path, comments_path, ingest_out;
    std::string tags_csv;
    std::size_t min_code_len = 0;
    ingest_cmd->add_option("--posts", posts_path, "Posts.xml path")->required();
    ingest_cmd->add_option("--comments", comments_path, "Comments.xml path")->required();
    ingest_cmd->add_option("--tags", tags_csv, "comma-separated language tags")->required();
    ingest_cmd->add_option("--out", ingest_out, "output JSONL path")->required();
    ingest_cmd->add_option("--min-code-len", min_code_len,
                           "minimum characters for a span to count as a code block");

    // build-kb
    auto* kb_cmd = app.add_subcommand("build-kb", "Filter answers into the security knowledge base");
    std::string kb_in, kb_out, keyword_file_flag;
    kb_cmd->add_option("--in", kb_in, "cleaned answers JSONL")->required();
    kb_cmd->add_option("--out", kb_out, "knowledge-base JSONL")->required();
    kb_cmd->add_option("--keywords", keyword_file_flag, "keyword file (default: built-in set)");

    // index
    auto* index_cmd = app.add_subcommand("index", "Build the BM25 index over KB code blocks");
    std::string index_kb, index_out;
    double k1_flag = -1.0, b_flag = -1.0, epsilon_flag = -1.0;
    bool split_subtokens_flag = false;
    index_cmd->add_option("--kb", index_kb, "knowledge-base JSONL")->required();
    index_cmd->add_option("--out", index_out, "index output path")->required();
    index_cmd->add_option("--k1", k1_flag, "term-frequency saturation (default 1.5)");
    index_cmd->add_option("--b", b_flag, "length normalization in [0,1] (default 0.75)");
    index_cmd->add_option("--epsilon", epsilon_flag, "IDF floor fraction (default 0.25)");
    index_cmd->add_flag("--split-subtokens", split_subtokens_flag,
                        "also index camelCase/snake_case segments");

    // retrieve
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Rank KB entries against a code snippet");
    std::string retrieve_index, retrieve_code;
    int retrieve_k = 0;
    retrieve_cmd->add_option("--index", retrieve_index, "index path")->required();
    retrieve_cmd->add_option("--code", retrieve_code, "snippet file")->required();
    retrieve_cmd->add_option("-k,--k", retrieve_k, "neighbors to return (default from config: 3)");

    // revise
    auto* revise_cmd = app.add_subcommand("revise", "Ask the LLM to revise a snippet");
    std::string revise_code, revise_variant = "base", revise_cwe, revise_cwe_desc;
    std::string revise_index, revise_kb, mock_llm, revise_json_out;
    int revise_k = 0;
    revise_cmd->add_option("--code", revise_code, "snippet file")->required();
    revise_cmd->add_option("--variant", revise_variant, "base|cwe|cweplus|sosecure");
    revise_cmd->add_option("--cwe", revise_cwe, "CWE id for the cwe/cweplus variants");
    revise_cmd->add_option("--cwe-description", revise_cwe_desc,
                           "description for the cweplus variant (default: built-in catalog)");
    revise_cmd->add_option("--index", revise_index, "index path (sosecure variant)");
    revise_cmd->add_option("--kb", revise_kb, "knowledge-base JSONL (sosecure variant)");
    revise_cmd->add_option("-k,--k", revise_k, "neighbors to retrieve (default from config: 3)");
    revise_cmd->add_option("--mock-llm", mock_llm, "mock reply file, or 'echo'");
    revise_cmd->add_option("--out-json", revise_json_out, "write the revision record here");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Run the benchmark pipeline and report metrics");
    std::string eval_dataset, eval_variants = "base", eval_index, eval_kb;
    std::string eval_mock_llm, eval_mock_analyzer, report_json_path, report_text_path;
    std::string k_sweep_csv;
    int eval_k = 0;
    bool trust_labels_flag = false;
    eval_cmd->add_option("--dataset", eval_dataset, "dataset JSONL")->required();
    eval_cmd->add_option("--variants", eval_variants, "comma list: base,cwe,cweplus,sosecure");
    eval_cmd->add_option("--index", eval_index, "index path (sosecure variant)");
    eval_cmd->add_option("--kb", eval_kb, "knowledge-base JSONL (sosecure variant)");
    eval_cmd->add_option("--mock-llm", eval_mock_llm, "mock reply file, or 'echo'");
    eval_cmd->add_option("--mock-analyzer", eval_mock_analyzer, "canned SARIF file, or 'empty'");
    eval_cmd->add_option("--report-json", report_json_path, "report JSON path");
    eval_cmd->add_option("--report-text", report_text_path, "report text path (default: stdout)");
    eval_cmd->add_option("--k-sweep", k_sweep_csv, "comma list of neighbor counts, e.g. 1,3,5,7");
    eval_cmd->add_option("-k,--k", eval_k, "neighbors for the sosecure variant");
    eval_cmd->add_flag("--trust-labels", trust_labels_flag,
                       "use dataset expected_cwes instead of a pre-revision analyzer pass");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitUsage;
    }

    try {
        const auto cfg = load_config(config_path);

        if (app.got_subcommand(ingest_cmd)) {
            return cmd_ingest(posts_path, comments_path, split_csv(tags_csv), ingest_out,
                              min_code_len);
        }

        if (app.got_subcommand(kb_cmd)) {
            const auto keywords =
                load_keywords(keyword_file_flag.empty() ? cfg.keyword_file : keyword_file_flag);
            const auto stats = kb::build_kb_file(kb_in, keywords, kb_out);
            write_file(kb_out + ".stats.json", kb_stats_to_json(stats).dump(2) + "\n");
            std::cerr << "kb: " << stats.answers_out << " of " << stats.answers_in
                      << " answers retained\n";
            return kExitOk;
        }

        if (app.got_subcommand(index_cmd)) {
            bm25::Bm25Params params = cfg.bm25;
            if (k1_flag >= 0) params.k1 = k1_flag;
            if (b_flag >= 0) params.b = b_flag;
            if (epsilon_flag >= 0) params.idf_floor_epsilon = epsilon_flag;
            if (split_subtokens_flag) params.split_subtokens = true;
            std::vector<std::pair<std::int64_t, std::string>> docs;
            for (const auto& entry : kb::load_kb_file(index_kb))
                docs.emplace_back(entry.answer_id, entry.code_concat);
            const auto index = bm25::Bm25Index::build(docs, params);
            index.save_file(index_out);
            std::cerr << "indexed " << index.doc_count() << " documents\n";
            return kExitOk;
        }

        if (app.got_subcommand(retrieve_cmd)) {
            const auto index = bm25::Bm25Index::load_file(retrieve_index);
            const auto code = read_file(retrieve_code);
            const int k = retrieve_k > 0 ? retrieve_k : cfg.retrieval_k;
            for (const auto& hit : index.query(code, static_cast<std::size_t>(k))) {
                char line[64];
                std::snprintf(line, sizeof(line), "%d\t%lld\t%.6f", hit.rank,
                              static_cast<long long>(hit.answer_id), hit.score);
                std::cout << line << "\n";
            }
            return kExitOk;
        }

        if (app.got_subcommand(revise_cmd)) {
            const auto code = read_file(revise_code);
            const auto kind = revision::variant_from_string(revise_variant);
            revision::PromptVariant variant;
            switch (kind) {
                case revision::VariantKind::base:
                    variant = revision::PromptVariant::base();
                    break;
                case revision::VariantKind::cwe:
                    if (revise_cwe.empty()) throw std::runtime_error("--cwe is required for --variant cwe");
                    variant = revision::PromptVariant::with_cwe(revise_cwe);
                    break;
                case revision::VariantKind::cwe_plus:
                    if (revise_cwe.empty())
                        throw std::runtime_error("--cwe is required for --variant cweplus");
                    variant = revision::PromptVariant::with_cwe_description(
                        revise_cwe, revise_cwe_desc.empty() ? eval::cwe_description(revise_cwe)
                                                            : revise_cwe_desc);
                    break;
                case revision::VariantKind::sosecure: {
                    const std::string index_path = revise_index.empty() ? cfg.index_path : revise_index;
                    const std::string kb_path = revise_kb.empty() ? cfg.kb_path : revise_kb;
                    const auto index = bm25::Bm25Index::load_file(index_path);
                    const auto entries = kb_by_id(kb_path);
                    const int k = revise_k > 0 ? revise_k : cfg.retrieval_k;
                    std::vector<kb::KbEntry> context;
                    for (const auto& hit : index.query(code, static_cast<std::size_t>(k))) {
                        auto it = entries.find(hit.answer_id);
                        if (it != entries.end()) context.push_back(it->second);
                    }
                    if (context.empty())
                        throw std::runtime_error("retrieval returned no context for this snippet");
                    variant = revision::PromptVariant::with_context(std::move(context));
                    break;
                }
            }
            const auto llm_cfg = llm_config_from_env(cfg.llm);
            const auto client = make_client(llm_cfg, mock_llm);
            const auto result = revision::revise(code, variant, llm_cfg, *client);
            std::cout << result.revised_code;
            if (!result.revised_code.empty() && result.revised_code.back() != '\n') std::cout << "\n";
            if (!revise_json_out.empty())
                write_file(revise_json_out, revision_to_json(result).dump(2) + "\n");
            if (result.warning) std::cerr << "warning: " << result.warning_reason << "\n";
            return kExitOk;
        }

        if (app.got_subcommand(eval_cmd)) {
            const auto dataset = eval::load_dataset(eval_dataset);
            eval::EvalOptions options;
            options.variants.clear();
            for (const auto& name : split_csv(eval_variants))
                options.variants.push_back(revision::variant_from_string(name));
            options.trust_labels = trust_labels_flag || cfg.trust_labels;
            if (eval_k > 0) options.retrieval_k = eval_k;
            else options.retrieval_k = cfg.retrieval_k;

            const auto llm_cfg = llm_config_from_env(cfg.llm);
            const auto client = make_client(llm_cfg, eval_mock_llm);
            const auto analyzer_backend = make_analyzer(cfg, eval_mock_analyzer);

            std::optional<bm25::Bm25Index> index;
            std::map<std::int64_t, kb::KbEntry> entries;
            const bool needs_retrieval =
                std::count(options.variants.begin(), options.variants.end(),
                           revision::VariantKind::sosecure) > 0 ||
                !k_sweep_csv.empty();
            if (needs_retrieval) {
                const std::string index_path = eval_index.empty() ? cfg.index_path : eval_index;
                const std::string kb_path = eval_kb.empty() ? cfg.kb_path : eval_kb;
                index = bm25::Bm25Index::load_file(index_path);
                entries = kb_by_id(kb_path);
            }

            eval::EvalBackends backends;
            backends.client = client.get();
            backends.analyzer = analyzer_backend.get();
            backends.index = index ? &*index : nullptr;
            backends.kb = needs_retrieval ? &entries : nullptr;

            auto report = eval::run_eval(dataset, options, backends, llm_cfg);
            if (!k_sweep_csv.empty()) {
                std::vector<int> ks;
                for (const auto& item : split_csv(k_sweep_csv)) ks.push_back(std::stoi(item));
                report.k_sweep = eval::run_k_sweep(dataset, options, backends, llm_cfg, ks);
            }

            const std::string json_out =
                report_json_path.empty() ? eval_dataset + ".report.json" : report_json_path;
            write_file(json_out, eval::report_to_json(report));
            const std::string text = eval::report_to_text(report);
            if (report_text_path.empty()) std::cout << text;
            else write_file(report_text_path, text);

            std::uint64_t errored = 0;
            for (const auto& v : report.variants) errored += v.errored;
            return errored > 0 ? kExitErroredSamples : kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
