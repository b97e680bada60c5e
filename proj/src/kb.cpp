#include "sosecure/kb.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sosecure/util.hpp"

namespace sosecure::kb {

namespace {

bool boundary_before(const std::string& text, std::size_t pos) {
    return pos == 0 || !is_word_char(text[pos - 1]);
}

bool boundary_after(const std::string& text, std::size_t end) {
    return end >= text.size() || !is_word_char(text[end]);
}

std::string join_code_blocks(const std::vector<std::string>& blocks) {
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += blocks[i];
    }
    return out;
}

}  // namespace

KeywordSet KeywordSet::from_terms(std::vector<Keyword> terms) {
    if (terms.empty()) throw std::invalid_argument("keyword set must not be empty");
    for (auto& kw : terms) {
        kw.term = to_lower(kw.term);
        while (!kw.term.empty() && (kw.term.front() == ' ' || kw.term.front() == '\t'))
            kw.term.erase(kw.term.begin());
        while (!kw.term.empty() && (kw.term.back() == ' ' || kw.term.back() == '\t'))
            kw.term.pop_back();
        if (kw.term.empty()) throw std::invalid_argument("keyword terms must be non-empty");
    }
    KeywordSet ks;
    ks.keywords_ = std::move(terms);
    return ks;
}

KeywordSet KeywordSet::default_set() {
    return from_terms({
        {"secure", false},     {"security", false},    {"insecure", false},
        {"vulnerab", true},    {"exploit", false},     {"attack", false},
        {"malicious", false},  {"inject", false},      {"injection", false},
        {"xss", false},        {"csrf", false},        {"sql injection", false},
        {"sanitiz", true},     {"escap", true},        {"cve", false},
        {"cwe", false},        {"deprecat", true},     {"unauthoriz", true},
        {"unsafe", false},     {"overflow", false},    {"plaintext", false},
        {"hardcoded", false},  {"leak", false},        {"mitm", false},
        {"spoof", false},      {"privilege", false},
    });
}

KeywordSet KeywordSet::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open keyword file: " + path.string());
    std::vector<Keyword> terms;
    std::string line;
    while (std::getline(in, line)) {
        // strip comments: '#' at start or preceded by whitespace
        std::size_t cut = std::string::npos;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
                cut = i;
                break;
            }
        }
        if (cut != std::string::npos) line.erase(cut);
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t\r");
        std::string term = line.substr(b, e - b + 1);
        bool stem = false;
        if (term.back() == '*') {
            stem = true;
            term.pop_back();
            while (!term.empty() && (term.back() == ' ' || term.back() == '\t')) term.pop_back();
        }
        if (term.empty()) continue;
        terms.push_back({term, stem});
    }
    return from_terms(std::move(terms));
}

std::vector<std::string> KeywordSet::match(std::string_view text) const {
    const std::string lowered = to_lower(text);
    std::set<std::string> hits;
    for (const auto& kw : keywords_) {
        std::size_t pos = 0;
        while ((pos = lowered.find(kw.term, pos)) != std::string::npos) {
            const std::size_t end = pos + kw.term.size();
            if (boundary_before(lowered, pos) && (kw.stem || boundary_after(lowered, end))) {
                hits.insert(kw.term);
                break;
            }
            ++pos;
        }
    }
    return {hits.begin(), hits.end()};
}

std::optional<KbEntry> make_entry(const ingest::CleanAnswer& answer, const KeywordSet& keywords) {
    std::set<std::string> matched;
    for (const auto& comment : answer.comments)
        for (auto& hit : keywords.match(comment)) matched.insert(std::move(hit));
    if (matched.empty()) return std::nullopt;

    KbEntry entry;
    entry.answer_id = answer.answer_id;
    entry.question_id = answer.question_id;
    entry.language_tags = answer.language_tags;
    entry.body_clean = answer.body_clean;
    entry.code_blocks = answer.code_blocks;
    entry.comments = answer.comments;
    entry.matched_keywords.assign(matched.begin(), matched.end());
    entry.code_concat = join_code_blocks(answer.code_blocks);
    entry.score = answer.score;
    return entry;
}

namespace {

void fold_stats(BuildStats& stats, const ingest::CleanAnswer& answer, bool retained) {
    ++stats.answers_in;
    stats.comments_scanned += answer.comments.size();
    for (const auto& tag : answer.language_tags) ++stats.per_tag[tag].in;
    if (retained) {
        ++stats.answers_out;
        stats.comments_on_retained += answer.comments.size();
        for (const auto& tag : answer.language_tags) ++stats.per_tag[tag].out;
    }
}

}  // namespace

std::pair<std::vector<KbEntry>, BuildStats> build_kb(const std::vector<ingest::CleanAnswer>& answers,
                                                     const KeywordSet& keywords) {
    std::vector<KbEntry> entries;
    BuildStats stats;
    for (const auto& answer : answers) {
        auto entry = make_entry(answer, keywords);
        fold_stats(stats, answer, entry.has_value());
        if (entry) entries.push_back(std::move(*entry));
    }
    std::sort(entries.begin(), entries.end(),
              [](const KbEntry& a, const KbEntry& b) { return a.answer_id < b.answer_id; });
    return {std::move(entries), stats};
}

BuildStats build_kb_file(const std::filesystem::path& answers_jsonl, const KeywordSet& keywords,
                         const std::filesystem::path& out_jsonl) {
    std::ifstream in(answers_jsonl);
    if (!in) throw std::runtime_error("cannot open answers file: " + answers_jsonl.string());
    std::vector<KbEntry> entries;
    BuildStats stats;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto answer = ingest::clean_answer_from_json(line);
        auto entry = make_entry(answer, keywords);
        fold_stats(stats, answer, entry.has_value());
        if (entry) entries.push_back(std::move(*entry));
    }
    std::sort(entries.begin(), entries.end(),
              [](const KbEntry& a, const KbEntry& b) { return a.answer_id < b.answer_id; });
    write_kb_file(out_jsonl, entries);
    return stats;
}

std::string kb_entry_to_json(const KbEntry& entry) {
    nlohmann::ordered_json j;
    j["answer_id"] = entry.answer_id;
    j["question_id"] = entry.question_id;
    j["language_tags"] = entry.language_tags;
    j["body_clean"] = entry.body_clean;
    j["code_blocks"] = entry.code_blocks;
    j["comments"] = entry.comments;
    j["matched_keywords"] = entry.matched_keywords;
    j["code_concat"] = entry.code_concat;
    j["score"] = entry.score;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

KbEntry kb_entry_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    KbEntry entry;
    entry.answer_id = j.at("answer_id").get<std::int64_t>();
    entry.question_id = j.at("question_id").get<std::int64_t>();
    entry.language_tags = j.at("language_tags").get<std::vector<std::string>>();
    entry.body_clean = j.at("body_clean").get<std::string>();
    entry.code_blocks = j.at("code_blocks").get<std::vector<std::string>>();
    entry.comments = j.at("comments").get<std::vector<std::string>>();
    entry.matched_keywords = j.at("matched_keywords").get<std::vector<std::string>>();
    entry.code_concat = j.at("code_concat").get<std::string>();
    entry.score = j.at("score").get<int>();
    return entry;
}

void write_kb_file(const std::filesystem::path& path, const std::vector<KbEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write kb file: " + path.string());
    for (const auto& entry : entries) out << kb_entry_to_json(entry) << '\n';
}

std::vector<KbEntry> load_kb_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open kb file: " + path.string());
    std::vector<KbEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        entries.push_back(kb_entry_from_json(line));
    }
    return entries;
}

}  // namespace sosecure::kb
