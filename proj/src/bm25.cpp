#include "sosecure/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "sosecure/util.hpp"

namespace sosecure::bm25 {

namespace {

constexpr const char* kMagic = "sosecure-bm25-index";
constexpr int kFormatVersion = 1;

bool is_token_char(char c) { return is_word_char(c); }

// Appends camelCase/snake_case segments of `run` to out, lowercased.
// Returns the number of segments found.
std::size_t append_subtokens(std::string_view run, std::vector<std::string>& out) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t start = 0;
    auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
    auto is_lower = [](char c) { return c >= 'a' && c <= 'z'; };
    for (std::size_t i = 0; i < run.size(); ++i) {
        if (run[i] == '_') {
            if (i > start) spans.emplace_back(start, i - start);
            start = i + 1;
            continue;
        }
        if (i > start) {
            const char prev = run[i - 1];
            // lower->Upper boundary, and end of an acronym run (HTTPServer -> HTTP|Server)
            bool boundary = (is_lower(prev) || (prev >= '0' && prev <= '9')) && is_upper(run[i]);
            if (!boundary && is_upper(prev) && is_upper(run[i]) && i + 1 < run.size() && is_lower(run[i + 1]))
                boundary = true;
            if (boundary) {
                spans.emplace_back(start, i - start);
                start = i;
            }
        }
    }
    if (run.size() > start) spans.emplace_back(start, run.size() - start);
    if (spans.size() < 2) return 0;  // full token already emitted; nothing to add
    for (auto [pos, len] : spans) out.push_back(to_lower(run.substr(pos, len)));
    return spans.size();
}

}  // namespace

std::vector<std::string> tokenize_code(std::string_view code, bool split_subtokens) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < code.size()) {
        if (!is_token_char(code[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < code.size() && is_token_char(code[j])) ++j;
        std::string_view run = code.substr(i, j - i);
        tokens.push_back(to_lower(run));
        if (split_subtokens) append_subtokens(run, tokens);
        i = j;
    }
    return tokens;
}

void Bm25Params::validate() const {
    if (!(k1 >= 0.0)) throw std::invalid_argument("bm25: k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("bm25: b must be in [0,1]");
    if (!(idf_floor_epsilon >= 0.0))
        throw std::invalid_argument("bm25: idf_floor_epsilon must be >= 0");
}

Bm25Index Bm25Index::build(const std::vector<std::pair<std::int64_t, std::string>>& docs,
                           const Bm25Params& params) {
    params.validate();
    Bm25Index index;
    index.params_ = params;
    index.doc_len_.reserve(docs.size());
    index.doc_ids_.reserve(docs.size());

    std::unordered_map<std::int64_t, bool> seen;
    std::uint64_t total_len = 0;
    for (const auto& [answer_id, text] : docs) {
        if (!seen.emplace(answer_id, true).second)
            throw std::invalid_argument("bm25: duplicate answer_id " + std::to_string(answer_id));
        const auto ord = static_cast<std::uint32_t>(index.doc_len_.size());
        auto tokens = tokenize_code(text, params.split_subtokens);
        index.doc_ids_.push_back(answer_id);
        index.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_len += tokens.size();

        std::unordered_map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) index.postings_[term].push_back({ord, count});
    }
    for (auto& [term, plist] : index.postings_)
        std::sort(plist.begin(), plist.end(),
                  [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
    index.avg_doc_len_ =
        index.doc_len_.empty() ? 0.0 : static_cast<double>(total_len) / index.doc_len_.size();
    index.compute_idf();
    return index;
}

void Bm25Index::compute_idf() {
    idf_.clear();
    if (postings_.empty()) return;
    const double n = static_cast<double>(doc_len_.size());
    double positive_sum = 0.0;
    std::size_t positive_count = 0;
    for (const auto& [term, plist] : postings_) {
        const double df = static_cast<double>(plist.size());
        const double raw = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        idf_[term] = raw;
        if (raw > 0.0) {
            positive_sum += raw;
            ++positive_count;
        }
    }
    if (params_.idf_floor_epsilon > 0.0 && positive_count > 0) {
        const double floor = params_.idf_floor_epsilon * (positive_sum / positive_count);
        for (auto& [term, v] : idf_) v = std::max(v, floor);
    }
}

double Bm25Index::idf(const std::string& term) const {
    auto it = idf_.find(term);
    return it == idf_.end() ? 0.0 : it->second;
}

std::vector<RetrievalResult> Bm25Index::query(std::string_view code, std::size_t k) const {
    if (k < 1) throw std::invalid_argument("bm25: k must be >= 1");
    std::vector<RetrievalResult> results;
    if (doc_len_.empty()) return results;

    const auto tokens = tokenize_code(code, params_.split_subtokens);
    std::unordered_map<std::uint32_t, double> scores;
    for (const auto& t : tokens) {
        auto pit = postings_.find(t);
        if (pit == postings_.end()) continue;
        const double term_idf = idf_.at(t);
        for (const Posting& p : pit->second) {
            const double tf = static_cast<double>(p.tf);
            const double norm = 1.0 - params_.b + params_.b * doc_len_[p.doc] / avg_doc_len_;
            scores[p.doc] += term_idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * norm);
        }
    }

    results.reserve(scores.size());
    for (const auto& [doc, score] : scores) {
        if (score <= 0.0) continue;
        results.push_back({doc_ids_[doc], score, 0});
    }
    std::sort(results.begin(), results.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.answer_id < b.answer_id;
    });
    if (results.size() > k) results.resize(k);
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i + 1);
    return results;
}

void Bm25Index::save(std::ostream& out) const {
    nlohmann::ordered_json j;
    j["magic"] = kMagic;
    j["version"] = kFormatVersion;
    j["params"] = {{"k1", params_.k1},
                   {"b", params_.b},
                   {"idf_floor_epsilon", params_.idf_floor_epsilon},
                   {"split_subtokens", params_.split_subtokens}};
    auto docs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < doc_ids_.size(); ++i)
        docs.push_back({doc_ids_[i], doc_len_[i]});
    j["docs"] = std::move(docs);
    auto postings = nlohmann::ordered_json::object();
    for (const auto& [term, plist] : postings_) {
        auto arr = nlohmann::ordered_json::array();
        for (const Posting& p : plist) arr.push_back({p.doc, p.tf});
        postings[term] = std::move(arr);
    }
    j["postings"] = std::move(postings);
    out << j.dump() << '\n';
}

void Bm25Index::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Bm25IoError("bm25: cannot write index file: " + path);
    save(out);
}

Bm25Index Bm25Index::load(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Bm25IoError(std::string("bm25: index file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("magic", "") != kMagic)
        throw Bm25IoError("bm25: missing index magic header");
    if (j.value("version", -1) != kFormatVersion)
        throw Bm25IoError("bm25: unsupported index format version " +
                          j.value("version", nlohmann::json(-1)).dump());

    Bm25Index index;
    const auto& p = j.at("params");
    index.params_.k1 = p.at("k1").get<double>();
    index.params_.b = p.at("b").get<double>();
    index.params_.idf_floor_epsilon = p.at("idf_floor_epsilon").get<double>();
    index.params_.split_subtokens = p.at("split_subtokens").get<bool>();
    index.params_.validate();

    std::uint64_t total_len = 0;
    for (const auto& d : j.at("docs")) {
        index.doc_ids_.push_back(d.at(0).get<std::int64_t>());
        index.doc_len_.push_back(d.at(1).get<std::uint32_t>());
        total_len += index.doc_len_.back();
    }
    for (const auto& [term, arr] : j.at("postings").items()) {
        auto& plist = index.postings_[term];
        for (const auto& pr : arr)
            plist.push_back({pr.at(0).get<std::uint32_t>(), pr.at(1).get<std::uint32_t>()});
        for (const Posting& posting : plist)
            if (posting.doc >= index.doc_len_.size())
                throw Bm25IoError("bm25: posting references unknown document ordinal");
    }
    index.avg_doc_len_ =
        index.doc_len_.empty() ? 0.0 : static_cast<double>(total_len) / index.doc_len_.size();
    index.compute_idf();
    return index;
}

Bm25Index Bm25Index::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Bm25IoError("bm25: cannot open index file: " + path);
    return load(in);
}

}  // namespace sosecure::bm25
