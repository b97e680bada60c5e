#pragma once

// Test-side reference implementations, kept independent of the library's
// query/scoring/matching paths so they can act as oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sosecure/bm25.hpp"

namespace oracles {

struct ScoredDoc {
    std::int64_t answer_id = 0;
    double score = 0.0;
};

// Naive per-document BM25 scorer: no inverted index, no shared scoring code.
inline std::vector<ScoredDoc> brute_force_rank(
    const std::vector<std::pair<std::int64_t, std::string>>& docs, const std::string& query,
    const sosecure::bm25::Bm25Params& params) {
    using sosecure::bm25::tokenize_code;

    std::vector<std::vector<std::string>> doc_tokens;
    doc_tokens.reserve(docs.size());
    for (const auto& [id, text] : docs) doc_tokens.push_back(tokenize_code(text, params.split_subtokens));

    const double n = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& tokens : doc_tokens) total_len += static_cast<double>(tokens.size());
    const double avg_len = docs.empty() ? 0.0 : total_len / n;

    // document frequency per term
    std::map<std::string, int> df;
    for (const auto& tokens : doc_tokens) {
        std::map<std::string, bool> seen;
        for (const auto& t : tokens)
            if (seen.emplace(t, true).second) ++df[t];
    }
    std::map<std::string, double> idf;
    double positive_sum = 0;
    int positive_count = 0;
    for (const auto& [term, freq] : df) {
        const double raw = std::log((n - freq + 0.5) / (freq + 0.5) + 1.0);
        idf[term] = raw;
        if (raw > 0) {
            positive_sum += raw;
            ++positive_count;
        }
    }
    if (params.idf_floor_epsilon > 0 && positive_count > 0) {
        const double floor = params.idf_floor_epsilon * (positive_sum / positive_count);
        for (auto& [term, value] : idf) value = std::max(value, floor);
    }

    const auto query_tokens = tokenize_code(query, params.split_subtokens);
    std::vector<ScoredDoc> scored;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::map<std::string, int> tf;
        for (const auto& t : doc_tokens[d]) ++tf[t];
        double score = 0;
        for (const auto& t : query_tokens) {
            auto it = tf.find(t);
            if (it == tf.end()) continue;
            const double f = it->second;
            const double norm =
                1.0 - params.b + params.b * static_cast<double>(doc_tokens[d].size()) / avg_len;
            score += idf[t] * f * (params.k1 + 1.0) / (f + params.k1 * norm);
        }
        if (score > 0) scored.push_back({docs[d].first, score});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.answer_id < b.answer_id;
    });
    return scored;
}

// Plain DP longest-common-substring Ratcliff-Obershelp, recursion included.
// Ties resolve to the earliest offset in a, then in b, matching the library's
// stated rule but through a different algorithm.
inline std::size_t ro_matched_chars(const std::string& a, std::size_t alo, std::size_t ahi,
                                    const std::string& b, std::size_t blo, std::size_t bhi) {
    if (alo >= ahi || blo >= bhi) return 0;
    const std::size_t rows = ahi - alo;
    const std::size_t cols = bhi - blo;
    std::vector<std::vector<std::size_t>> table(rows + 1, std::vector<std::size_t>(cols + 1, 0));
    std::size_t best = 0, best_i = alo, best_j = blo;
    for (std::size_t i = 1; i <= rows; ++i) {
        for (std::size_t j = 1; j <= cols; ++j) {
            if (a[alo + i - 1] != b[blo + j - 1]) continue;
            table[i][j] = table[i - 1][j - 1] + 1;
            const std::size_t start_i = alo + i - table[i][j];
            const std::size_t start_j = blo + j - table[i][j];
            if (table[i][j] > best ||
                (table[i][j] == best && (start_i < best_i || (start_i == best_i && start_j < best_j)))) {
                best = table[i][j];
                best_i = start_i;
                best_j = start_j;
            }
        }
    }
    if (best == 0) return 0;
    return best + ro_matched_chars(a, alo, best_i, b, blo, best_j) +
           ro_matched_chars(a, best_i + best, ahi, b, best_j + best, bhi);
}

inline double reference_similarity(std::string a, std::string b) {
    if (a.empty() && b.empty()) return 1.0;
    // same canonical operand order as the library, different algorithm
    if (b.size() < a.size() || (b.size() == a.size() && b < a)) std::swap(a, b);
    const auto matched = ro_matched_chars(a, 0, a.size(), b, 0, b.size());
    return 2.0 * static_cast<double>(matched) / static_cast<double>(a.size() + b.size());
}

// Monte Carlo estimate of the chance that k of n draws avoid all v vulnerable
// generations.
inline double monte_carlo_secure_at_k(int n, int v, int k, int draws, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::vector<int> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = i;
    int all_clean = 0;
    for (int d = 0; d < draws; ++d) {
        // partial Fisher-Yates for the first k
        for (int i = 0; i < k; ++i) {
            std::uniform_int_distribution<int> pick(i, n - 1);
            std::swap(indices[i], indices[pick(rng)]);
        }
        bool clean = true;
        for (int i = 0; i < k && clean; ++i)
            if (indices[i] < v) clean = false;  // first v ordinals are the vulnerable ones
        if (clean) ++all_clean;
    }
    return 100.0 * static_cast<double>(all_clean) / static_cast<double>(draws);
}

// Exact enumeration over all C(n,k) subsets.
inline double enumerate_secure_at_k(int n, int v, int k) {
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    long long total = 0, clean = 0;
    while (true) {
        ++total;
        bool all_clean = true;
        for (int i = 0; i < k && all_clean; ++i)
            if (pick[i] < v) all_clean = false;
        if (all_clean) ++clean;
        int i = k - 1;
        while (i >= 0 && pick[i] == n - k + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    return 100.0 * static_cast<double>(clean) / static_cast<double>(total);
}

}  // namespace oracles
