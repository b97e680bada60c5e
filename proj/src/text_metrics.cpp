#include "sosecure/text_metrics.hpp"

#include <array>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "sosecure/util.hpp"

namespace sosecure::text {

namespace {

struct Match {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t size = 0;
};

// Longest matching run of a[alo,ahi) within b[blo,bhi); ties resolve to the
// smallest a offset, then the smallest b offset. b_pos holds, per byte value,
// the ascending positions of that byte in b.
Match longest_match(std::string_view a, std::size_t alo, std::size_t ahi,
                    const std::array<std::vector<std::size_t>, 256>& b_pos, std::size_t blo,
                    std::size_t bhi) {
    Match best{alo, blo, 0};
    std::unordered_map<std::size_t, std::size_t> run_len;  // b index -> run length ending there
    for (std::size_t i = alo; i < ahi; ++i) {
        std::unordered_map<std::size_t, std::size_t> next_len;
        for (std::size_t j : b_pos[static_cast<unsigned char>(a[i])]) {
            if (j < blo) continue;
            if (j >= bhi) break;
            std::size_t k = 1;
            if (j > blo) {
                auto it = run_len.find(j - 1);
                if (it != run_len.end()) k = it->second + 1;
            }
            next_len[j] = k;
            if (k > best.size) best = {i - k + 1, j - k + 1, k};
        }
        run_len = std::move(next_len);
    }
    return best;
}

}  // namespace

double similarity_ratio(std::string_view a, std::string_view b) {
    const std::size_t total = a.size() + b.size();
    if (total == 0) return 1.0;
    // The greedy decomposition is order-sensitive in rare tie cases; fix an
    // operand order up front so the ratio is symmetric.
    if (b.size() < a.size() || (b.size() == a.size() && b < a)) std::swap(a, b);

    std::array<std::vector<std::size_t>, 256> b_pos;
    for (std::size_t j = 0; j < b.size(); ++j)
        b_pos[static_cast<unsigned char>(b[j])].push_back(j);

    std::size_t matched = 0;
    // Explicit work stack instead of recursion; regions are independent.
    std::vector<std::array<std::size_t, 4>> work{{0, a.size(), 0, b.size()}};
    while (!work.empty()) {
        auto [alo, ahi, blo, bhi] = work.back();
        work.pop_back();
        if (alo >= ahi || blo >= bhi) continue;
        Match m = longest_match(a, alo, ahi, b_pos, blo, bhi);
        if (m.size == 0) continue;
        matched += m.size;
        work.push_back({alo, m.a, blo, m.b});
        work.push_back({m.a + m.size, ahi, m.b + m.size, bhi});
    }
    return 2.0 * static_cast<double>(matched) / static_cast<double>(total);
}

std::size_t estimate_tokens(std::string_view text) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (is_word_char(c)) {
            ++count;
            while (i < text.size() && is_word_char(text[i])) ++i;
            continue;
        }
        ++count;  // punctuation mark
        ++i;
    }
    return count;
}

}  // namespace sosecure::text
