#include "sosecure/text_metrics.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using sosecure::text::estimate_tokens;
using sosecure::text::similarity_ratio;

TEST_CASE("similarity_ratio handles the fixed cases") {
    CHECK(similarity_ratio("abc", "abc") == 1.0);
    CHECK(similarity_ratio("abc", "xyz") == 0.0);
    CHECK(similarity_ratio("abcd", "bcde") == 0.75);  // M=3, 2*3/8
    CHECK(similarity_ratio("", "") == 1.0);
    CHECK(similarity_ratio("", "abc") == 0.0);
}

TEST_CASE("similarity_ratio is symmetric and 1 on identity") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> len(0, 40);
    std::uniform_int_distribution<int> chr('a', 'f');
    for (int round = 0; round < 200; ++round) {
        std::string a, b;
        for (int i = len(rng); i > 0; --i) a.push_back(static_cast<char>(chr(rng)));
        for (int i = len(rng); i > 0; --i) b.push_back(static_cast<char>(chr(rng)));
        const double ab = similarity_ratio(a, b);
        CHECK(ab == similarity_ratio(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(similarity_ratio(a, a) == 1.0);
    }
}

TEST_CASE("similarity_ratio agrees with the reference decomposition") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> len(0, 60);
    std::uniform_int_distribution<int> chr('a', 'e');  // small alphabet forces repeats
    for (int round = 0; round < 300; ++round) {
        std::string a, b;
        for (int i = len(rng); i > 0; --i) a.push_back(static_cast<char>(chr(rng)));
        for (int i = len(rng); i > 0; --i) b.push_back(static_cast<char>(chr(rng)));
        const double expected = oracles::reference_similarity(a, b);
        CHECK(similarity_ratio(a, b) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("estimate_tokens counts word runs plus punctuation") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("a b c") == 3);
    CHECK(estimate_tokens("subprocess.call(command)") == 6);  // 3 words + . ( )
    CHECK(estimate_tokens("   \n\t ") == 0);
    CHECK(estimate_tokens("x+=1") == 4);  // x, +, =, 1
}
