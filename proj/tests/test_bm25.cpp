#include "sosecure/bm25.hpp"

#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

using namespace sosecure;
using bm25::Bm25Index;
using bm25::Bm25Params;
using bm25::tokenize_code;

namespace {

std::vector<std::pair<std::int64_t, std::string>> toy_corpus() {
    return {{0, "subprocess shell true"}, {1, "json loads dumps"}, {2, "subprocess run args"}};
}

std::vector<std::pair<std::int64_t, std::string>> random_corpus(std::mt19937& rng, int max_docs,
                                                                int max_tokens) {
    static const std::vector<std::string> vocab = {
        "subprocess", "shell",  "true",  "false", "json",   "loads", "dumps", "run",
        "args",       "eval",   "exec",  "open",  "read",   "write", "close", "flask",
        "request",    "args2",  "get",   "post",  "sql",    "query", "conn",  "cursor",
        "os",         "system", "popen", "input", "output", "x",     "y",     "i"};
    std::uniform_int_distribution<int> n_docs(1, max_docs);
    std::uniform_int_distribution<int> n_tokens(0, max_tokens);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::vector<std::pair<std::int64_t, std::string>> docs;
    const int count = n_docs(rng);
    for (int d = 0; d < count; ++d) {
        std::string text;
        const int len = n_tokens(rng);
        for (int t = 0; t < len; ++t) {
            if (t > 0) text += ' ';
            text += vocab[pick(rng)];
        }
        docs.emplace_back(d * 7 + 3, text);  // non-contiguous ids
    }
    return docs;
}

std::string random_query(std::mt19937& rng, int max_tokens) {
    static const std::vector<std::string> vocab = {"subprocess", "shell", "json",  "run",
                                                   "eval",       "sql",   "query", "zzz_absent",
                                                   "x",          "i",     "open",  "popen"};
    std::uniform_int_distribution<int> n_tokens(1, max_tokens);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string query;
    const int len = n_tokens(rng);
    for (int t = 0; t < len; ++t) {
        if (t > 0) query += ' ';
        query += vocab[pick(rng)];
    }
    return query;
}

}  // namespace

TEST_CASE("tokenize_code lowercases word runs and drops separators") {
    CHECK(tokenize_code("subprocess.call(command, shell=True)") ==
          std::vector<std::string>{"subprocess", "call", "command", "shell", "true"});
    CHECK(tokenize_code("") == std::vector<std::string>{});
    CHECK(tokenize_code("x+=1") == std::vector<std::string>{"x", "1"});
}

TEST_CASE("tokenize_code optionally splits camelCase and snake_case") {
    CHECK(tokenize_code("getHTTPResponse", true) ==
          std::vector<std::string>{"gethttpresponse", "get", "http", "response"});
    CHECK(tokenize_code("snake_case_name", true) ==
          std::vector<std::string>{"snake_case_name", "snake", "case", "name"});
    // single-segment tokens are not duplicated
    CHECK(tokenize_code("plain", true) == std::vector<std::string>{"plain"});
    // default: no splitting
    CHECK(tokenize_code("getHTTPResponse") == std::vector<std::string>{"gethttpresponse"});
}

TEST_CASE("Bm25Params validation rejects out-of-range values") {
    Bm25Params params;
    CHECK_NOTHROW(params.validate());
    params.b = 1.5;
    CHECK_THROWS_AS(params.validate(), std::invalid_argument);
    params.b = 0.75;
    params.k1 = -0.1;
    CHECK_THROWS_AS(params.validate(), std::invalid_argument);
    params.k1 = 1.5;
    params.idf_floor_epsilon = -1;
    CHECK_THROWS_AS(params.validate(), std::invalid_argument);
}

TEST_CASE("build computes document statistics") {
    const auto index = Bm25Index::build(toy_corpus(), {});
    CHECK(index.doc_count() == 3);
    CHECK(index.avg_doc_len() == doctest::Approx(3.0));

    // postings tf totals equal each document's token count
    std::vector<std::uint64_t> tf_sum(index.doc_count(), 0);
    for (const auto& [term, postings] : index.postings())
        for (const auto& p : postings) tf_sum[p.doc] += p.tf;
    for (std::size_t d = 0; d < index.doc_count(); ++d)
        CHECK(tf_sum[d] == index.doc_lengths()[d]);
}

TEST_CASE("build rejects duplicate answer ids") {
    CHECK_THROWS_AS(Bm25Index::build({{1, "a"}, {1, "b"}}, {}), std::invalid_argument);
}

TEST_CASE("query scores the toy corpus per the formula") {
    const auto index = Bm25Index::build(toy_corpus(), {});
    const auto results = index.query("subprocess shell", 10);
    REQUIRE(results.size() == 2);  // d1 shares no token and is omitted
    CHECK(results[0].answer_id == 0);
    CHECK(results[0].rank == 1);
    CHECK(results[0].score == doctest::Approx(1.4508328822574619).epsilon(1e-12));
    CHECK(results[1].answer_id == 2);
    CHECK(results[1].rank == 2);
    CHECK(results[1].score == doctest::Approx(0.4700036292457356).epsilon(1e-12));
}

TEST_CASE("query for absent tokens returns nothing") {
    const auto index = Bm25Index::build(toy_corpus(), {});
    CHECK(index.query("tensorflow keras", 5).empty());
}

TEST_CASE("query equal to a document's text ranks that document first") {
    const auto index = Bm25Index::build(toy_corpus(), {});
    const auto results = index.query("subprocess run args", 3);
    REQUIRE(!results.empty());
    CHECK(results[0].answer_id == 2);
    CHECK(results[0].score == doctest::Approx(2.431662135269188).epsilon(1e-12));
}

TEST_CASE("query validates k") {
    const auto index = Bm25Index::build(toy_corpus(), {});
    CHECK_THROWS_AS(index.query("subprocess", 0), std::invalid_argument);
}

TEST_CASE("empty index answers queries with empty results") {
    const auto index = Bm25Index::build({}, {});
    CHECK(index.doc_count() == 0);
    CHECK(index.query("anything", 3).empty());
}

TEST_CASE("index round-trips through serialization with identical rankings") {
    std::mt19937 rng(7);
    const auto docs = random_corpus(rng, 30, 12);
    const auto index = Bm25Index::build(docs, {});

    std::stringstream buffer;
    index.save(buffer);
    const auto loaded = Bm25Index::load(buffer);

    for (int q = 0; q < 100; ++q) {
        const auto query = random_query(rng, 5);
        const auto a = index.query(query, 10);
        const auto b = loaded.query(query, 10);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].answer_id == b[i].answer_id);
            CHECK(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("loading rejects wrong magic and version") {
    std::stringstream bogus("{\"magic\":\"something-else\",\"version\":1}");
    CHECK_THROWS_AS(Bm25Index::load(bogus), bm25::Bm25IoError);

    const auto index = Bm25Index::build(toy_corpus(), {});
    std::stringstream buffer;
    index.save(buffer);
    auto text = buffer.str();
    const auto pos = text.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 11, "\"version\":9");
    std::stringstream wrong(text);
    CHECK_THROWS_AS(Bm25Index::load(wrong), bm25::Bm25IoError);

    std::stringstream garbage("not json");
    CHECK_THROWS_AS(Bm25Index::load(garbage), bm25::Bm25IoError);
}

TEST_CASE("ranking matches the brute-force scorer on random corpora") {
    std::mt19937 rng(99);
    for (int round = 0; round < 40; ++round) {
        const auto docs = random_corpus(rng, 50, 30);
        const auto index = Bm25Index::build(docs, {});
        const auto query = random_query(rng, 6);

        const auto expected = oracles::brute_force_rank(docs, query, {});
        const auto actual = index.query(query, docs.size() + 1);
        REQUIRE(actual.size() == expected.size());
        for (std::size_t i = 0; i < actual.size(); ++i) {
            CHECK(actual[i].answer_id == expected[i].answer_id);
            CHECK(actual[i].score == doctest::Approx(expected[i].score).epsilon(1e-12));
        }
    }
}

TEST_CASE("scores are non-negative under the floored IDF regime") {
    std::mt19937 rng(3);
    for (int round = 0; round < 20; ++round) {
        const auto docs = random_corpus(rng, 25, 10);
        const auto index = Bm25Index::build(docs, {});
        const auto results = index.query(random_query(rng, 4), docs.size() + 1);
        for (const auto& hit : results) CHECK(hit.score > 0.0);
    }
}

TEST_CASE("query(k) is a prefix of query(k+1)") {
    std::mt19937 rng(11);
    const auto docs = random_corpus(rng, 40, 10);
    const auto index = Bm25Index::build(docs, {});
    for (int round = 0; round < 20; ++round) {
        const auto query = random_query(rng, 5);
        for (std::size_t k = 1; k + 1 <= docs.size(); k += 3) {
            const auto shorter = index.query(query, k);
            const auto longer = index.query(query, k + 1);
            REQUIRE(shorter.size() <= longer.size());
            for (std::size_t i = 0; i < shorter.size(); ++i)
                CHECK(shorter[i].answer_id == longer[i].answer_id);
        }
    }
}

TEST_CASE("adding a document sharing no query token preserves rank order") {
    std::mt19937 rng(23);
    for (int round = 0; round < 20; ++round) {
        auto docs = random_corpus(rng, 20, 8);
        const std::string query = random_query(rng, 4);
        const auto before = Bm25Index::build(docs, {}).query(query, docs.size() + 2);

        docs.emplace_back(100000, "qqq_unrelated www_other eee_distinct");
        const auto after = Bm25Index::build(docs, {}).query(query, docs.size() + 2);

        REQUIRE(before.size() == after.size());
        for (std::size_t i = 0; i < before.size(); ++i)
            CHECK(before[i].answer_id == after[i].answer_id);
    }
}
