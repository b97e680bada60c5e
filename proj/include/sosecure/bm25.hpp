#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sosecure::bm25 {

/// Splits code into lowercased maximal [A-Za-z0-9_] runs. Everything else is
/// a separator. With split_subtokens set, each run with camelCase or
/// snake_case structure additionally yields its segments.
std::vector<std::string> tokenize_code(std::string_view code, bool split_subtokens = false);

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
    // Lower bound on per-term IDF, expressed as a fraction of the mean
    // positive IDF. Zero disables the floor.
    double idf_floor_epsilon = 0.25;
    bool split_subtokens = false;

    void validate() const;  // throws std::invalid_argument on out-of-range values
};

struct RetrievalResult {
    std::int64_t answer_id = 0;
    double score = 0.0;
    int rank = 0;  // 1-based
};

struct Posting {
    std::uint32_t doc = 0;  // ordinal into doc tables
    std::uint32_t tf = 0;

    bool operator==(const Posting&) const = default;
};

class Bm25IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inverted index over one text per document. Immutable once built; safe for
/// concurrent readers.
///
/// score(d) = sum over query tokens t of
///   idf(t) * tf(t,d) * (k1+1) / (tf(t,d) + k1 * (1 - b + b * len(d)/avg_len))
/// with idf(t) = ln((N - df + 0.5)/(df + 0.5) + 1), floored at
/// idf_floor_epsilon * mean positive idf when the floor is enabled. Repeated
/// query tokens contribute once per occurrence. Documents that match no token
/// are omitted; ties break by ascending answer id.
class Bm25Index {
public:
    Bm25Index() = default;

    /// docs: (answer_id, text). Ids must be distinct; throws
    /// std::invalid_argument on duplicates.
    static Bm25Index build(const std::vector<std::pair<std::int64_t, std::string>>& docs,
                           const Bm25Params& params = {});

    /// Top-k matches, k >= 1 (throws std::invalid_argument otherwise).
    std::vector<RetrievalResult> query(std::string_view code, std::size_t k) const;

    std::size_t doc_count() const { return doc_len_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_len_; }
    const std::vector<std::int64_t>& doc_ids() const { return doc_ids_; }
    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    double idf(const std::string& term) const;  // 0 for unknown terms

    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;
    /// Fails with Bm25IoError on missing magic or version mismatch.
    static Bm25Index load(std::istream& in);
    static Bm25Index load_file(const std::string& path);

private:
    void compute_idf();

    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_len_;
    std::vector<std::int64_t> doc_ids_;
    double avg_doc_len_ = 0.0;
    Bm25Params params_;
    std::map<std::string, double> idf_;
};

}  // namespace sosecure::bm25
