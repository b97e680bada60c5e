#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sosecure/ingest.hpp"

namespace sosecure::kb {

struct Keyword {
    std::string term;   // lowercase
    bool stem = false;  // stems match at a left word boundary; literals need both

    bool operator==(const Keyword&) const = default;
};

/// Case-insensitive keyword matcher over comment text. Literals must be
/// bounded by non-word characters on both sides ("cve" does not hit
/// "discover"); stems only on the left ("vulnerab" hits "vulnerability").
class KeywordSet {
public:
    /// Throws std::invalid_argument on an empty set or empty terms.
    static KeywordSet from_terms(std::vector<Keyword> terms);

    /// Built-in default list; callers may replace it from a keyword file.
    static KeywordSet default_set();

    /// One term per line, '#' starts a comment, a trailing '*' marks a stem.
    static KeywordSet from_file(const std::filesystem::path& path);

    /// Matched keyword identifiers (stems reported by their stem term),
    /// sorted and de-duplicated. Empty means no match.
    std::vector<std::string> match(std::string_view text) const;

    const std::vector<Keyword>& keywords() const { return keywords_; }

private:
    std::vector<Keyword> keywords_;
};

struct KbEntry {
    std::int64_t answer_id = 0;
    std::int64_t question_id = 0;
    std::vector<std::string> language_tags;
    std::string body_clean;
    std::vector<std::string> code_blocks;
    std::vector<std::string> comments;
    std::vector<std::string> matched_keywords;  // sorted, non-empty
    std::string code_concat;                    // code_blocks joined with '\n'
    int score = 0;
};

struct TagCount {
    std::uint64_t in = 0;
    std::uint64_t out = 0;
};

struct BuildStats {
    std::uint64_t answers_in = 0;
    std::uint64_t answers_out = 0;
    std::uint64_t comments_scanned = 0;      // across all input answers
    std::uint64_t comments_on_retained = 0;  // across emitted entries only
    std::map<std::string, TagCount> per_tag;
};

/// Entry for one answer, or nullopt when no comment matches the keyword set.
std::optional<KbEntry> make_entry(const ingest::CleanAnswer& answer, const KeywordSet& keywords);

/// Filters answers into KB entries. Output is sorted by answer_id.
std::pair<std::vector<KbEntry>, BuildStats> build_kb(const std::vector<ingest::CleanAnswer>& answers,
                                                     const KeywordSet& keywords);

/// Streaming variant over the staging JSONL; writes KB JSONL plus returns
/// stats. Entries are emitted sorted by answer_id regardless of input order.
BuildStats build_kb_file(const std::filesystem::path& answers_jsonl,
                         const KeywordSet& keywords,
                         const std::filesystem::path& out_jsonl);

std::string kb_entry_to_json(const KbEntry& entry);
KbEntry kb_entry_from_json(const std::string& line);

void write_kb_file(const std::filesystem::path& path, const std::vector<KbEntry>& entries);
std::vector<KbEntry> load_kb_file(const std::filesystem::path& path);

}  // namespace sosecure::kb
