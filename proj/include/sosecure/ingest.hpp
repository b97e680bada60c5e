#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sosecure::ingest {

class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& message, std::uint64_t byte_offset)
        : std::runtime_error(message + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::uint64_t byte_offset() const { return byte_offset_; }

private:
    std::uint64_t byte_offset_;
};

enum class PostType { question = 1, answer = 2 };

struct RawPostRow {
    std::int64_t id = 0;
    PostType post_type = PostType::question;
    std::optional<std::int64_t> parent_id;  // answers only
    std::optional<std::string> tags;        // questions only, raw form "<python><flask>"
    std::string body;
    int score = 0;
};

struct RawCommentRow {
    std::int64_t id = 0;
    std::int64_t post_id = 0;
    std::string text;
};

struct CleanAnswer {
    std::int64_t answer_id = 0;
    std::int64_t question_id = 0;
    std::vector<std::string> language_tags;  // lowercase, sorted
    std::string body_clean;
    std::vector<std::string> code_blocks;
    std::vector<std::string> comments;
    int score = 0;
};

/// Decodes XML/HTML character references: the five predefined entities plus
/// &nbsp; and numeric forms (&#nn; &#xhh;). Unrecognized sequences pass
/// through unchanged.
std::string decode_entities(std::string_view s);

/// Replaces URLs (scheme-prefixed or bare www. hosts) and emails with the
/// literal tokens [URL] and [EMAIL].
std::string scrub_pii(std::string_view text);

struct CleanedBody {
    std::string body_clean;
    std::vector<std::string> code_blocks;
};

/// Strips every tag except <code> spans, decodes entities, and scrubs
/// URLs/emails from the non-code text. Code span contents go to code_blocks
/// in document order (nested <code> collapses into the enclosing span) and
/// are never scrubbed. In body_clean, '&' and '<' outside the literal
/// <code>/</code> delimiters are re-escaped so the output parses back to
/// itself. Blocks shorter than min_code_block_len are kept in body_clean but
/// not counted as code blocks.
CleanedBody clean_html(std::string_view body, std::size_t min_code_block_len = 0);

/// Pull parser for dump files shaped as one attribute-only <row .../> element
/// per record under a single root. Structural malformation raises IngestError
/// with the byte offset; attribute-level garbage is the caller's concern.
class XmlRowReader {
public:
    explicit XmlRowReader(std::istream& in);

    /// Attributes of the next row in file order (values entity-decoded), or
    /// nullopt at end of input.
    std::optional<std::vector<std::pair<std::string, std::string>>> next();

    std::uint64_t rows_read() const { return rows_read_; }

private:
    bool fill();
    bool ensure(std::size_t pos, std::size_t len);
    void compact();

    std::istream& in_;
    std::string buf_;
    std::size_t pos_ = 0;
    std::uint64_t base_ = 0;  // stream offset of buf_[0]
    std::uint64_t rows_read_ = 0;
    bool eof_ = false;
};

/// Converts row attributes to typed post rows. Rows that are not questions or
/// answers are counted and passed over; rows with missing or unparseable
/// mandatory attributes (Id, PostTypeId, ParentId for answers) are skipped
/// and tallied.
class PostsParser {
public:
    explicit PostsParser(std::istream& in) : reader_(in) {}

    std::optional<RawPostRow> next();

    std::uint64_t skipped() const { return skipped_; }
    std::uint64_t other_type() const { return other_type_; }
    std::uint64_t rows_read() const { return reader_.rows_read(); }

private:
    XmlRowReader reader_;
    std::uint64_t skipped_ = 0;
    std::uint64_t other_type_ = 0;
};

class CommentsParser {
public:
    explicit CommentsParser(std::istream& in) : reader_(in) {}

    std::optional<RawCommentRow> next();

    std::uint64_t skipped() const { return skipped_; }
    std::uint64_t rows_read() const { return reader_.rows_read(); }

private:
    XmlRowReader reader_;
    std::uint64_t skipped_ = 0;
};

/// Lowercased tag names from either the "<a><b>" or "|a|b|" raw encodings.
std::vector<std::string> parse_tags(std::string_view raw);

struct IngestOptions {
    std::size_t min_code_block_len = 0;
};

struct IngestStats {
    std::uint64_t posts_rows = 0;
    std::uint64_t posts_skipped = 0;
    std::uint64_t posts_other_type = 0;
    std::uint64_t questions = 0;
    std::uint64_t answers = 0;
    std::uint64_t comments_rows = 0;
    std::uint64_t comments_skipped = 0;
    std::uint64_t answers_missing_parent = 0;
    std::uint64_t answers_language_filtered = 0;
    std::uint64_t answers_dropped_no_code = 0;
    std::uint64_t answers_dropped_no_comment = 0;
    std::uint64_t answers_emitted = 0;
};

/// Joins answers to their parent question's tags (two passes over the posts
/// file), attaches cleaned comments, applies the language filter and the
/// >=1 code block / >=1 comment rules, and hands each surviving answer to the
/// sink in ascending answer_id order.
IngestStats join_answers(const std::filesystem::path& posts_path,
                         const std::filesystem::path& comments_path,
                         const std::vector<std::string>& language_filter,
                         const std::function<void(const CleanAnswer&)>& sink,
                         const IngestOptions& options = {});

/// JSONL round-trip for the staging file.
std::string clean_answer_to_json(const CleanAnswer& answer);
CleanAnswer clean_answer_from_json(const std::string& line);

}  // namespace sosecure::ingest
