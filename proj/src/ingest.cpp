#include "sosecure/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <regex>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "sosecure/util.hpp"

namespace sosecure::ingest {

namespace {

constexpr std::size_t kChunk = 1 << 16;

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp <= 0x7F) {
        out.push_back(static_cast<char>(cp));
    } else if (cp <= 0x7FF) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0xFFFF) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0x10FFFF) {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Decodes one character reference starting at s[i] (s[i] == '&'). On success
// appends the decoded character(s) to out and returns the index just past the
// reference; otherwise appends '&' and returns i+1.
std::size_t decode_one_entity(std::string_view s, std::size_t i, std::string& out) {
    const std::size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
        out.push_back('&');
        return i + 1;
    }
    const std::string_view name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") out.push_back('&');
    else if (name == "lt") out.push_back('<');
    else if (name == "gt") out.push_back('>');
    else if (name == "quot") out.push_back('"');
    else if (name == "apos") out.push_back('\'');
    else if (name == "nbsp") append_utf8(out, 0xA0);
    else if (name.size() > 1 && name[0] == '#') {
        std::uint32_t cp = 0;
        const bool hex = name[1] == 'x' || name[1] == 'X';
        const char* first = name.data() + (hex ? 2 : 1);
        const char* last = name.data() + name.size();
        auto [ptr, ec] = std::from_chars(first, last, cp, hex ? 16 : 10);
        if (ec != std::errc() || ptr != last || first == last) {
            out.push_back('&');
            return i + 1;
        }
        append_utf8(out, cp);
    } else {
        out.push_back('&');
        return i + 1;
    }
    return semi + 1;
}

// Escapes '&' and '<' so cleaned text round-trips through the tag scanner.
std::string escape_markup(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else out.push_back(c);
    }
    return out;
}

const std::regex& url_pattern() {
    static const std::regex re(R"((?:(?:https?|ftp)://|www\.)[^\s<>"']+)",
                               std::regex::icase | std::regex::optimize);
    return re;
}

const std::regex& email_pattern() {
    static const std::regex re(R"([A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+)",
                               std::regex::optimize);
    return re;
}

std::string replace_matches(const std::string& text, const std::regex& re,
                            const std::string& token, bool trim_trailing_punct) {
    std::string out;
    out.reserve(text.size());
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    auto end = std::sregex_iterator();
    std::size_t last = 0;
    for (auto it = begin; it != end; ++it) {
        std::size_t mstart = static_cast<std::size_t>(it->position());
        std::size_t mlen = static_cast<std::size_t>(it->length());
        if (trim_trailing_punct) {
            static const std::string punct = ").,;:!?";
            while (mlen > 0 && punct.find(text[mstart + mlen - 1]) != std::string::npos) --mlen;
            if (mlen == 0) continue;
        }
        out.append(text, last, mstart - last);
        out += token;
        last = mstart + mlen;
    }
    out.append(text, last, text.size() - last);
    return out;
}

std::optional<std::int64_t> parse_i64(const std::string* s) {
    if (!s || s->empty()) return std::nullopt;
    std::int64_t value = 0;
    const char* first = s->data();
    const char* last = s->data() + s->size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

const std::string* find_attr(const std::vector<std::pair<std::string, std::string>>& attrs,
                             std::string_view name) {
    for (const auto& [k, v] : attrs)
        if (k == name) return &v;
    return nullptr;
}

}  // namespace

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '&') {
            i = decode_one_entity(s, i, out);
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

std::string scrub_pii(std::string_view text) {
    std::string step1 = replace_matches(std::string(text), url_pattern(), "[URL]", true);
    return replace_matches(step1, email_pattern(), "[EMAIL]", false);
}

CleanedBody clean_html(std::string_view body, std::size_t min_code_block_len) {
    CleanedBody result;
    std::string text;  // decoded prose pending scrub+escape
    std::string code;  // decoded content of the current top-level code span
    int code_depth = 0;

    auto flush_text = [&] {
        if (text.empty()) return;
        result.body_clean += escape_markup(scrub_pii(text));
        text.clear();
    };
    auto emit_code = [&] {
        if (code.size() >= min_code_block_len) result.code_blocks.push_back(code);
        result.body_clean += "<code>";
        result.body_clean += escape_markup(code);
        result.body_clean += "</code>";
        code.clear();
    };
    auto sink = [&]() -> std::string& { return code_depth > 0 ? code : text; };

    std::size_t i = 0;
    const std::size_t n = body.size();
    while (i < n) {
        const char c = body[i];
        if (c == '&') {
            i = decode_one_entity(body, i, sink());
            continue;
        }
        if (c != '<') {
            sink().push_back(c);
            ++i;
            continue;
        }
        //  '<' — decide whether this opens markup
        if (i + 1 >= n) {
            sink().push_back('<');
            break;
        }
        const char c2 = body[i + 1];
        if (c2 == '!') {
            if (body.compare(i, 4, "<!--") == 0) {
                const auto close = body.find("-->", i + 4);
                i = close == std::string_view::npos ? n : close + 3;
            } else {
                const auto close = body.find('>', i + 2);
                i = close == std::string_view::npos ? n : close + 1;
            }
            continue;
        }
        if (c2 == '?') {
            const auto close = body.find('>', i + 2);
            i = close == std::string_view::npos ? n : close + 1;
            continue;
        }
        const bool closing = c2 == '/';
        std::size_t name_start = closing ? i + 2 : i + 1;
        std::size_t p = name_start;
        while (p < n && ((body[p] >= 'a' && body[p] <= 'z') || (body[p] >= 'A' && body[p] <= 'Z') ||
                         (body[p] >= '0' && body[p] <= '9')))
            ++p;
        if (p == name_start) {  // "<3", "< b": literal text
            sink().push_back('<');
            ++i;
            continue;
        }
        const std::string name = to_lower(body.substr(name_start, p - name_start));
        // advance to tag end, honoring quoted attribute values
        bool self_closing = false;
        char quote = 0;
        std::size_t q = p;
        for (; q < n; ++q) {
            const char tc = body[q];
            if (quote != 0) {
                if (tc == quote) quote = 0;
            } else if (tc == '"' || tc == '\'') {
                quote = tc;
            } else if (tc == '>') {
                self_closing = q > p && body[q - 1] == '/';
                break;
            }
        }
        i = q == n ? n : q + 1;  // unclosed tag at EOF: drop the remainder

        if (name != "code") continue;  // all other tags vanish
        if (closing) {
            if (code_depth == 1) {
                code_depth = 0;
                emit_code();
            } else if (code_depth > 1) {
                --code_depth;
            }
            // stray </code> outside any span is ignored
        } else if (self_closing) {
            if (code_depth == 0) {
                flush_text();
                emit_code();  // empty span
            }
        } else {
            if (code_depth == 0) flush_text();
            ++code_depth;
        }
    }
    if (code_depth > 0) emit_code();  // unclosed span: best effort
    flush_text();
    return result;
}

XmlRowReader::XmlRowReader(std::istream& in) : in_(in) {}

bool XmlRowReader::fill() {
    if (eof_) return false;
    char tmp[kChunk];
    in_.read(tmp, sizeof(tmp));
    const auto got = in_.gcount();
    if (got <= 0) {
        eof_ = true;
        return false;
    }
    buf_.append(tmp, static_cast<std::size_t>(got));
    return true;
}

bool XmlRowReader::ensure(std::size_t pos, std::size_t len) {
    while (buf_.size() < pos + len)
        if (!fill()) return false;
    return true;
}

void XmlRowReader::compact() {
    if (pos_ < kChunk) return;
    base_ += pos_;
    buf_.erase(0, pos_);
    pos_ = 0;
}

std::optional<std::vector<std::pair<std::string, std::string>>> XmlRowReader::next() {
    compact();
    // locate the next "<row" element start
    while (true) {
        const auto lt = buf_.find('<', pos_);
        if (lt == std::string::npos) {
            pos_ = buf_.size();
            if (!fill()) return std::nullopt;
            continue;
        }
        if (!ensure(lt, 5)) return std::nullopt;  // trailing fragment, no room for a row
        if (buf_.compare(lt, 4, "<row") == 0) {
            const char after = buf_[lt + 4];
            if (after == ' ' || after == '\t' || after == '\n' || after == '\r' || after == '/' ||
                after == '>') {
                pos_ = lt + 4;
                break;
            }
        }
        pos_ = lt + 1;
    }
    ++rows_read_;

    // parse attributes until '/>' or '>'
    std::vector<std::pair<std::string, std::string>> attrs;
    std::size_t q = pos_;
    auto need = [&](std::size_t at) -> char {
        if (!ensure(at, 1)) throw IngestError("unterminated row element", base_ + at);
        return buf_[at];
    };
    while (true) {
        char c = need(q);
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = need(++q);
        if (c == '/') {
            if (need(q + 1) != '>') throw IngestError("malformed element close", base_ + q);
            pos_ = q + 2;
            return attrs;
        }
        if (c == '>') {
            pos_ = q + 1;
            return attrs;
        }
        if (!((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'))
            throw IngestError("malformed attribute name", base_ + q);
        const std::size_t name_start = q;
        while (true) {
            c = need(q);
            if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                c == '_' || c == '.' || c == ':' || c == '-') {
                ++q;
                continue;
            }
            break;
        }
        std::string name = buf_.substr(name_start, q - name_start);
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = need(++q);
        if (c != '=') throw IngestError("expected '=' after attribute name", base_ + q);
        c = need(++q);
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = need(++q);
        if (c != '"' && c != '\'') throw IngestError("expected quoted attribute value", base_ + q);
        const char open_quote = c;
        const std::size_t value_start = q + 1;
        std::size_t close = buf_.find(open_quote, value_start);
        while (close == std::string::npos) {
            if (!fill()) throw IngestError("unterminated attribute value", base_ + q);
            close = buf_.find(open_quote, value_start);
        }
        attrs.emplace_back(std::move(name),
                           decode_entities(std::string_view(buf_).substr(value_start, close - value_start)));
        q = close + 1;
    }
}

std::optional<RawPostRow> PostsParser::next() {
    while (auto attrs = reader_.next()) {
        const auto id = parse_i64(find_attr(*attrs, "Id"));
        const auto type = parse_i64(find_attr(*attrs, "PostTypeId"));
        if (!id || !type) {
            ++skipped_;
            continue;
        }
        if (*type != 1 && *type != 2) {
            ++other_type_;
            continue;
        }
        RawPostRow row;
        row.id = *id;
        row.post_type = *type == 1 ? PostType::question : PostType::answer;
        if (row.post_type == PostType::answer) {
            const auto parent = parse_i64(find_attr(*attrs, "ParentId"));
            if (!parent) {
                ++skipped_;
                continue;
            }
            row.parent_id = *parent;
        } else {
            const auto* tags = find_attr(*attrs, "Tags");
            row.tags = tags ? *tags : std::string();
        }
        if (const auto* body = find_attr(*attrs, "Body")) row.body = *body;
        if (const auto score = parse_i64(find_attr(*attrs, "Score")))
            row.score = static_cast<int>(*score);
        return row;
    }
    return std::nullopt;
}

std::optional<RawCommentRow> CommentsParser::next() {
    while (auto attrs = reader_.next()) {
        const auto id = parse_i64(find_attr(*attrs, "Id"));
        const auto post_id = parse_i64(find_attr(*attrs, "PostId"));
        if (!id || !post_id || *post_id <= 0) {
            ++skipped_;
            continue;
        }
        RawCommentRow row;
        row.id = *id;
        row.post_id = *post_id;
        if (const auto* text = find_attr(*attrs, "Text")) row.text = *text;
        return row;
    }
    return std::nullopt;
}

std::vector<std::string> parse_tags(std::string_view raw) {
    std::vector<std::string> tags;
    if (raw.find('<') != std::string_view::npos) {
        std::size_t i = 0;
        while ((i = raw.find('<', i)) != std::string_view::npos) {
            const auto close = raw.find('>', i + 1);
            if (close == std::string_view::npos) break;
            if (close > i + 1) tags.push_back(to_lower(raw.substr(i + 1, close - i - 1)));
            i = close + 1;
        }
    } else if (raw.find('|') != std::string_view::npos) {
        std::size_t start = 0;
        while (start <= raw.size()) {
            auto bar = raw.find('|', start);
            if (bar == std::string_view::npos) bar = raw.size();
            if (bar > start) tags.push_back(to_lower(raw.substr(start, bar - start)));
            start = bar + 1;
        }
    } else {
        // single bare tag
        std::string_view t = raw;
        while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
        while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.remove_suffix(1);
        if (!t.empty()) tags.push_back(to_lower(t));
    }
    return tags;
}

IngestStats join_answers(const std::filesystem::path& posts_path,
                         const std::filesystem::path& comments_path,
                         const std::vector<std::string>& language_filter,
                         const std::function<void(const CleanAnswer&)>& sink,
                         const IngestOptions& options) {
    IngestStats stats;
    std::unordered_set<std::string> wanted;
    for (const auto& tag : language_filter) wanted.insert(to_lower(tag));

    // pass 1: question id -> tags
    std::unordered_map<std::int64_t, std::vector<std::string>> question_tags;
    {
        std::ifstream posts(posts_path, std::ios::binary);
        if (!posts) throw IngestError("cannot open posts file: " + posts_path.string(), 0);
        PostsParser parser(posts);
        while (auto row = parser.next()) {
            if (row->post_type == PostType::question) {
                ++stats.questions;
                question_tags.emplace(row->id, parse_tags(row->tags ? *row->tags : ""));
            } else {
                ++stats.answers;
            }
        }
        stats.posts_rows = parser.rows_read();
        stats.posts_skipped = parser.skipped();
        stats.posts_other_type = parser.other_type();
    }

    // pass 2: answers joined to parent tags, bodies cleaned
    std::map<std::int64_t, CleanAnswer> pending;
    {
        std::ifstream posts(posts_path, std::ios::binary);
        if (!posts) throw IngestError("cannot open posts file: " + posts_path.string(), 0);
        PostsParser parser(posts);
        while (auto row = parser.next()) {
            if (row->post_type != PostType::answer) continue;
            auto parent = question_tags.find(*row->parent_id);
            if (parent == question_tags.end()) {
                ++stats.answers_missing_parent;
                continue;
            }
            const bool match = std::any_of(parent->second.begin(), parent->second.end(),
                                           [&](const std::string& t) { return wanted.count(t) > 0; });
            if (!match) {
                ++stats.answers_language_filtered;
                continue;
            }
            CleanAnswer answer;
            answer.answer_id = row->id;
            answer.question_id = *row->parent_id;
            answer.language_tags = parent->second;
            std::sort(answer.language_tags.begin(), answer.language_tags.end());
            answer.language_tags.erase(
                std::unique(answer.language_tags.begin(), answer.language_tags.end()),
                answer.language_tags.end());
            auto cleaned = clean_html(row->body, options.min_code_block_len);
            answer.body_clean = std::move(cleaned.body_clean);
            answer.code_blocks = std::move(cleaned.code_blocks);
            answer.score = row->score;
            pending.emplace(row->id, std::move(answer));
        }
    }

    // pass 3: comments attached by post id
    {
        std::ifstream comments(comments_path, std::ios::binary);
        if (!comments) throw IngestError("cannot open comments file: " + comments_path.string(), 0);
        CommentsParser parser(comments);
        while (auto row = parser.next()) {
            auto it = pending.find(row->post_id);
            if (it == pending.end()) continue;
            it->second.comments.push_back(scrub_pii(row->text));
        }
        stats.comments_rows = parser.rows_read();
        stats.comments_skipped = parser.skipped();
    }

    for (auto& [id, answer] : pending) {
        if (answer.code_blocks.empty()) {
            ++stats.answers_dropped_no_code;
            continue;
        }
        if (answer.comments.empty()) {
            ++stats.answers_dropped_no_comment;
            continue;
        }
        ++stats.answers_emitted;
        sink(answer);
    }
    return stats;
}

std::string clean_answer_to_json(const CleanAnswer& answer) {
    nlohmann::ordered_json j;
    j["answer_id"] = answer.answer_id;
    j["question_id"] = answer.question_id;
    j["language_tags"] = answer.language_tags;
    j["body_clean"] = answer.body_clean;
    j["code_blocks"] = answer.code_blocks;
    j["comments"] = answer.comments;
    j["score"] = answer.score;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

CleanAnswer clean_answer_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    CleanAnswer answer;
    answer.answer_id = j.at("answer_id").get<std::int64_t>();
    answer.question_id = j.at("question_id").get<std::int64_t>();
    answer.language_tags = j.at("language_tags").get<std::vector<std::string>>();
    answer.body_clean = j.at("body_clean").get<std::string>();
    answer.code_blocks = j.at("code_blocks").get<std::vector<std::string>>();
    answer.comments = j.at("comments").get<std::vector<std::string>>();
    answer.score = j.at("score").get<int>();
    return answer;
}

}  // namespace sosecure::ingest
