#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdocr/edit_distance.hpp"
#include "mdocr/errors.hpp"
#include "mdocr/unicode.hpp"

namespace mdocr {

// ---------------------------------------------------------------------------
// Document model
//
// Supported grammar is a fixed subset: ATX headings (# .. ######), unordered
// (-, *) and ordered (1.) list items indented two spaces per nesting level,
// blockquotes (>), paragraphs separated by blank lines, and **bold** /
// *italic* inline spans. Anything else degrades to a paragraph.
// ---------------------------------------------------------------------------

enum class BlockKind { heading, paragraph, list_item, blockquote };
enum class ListKind { bullet, ordered };
enum class EmphasisKind { bold, italic };

// Byte offsets into InlineText::text. Spans never cross; they are either
// disjoint or properly nested (nesting only arises from HTML conversion).
struct EmphasisSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    EmphasisKind kind = EmphasisKind::bold;

    bool operator==(const EmphasisSpan&) const = default;
};

struct InlineText {
    std::string text;
    std::vector<EmphasisSpan> spans;

    bool operator==(const InlineText&) const = default;
};

struct Block {
    BlockKind kind = BlockKind::paragraph;
    int heading_level = 0;  // 1..6 when kind == heading
    ListKind list_kind = ListKind::bullet;
    int list_depth = 0;  // >= 0 when kind == list_item
    InlineText text;

    bool operator==(const Block&) const = default;

    static Block heading(int level, InlineText t) {
        return {BlockKind::heading, level, ListKind::bullet, 0, std::move(t)};
    }
    static Block paragraph(InlineText t) {
        return {BlockKind::paragraph, 0, ListKind::bullet, 0, std::move(t)};
    }
    static Block list_item(ListKind k, int depth, InlineText t) {
        return {BlockKind::list_item, 0, k, depth, std::move(t)};
    }
    static Block blockquote(InlineText t) {
        return {BlockKind::blockquote, 0, ListKind::bullet, 0, std::move(t)};
    }
};

struct MarkdownDoc {
    std::vector<Block> blocks;

    bool operator==(const MarkdownDoc&) const = default;
    bool empty() const noexcept { return blocks.empty(); }
};

// Appends blocks while enforcing the list-depth invariant: within a run of
// consecutive list items the depth may grow by at most one step. The first
// item of a run keeps its stated depth (pages may start mid-list).
class DocBuilder {
public:
    void add(Block b) {
        if (b.kind == BlockKind::list_item) {
            if (b.list_depth < 0) b.list_depth = 0;
            if (last_list_depth_ >= 0)
                b.list_depth = std::min(b.list_depth, last_list_depth_ + 1);
            last_list_depth_ = b.list_depth;
        } else {
            last_list_depth_ = -1;
        }
        doc_.blocks.push_back(std::move(b));
    }

    MarkdownDoc take() { return std::move(doc_); }

private:
    MarkdownDoc doc_;
    int last_list_depth_ = -1;
};

// ---------------------------------------------------------------------------
// Inline emphasis
// ---------------------------------------------------------------------------

namespace md_detail {

// Finds the closing delimiter `delim` at or after `from`, requiring a
// non-space character just before it. npos when absent.
inline std::size_t find_closer(std::string_view raw, std::string_view delim, std::size_t from) {
    std::size_t j = raw.find(delim, from);
    while (j != std::string_view::npos) {
        const char prev = raw[j - 1];
        if (!(prev == ' ' || prev == '\t')) return j;
        j = raw.find(delim, j + 1);
    }
    return std::string_view::npos;
}

}  // namespace md_detail

// Parses **bold** and *italic* spans. Unmatched markers stay literal.
// Produced spans are flat (non-nested, non-overlapping).
inline InlineText parse_inline(std::string_view raw) {
    InlineText out;
    out.text.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        const bool dbl = raw.compare(i, 2, "**") == 0;
        if (raw[i] == '*') {
            const std::size_t mlen = dbl ? 2 : 1;
            const std::string_view delim = dbl ? "**" : "*";
            const std::size_t content_start = i + mlen;
            const bool openable = content_start < raw.size() && raw[content_start] != ' ' &&
                                  raw[content_start] != '\t' && raw[content_start] != '*';
            if (openable) {
                const std::size_t j = md_detail::find_closer(raw, delim, content_start + 1);
                if (j != std::string_view::npos) {
                    const std::size_t begin = out.text.size();
                    out.text.append(raw.substr(content_start, j - content_start));
                    out.spans.push_back({begin, out.text.size(),
                                         dbl ? EmphasisKind::bold : EmphasisKind::italic});
                    i = j + mlen;
                    continue;
                }
            }
        }
        out.text.push_back(raw[i]);
        ++i;
    }
    return out;
}

// Re-inserts emphasis markers. Handles properly nested spans via a stack.
inline std::string render_inline(const InlineText& t) {
    if (t.spans.empty()) return t.text;
    std::vector<EmphasisSpan> spans = t.spans;
    std::sort(spans.begin(), spans.end(), [](const EmphasisSpan& a, const EmphasisSpan& b) {
        if (a.begin != b.begin) return a.begin < b.begin;
        if (a.end != b.end) return a.end > b.end;
        return a.kind == EmphasisKind::bold && b.kind == EmphasisKind::italic;
    });

    std::string out;
    out.reserve(t.text.size() + spans.size() * 4);
    std::vector<const EmphasisSpan*> open;
    std::size_t next = 0;
    for (std::size_t pos = 0; pos <= t.text.size(); ++pos) {
        while (!open.empty() && open.back()->end == pos) {
            out.append(open.back()->kind == EmphasisKind::bold ? "**" : "*");
            open.pop_back();
        }
        while (next < spans.size() && spans[next].begin == pos) {
            out.append(spans[next].kind == EmphasisKind::bold ? "**" : "*");
            open.push_back(&spans[next]);
            ++next;
        }
        if (pos < t.text.size()) out.push_back(t.text[pos]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block parsing
// ---------------------------------------------------------------------------

namespace md_detail {

inline std::string_view trim_ascii(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return s.substr(b, e - b);
}

inline bool is_blank(std::string_view line) { return trim_ascii(line).empty(); }

// Collapses internal runs of spaces/tabs so block text is single-spaced.
inline std::string squeeze(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (c == ' ' || c == '\t') {
            in_ws = !out.empty();
            continue;
        }
        if (in_ws) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

struct HeadingLine {
    int level;
    std::string_view rest;
};

inline std::optional<HeadingLine> match_heading(std::string_view line) {
    std::size_t n = 0;
    while (n < line.size() && line[n] == '#') ++n;
    if (n < 1 || n > 6) return std::nullopt;
    if (n == line.size()) return HeadingLine{static_cast<int>(n), {}};
    if (line[n] != ' ' && line[n] != '\t') return std::nullopt;
    return HeadingLine{static_cast<int>(n), line.substr(n + 1)};
}

struct ListLine {
    ListKind kind;
    int indent_spaces;
    std::string_view rest;
};

inline std::optional<ListLine> match_list_item(std::string_view line) {
    std::size_t n = 0;
    while (n < line.size() && line[n] == ' ') ++n;
    if (n >= line.size()) return std::nullopt;
    const std::size_t indent = n;
    if (line[n] == '-' || line[n] == '*') {
        ++n;
        if (n == line.size())
            return ListLine{ListKind::bullet, static_cast<int>(indent), {}};
        if (line[n] == ' ' || line[n] == '\t')
            return ListLine{ListKind::bullet, static_cast<int>(indent), line.substr(n + 1)};
        return std::nullopt;
    }
    std::size_t d = n;
    while (d < line.size() && line[d] >= '0' && line[d] <= '9') ++d;
    if (d == n || d >= line.size() || line[d] != '.') return std::nullopt;
    ++d;
    if (d == line.size())
        return ListLine{ListKind::ordered, static_cast<int>(indent), {}};
    if (line[d] == ' ' || line[d] == '\t')
        return ListLine{ListKind::ordered, static_cast<int>(indent), line.substr(d + 1)};
    return std::nullopt;
}

inline std::optional<std::string_view> match_blockquote(std::string_view line) {
    std::size_t n = 0;
    while (n < line.size() && line[n] == ' ' && n < 3) ++n;
    if (n >= line.size() || line[n] != '>') return std::nullopt;
    ++n;
    if (n < line.size() && line[n] == ' ') ++n;
    return line.substr(n);
}

}  // namespace md_detail

// Parses UTF-8 Markdown text into a document. Deterministic; unrecognized
// constructs become paragraphs. Throws encoding_error on invalid UTF-8.
inline MarkdownDoc parse_markdown(std::string_view text) {
    uni::decode_utf8(text);  // encoding check up front

    DocBuilder builder;
    std::string para_acc;      // pending paragraph text
    std::string quote_acc;     // pending blockquote text
    bool quote_open = false;

    auto flush_para = [&] {
        if (!para_acc.empty()) {
            builder.add(Block::paragraph(parse_inline(para_acc)));
            para_acc.clear();
        }
    };
    auto flush_quote = [&] {
        if (quote_open) {
            builder.add(Block::blockquote(parse_inline(quote_acc)));
            quote_acc.clear();
            quote_open = false;
        }
    };
    auto append_joined = [](std::string& acc, std::string_view piece) {
        if (!acc.empty() && !piece.empty()) acc.push_back(' ');
        acc.append(piece);
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (md_detail::is_blank(line)) {
            flush_para();
            flush_quote();
        } else if (auto h = md_detail::match_heading(line)) {
            flush_para();
            flush_quote();
            builder.add(Block::heading(
                h->level, parse_inline(md_detail::squeeze(md_detail::trim_ascii(h->rest)))));
        } else if (auto li = md_detail::match_list_item(line)) {
            flush_para();
            flush_quote();
            builder.add(Block::list_item(
                li->kind, li->indent_spaces / 2,
                parse_inline(md_detail::squeeze(md_detail::trim_ascii(li->rest)))));
        } else if (auto q = md_detail::match_blockquote(line)) {
            flush_para();
            append_joined(quote_acc, md_detail::squeeze(md_detail::trim_ascii(*q)));
            quote_open = true;
        } else {
            flush_quote();
            append_joined(para_acc, md_detail::squeeze(md_detail::trim_ascii(line)));
        }

        if (eol == text.size()) break;
        pos = eol + 1;
    }
    flush_para();
    flush_quote();
    return builder.take();
}

// Canonical serialization. Each block ends with '\n'; blocks are joined by a
// blank line. parse_markdown(serialize_markdown(d)) is structurally equal to
// d for any parser- or converter-produced document.
inline std::string serialize_markdown(const MarkdownDoc& doc) {
    std::string out;
    std::vector<int> ordinal_counters;  // per-depth ordered item numbering
    bool prev_was_list = false;

    for (std::size_t i = 0; i < doc.blocks.size(); ++i) {
        const Block& b = doc.blocks[i];
        if (i > 0) out.push_back('\n');

        if (b.kind != BlockKind::list_item) {
            ordinal_counters.clear();
            prev_was_list = false;
        }
        switch (b.kind) {
            case BlockKind::heading:
                out.append(static_cast<std::size_t>(b.heading_level), '#');
                if (!b.text.text.empty()) {
                    out.push_back(' ');
                    out.append(render_inline(b.text));
                }
                break;
            case BlockKind::paragraph:
                out.append(render_inline(b.text));
                break;
            case BlockKind::blockquote:
                out.append("> ");
                out.append(render_inline(b.text));
                break;
            case BlockKind::list_item: {
                const std::size_t depth = static_cast<std::size_t>(b.list_depth);
                if (!prev_was_list) ordinal_counters.clear();
                ordinal_counters.resize(std::max(ordinal_counters.size(), depth + 1), 0);
                // a shallower item restarts numbering below it
                std::fill(ordinal_counters.begin() + static_cast<std::ptrdiff_t>(depth) + 1,
                          ordinal_counters.end(), 0);
                out.append(depth * 2, ' ');
                if (b.list_kind == ListKind::bullet) {
                    ordinal_counters[depth] = 0;
                    out.append("- ");
                } else {
                    out.append(std::to_string(++ordinal_counters[depth]));
                    out.append(". ");
                }
                out.append(render_inline(b.text));
                prev_was_list = true;
                break;
            }
        }
        out.push_back('\n');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structure sequences and Structure Accuracy
// ---------------------------------------------------------------------------

enum class StructTag : unsigned char {
    h1, h2, h3, h4, h5, h6,
    bullet_item,
    ordered_item,
    blockquote,
    paragraph,
};

using StructSeq = std::vector<StructTag>;

inline const char* to_string(StructTag t) {
    switch (t) {
        case StructTag::h1: return "H1";
        case StructTag::h2: return "H2";
        case StructTag::h3: return "H3";
        case StructTag::h4: return "H4";
        case StructTag::h5: return "H5";
        case StructTag::h6: return "H6";
        case StructTag::bullet_item: return "BULLET_ITEM";
        case StructTag::ordered_item: return "ORDERED_ITEM";
        case StructTag::blockquote: return "BLOCKQUOTE";
        case StructTag::paragraph: return "PARAGRAPH";
    }
    return "?";
}

// One tag per block, document order, inline text discarded. List depth does
// not alter the tag.
inline StructSeq extract_structure(const MarkdownDoc& doc) {
    StructSeq seq;
    seq.reserve(doc.blocks.size());
    for (const Block& b : doc.blocks) {
        switch (b.kind) {
            case BlockKind::heading:
                seq.push_back(static_cast<StructTag>(static_cast<int>(StructTag::h1) +
                                                     b.heading_level - 1));
                break;
            case BlockKind::paragraph:
                seq.push_back(StructTag::paragraph);
                break;
            case BlockKind::list_item:
                seq.push_back(b.list_kind == ListKind::bullet ? StructTag::bullet_item
                                                              : StructTag::ordered_item);
                break;
            case BlockKind::blockquote:
                seq.push_back(StructTag::blockquote);
                break;
        }
    }
    return seq;
}

// Normalized Levenshtein similarity over block tags:
//   SA = 1 - editdist(pred, ref) / max(|pred|, |ref|)
// Both empty counts as perfect agreement (1.0).
inline double structure_accuracy(const StructSeq& pred, const StructSeq& ref) {
    const std::size_t denom = std::max(pred.size(), ref.size());
    if (denom == 0) return 1.0;
    const std::size_t dist = edit_distance(pred, ref);
    return 1.0 - static_cast<double>(dist) / static_cast<double>(denom);
}

}  // namespace mdocr
