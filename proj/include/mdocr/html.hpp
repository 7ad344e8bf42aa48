#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdocr/errors.hpp"
#include "mdocr/markdown.hpp"
#include "mdocr/unicode.hpp"

namespace mdocr {

// ---------------------------------------------------------------------------
// HTML-subset -> MarkdownDoc
//
// Supported: h1-h6, p, ul, ol, li, blockquote, em/i, strong/b, br. Unknown
// tags are unwrapped (children kept). Tags must balance; li closes
// implicitly before a sibling <li> or the enclosing list close, as in HTML.
// Whitespace is collapsed; empty elements contribute nothing.
// ---------------------------------------------------------------------------

namespace html_detail {

inline bool is_void_tag(std::string_view name) {
    return name == "br" || name == "hr" || name == "img" || name == "meta" ||
           name == "link" || name == "input" || name == "wbr" || name == "col" ||
           name == "source";
}

inline std::string decode_entities(std::string_view s, std::size_t base_offset) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            ++i;
            continue;
        }
        const std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');  // bare ampersand, keep literal
            ++i;
            continue;
        }
        const std::string_view name = s.substr(i + 1, semi - i - 1);
        if (name == "amp") {
            out.push_back('&');
        } else if (name == "lt") {
            out.push_back('<');
        } else if (name == "gt") {
            out.push_back('>');
        } else if (name == "quot") {
            out.push_back('"');
        } else if (name == "apos") {
            out.push_back('\'');
        } else if (name == "nbsp") {
            out.push_back(' ');
        } else if (!name.empty() && name[0] == '#') {
            char32_t cp = 0;
            bool ok = name.size() >= 2;
            if (ok && (name[1] == 'x' || name[1] == 'X')) {
                for (std::size_t k = 2; k < name.size() && ok; ++k) {
                    const char c = name[k];
                    int v;
                    if (c >= '0' && c <= '9')
                        v = c - '0';
                    else if (c >= 'a' && c <= 'f')
                        v = c - 'a' + 10;
                    else if (c >= 'A' && c <= 'F')
                        v = c - 'A' + 10;
                    else {
                        ok = false;
                        break;
                    }
                    cp = cp * 16 + static_cast<char32_t>(v);
                }
                ok = ok && name.size() > 2;
            } else if (ok) {
                for (std::size_t k = 1; k < name.size() && ok; ++k) {
                    if (name[k] < '0' || name[k] > '9') {
                        ok = false;
                        break;
                    }
                    cp = cp * 10 + static_cast<char32_t>(name[k] - '0');
                }
            }
            if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
                throw parse_error("invalid numeric character reference", base_offset + i);
            if (cp == 0xA0) cp = ' ';
            uni::append_utf8(out, cp);
        } else {
            out.push_back('&');  // unknown entity, keep literal
            ++i;
            continue;
        }
        i = semi + 1;
    }
    return out;
}

// Accumulates inline text with whitespace collapsing and emphasis tracking.
class InlineBuilder {
public:
    void add_text(std::string_view decoded) {
        std::size_t i = 0;
        while (i < decoded.size()) {
            const unsigned char b = static_cast<unsigned char>(decoded[i]);
            const bool nbsp = b == 0xC2 && i + 1 < decoded.size() &&
                              static_cast<unsigned char>(decoded[i + 1]) == 0xA0;
            if (b == ' ' || b == '\t' || b == '\n' || b == '\r' || nbsp) {
                pending_space_ = !text_.empty();
                i += nbsp ? 2 : 1;
                continue;
            }
            if (pending_space_) {
                text_.push_back(' ');
                pending_space_ = false;
            }
            text_.push_back(decoded[i]);
            ++i;
        }
    }

    void soft_break() { pending_space_ = !text_.empty(); }

    void open_emphasis(EmphasisKind kind) {
        if (pending_space_) {
            text_.push_back(' ');
            pending_space_ = false;
        }
        open_.push_back({kind, text_.size()});
    }

    // Closes the innermost open span of `kind`. Balance is enforced by the
    // caller, so it is always the stack top.
    void close_emphasis(EmphasisKind kind) {
        for (std::size_t k = open_.size(); k-- > 0;) {
            if (open_[k].kind != kind) continue;
            emit_span(open_[k].kind, open_[k].begin, text_.size());
            open_.erase(open_.begin() + static_cast<std::ptrdiff_t>(k));
            return;
        }
    }

    bool empty() const noexcept { return text_.empty(); }

    // Finalizes the block text; still-open emphasis is clipped at the end.
    InlineText take() {
        for (const Open& o : open_) emit_span(o.kind, o.begin, text_.size());
        std::sort(spans_.begin(), spans_.end(), [](const EmphasisSpan& a, const EmphasisSpan& b) {
            if (a.begin != b.begin) return a.begin < b.begin;
            return a.end > b.end;
        });
        InlineText out{std::move(text_), std::move(spans_)};
        text_.clear();
        spans_.clear();
        open_.clear();
        pending_space_ = false;
        return out;
    }

    std::vector<EmphasisKind> open_kinds() const {
        std::vector<EmphasisKind> kinds;
        kinds.reserve(open_.size());
        for (const Open& o : open_) kinds.push_back(o.kind);
        return kinds;
    }

private:
    struct Open {
        EmphasisKind kind;
        std::size_t begin;
    };

    void emit_span(EmphasisKind kind, std::size_t begin, std::size_t end) {
        while (begin < end && text_[begin] == ' ') ++begin;
        while (end > begin && text_[end - 1] == ' ') --end;
        if (begin < end) spans_.push_back({begin, end, kind});
    }

    std::string text_;
    std::vector<EmphasisSpan> spans_;
    std::vector<Open> open_;
    bool pending_space_ = false;
};

struct Tag {
    std::string name;
    bool closing = false;
    bool self_closing = false;
    std::size_t offset = 0;
};

// Minimal tag scanner. Attributes are skipped (quote-aware).
class Scanner {
public:
    explicit Scanner(std::string_view src) : src_(src) {}

    // Returns false at end of input. Exactly one of *text / *tag is filled.
    bool next(std::string* text, std::optional<Tag>* tag) {
        text->clear();
        tag->reset();
        if (pos_ >= src_.size()) return false;
        if (src_[pos_] != '<') {
            const std::size_t start = pos_;
            const std::size_t lt = src_.find('<', pos_);
            pos_ = (lt == std::string_view::npos) ? src_.size() : lt;
            *text = decode_entities(src_.substr(start, pos_ - start), start);
            return true;
        }
        const std::size_t start = pos_;
        if (src_.compare(pos_, 4, "<!--") == 0) {
            const std::size_t end = src_.find("-->", pos_ + 4);
            if (end == std::string_view::npos)
                throw parse_error("unterminated comment", start);
            pos_ = end + 3;
            return next(text, tag);
        }
        if (pos_ + 1 < src_.size() && (src_[pos_ + 1] == '!' || src_[pos_ + 1] == '?')) {
            const std::size_t end = src_.find('>', pos_);
            if (end == std::string_view::npos)
                throw parse_error("unterminated markup declaration", start);
            pos_ = end + 1;
            return next(text, tag);
        }

        Tag t;
        t.offset = start;
        std::size_t i = pos_ + 1;
        if (i < src_.size() && src_[i] == '/') {
            t.closing = true;
            ++i;
        }
        const std::size_t name_start = i;
        while (i < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[i])) != 0))
            ++i;
        if (i == name_start) throw parse_error("malformed tag", start);
        t.name.assign(src_.substr(name_start, i - name_start));
        std::transform(t.name.begin(), t.name.end(), t.name.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

        char quote = 0;
        while (i < src_.size()) {
            const char c = src_[i];
            if (quote != 0) {
                if (c == quote) quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '>') {
                break;
            } else if (c == '/' && i + 1 < src_.size() && src_[i + 1] == '>') {
                t.self_closing = true;
            }
            ++i;
        }
        if (i >= src_.size()) throw parse_error("unterminated tag", start);
        pos_ = i + 1;
        *tag = std::move(t);
        return true;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
};

}  // namespace html_detail

inline MarkdownDoc html_to_markdown(std::string_view html) {
    uni::decode_utf8(html);  // reject invalid encodings up front

    enum class Leaf { none, heading, paragraph, list_item, blockquote, loose_text };

    DocBuilder builder;
    html_detail::InlineBuilder inl;
    std::vector<std::pair<std::string, std::size_t>> stack;  // open tags + offsets
    std::vector<ListKind> lists;
    Leaf leaf = Leaf::none;
    int heading_level = 0;
    int quote_depth = 0;

    auto flush_leaf = [&] {
        InlineText text = inl.take();
        if (leaf != Leaf::none && !text.text.empty()) {
            switch (leaf) {
                case Leaf::heading:
                    builder.add(Block::heading(heading_level, std::move(text)));
                    break;
                case Leaf::list_item:
                    builder.add(Block::list_item(
                        lists.empty() ? ListKind::bullet : lists.back(),
                        lists.empty() ? 0 : static_cast<int>(lists.size()) - 1,
                        std::move(text)));
                    break;
                case Leaf::blockquote:
                    builder.add(Block::blockquote(std::move(text)));
                    break;
                case Leaf::paragraph:
                case Leaf::loose_text:
                    builder.add(Block::paragraph(std::move(text)));
                    break;
                case Leaf::none:
                    break;
            }
        }
        leaf = Leaf::none;
    };

    // Re-opens emphasis that crosses block boundaries.
    auto begin_leaf = [&](Leaf kind, std::vector<EmphasisKind> carry) {
        flush_leaf();
        leaf = kind;
        for (EmphasisKind k : carry) inl.open_emphasis(k);
    };

    auto pop_implicit_li = [&] {
        if (!stack.empty() && stack.back().first == "li") {
            flush_leaf();
            stack.pop_back();
        }
    };

    html_detail::Scanner scanner(html);
    std::string text;
    std::optional<html_detail::Tag> tag;
    while (scanner.next(&text, &tag)) {
        if (!tag) {
            if (leaf == Leaf::none) {
                // loose text outside any block wraps into a paragraph
                std::string probe = text;
                html_detail::InlineBuilder tmp;
                tmp.add_text(probe);
                if (!tmp.take().text.empty()) begin_leaf(Leaf::loose_text, inl.open_kinds());
            }
            inl.add_text(text);
            continue;
        }

        const std::string& name = tag->name;
        const bool known =
            (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') ||
            name == "p" || name == "ul" || name == "ol" || name == "li" ||
            name == "blockquote" || name == "em" || name == "i" || name == "strong" ||
            name == "b" || name == "br";

        if (!tag->closing) {
            if (name == "br") {
                inl.soft_break();
                continue;
            }
            if (html_detail::is_void_tag(name) || tag->self_closing) continue;
            if (!known) {
                stack.emplace_back(name, tag->offset);
                continue;
            }
            if (name.size() == 2 && name[0] == 'h') {  // h1..h6
                begin_leaf(Leaf::heading, {});
                heading_level = name[1] - '0';
            } else if (name == "p") {
                if (leaf == Leaf::list_item || leaf == Leaf::blockquote)
                    inl.soft_break();  // flatten into the open block
                else
                    begin_leaf(Leaf::paragraph, {});
            } else if (name == "ul" || name == "ol") {
                flush_leaf();
                lists.push_back(name == "ul" ? ListKind::bullet : ListKind::ordered);
            } else if (name == "li") {
                if (leaf == Leaf::list_item) pop_implicit_li();
                begin_leaf(Leaf::list_item, {});
            } else if (name == "blockquote") {
                if (quote_depth == 0)
                    begin_leaf(Leaf::blockquote, {});
                else
                    inl.soft_break();
                ++quote_depth;
            } else if (name == "em" || name == "i") {
                inl.open_emphasis(EmphasisKind::italic);
            } else {  // strong / b
                inl.open_emphasis(EmphasisKind::bold);
            }
            stack.emplace_back(name, tag->offset);
            continue;
        }

        // closing tag
        if (html_detail::is_void_tag(name)) continue;
        if ((name == "ul" || name == "ol") && !stack.empty() && stack.back().first == "li")
            pop_implicit_li();
        if (stack.empty() || stack.back().first != name)
            throw parse_error("unbalanced closing tag </" + name + ">", tag->offset);
        stack.pop_back();
        if (!known) continue;

        if (name == "p") {
            if (leaf == Leaf::paragraph) flush_leaf();
        } else if (name.size() == 2 && name[0] == 'h') {
            flush_leaf();
        } else if (name == "li") {
            if (leaf == Leaf::list_item) flush_leaf();
        } else if (name == "ul" || name == "ol") {
            flush_leaf();
            if (!lists.empty()) lists.pop_back();
        } else if (name == "blockquote") {
            --quote_depth;
            if (quote_depth == 0) flush_leaf();
        } else if (name == "em" || name == "i") {
            inl.close_emphasis(EmphasisKind::italic);
        } else {
            inl.close_emphasis(EmphasisKind::bold);
        }
    }
    if (!stack.empty())
        throw parse_error("unclosed <" + stack.back().first + ">", stack.back().second);
    flush_leaf();
    return builder.take();
}

// ---------------------------------------------------------------------------
// MarkdownDoc -> HTML (page renderer input)
// ---------------------------------------------------------------------------

namespace html_detail {

inline void escape_into(std::string& out, std::string_view s) {
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
}

inline std::string inline_html(const InlineText& t) {
    std::vector<EmphasisSpan> spans = t.spans;
    std::sort(spans.begin(), spans.end(), [](const EmphasisSpan& a, const EmphasisSpan& b) {
        if (a.begin != b.begin) return a.begin < b.begin;
        if (a.end != b.end) return a.end > b.end;
        return a.kind == EmphasisKind::bold && b.kind == EmphasisKind::italic;
    });
    std::string out;
    std::vector<const EmphasisSpan*> open;
    std::size_t next = 0;
    for (std::size_t pos = 0; pos <= t.text.size(); ++pos) {
        while (!open.empty() && open.back()->end == pos) {
            out += open.back()->kind == EmphasisKind::bold ? "</strong>" : "</em>";
            open.pop_back();
        }
        while (next < spans.size() && spans[next].begin == pos) {
            out += spans[next].kind == EmphasisKind::bold ? "<strong>" : "<em>";
            open.push_back(&spans[next]);
            ++next;
        }
        if (pos < t.text.size()) escape_into(out, t.text.substr(pos, 1));
    }
    return out;
}

}  // namespace html_detail

// Emits a minimal standalone HTML rendering of a page, suitable as input to
// an external rasterizer.
inline std::string to_html(const MarkdownDoc& doc) {
    std::string out;
    std::vector<ListKind> open_lists;

    auto close_lists_to = [&](std::size_t depth) {
        while (open_lists.size() > depth) {
            out += open_lists.back() == ListKind::bullet ? "</ul>\n" : "</ol>\n";
            open_lists.pop_back();
        }
    };

    out += "<!DOCTYPE html>\n<html dir=\"rtl\" lang=\"ar\"><head><meta charset=\"utf-8\"/></head><body>\n";
    for (const Block& b : doc.blocks) {
        if (b.kind != BlockKind::list_item) close_lists_to(0);
        switch (b.kind) {
            case BlockKind::heading:
                out += "<h" + std::to_string(b.heading_level) + ">";
                out += html_detail::inline_html(b.text);
                out += "</h" + std::to_string(b.heading_level) + ">\n";
                break;
            case BlockKind::paragraph:
                out += "<p>" + html_detail::inline_html(b.text) + "</p>\n";
                break;
            case BlockKind::blockquote:
                out += "<blockquote>" + html_detail::inline_html(b.text) + "</blockquote>\n";
                break;
            case BlockKind::list_item: {
                const std::size_t depth = static_cast<std::size_t>(b.list_depth);
                close_lists_to(depth + 1);
                if (open_lists.size() == depth + 1 && open_lists.back() != b.list_kind) {
                    close_lists_to(depth);
                }
                while (open_lists.size() <= depth) {
                    out += b.list_kind == ListKind::bullet ? "<ul>\n" : "<ol>\n";
                    open_lists.push_back(b.list_kind);
                }
                out += "<li>" + html_detail::inline_html(b.text) + "</li>\n";
                break;
            }
        }
    }
    close_lists_to(0);
    out += "</body></html>\n";
    return out;
}

}  // namespace mdocr
