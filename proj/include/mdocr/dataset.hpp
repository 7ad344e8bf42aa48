#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdocr/errors.hpp"
#include "mdocr/html.hpp"
#include "mdocr/markdown.hpp"
#include "mdocr/unicode.hpp"

namespace mdocr {

// ---------------------------------------------------------------------------
// Pagination
// ---------------------------------------------------------------------------

struct PageBudget {
    int max_chars = 1800;  // code points of serialized page text, >= 200
};

// Greedy block packing. Blocks are never split; a page closes when the next
// block would push the serialized page above the budget. A single oversized
// block gets a page of its own. Joining the serialized pages with blank
// lines re-parses to the original block sequence.
inline std::vector<MarkdownDoc> paginate(const MarkdownDoc& doc, const PageBudget& budget) {
    if (budget.max_chars < 200)
        throw config_error("page budget must be at least 200 characters, got " +
                           std::to_string(budget.max_chars));
    std::vector<MarkdownDoc> pages;
    MarkdownDoc current;
    for (const Block& b : doc.blocks) {
        // Measure the block in context: ordered-item numbering depends on
        // preceding blocks, so serialize the whole candidate page.
        current.blocks.push_back(b);
        const std::size_t candidate_len = uni::codepoint_count(serialize_markdown(current));
        if (current.blocks.size() > 1 && candidate_len > static_cast<std::size_t>(budget.max_chars)) {
            current.blocks.pop_back();
            pages.push_back(std::move(current));
            current = {};
            current.blocks.push_back(b);
        }
    }
    if (!current.blocks.empty()) pages.push_back(std::move(current));
    return pages;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string id;  // "<doc_id>-<page_index>"
    int page_index = 0;
    std::string markdown;
    std::optional<std::string> image_path;
    std::optional<std::string> source;

    bool operator==(const ManifestEntry&) const = default;
};

inline void write_manifest(std::ostream& out, std::span<const ManifestEntry> entries) {
    for (const ManifestEntry& e : entries) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["page_index"] = e.page_index;
        j["markdown"] = e.markdown;
        j["image"] = e.image_path ? nlohmann::ordered_json(*e.image_path)
                                  : nlohmann::ordered_json(nullptr);
        j["source"] = e.source ? nlohmann::ordered_json(*e.source)
                               : nlohmann::ordered_json(nullptr);
        out << j.dump() << "\n";
    }
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error("manifest " + path.string() + ": " + e.what(), lineno);
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
            throw format_error("manifest entry missing string field 'id'", lineno);
        if (!j.contains("markdown") || !j["markdown"].is_string())
            throw format_error("manifest entry missing string field 'markdown'", lineno);
        ManifestEntry e;
        e.id = j["id"].get<std::string>();
        e.markdown = j["markdown"].get<std::string>();
        if (j.contains("page_index")) {
            if (!j["page_index"].is_number_integer())
                throw format_error("manifest field 'page_index' must be an integer", lineno);
            e.page_index = j["page_index"].get<int>();
        }
        if (j.contains("image") && !j["image"].is_null())
            e.image_path = j["image"].get<std::string>();
        if (j.contains("source") && !j["source"].is_null())
            e.source = j["source"].get<std::string>();
        entries.push_back(std::move(e));
        seen_ids.push_back(entries.back().id);
    }
    std::sort(seen_ids.begin(), seen_ids.end());
    auto dup = std::adjacent_find(seen_ids.begin(), seen_ids.end());
    if (dup != seen_ids.end())
        throw data_error("manifest " + path.string() + ": duplicate id \"" + *dup + "\"");
    return entries;
}

// ---------------------------------------------------------------------------
// External page renderer
// ---------------------------------------------------------------------------

// Substitutes {html} / {png} into the command template, runs it through the
// shell, and verifies the output file exists and is non-empty. Paths are
// substituted verbatim.
inline std::string render_page(const std::filesystem::path& page_html,
                               const std::string& cmd_template) {
    if (cmd_template.find("{html}") == std::string::npos)
        throw config_error("render command template is missing the {html} placeholder");
    if (cmd_template.find("{png}") == std::string::npos)
        throw config_error("render command template is missing the {png} placeholder");

    std::filesystem::path png = page_html;
    png.replace_extension(".png");

    std::string cmd = cmd_template;
    auto replace_all = [](std::string& s, std::string_view from, const std::string& to) {
        std::size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all(cmd, "{html}", page_html.string());
    replace_all(cmd, "{png}", png.string());

    const int rc = std::system(cmd.c_str());
    const int exit_code = (rc < 0) ? -1 : ((rc & 0x7F) == 0 ? (rc >> 8) & 0xFF : 128 + (rc & 0x7F));
    if (rc != 0)
        throw render_error("renderer command failed: " + cmd, exit_code);
    std::error_code ec;
    const auto size = std::filesystem::file_size(png, ec);
    if (ec || size == 0)
        throw render_error("renderer produced no output: " + png.string(), 0);
    return png.string();
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

struct SourceDoc {
    std::string id;
    std::string html;
    std::optional<std::string> origin;  // original file name, if any
};

struct SynthResult {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> warnings;
};

// Converts each HTML source to Markdown, paginates, writes per-page
// markdown/html files under out_dir/pages, renders images when a command
// template is given, and writes out_dir/manifest.jsonl. Entries are ordered
// by (doc id, page index); identical inputs produce a byte-identical
// manifest.
inline SynthResult build_manifest(std::span<const SourceDoc> sources,
                                  const std::filesystem::path& out_dir, const PageBudget& budget,
                                  const std::optional<std::string>& render_cmd) {
    std::vector<std::string> ids;
    for (const SourceDoc& s : sources) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) throw data_error("duplicate source doc id \"" + *dup + "\"");

    std::vector<const SourceDoc*> ordered;
    for (const SourceDoc& s : sources) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const SourceDoc* a, const SourceDoc* b) { return a->id < b->id; });

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "pages", ec);
    if (ec) throw io_error("cannot create " + (out_dir / "pages").string() + ": " + ec.message());

    SynthResult result;
    for (const SourceDoc* src : ordered) {
        const MarkdownDoc doc = html_to_markdown(src->html);
        const std::vector<MarkdownDoc> pages = paginate(doc, budget);
        for (std::size_t p = 0; p < pages.size(); ++p) {
            ManifestEntry entry;
            entry.id = src->id + "-" + std::to_string(p);
            entry.page_index = static_cast<int>(p);
            entry.markdown = serialize_markdown(pages[p]);
            entry.source = src->origin;

            const std::filesystem::path md_path = out_dir / "pages" / (entry.id + ".md");
            const std::filesystem::path html_path = out_dir / "pages" / (entry.id + ".html");
            {
                std::ofstream md(md_path, std::ios::binary);
                if (!(md << entry.markdown) || !md.flush())
                    throw io_error("failed writing " + md_path.string() + " after " +
                                   std::to_string(result.entries.size()) + " entries");
                std::ofstream ph(html_path, std::ios::binary);
                if (!(ph << to_html(pages[p])) || !ph.flush())
                    throw io_error("failed writing " + html_path.string() + " after " +
                                   std::to_string(result.entries.size()) + " entries");
            }
            if (render_cmd) {
                try {
                    entry.image_path = render_page(html_path, *render_cmd);
                } catch (const render_error& e) {
                    result.warnings.push_back("page " + entry.id + ": " + e.what());
                    entry.image_path = std::nullopt;
                }
            }
            result.entries.push_back(std::move(entry));
        }
    }

    const std::filesystem::path manifest_path = out_dir / "manifest.jsonl";
    std::ofstream mf(manifest_path, std::ios::binary);
    if (!mf) throw io_error("cannot write " + manifest_path.string());
    write_manifest(mf, result.entries);
    if (!mf.flush())
        throw io_error("failed writing " + manifest_path.string() + " after " +
                       std::to_string(result.entries.size()) + " entries");
    return result;
}

}  // namespace mdocr
