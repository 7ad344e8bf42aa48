#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mdocr/analysis.hpp"
#include "mdocr/bpe.hpp"
#include "mdocr/dataset.hpp"
#include "mdocr/errors.hpp"
#include "mdocr/markdown.hpp"
#include "mdocr/metrics.hpp"
#include "mdocr/report.hpp"

namespace mdocr {

// Worker cap: MDOCR_WORKERS environment variable, defaulting to the logical
// CPU count. Values that do not parse fall back to the default.
inline unsigned worker_count() {
    if (const char* env = std::getenv("MDOCR_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 4096)
            return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Index-parallel map with a bounded pool. Results are written to fixed
// slots, so downstream folds are independent of scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
    const unsigned workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::filesystem::path pred_manifest;
    std::filesystem::path ref_manifest;
    std::optional<std::filesystem::path> out_path;
    NormalizationOptions normalization;
    std::optional<std::filesystem::path> tokenizer_dir;  // enables TER
    std::string model_label = "eval";
    int bleu_max_n = kBleuMaxOrder;
};

// Scores predictions against references, matching samples by manifest id.
// Unmatched ids become warnings; zero matches is an error. Per-sample work
// fans out to the worker pool; aggregation is an ordered fold, so reports
// are byte-identical for any worker count.
inline MetricReport run_eval(const EvalOptions& opts) {
    const std::vector<ManifestEntry> pred = read_manifest(opts.pred_manifest);
    const std::vector<ManifestEntry> ref = read_manifest(opts.ref_manifest);

    std::map<std::string, const ManifestEntry*> pred_by_id;
    for (const ManifestEntry& e : pred) pred_by_id.emplace(e.id, &e);
    std::map<std::string, const ManifestEntry*> ref_by_id;
    for (const ManifestEntry& e : ref) ref_by_id.emplace(e.id, &e);

    std::vector<std::pair<const ManifestEntry*, const ManifestEntry*>> matched;  // (pred, ref)
    std::vector<std::string> warnings;
    for (const auto& [id, entry] : ref_by_id) {
        auto it = pred_by_id.find(id);
        if (it != pred_by_id.end())
            matched.emplace_back(it->second, entry);
        else
            warnings.push_back("missing prediction for id \"" + id + "\"");
    }
    for (const auto& [id, entry] : pred_by_id)
        if (!ref_by_id.count(id)) warnings.push_back("prediction without reference: \"" + id + "\"");
    if (matched.empty())
        throw data_error("no ids matched between " + opts.pred_manifest.string() + " and " +
                         opts.ref_manifest.string());

    std::optional<TokenizerModel> tokenizer;
    if (opts.tokenizer_dir) tokenizer.emplace(TokenizerModel::load(*opts.tokenizer_dir));

    std::vector<SampleResult> results(matched.size());
    parallel_for(matched.size(), [&](std::size_t i) {
        const ManifestEntry& p = *matched[i].first;
        const ManifestEntry& r = *matched[i].second;
        try {
            SampleResult s;
            s.sample_id = r.id;
            s.bleu = bleu(r.markdown, p.markdown, opts.normalization, opts.bleu_max_n);
            s.cer = cer(r.markdown, p.markdown, opts.normalization);
            s.wer = wer(r.markdown, p.markdown, opts.normalization);
            s.structure_accuracy = structure_accuracy(extract_structure(parse_markdown(p.markdown)),
                                                      extract_structure(parse_markdown(r.markdown)));
            if (tokenizer) s.ter = token_efficiency_ratio(*tokenizer, p.markdown, r.markdown);
            results[i] = std::move(s);
        } catch (const error& e) {
            throw data_error("sample \"" + r.id + "\": " + e.what());
        }
    });

    ConfigEcho config;
    config.normalization = opts.normalization;
    config.bleu_max_n = opts.bleu_max_n;
    config.ter_tokenizer = opts.tokenizer_dir ? opts.tokenizer_dir->string() : "none";
    MetricReport report = make_report(opts.model_label, std::move(results), std::move(config),
                                      std::move(warnings));
    if (opts.out_path) save_report(report, *opts.out_path);
    return report;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
    std::filesystem::path html_dir;
    std::filesystem::path out_dir;
    int max_chars = 1800;
    std::optional<std::string> render_cmd;
};

// Reads *.html files (sorted by name; the stem becomes the doc id) and
// builds the paired page/manifest dataset.
inline SynthResult run_synth(const SynthOptions& opts) {
    if (!std::filesystem::is_directory(opts.html_dir))
        throw config_error(opts.html_dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(opts.html_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".html")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw data_error("no .html files in " + opts.html_dir.string());

    std::vector<SourceDoc> sources;
    sources.reserve(files.size());
    for (const std::filesystem::path& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw io_error("cannot open " + f.string());
        std::stringstream buf;
        buf << in.rdbuf();
        sources.push_back({f.stem().string(), buf.str(), f.filename().string()});
    }
    return build_manifest(sources, opts.out_dir, PageBudget{opts.max_chars}, opts.render_cmd);
}

// ---------------------------------------------------------------------------
// tok-stats
// ---------------------------------------------------------------------------

struct TokStatsOptions {
    std::optional<std::filesystem::path> tokenizer_dir;
    std::optional<std::filesystem::path> baseline_dir;
    std::optional<std::filesystem::path> corpus_path;
    std::vector<ContextSpec> contexts;
};

// "name:max_tokens:ratio" -> ContextSpec
inline ContextSpec parse_context_spec(const std::string& text) {
    const std::size_t c1 = text.find(':');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c1 == 0)
        throw config_error("context spec must be name:max_tokens:ratio, got \"" + text + "\"");
    ContextSpec spec;
    spec.model_name = text.substr(0, c1);
    try {
        spec.max_decoder_tokens = std::stoll(text.substr(c1 + 1, c2 - c1 - 1));
        spec.compression_ratio_vs_base = std::stod(text.substr(c2 + 1));
    } catch (const std::exception&) {
        throw config_error("context spec must be name:max_tokens:ratio, got \"" + text + "\"");
    }
    return spec;
}

// One corpus text per non-empty line.
inline std::vector<std::string> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open corpus " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw data_error("corpus " + path.string() + " has no non-empty lines");
    return lines;
}

inline void run_tok_stats(const TokStatsOptions& opts, std::ostream& out) {
    std::optional<TokenizerModel> target;
    std::optional<TokenizerModel> baseline;
    if (opts.tokenizer_dir) target.emplace(TokenizerModel::load(*opts.tokenizer_dir));
    if (opts.baseline_dir) baseline.emplace(TokenizerModel::load(*opts.baseline_dir));

    if (opts.corpus_path) {
        if (!target) throw config_error("--corpus requires --tokenizer");
        const std::vector<std::string> corpus = read_corpus(*opts.corpus_path);
        std::size_t chars = 0;
        std::size_t target_tokens = 0;
        std::size_t baseline_tokens = 0;
        for (const std::string& s : corpus) {
            chars += uni::codepoint_count(s);
            target_tokens += target->tokenize(s).size();
            if (baseline) baseline_tokens += baseline->tokenize(s).size();
        }
        out << "corpus: " << corpus.size() << " texts, " << chars << " chars\n";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", static_cast<double>(target_tokens) / chars);
        out << "tokenizer: " << target_tokens << " tokens (" << buf << " tokens/char)\n";
        if (baseline) {
            std::snprintf(buf, sizeof(buf), "%.4f", static_cast<double>(baseline_tokens) / chars);
            out << "baseline: " << baseline_tokens << " tokens (" << buf << " tokens/char)\n";
            const double ratio = compression_ratio(*target, *baseline, corpus);
            std::snprintf(buf, sizeof(buf), "%.4f", ratio);
            out << "compression ratio (baseline tokens per tokenizer token): " << buf << "\n";
        }
    }

    if (!opts.contexts.empty()) {
        out << "effective context (base-token equivalents):\n";
        for (const ContextRow& row : context_table(opts.contexts)) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.2f", row.compression_ratio_vs_base);
            out << "  " << row.model_name << ": " << row.max_decoder_tokens << " tokens x " << buf
                << " = " << row.effective_tokens << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// geom
// ---------------------------------------------------------------------------

inline void run_geom(const EncoderGeometry& geom, std::ostream& out) {
    const TokenGrid grid = token_grid(geom);
    out << "input: " << geom.input_height << "x" << geom.input_width << " px, patch "
        << geom.patch_size << ", merge stages " << geom.merge_stages << "\n";
    out << "stages: ";
    for (std::size_t i = 0; i < grid.stages.size(); ++i) {
        if (i > 0) out << " -> ";
        out << grid.stages[i].first << "x" << grid.stages[i].second;
    }
    out << "\n";
    out << "grid: " << grid.rows << " x " << grid.cols << " = " << grid.token_count
        << " tokens\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

inline std::string run_report(std::span<const std::filesystem::path> report_paths) {
    std::vector<MetricReport> reports;
    reports.reserve(report_paths.size());
    for (const std::filesystem::path& p : report_paths) reports.push_back(load_report(p));
    return render_report_table(reports);
}

}  // namespace mdocr
