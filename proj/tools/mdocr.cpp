// mdocr: synthesize paired page/Markdown datasets, score OCR hypotheses,
// inspect tokenizer efficiency, and validate encoder geometry.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdocr/errors.hpp"
#include "mdocr/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitRender = 3;

struct EvalCli {
    std::string pred;
    std::string ref;
    std::string out = "report.json";
    std::string tokenizer;
    std::string model = "eval";
    bool no_nfc = false;
    bool strip_tashkeel = false;
    bool normalize_alef = false;
    bool keep_whitespace = false;
};

int do_eval(const EvalCli& cli) {
    mdocr::EvalOptions opts;
    opts.pred_manifest = cli.pred;
    opts.ref_manifest = cli.ref;
    opts.out_path = cli.out;
    opts.model_label = cli.model;
    if (!cli.tokenizer.empty()) opts.tokenizer_dir = cli.tokenizer;
    opts.normalization.unicode_nfc = !cli.no_nfc;
    opts.normalization.strip_tashkeel = cli.strip_tashkeel;
    opts.normalization.normalize_alef = cli.normalize_alef;
    opts.normalization.collapse_whitespace = !cli.keep_whitespace;

    const mdocr::MetricReport report = mdocr::run_eval(opts);
    for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
    char buf[64];
    auto line = [&](const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        std::cout << name << ": " << buf << "\n";
    };
    std::cout << "samples: " << report.sample_count << "\n";
    line("bleu", report.means.bleu);
    line("cer", report.means.cer);
    line("wer", report.means.wer);
    line("structure_accuracy", report.means.structure_accuracy);
    if (report.means.ter) line("ter", *report.means.ter);
    std::cout << "report written to " << cli.out << "\n";
    return kExitOk;
}

struct SynthCli {
    std::string html_dir;
    std::string out_dir;
    int max_chars = 1800;
    std::string render_cmd;
};

int do_synth(const SynthCli& cli) {
    mdocr::SynthOptions opts;
    opts.html_dir = cli.html_dir;
    opts.out_dir = cli.out_dir;
    opts.max_chars = cli.max_chars;
    if (!cli.render_cmd.empty()) opts.render_cmd = cli.render_cmd;

    const mdocr::SynthResult result = mdocr::run_synth(opts);
    for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << result.entries.size() << " pages to " << cli.out_dir << "\n";
    if (opts.render_cmd && !result.entries.empty()) {
        const bool all_failed =
            std::none_of(result.entries.begin(), result.entries.end(),
                         [](const mdocr::ManifestEntry& e) { return e.image_path.has_value(); });
        if (all_failed) {
            std::cerr << "error: renderer failed for every page\n";
            return kExitRender;
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markdown OCR evaluation toolkit"};
    app.require_subcommand(1);

    EvalCli eval_cli;
    CLI::App* eval = app.add_subcommand("eval", "score a prediction manifest against a reference");
    eval->add_option("--pred", eval_cli.pred, "prediction manifest (jsonl)")->required();
    eval->add_option("--ref", eval_cli.ref, "reference manifest (jsonl)")->required();
    eval->add_option("--out", eval_cli.out, "output report path (default report.json)");
    eval->add_option("--tokenizer", eval_cli.tokenizer, "tokenizer dir; enables TER");
    eval->add_option("--model", eval_cli.model, "model label stored in the report");
    eval->add_flag("--no-nfc", eval_cli.no_nfc, "skip Unicode NFC normalization");
    eval->add_flag("--strip-tashkeel", eval_cli.strip_tashkeel, "strip Arabic diacritics");
    eval->add_flag("--normalize-alef", eval_cli.normalize_alef, "fold alef variants");
    eval->add_flag("--keep-whitespace", eval_cli.keep_whitespace, "do not collapse whitespace");

    SynthCli synth_cli;
    CLI::App* synth = app.add_subcommand("synth", "build a paired page/Markdown dataset from HTML");
    synth->add_option("html_dir", synth_cli.html_dir, "directory of .html sources")->required();
    synth->add_option("out_dir", synth_cli.out_dir, "output directory")->required();
    synth->add_option("--max-chars", synth_cli.max_chars, "page budget in characters (default 1800)");
    synth->add_option("--render-cmd", synth_cli.render_cmd,
                      "external renderer template with {html} and {png} placeholders");

    mdocr::TokStatsOptions tok_opts;
    std::string tok_dir, baseline_dir, corpus_path;
    std::vector<std::string> context_args;
    CLI::App* tok = app.add_subcommand("tok-stats", "tokenizer efficiency statistics");
    tok->add_option("--tokenizer", tok_dir, "tokenizer dir (vocab.json + merges.txt)");
    tok->add_option("--baseline", baseline_dir, "baseline tokenizer dir");
    tok->add_option("--corpus", corpus_path, "corpus file, one text per line");
    tok->add_option("--context", context_args,
                    "context spec name:max_tokens:ratio (repeatable)");

    mdocr::EncoderGeometry geom;
    CLI::App* geom_cmd = app.add_subcommand("geom", "encoder token-grid arithmetic");
    geom_cmd->add_option("--height", geom.input_height, "input height in px (default 896)");
    geom_cmd->add_option("--width", geom.input_width, "input width in px (default 672)");
    geom_cmd->add_option("--patch", geom.patch_size, "patch size (default 4)");
    geom_cmd->add_option("--merges", geom.merge_stages, "patch-merge stages (default 3)");

    std::vector<std::string> report_files;
    std::string report_format = "md";
    std::string report_out;
    CLI::App* report = app.add_subcommand("report", "render a comparison table from reports");
    report->add_option("reports", report_files, "report JSON files")->required();
    report->add_option("--format", report_format, "output format (md)");
    report->add_option("--out", report_out, "write the table to a file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*eval) return do_eval(eval_cli);
        if (*synth) return do_synth(synth_cli);
        if (*tok) {
            if (!tok_dir.empty()) tok_opts.tokenizer_dir = tok_dir;
            if (!baseline_dir.empty()) tok_opts.baseline_dir = baseline_dir;
            if (!corpus_path.empty()) tok_opts.corpus_path = corpus_path;
            for (const std::string& c : context_args)
                tok_opts.contexts.push_back(mdocr::parse_context_spec(c));
            if (!tok_opts.tokenizer_dir && tok_opts.contexts.empty())
                throw mdocr::config_error("tok-stats needs --tokenizer and/or --context");
            mdocr::run_tok_stats(tok_opts, std::cout);
            return kExitOk;
        }
        if (*geom_cmd) {
            mdocr::run_geom(geom, std::cout);
            return kExitOk;
        }
        if (*report) {
            if (report_format != "md")
                throw mdocr::config_error("unsupported report format \"" + report_format + "\"");
            std::vector<std::filesystem::path> paths(report_files.begin(), report_files.end());
            const std::string table = mdocr::run_report(paths);
            if (report_out.empty()) {
                std::cout << table;
            } else {
                std::ofstream out(report_out, std::ios::binary);
                if (!(out << table) || !out.flush())
                    throw mdocr::io_error("failed writing " + report_out);
            }
            return kExitOk;
        }
    } catch (const mdocr::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mdocr::render_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRender;
    } catch (const mdocr::data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const mdocr::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitConfig;
}
