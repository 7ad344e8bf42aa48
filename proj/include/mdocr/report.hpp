#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdocr/errors.hpp"
#include "mdocr/metrics.hpp"
#include "mdocr/normalize.hpp"

namespace mdocr {

inline constexpr const char* kStructureAccuracyTag = "normalized-levenshtein-block-tags";
inline constexpr const char* kBleuLevelTag = "sentence-macro";

// Everything that pins the metric semantics of a report. Two reports with
// equal config and equal inputs are equal.
struct ConfigEcho {
    NormalizationOptions normalization;
    double bleu_epsilon = kBleuEpsilon;
    int bleu_max_n = kBleuMaxOrder;
    std::string structure_accuracy_tag = kStructureAccuracyTag;
    std::string bleu_level = kBleuLevelTag;
    std::string ter_tokenizer = "none";

    bool operator==(const ConfigEcho& o) const {
        return normalization.unicode_nfc == o.normalization.unicode_nfc &&
               normalization.strip_tashkeel == o.normalization.strip_tashkeel &&
               normalization.normalize_alef == o.normalization.normalize_alef &&
               normalization.collapse_whitespace == o.normalization.collapse_whitespace &&
               bleu_epsilon == o.bleu_epsilon && bleu_max_n == o.bleu_max_n &&
               structure_accuracy_tag == o.structure_accuracy_tag &&
               bleu_level == o.bleu_level && ter_tokenizer == o.ter_tokenizer;
    }
};

struct MetricReport {
    std::string model = "eval";
    std::vector<SampleResult> per_sample;
    MetricMeans means;
    std::size_t sample_count = 0;
    ConfigEcho config_echo;
    std::vector<std::string> warnings;

    bool operator==(const MetricReport&) const = default;
};

inline MetricReport make_report(std::string model, std::vector<SampleResult> samples,
                                ConfigEcho config, std::vector<std::string> warnings = {}) {
    MetricReport r;
    r.model = std::move(model);
    r.means = aggregate(samples);
    r.sample_count = samples.size();
    r.per_sample = std::move(samples);
    r.config_echo = std::move(config);
    r.warnings = std::move(warnings);
    return r;
}

// ---------------------------------------------------------------------------
// JSON serialization (full precision; display rounding happens at render)
// ---------------------------------------------------------------------------

namespace report_detail {

inline nlohmann::ordered_json sample_to_json(const SampleResult& s) {
    nlohmann::ordered_json j;
    j["sample_id"] = s.sample_id;
    j["bleu"] = s.bleu;
    j["cer"] = s.cer;
    j["wer"] = s.wer;
    j["structure_accuracy"] = s.structure_accuracy;
    if (s.ter) j["ter"] = *s.ter;
    return j;
}

inline SampleResult sample_from_json(const nlohmann::json& j) {
    SampleResult s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.bleu = j.at("bleu").get<double>();
    s.cer = j.at("cer").get<double>();
    s.wer = j.at("wer").get<double>();
    s.structure_accuracy = j.at("structure_accuracy").get<double>();
    if (j.contains("ter") && !j["ter"].is_null()) s.ter = j["ter"].get<double>();
    return s;
}

}  // namespace report_detail

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["sample_count"] = r.sample_count;
    nlohmann::ordered_json means;
    means["bleu"] = r.means.bleu;
    means["cer"] = r.means.cer;
    means["wer"] = r.means.wer;
    means["structure_accuracy"] = r.means.structure_accuracy;
    if (r.means.ter) means["ter"] = *r.means.ter;
    j["means"] = std::move(means);
    j["per_sample"] = nlohmann::ordered_json::array();
    for (const SampleResult& s : r.per_sample)
        j["per_sample"].push_back(report_detail::sample_to_json(s));
    nlohmann::ordered_json cfg;
    cfg["normalization"] = {{"unicode_nfc", r.config_echo.normalization.unicode_nfc},
                            {"strip_tashkeel", r.config_echo.normalization.strip_tashkeel},
                            {"normalize_alef", r.config_echo.normalization.normalize_alef},
                            {"collapse_whitespace", r.config_echo.normalization.collapse_whitespace}};
    cfg["bleu"] = {{"epsilon", r.config_echo.bleu_epsilon},
                   {"max_n", r.config_echo.bleu_max_n},
                   {"level", r.config_echo.bleu_level}};
    cfg["structure_accuracy"] = r.config_echo.structure_accuracy_tag;
    cfg["ter_tokenizer"] = r.config_echo.ter_tokenizer;
    j["config_echo"] = std::move(cfg);
    j["warnings"] = r.warnings;
    return j;
}

inline void save_report(const MetricReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write report " + path.string());
    out << report_to_json(r).dump(2) << "\n";
    if (!out.flush()) throw io_error("failed writing report " + path.string());
}

// Loads and validates: sample_count must match, and the stored means must be
// exactly recomputable from per_sample.
inline MetricReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open report " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("report " + path.string() + ": " + e.what());
    }
    MetricReport r;
    try {
        r.model = j.at("model").get<std::string>();
        r.sample_count = j.at("sample_count").get<std::size_t>();
        for (const auto& s : j.at("per_sample"))
            r.per_sample.push_back(report_detail::sample_from_json(s));
        const auto& means = j.at("means");
        r.means.bleu = means.at("bleu").get<double>();
        r.means.cer = means.at("cer").get<double>();
        r.means.wer = means.at("wer").get<double>();
        r.means.structure_accuracy = means.at("structure_accuracy").get<double>();
        if (means.contains("ter") && !means["ter"].is_null())
            r.means.ter = means["ter"].get<double>();
        const auto& cfg = j.at("config_echo");
        const auto& norm = cfg.at("normalization");
        r.config_echo.normalization.unicode_nfc = norm.at("unicode_nfc").get<bool>();
        r.config_echo.normalization.strip_tashkeel = norm.at("strip_tashkeel").get<bool>();
        r.config_echo.normalization.normalize_alef = norm.at("normalize_alef").get<bool>();
        r.config_echo.normalization.collapse_whitespace =
            norm.at("collapse_whitespace").get<bool>();
        r.config_echo.bleu_epsilon = cfg.at("bleu").at("epsilon").get<double>();
        r.config_echo.bleu_max_n = cfg.at("bleu").at("max_n").get<int>();
        r.config_echo.bleu_level = cfg.at("bleu").at("level").get<std::string>();
        r.config_echo.structure_accuracy_tag = cfg.at("structure_accuracy").get<std::string>();
        r.config_echo.ter_tokenizer = cfg.at("ter_tokenizer").get<std::string>();
        if (j.contains("warnings"))
            r.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error("report " + path.string() + ": " + e.what());
    }

    if (r.sample_count != r.per_sample.size())
        throw format_error("report " + path.string() + ": sample_count " +
                           std::to_string(r.sample_count) + " does not match " +
                           std::to_string(r.per_sample.size()) + " samples");
    const MetricMeans recomputed = aggregate(r.per_sample);
    if (!(recomputed == r.means))
        throw format_error("report " + path.string() +
                           ": stored means are not recomputable from per_sample");
    return r;
}

// ---------------------------------------------------------------------------
// Comparison table (Markdown)
// ---------------------------------------------------------------------------

namespace report_detail {

inline std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace report_detail

// One row per report: Model, BLEU(up), CER(down), WER(down), Structure
// Acc(up), 4-decimal fixed, best value per column bolded (ties all bolded).
inline std::string render_report_table(std::span<const MetricReport> reports) {
    if (reports.empty()) throw data_error("no reports to render");

    double best_bleu = reports[0].means.bleu;
    double best_cer = reports[0].means.cer;
    double best_wer = reports[0].means.wer;
    double best_sa = reports[0].means.structure_accuracy;
    for (const MetricReport& r : reports) {
        best_bleu = std::max(best_bleu, r.means.bleu);
        best_cer = std::min(best_cer, r.means.cer);
        best_wer = std::min(best_wer, r.means.wer);
        best_sa = std::max(best_sa, r.means.structure_accuracy);
    }

    auto cell = [](double v, bool best) {
        const std::string s = report_detail::fixed4(v);
        return best ? "**" + s + "**" : s;
    };

    std::ostringstream out;
    out << "| Model | BLEU (↑) | CER (↓) | WER (↓) | Structure Acc (↑) |\n";
    out << "|---|---|---|---|---|\n";
    for (const MetricReport& r : reports) {
        out << "| " << r.model << " | " << cell(r.means.bleu, r.means.bleu == best_bleu) << " | "
            << cell(r.means.cer, r.means.cer == best_cer) << " | "
            << cell(r.means.wer, r.means.wer == best_wer) << " | "
            << cell(r.means.structure_accuracy, r.means.structure_accuracy == best_sa) << " |\n";
    }
    return out.str();
}

}  // namespace mdocr
