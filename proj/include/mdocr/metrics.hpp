#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdocr/edit_distance.hpp"
#include "mdocr/errors.hpp"
#include "mdocr/markdown.hpp"
#include "mdocr/normalize.hpp"
#include "mdocr/unicode.hpp"

namespace mdocr {

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr int kBleuMaxOrder = 4;

// Character Error Rate: code-point edit distance over normalized texts
// divided by normalized reference length. May exceed 1.
inline double cer(std::string_view ref, std::string_view hyp, const NormalizationOptions& opts) {
    const std::u32string r = uni::decode_utf8(normalize_text(ref, opts));
    const std::u32string h = uni::decode_utf8(normalize_text(hyp, opts));
    if (r.empty()) throw metric_error("CER undefined: normalized reference is empty");
    return static_cast<double>(edit_distance(r, h)) / static_cast<double>(r.size());
}

// Word Error Rate: word-level edit distance divided by reference word count.
// Words are maximal runs of non-whitespace (Unicode White_Space).
inline double wer(std::string_view ref, std::string_view hyp, const NormalizationOptions& opts) {
    const std::string rn = normalize_text(ref, opts);
    const std::string hn = normalize_text(hyp, opts);
    const std::vector<std::string_view> r = uni::split_words(rn);
    const std::vector<std::string_view> h = uni::split_words(hn);
    if (r.empty()) throw metric_error("WER undefined: normalized reference has no words");
    return static_cast<double>(edit_distance(r, h)) / static_cast<double>(r.size());
}

// Sentence BLEU, geometric mean of modified n-gram precisions for
// n = 1..max_n. Orders for which the hypothesis has no n-grams are skipped,
// so bleu(x, x) == 1 for any non-empty x; zero precisions are replaced by
// kBleuEpsilon. Brevity penalty exp(1 - |ref|/|hyp|) applies when the
// hypothesis is shorter than the reference. Empty side scores 0.
inline double bleu(std::string_view ref, std::string_view hyp, const NormalizationOptions& opts,
                   int max_n = kBleuMaxOrder) {
    if (max_n < 1) throw config_error("bleu: max_n must be >= 1");
    const std::string rn = normalize_text(ref, opts);
    const std::string hn = normalize_text(hyp, opts);
    const std::vector<std::string_view> r = uni::split_words(rn);
    const std::vector<std::string_view> h = uni::split_words(hn);
    if (r.empty() || h.empty()) return 0.0;

    double log_sum = 0.0;
    int orders = 0;
    using Gram = std::vector<std::string_view>;
    for (int n = 1; n <= max_n; ++n) {
        if (h.size() < static_cast<std::size_t>(n)) break;
        std::map<Gram, std::ptrdiff_t> ref_counts;
        if (r.size() >= static_cast<std::size_t>(n))
            for (std::size_t i = 0; i + n <= r.size(); ++i)
                ++ref_counts[Gram(r.begin() + i, r.begin() + i + n)];

        std::map<Gram, std::ptrdiff_t> hyp_counts;
        for (std::size_t i = 0; i + n <= h.size(); ++i)
            ++hyp_counts[Gram(h.begin() + i, h.begin() + i + n)];

        std::ptrdiff_t matched = 0;
        std::ptrdiff_t total = 0;
        for (const auto& [gram, count] : hyp_counts) {
            total += count;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) matched += std::min(count, it->second);
        }
        double precision = static_cast<double>(matched) / static_cast<double>(total);
        if (precision == 0.0) precision = kBleuEpsilon;
        log_sum += std::log(precision);
        ++orders;
    }
    if (orders == 0) return 0.0;

    double bp = 1.0;
    if (h.size() < r.size())
        bp = std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(h.size()));
    return bp * std::exp(log_sum / static_cast<double>(orders));
}

// ---------------------------------------------------------------------------
// Per-sample results and aggregation
// ---------------------------------------------------------------------------

struct SampleResult {
    std::string sample_id;
    double bleu = 0.0;
    double cer = 0.0;
    double wer = 0.0;
    double structure_accuracy = 0.0;
    std::optional<double> ter;  // only when a tokenizer was supplied

    bool operator==(const SampleResult&) const = default;
};

struct MetricMeans {
    double bleu = 0.0;
    double cer = 0.0;
    double wer = 0.0;
    double structure_accuracy = 0.0;
    std::optional<double> ter;

    bool operator==(const MetricMeans&) const = default;
};

// Unweighted arithmetic means in input order. TER is averaged over the
// samples that carry it.
inline MetricMeans aggregate(std::span<const SampleResult> results) {
    if (results.empty()) throw data_error("aggregate: no samples");
    MetricMeans m;
    double ter_sum = 0.0;
    std::size_t ter_n = 0;
    for (const SampleResult& r : results) {
        m.bleu += r.bleu;
        m.cer += r.cer;
        m.wer += r.wer;
        m.structure_accuracy += r.structure_accuracy;
        if (r.ter) {
            ter_sum += *r.ter;
            ++ter_n;
        }
    }
    const double n = static_cast<double>(results.size());
    m.bleu /= n;
    m.cer /= n;
    m.wer /= n;
    m.structure_accuracy /= n;
    if (ter_n > 0) m.ter = ter_sum / static_cast<double>(ter_n);
    return m;
}

}  // namespace mdocr
