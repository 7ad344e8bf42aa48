#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mdocr/bpe.hpp"
#include "mdocr/errors.hpp"
#include "mdocr/unicode.hpp"

namespace mdocr {

// ---------------------------------------------------------------------------
// Encoder token-grid arithmetic
// ---------------------------------------------------------------------------

struct EncoderGeometry {
    int input_height = 896;
    int input_width = 672;
    int patch_size = 4;
    int merge_stages = 3;
    int hidden_dim = 1024;
};

struct TokenGrid {
    int rows = 0;
    int cols = 0;
    long long token_count = 0;
    std::vector<std::pair<int, int>> stages;  // (h, w) after patching, then per merge
};

// Total reduction is patch_size * 2^merge_stages; both input dimensions must
// divide it exactly.
inline TokenGrid token_grid(const EncoderGeometry& g) {
    if (g.patch_size <= 0) throw config_error("patch size must be positive");
    if (g.merge_stages < 0) throw config_error("merge stage count must be non-negative");
    if (g.input_height <= 0 || g.input_width <= 0)
        throw config_error("input dimensions must be positive");

    const long long factor = static_cast<long long>(g.patch_size) << g.merge_stages;
    if (g.input_height % factor != 0)
        throw config_error("height " + std::to_string(g.input_height) +
                           " is not divisible by the reduction factor " + std::to_string(factor));
    if (g.input_width % factor != 0)
        throw config_error("width " + std::to_string(g.input_width) +
                           " is not divisible by the reduction factor " + std::to_string(factor));

    TokenGrid grid;
    int h = g.input_height / g.patch_size;
    int w = g.input_width / g.patch_size;
    grid.stages.emplace_back(h, w);
    for (int s = 0; s < g.merge_stages; ++s) {
        h /= 2;
        w /= 2;
        grid.stages.emplace_back(h, w);
    }
    grid.rows = h;
    grid.cols = w;
    grid.token_count = static_cast<long long>(h) * w;
    return grid;
}

// ---------------------------------------------------------------------------
// Context comparison
// ---------------------------------------------------------------------------

struct ContextRow {
    std::string model_name;
    long long max_decoder_tokens = 0;
    double compression_ratio_vs_base = 1.0;
    long long effective_tokens = 0;
};

// One row per spec, sorted by effective context descending; ties keep a
// stable order by model name.
inline std::vector<ContextRow> context_table(std::span<const ContextSpec> specs) {
    if (specs.empty()) throw config_error("context table needs at least one spec");
    std::vector<ContextRow> rows;
    rows.reserve(specs.size());
    for (const ContextSpec& s : specs)
        rows.push_back({s.model_name, s.max_decoder_tokens, s.compression_ratio_vs_base,
                        effective_context(s)});
    std::stable_sort(rows.begin(), rows.end(), [](const ContextRow& a, const ContextRow& b) {
        if (a.effective_tokens != b.effective_tokens) return a.effective_tokens > b.effective_tokens;
        return a.model_name < b.model_name;
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Repetition handling
// ---------------------------------------------------------------------------

// Standard multiplicative penalty: history tokens with positive scores are
// divided by the penalty, negative ones multiplied. Applied once per
// distinct token.
inline std::vector<double> apply_repetition_penalty(std::vector<double> scores,
                                                    std::span<const int> history,
                                                    double penalty) {
    if (!(penalty > 0.0)) throw config_error("repetition penalty must be > 0");
    for (int id : history) {
        if (id < 0 || static_cast<std::size_t>(id) >= scores.size())
            throw config_error("history token id " + std::to_string(id) +
                               " outside vocab of size " + std::to_string(scores.size()));
        double& s = scores[static_cast<std::size_t>(id)];
        if (s > 0.0)
            s /= penalty;
        else if (s < 0.0)
            s *= penalty;
    }
    return scores;
}

struct RepetitionParams {
    int min_ngram = 3;
    int max_ngram = 20;
    int min_repeats = 3;
};

struct RepetitionHit {
    int period = 0;            // repeating unit length
    std::size_t start_index = 0;  // first token of the repeated suffix
    int repeat_count = 0;

    bool operator==(const RepetitionHit&) const = default;
};

// Looks for a trailing loop: the smallest period p in [min_ngram, max_ngram]
// such that the sequence ends in >= min_repeats consecutive copies of its
// last p tokens; reports the longest such suffix.
template <class T>
std::optional<RepetitionHit> detect_repetition(std::span<const T> tokens,
                                               const RepetitionParams& params) {
    if (params.min_ngram < 1) throw config_error("min_ngram must be >= 1");
    if (params.max_ngram < params.min_ngram)
        throw config_error("max_ngram must be >= min_ngram");
    if (params.min_repeats < 2) throw config_error("min_repeats must be >= 2");

    const std::size_t n = tokens.size();
    for (int p = params.min_ngram; p <= params.max_ngram; ++p) {
        const std::size_t period = static_cast<std::size_t>(p);
        if (period * 2 > n) break;
        // count how many trailing copies of the last p tokens the sequence has
        std::size_t copies = 1;
        while (copies * period + period <= n) {
            const std::size_t a = n - (copies + 1) * period;
            const std::size_t b = n - period;
            bool equal = true;
            for (std::size_t k = 0; k < period; ++k) {
                if (!(tokens[a + k] == tokens[b + k])) {
                    equal = false;
                    break;
                }
            }
            if (!equal) break;
            ++copies;
        }
        if (copies >= static_cast<std::size_t>(params.min_repeats))
            return RepetitionHit{p, n - copies * period, static_cast<int>(copies)};
    }
    return std::nullopt;
}

template <class T>
std::optional<RepetitionHit> detect_repetition(const std::vector<T>& tokens,
                                               const RepetitionParams& params) {
    return detect_repetition(std::span<const T>(tokens), params);
}

// Repairs a trailing loop in whitespace-tokenized text: keeps exactly one
// copy of the repeating unit. Non-repetitive text comes back unchanged.
inline std::string truncate_repetition(std::string_view text, const RepetitionParams& params) {
    const std::vector<std::string_view> words = uni::split_words(text);
    const auto hit = detect_repetition(std::span<const std::string_view>(words), params);
    if (!hit) return std::string(text);
    const std::size_t keep = hit->start_index + static_cast<std::size_t>(hit->period);
    std::string out;
    for (std::size_t i = 0; i < keep; ++i) {
        if (i > 0) out.push_back(' ');
        out.append(words[i]);
    }
    return out;
}

}  // namespace mdocr
