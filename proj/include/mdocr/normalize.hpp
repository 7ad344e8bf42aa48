#pragma once

#include <string>
#include <string_view>

#include "mdocr/unicode.hpp"

namespace mdocr {

// Text normalization applied before metric computation. The pipeline is
// idempotent: normalize(normalize(s)) == normalize(s) for any flag set.
struct NormalizationOptions {
    bool unicode_nfc = true;
    bool strip_tashkeel = false;   // remove U+064B..U+0652 combining marks
    bool normalize_alef = false;   // map alef variants (0622/0623/0625) to bare alef
    bool collapse_whitespace = true;
};

namespace detail {

constexpr char32_t kTashkeelFirst = 0x064B;
constexpr char32_t kTashkeelLast = 0x0652;
constexpr char32_t kBareAlef = 0x0627;

inline bool is_tashkeel(char32_t cp) {
    return cp >= kTashkeelFirst && cp <= kTashkeelLast;
}

inline bool is_alef_variant(char32_t cp) {
    return cp == 0x0622 || cp == 0x0623 || cp == 0x0625;
}

}  // namespace detail

// Step order: NFC, alef folding, tashkeel stripping, whitespace collapse.
// NFC runs first so that decomposed hamza-carrier sequences fold correctly.
inline std::string normalize_text(std::string_view text, const NormalizationOptions& opts) {
    std::u32string cps = uni::decode_utf8(text);  // validates encoding
    if (opts.unicode_nfc) cps = uni::decode_utf8(uni::nfc(text));

    std::u32string out;
    out.reserve(cps.size());
    bool pending_space = false;
    bool seen_content = false;
    for (char32_t cp : cps) {
        if (opts.normalize_alef && detail::is_alef_variant(cp)) cp = detail::kBareAlef;
        if (opts.strip_tashkeel && detail::is_tashkeel(cp)) continue;
        if (opts.collapse_whitespace) {
            if (uni::is_space(cp)) {
                pending_space = seen_content;
                continue;
            }
            if (pending_space) {
                out.push_back(U' ');
                pending_space = false;
            }
            seen_content = true;
        }
        out.push_back(cp);
    }
    return uni::encode_utf8(out);
}

}  // namespace mdocr
