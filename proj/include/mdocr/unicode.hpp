#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "mdocr/errors.hpp"

namespace mdocr::uni {

// Strict UTF-8 decoder: rejects overlong forms, surrogates, values above
// U+10FFFF and truncated sequences.
inline std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        std::size_t len = 0;
        if (b0 < 0x80) {
            cp = b0;
            len = 1;
        } else if ((b0 >> 5) == 0x6) {
            cp = b0 & 0x1F;
            len = 2;
        } else if ((b0 >> 4) == 0xE) {
            cp = b0 & 0x0F;
            len = 3;
        } else if ((b0 >> 3) == 0x1E) {
            cp = b0 & 0x07;
            len = 4;
        } else {
            throw encoding_error("invalid UTF-8 lead byte", i);
        }
        if (i + len > s.size())
            throw encoding_error("truncated UTF-8 sequence", i);
        for (std::size_t k = 1; k < len; ++k) {
            const unsigned char b = static_cast<unsigned char>(s[i + k]);
            if ((b >> 6) != 0x2)
                throw encoding_error("invalid UTF-8 continuation byte", i + k);
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMin[len])
            throw encoding_error("overlong UTF-8 sequence", i);
        if (cp >= 0xD800 && cp <= 0xDFFF)
            throw encoding_error("UTF-8 encoded surrogate", i);
        if (cp > 0x10FFFF)
            throw encoding_error("code point out of range", i);
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode_utf8(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) append_utf8(out, cp);
    return out;
}

inline std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0;
    for (char c : s)
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    return n;
}

// Unicode White_Space property (covers ASCII whitespace, NBSP, etc).
inline bool is_space(char32_t cp) {
    return u_hasBinaryProperty(static_cast<UChar32>(cp), UCHAR_WHITE_SPACE) != 0;
}

inline const icu::Normalizer2& nfc_normalizer() {
    static const icu::Normalizer2* instance = [] {
        UErrorCode ec = U_ZERO_ERROR;
        const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(ec);
        if (U_FAILURE(ec) || n == nullptr)
            throw error("ICU NFC normalizer unavailable");
        return n;
    }();
    return *instance;
}

// Canonical composition (NFC). Input must be valid UTF-8.
inline std::string nfc(std::string_view s) {
    icu::UnicodeString u =
        icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    UErrorCode ec = U_ZERO_ERROR;
    icu::UnicodeString normalized = nfc_normalizer().normalize(u, ec);
    if (U_FAILURE(ec)) throw error("NFC normalization failed");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

// Splits on runs of Unicode whitespace. Views point into `s`.
inline std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < s.size()) {
        // Decode one code point; input is assumed valid UTF-8 here.
        std::size_t len = 1;
        const unsigned char b = static_cast<unsigned char>(s[i]);
        if ((b >> 5) == 0x6)
            len = 2;
        else if ((b >> 4) == 0xE)
            len = 3;
        else if ((b >> 3) == 0x1E)
            len = 4;
        char32_t cp = b;
        if (len > 1) {
            cp = b & (0x7F >> len);
            for (std::size_t k = 1; k < len && i + k < s.size(); ++k)
                cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        }
        if (is_space(cp)) {
            i += len;
            continue;
        }
        const std::size_t start = i;
        while (i < s.size()) {
            std::size_t wlen = 1;
            const unsigned char wb = static_cast<unsigned char>(s[i]);
            if ((wb >> 5) == 0x6)
                wlen = 2;
            else if ((wb >> 4) == 0xE)
                wlen = 3;
            else if ((wb >> 3) == 0x1E)
                wlen = 4;
            char32_t wcp = wb;
            if (wlen > 1) {
                wcp = wb & (0x7F >> wlen);
                for (std::size_t k = 1; k < wlen && i + k < s.size(); ++k)
                    wcp = (wcp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
            }
            if (is_space(wcp)) break;
            i += wlen;
        }
        words.push_back(s.substr(start, i - start));
    }
    return words;
}

}  // namespace mdocr::uni
