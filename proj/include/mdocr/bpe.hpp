#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdocr/errors.hpp"

namespace mdocr {

// ---------------------------------------------------------------------------
// Token text escaping
//
// Tokens are raw byte strings. On disk (vocab.json keys, merges.txt fields)
// a token is written literally when every byte is printable and the whole
// sequence is valid UTF-8; otherwise unsafe bytes are written as \xHH.
// A literal token never contains a backslash, so decoding is unambiguous.
// ---------------------------------------------------------------------------

namespace bpe_detail {

inline bool is_plain_ascii(unsigned char b) {
    return b >= 0x21 && b <= 0x7E && b != '\\';
}

inline bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char b = static_cast<unsigned char>(s[i]);
        std::size_t len;
        uint32_t cp;
        if (b < 0x80) {
            len = 1;
            cp = b;
        } else if ((b >> 5) == 0x6) {
            len = 2;
            cp = b & 0x1F;
        } else if ((b >> 4) == 0xE) {
            len = 3;
            cp = b & 0x0F;
        } else if ((b >> 3) == 0x1E) {
            len = 4;
            cp = b & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const unsigned char c = static_cast<unsigned char>(s[i + k]);
            if ((c >> 6) != 0x2) return false;
            cp = (cp << 6) | (c & 0x3F);
        }
        static constexpr uint32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (len > 1 && cp < kMin[len]) return false;
        if (cp >= 0xD800 && cp <= 0xDFFF) return false;
        if (cp > 0x10FFFF) return false;
        i += len;
    }
    return true;
}

inline bool literal_safe(std::string_view token) {
    bool has_high = false;
    for (char c : token) {
        const unsigned char b = static_cast<unsigned char>(c);
        if (b >= 0x80) {
            has_high = true;
            continue;
        }
        if (!is_plain_ascii(b)) return false;
    }
    if (has_high) return valid_utf8(token);
    return !token.empty();
}

inline char hex_digit(unsigned v) { return "0123456789ABCDEF"[v & 0xF]; }

}  // namespace bpe_detail

inline std::string escape_token(std::string_view token) {
    if (bpe_detail::literal_safe(token)) return std::string(token);
    std::string out;
    out.reserve(token.size() * 4);
    for (char c : token) {
        const unsigned char b = static_cast<unsigned char>(c);
        if (bpe_detail::is_plain_ascii(b)) {
            out.push_back(static_cast<char>(b));
        } else {
            out.append("\\x");
            out.push_back(bpe_detail::hex_digit(b >> 4));
            out.push_back(bpe_detail::hex_digit(b));
        }
    }
    return out;
}

inline std::string unescape_token(std::string_view text, std::size_t line = 0) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '\\') {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        if (text.size() - i < 4)
            throw format_error("truncated \\xHH escape in token", line);
        if (text[i + 1] != 'x')
            throw format_error("unknown escape in token (expected \\xHH)", line);
        auto hex = [&](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw format_error("bad hex digit in token escape", line);
        };
        out.push_back(static_cast<char>(hex(text[i + 2]) * 16 + hex(text[i + 3])));
        i += 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tokenizer model
// ---------------------------------------------------------------------------

inline constexpr std::string_view kMergesHeader = "#bpe-v1";
inline constexpr int kNumSpecials = 3;  // <pad>, <bos>, <eos>

// Byte-fallback BPE model: dense vocab ids in [0, V), an ordered merge list,
// and reserved pad/bos/eos ids. Immutable after construction; safe to share
// across threads.
class TokenizerModel {
public:
    static constexpr const char* kPad = "<pad>";
    static constexpr const char* kBos = "<bos>";
    static constexpr const char* kEos = "<eos>";

    // Greedy BPE training: repeatedly merge the most frequent adjacent pair
    // (ties broken by the lexicographically smallest pair of byte strings)
    // until vocab_size is reached or no pair occurs at least twice.
    static TokenizerModel train(std::span<const std::string> corpus, int vocab_size) {
        if (vocab_size <= 256 + kNumSpecials)
            throw config_error("vocab_size must exceed " + std::to_string(256 + kNumSpecials) +
                               " (bytes + specials), got " + std::to_string(vocab_size));
        if (corpus.empty()) throw config_error("training corpus is empty");

        TokenizerModel m;
        m.init_base_vocab();
        m.index_bytes();

        std::vector<std::vector<int>> seqs;
        seqs.reserve(corpus.size());
        for (const std::string& s : corpus) seqs.push_back(m.bytes_to_ids(s));

        while (static_cast<int>(m.id_to_token_.size()) < vocab_size) {
            // raw adjacent pair counts, overlaps included
            std::unordered_map<uint64_t, std::size_t> counts;
            for (const auto& seq : seqs)
                for (std::size_t i = 0; i + 1 < seq.size(); ++i)
                    ++counts[pair_key(seq[i], seq[i + 1])];

            uint64_t best_key = 0;
            std::size_t best_count = 0;
            for (const auto& [key, count] : counts) {
                if (count < 2) continue;
                if (count > best_count ||
                    (count == best_count && m.pair_less(key, best_key))) {
                    best_key = key;
                    best_count = count;
                }
            }
            if (best_count < 2) break;

            const int left = static_cast<int>(best_key >> 32);
            const int right = static_cast<int>(best_key & 0xFFFFFFFFu);
            const std::string merged = m.id_to_token_[left] + m.id_to_token_[right];

            int merged_id;
            auto it = m.token_to_id_.find(merged);
            if (it != m.token_to_id_.end()) {
                merged_id = it->second;  // concatenation already in vocab
            } else {
                merged_id = static_cast<int>(m.id_to_token_.size());
                m.id_to_token_.push_back(merged);
                m.token_to_id_.emplace(merged, merged_id);
            }
            m.merges_.push_back({left, right, merged_id});

            for (auto& seq : seqs) merge_pass(seq, left, right, merged_id);
        }
        m.index_bytes();
        return m;
    }

    // Directory format: vocab.json (token -> id, one entry per line) and
    // merges.txt ("#bpe-v1" header, then one space-separated pair per line).
    static TokenizerModel load(const std::filesystem::path& dir) {
        TokenizerModel m;
        m.load_vocab(dir / "vocab.json");
        m.load_merges(dir / "merges.txt");
        m.index_bytes();
        return m;
    }

    void save(const std::filesystem::path& dir) const {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());

        std::ofstream vocab(dir / "vocab.json", std::ios::binary);
        if (!vocab) throw io_error("cannot write " + (dir / "vocab.json").string());
        vocab << "{\n";
        for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
            vocab << nlohmann::json(escape_token(id_to_token_[id])).dump() << ": " << id;
            vocab << (id + 1 < id_to_token_.size() ? ",\n" : "\n");
        }
        vocab << "}\n";
        if (!vocab.flush()) throw io_error("failed writing vocab.json");

        std::ofstream merges(dir / "merges.txt", std::ios::binary);
        if (!merges) throw io_error("cannot write " + (dir / "merges.txt").string());
        merges << kMergesHeader << "\n";
        for (const Merge& mg : merges_)
            merges << escape_token(id_to_token_[mg.left]) << ' '
                   << escape_token(id_to_token_[mg.right]) << "\n";
        if (!merges.flush()) throw io_error("failed writing merges.txt");
    }

    // Byte fallback start, then merges applied in learned order.
    std::vector<int> tokenize(std::string_view text) const {
        std::vector<int> seq = bytes_to_ids(text);
        if (seq.size() < 2 || merges_.empty()) return seq;
        std::unordered_set<int> present(seq.begin(), seq.end());
        for (const Merge& mg : merges_) {
            if (seq.size() < 2) break;
            if (!present.count(mg.left) || !present.count(mg.right)) continue;
            if (merge_pass(seq, mg.left, mg.right, mg.merged)) present.insert(mg.merged);
        }
        return seq;
    }

    // Concatenates token byte strings. Specials decode to nothing.
    std::string detokenize(std::span<const int> ids) const {
        std::string out;
        for (int id : ids) {
            if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
                throw data_error("token id " + std::to_string(id) + " out of range [0, " +
                                 std::to_string(id_to_token_.size()) + ")");
            if (id == pad_id_ || id == bos_id_ || id == eos_id_) continue;
            out += id_to_token_[id];
        }
        return out;
    }

    int vocab_size() const noexcept { return static_cast<int>(id_to_token_.size()); }
    std::size_t merge_count() const noexcept { return merges_.size(); }
    int pad_id() const noexcept { return pad_id_; }
    int bos_id() const noexcept { return bos_id_; }
    int eos_id() const noexcept { return eos_id_; }

    const std::string& token_text(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

private:
    struct Merge {
        int left;
        int right;
        int merged;
    };

    static uint64_t pair_key(int a, int b) {
        return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
               static_cast<uint32_t>(b);
    }

    bool pair_less(uint64_t lhs, uint64_t rhs) const {
        const std::string& la = id_to_token_[lhs >> 32];
        const std::string& lb = id_to_token_[lhs & 0xFFFFFFFFu];
        const std::string& ra = id_to_token_[rhs >> 32];
        const std::string& rb = id_to_token_[rhs & 0xFFFFFFFFu];
        if (la != ra) return la < ra;
        return lb < rb;
    }

    // One left-to-right pass merging non-overlapping (left, right) pairs.
    static bool merge_pass(std::vector<int>& seq, int left, int right, int merged) {
        bool any = false;
        std::size_t w = 0;
        for (std::size_t r = 0; r < seq.size();) {
            if (r + 1 < seq.size() && seq[r] == left && seq[r + 1] == right) {
                seq[w++] = merged;
                r += 2;
                any = true;
            } else {
                seq[w++] = seq[r++];
            }
        }
        seq.resize(w);
        return any;
    }

    void init_base_vocab() {
        id_to_token_.clear();
        token_to_id_.clear();
        merges_.clear();
        id_to_token_.reserve(256 + kNumSpecials);
        id_to_token_.push_back(kPad);
        id_to_token_.push_back(kBos);
        id_to_token_.push_back(kEos);
        for (int b = 0; b < 256; ++b)
            id_to_token_.push_back(std::string(1, static_cast<char>(b)));
        for (std::size_t id = 0; id < id_to_token_.size(); ++id)
            token_to_id_.emplace(id_to_token_[id], static_cast<int>(id));
        pad_id_ = 0;
        bos_id_ = 1;
        eos_id_ = 2;
    }

    // Resolves byte token ids and special ids after vocab is in place.
    void index_bytes() {
        byte_ids_.resize(256);
        for (int b = 0; b < 256; ++b) {
            auto it = token_to_id_.find(std::string(1, static_cast<char>(b)));
            if (it == token_to_id_.end()) {
                std::string hex{bpe_detail::hex_digit(static_cast<unsigned>(b) >> 4),
                                bpe_detail::hex_digit(static_cast<unsigned>(b))};
                throw format_error("vocab is missing single-byte token 0x" + hex);
            }
            byte_ids_[static_cast<std::size_t>(b)] = it->second;
        }
        auto special = [&](const char* name) {
            auto it = token_to_id_.find(name);
            if (it == token_to_id_.end())
                throw format_error(std::string("vocab is missing special token ") + name);
            return it->second;
        };
        pad_id_ = special(kPad);
        bos_id_ = special(kBos);
        eos_id_ = special(kEos);
    }

    std::vector<int> bytes_to_ids(std::string_view text) const {
        std::vector<int> seq;
        seq.reserve(text.size());
        for (char c : text) seq.push_back(byte_ids_[static_cast<unsigned char>(c)]);
        return seq;
    }

    void load_vocab(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot open " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error("vocab.json: " + std::string(e.what()),
                               line_of_offset(text, e.byte));
        }
        if (!j.is_object()) throw format_error("vocab.json: expected a single object", 1);

        std::vector<std::pair<std::string, long long>> entries;
        entries.reserve(j.size());
        for (const auto& [key, value] : j.items()) {
            if (!value.is_number_integer())
                throw format_error("vocab.json: id for \"" + key + "\" is not an integer",
                                   line_of_key(text, key));
            entries.emplace_back(unescape_token(key), value.get<long long>());
        }

        id_to_token_.assign(entries.size(), {});
        token_to_id_.clear();
        std::vector<bool> seen(entries.size(), false);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& [token, id] = entries[k];
            if (id < 0 || id >= static_cast<long long>(entries.size()))
                throw format_error("vocab.json: id " + std::to_string(id) +
                                       " outside dense range [0, " +
                                       std::to_string(entries.size()) + ")",
                                   line_of_key(text, escape_token(token)));
            if (seen[static_cast<std::size_t>(id)])
                throw format_error("vocab.json: duplicate id " + std::to_string(id),
                                   line_of_key(text, escape_token(token)));
            seen[static_cast<std::size_t>(id)] = true;
            id_to_token_[static_cast<std::size_t>(id)] = token;
            if (!token_to_id_.emplace(token, static_cast<int>(id)).second)
                throw format_error("vocab.json: duplicate token \"" + escape_token(token) + "\"",
                                   line_of_key(text, escape_token(token)));
        }
    }

    void load_merges(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot open " + path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (lineno == 1) {
                if (line != kMergesHeader)
                    throw format_error("merges.txt: missing '#bpe-v1' header", 1);
                continue;
            }
            if (line.empty()) continue;
            const std::size_t sp = line.find(' ');
            if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
                line.find(' ', sp + 1) != std::string::npos)
                throw format_error("merges.txt: expected two space-separated tokens", lineno);
            const std::string left = unescape_token(line.substr(0, sp), lineno);
            const std::string right = unescape_token(line.substr(sp + 1), lineno);

            auto lookup = [&](const std::string& tok) {
                auto it = token_to_id_.find(tok);
                if (it == token_to_id_.end())
                    throw format_error("merges.txt: token \"" + escape_token(tok) +
                                           "\" not in vocab",
                                       lineno);
                return it->second;
            };
            const int left_id = lookup(left);
            const int right_id = lookup(right);
            auto out = token_to_id_.find(left + right);
            if (out == token_to_id_.end())
                throw format_error("merges.txt: merge output \"" + escape_token(left + right) +
                                       "\" not in vocab",
                                   lineno);
            merges_.push_back({left_id, right_id, out->second});
        }
    }

    static std::size_t line_of_offset(const std::string& text, std::size_t byte) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        return line;
    }

    // Best-effort line lookup for semantic vocab errors; the file is written
    // one entry per line.
    static std::size_t line_of_key(const std::string& text, const std::string& escaped) {
        const std::string needle = nlohmann::json(escaped).dump();
        const std::size_t pos = text.find(needle);
        if (pos == std::string::npos) return 0;
        return line_of_offset(text, pos);
    }

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<Merge> merges_;
    std::vector<int> byte_ids_;
    int pad_id_ = 0;
    int bos_id_ = 1;
    int eos_id_ = 2;
};

// ---------------------------------------------------------------------------
// Efficiency metrics and context arithmetic
// ---------------------------------------------------------------------------

// Token Efficiency Ratio: hypothesis token count over reference token count
// under the same model.
inline double token_efficiency_ratio(const TokenizerModel& model, std::string_view hyp_text,
                                     std::string_view ref_text) {
    const std::size_t ref_tokens = model.tokenize(ref_text).size();
    if (ref_tokens == 0) throw metric_error("TER undefined: reference tokenizes to 0 tokens");
    const std::size_t hyp_tokens = model.tokenize(hyp_text).size();
    return static_cast<double>(hyp_tokens) / static_cast<double>(ref_tokens);
}

// Corpus-summed ratio: how many model_b tokens per model_a token.
inline double compression_ratio(const TokenizerModel& model_a, const TokenizerModel& model_b,
                                std::span<const std::string> corpus) {
    if (corpus.empty()) throw data_error("compression_ratio: empty corpus");
    std::size_t a_total = 0;
    std::size_t b_total = 0;
    for (const std::string& s : corpus) {
        a_total += model_a.tokenize(s).size();
        b_total += model_b.tokenize(s).size();
    }
    if (a_total == 0 || b_total == 0)
        throw data_error("compression_ratio: corpus tokenizes to 0 tokens");
    return static_cast<double>(b_total) / static_cast<double>(a_total);
}

struct ContextSpec {
    std::string model_name;
    long long max_decoder_tokens = 0;
    double compression_ratio_vs_base = 1.0;
};

// Decoder capacity in base-tokenizer-equivalent tokens.
inline long long effective_context(const ContextSpec& spec) {
    if (spec.max_decoder_tokens <= 0)
        throw config_error("effective_context: max_decoder_tokens must be positive");
    if (!(spec.compression_ratio_vs_base > 0.0))
        throw config_error("effective_context: compression ratio must be positive");
    return static_cast<long long>(std::floor(static_cast<double>(spec.max_decoder_tokens) *
                                             spec.compression_ratio_vs_base));
}

}  // namespace mdocr
