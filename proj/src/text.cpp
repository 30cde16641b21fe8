#include "semqa/text.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "semqa/bin_io.hpp"
#include "semqa/error.hpp"

namespace semqa::text {
namespace {

// Decodes one UTF-8 codepoint at `i`, advancing `i`. Malformed bytes yield
// 0xFFFD and advance by one, so they act as separators.
std::uint32_t decode_utf8(std::string_view s, std::size_t& i) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    if (c0 < 0x80) {
        ++i;
        return c0;
    }
    int len = 0;
    std::uint32_t cp = 0;
    if ((c0 & 0xe0) == 0xc0) {
        len = 2;
        cp = c0 & 0x1f;
    } else if ((c0 & 0xf0) == 0xe0) {
        len = 3;
        cp = c0 & 0x0f;
    } else if ((c0 & 0xf8) == 0xf0) {
        len = 4;
        cp = c0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char c = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((c & 0xc0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (c & 0x3f);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

void encode_utf8(std::uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

std::uint32_t to_lower(std::uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    // Latin-1 capitals except the multiplication sign.
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    // Latin Extended-A: upper/lower pairs alternate.
    if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                 // Cyrillic
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

bool is_token_char(std::uint32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (cp == 0xFFFD) return false;
    if (cp == 0xD7 || cp == 0xF7) return false;          // × ÷
    if (cp >= 0x2000 && cp <= 0x206F) return false;      // general punctuation
    if (cp >= 0x3000 && cp <= 0x303F) return false;      // CJK punctuation
    if (cp >= 0xFF01 && cp <= 0xFF0F) return false;      // fullwidth punctuation
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    return true;  // letters of any other script count as token characters
}

std::vector<std::string> codepoints(std::string_view token) {
    std::vector<std::string> cps;
    std::size_t i = 0;
    while (i < token.size()) {
        std::size_t start = i;
        decode_utf8(token, i);
        cps.emplace_back(token.substr(start, i - start));
    }
    return cps;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> out;
    std::string current;
    std::size_t i = 0;
    while (i < input.size()) {
        std::uint32_t cp = decode_utf8(input, i);
        if (is_token_char(cp)) {
            encode_utf8(to_lower(cp), current);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

Vocabulary build_vocab(std::span<const std::string> texts, std::uint32_t min_freq,
                       std::uint32_t num_hash_buckets) {
    if (min_freq < 1) throw Error("build_vocab: min_freq must be >= 1");
    std::unordered_map<std::string, std::uint64_t> freq;
    for (const auto& t : texts) {
        for (auto& tok : tokenize(t)) ++freq[tok];
    }
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    kept.reserve(freq.size());
    for (auto& [tok, n] : freq) {
        if (n >= min_freq) kept.emplace_back(tok, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    v.min_freq = min_freq;
    v.num_hash_buckets = num_hash_buckets;
    v.tokens.reserve(kept.size());
    for (std::uint32_t id = 0; id < kept.size(); ++id) {
        v.tokens.push_back(kept[id].first);
        v.token_to_id.emplace(kept[id].first, id);
    }
    v.num_word_ids = static_cast<std::uint32_t>(v.tokens.size());
    return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<std::uint32_t> trigram_bucket_ids(const Vocabulary& vocab, std::string_view token) {
    std::vector<std::string> cps = codepoints(token);
    std::vector<std::string> padded;
    padded.reserve(cps.size() + 2);
    padded.emplace_back("^");
    for (auto& c : cps) padded.push_back(std::move(c));
    padded.emplace_back("$");

    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::string tri = padded[i] + padded[i + 1] + padded[i + 2];
        std::uint64_t bucket = fnv1a64(tri) % vocab.num_hash_buckets;
        ids.push_back(vocab.num_word_ids + static_cast<std::uint32_t>(bucket));
    }
    return ids;
}

std::vector<std::uint32_t> token_ids(const Vocabulary& vocab, std::string_view input) {
    std::vector<std::uint32_t> ids;
    for (const auto& tok : tokenize(input)) {
        auto it = vocab.token_to_id.find(tok);
        if (it != vocab.token_to_id.end()) {
            ids.push_back(it->second);
        } else {
            auto buckets = trigram_bucket_ids(vocab, tok);
            ids.insert(ids.end(), buckets.begin(), buckets.end());
        }
    }
    return ids;
}

std::string vocab_to_json(const Vocabulary& vocab) {
    nlohmann::json j;
    j["min_freq"] = vocab.min_freq;
    j["num_hash_buckets"] = vocab.num_hash_buckets;
    j["tokens"] = vocab.tokens;
    return j.dump();
}

Vocabulary vocab_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("vocabulary: invalid JSON: ") + e.what());
    }
    if (!j.contains("tokens") || !j["tokens"].is_array()) {
        throw Error("vocabulary: missing tokens array");
    }
    Vocabulary v;
    v.min_freq = j.value("min_freq", 2u);
    v.num_hash_buckets = j.value("num_hash_buckets", 4096u);
    for (const auto& t : j["tokens"]) {
        std::uint32_t id = static_cast<std::uint32_t>(v.tokens.size());
        v.tokens.push_back(t.get<std::string>());
        if (!v.token_to_id.emplace(v.tokens.back(), id).second) {
            throw Error("vocabulary: duplicate token '" + v.tokens.back() + "'");
        }
    }
    v.num_word_ids = static_cast<std::uint32_t>(v.tokens.size());
    return v;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
    bin::write_file(path, vocab_to_json(vocab));
}

Vocabulary load_vocab(const std::string& path) { return vocab_from_json(bin::read_file(path)); }

std::uint64_t fingerprint(const Vocabulary& vocab) { return fnv1a64(vocab_to_json(vocab)); }

}  // namespace semqa::text

namespace semqa::bin {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error("read failed: " + path);
    return data;
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
}

}  // namespace semqa::bin
