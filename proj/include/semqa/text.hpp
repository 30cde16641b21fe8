#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semqa::text {

/// Lowercases and splits into maximal runs of alphanumeric codepoints;
/// everything else separates. Input is UTF-8; case folding covers ASCII,
/// Latin-1/Extended-A, Greek and Cyrillic. Pure function.
std::vector<std::string> tokenize(std::string_view input);

/// Token vocabulary shared by BM25 and the encoder. Word ids are dense in
/// [0, num_word_ids); out-of-vocabulary tokens fall back to hashed character
/// trigram ids in [num_word_ids, num_word_ids + num_hash_buckets).
struct Vocabulary {
    std::unordered_map<std::string, std::uint32_t> token_to_id;
    std::vector<std::string> tokens;  // id -> token, frequency order
    std::uint32_t num_word_ids = 0;
    std::uint32_t num_hash_buckets = 4096;
    std::uint32_t min_freq = 2;

    std::uint32_t total_ids() const { return num_word_ids + num_hash_buckets; }
};

/// Tokens occurring >= min_freq times across texts, ids assigned by
/// descending frequency then lexicographic order. Deterministic.
Vocabulary build_vocab(std::span<const std::string> texts, std::uint32_t min_freq = 2,
                       std::uint32_t num_hash_buckets = 4096);

/// In-vocabulary tokens map to their word id; OOV tokens expand to the
/// bucket ids of their character trigrams over "^token$". The trigram hash
/// is FNV-1a (64-bit) so indexes are portable across runs and platforms.
std::vector<std::uint32_t> token_ids(const Vocabulary& vocab, std::string_view input);

/// Trigram bucket ids for a single OOV token (exposed for tests).
std::vector<std::uint32_t> trigram_bucket_ids(const Vocabulary& vocab, std::string_view token);

std::uint64_t fnv1a64(std::string_view bytes);

std::string vocab_to_json(const Vocabulary& vocab);
Vocabulary vocab_from_json(const std::string& json_text);
void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

/// Stable hash of the canonical JSON serialization; stored in index headers.
std::uint64_t fingerprint(const Vocabulary& vocab);

}  // namespace semqa::text
