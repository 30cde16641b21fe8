#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semqa/corpus.hpp"
#include "semqa/encoder.hpp"

namespace semqa::index {

/// One CQA pair in the index: the alpha-fused candidate vector plus the two
/// scalar terms needed to reconstruct the weighted squared-Euclidean score
/// from a single stored vector. Stored as f32, matching the file layout.
struct FusedCandidate {
    std::string product_id;
    std::string qa_id;
    std::vector<float> fused;  // alpha * e(Q) + (1 - alpha) * e(A)
    float sq = 0.0f;           // alpha * ||e(Q)||^2
    float sa = 0.0f;           // (1 - alpha) * ||e(A)||^2

    bool operator==(const FusedCandidate&) const = default;
};

struct IndexHeader {
    std::uint32_t dim = 0;
    float alpha = 0.0f;
    std::uint64_t encoder_fingerprint = 0;
    std::uint64_t vocab_fingerprint = 0;
};

/// Read-only candidate store, grouped by product. alpha is baked into the
/// stored vectors; re-weighting requires a rebuild.
struct SemanticIndex {
    IndexHeader header;
    std::vector<FusedCandidate> candidates;  // sorted by (product_id, qa_id)
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> by_product;

    std::span<const FusedCandidate> product_range(const std::string& product_id) const;
};

FusedCandidate make_fused_candidate(std::string product_id, std::string qa_id,
                                    std::span<const double> question_vec,
                                    std::span<const double> answer_vec, double alpha);

/// Encodes every pair's question and answer offline and fuses them.
/// Candidate encoding is batch-parallel; output order is deterministic.
SemanticIndex build_index(std::span<const corpus::Product> products,
                          const encoder::EncoderParams& params, const text::Vocabulary& vocab,
                          double alpha);

/// ||q||^2 + sq + sa - 2<q, fused>. Lower is more relevant (it is a weighted
/// squared distance). Tiny negative floating-point residue clamps to 0.
double score(std::span<const double> query_vec, const FusedCandidate& candidate);

/// Fused score given a precomputed ||q||^2 (one query norm per scan).
double score_with_norm(double query_norm_sq, std::span<const double> query_vec,
                       const FusedCandidate& candidate);

/// Encodes the query once, then exhaustively scans that product's candidates.
/// Ascending score, ties by ascending qa_id, min(k, candidates) entries.
std::vector<std::pair<std::string, double>> query_topk(const SemanticIndex& index,
                                                       const encoder::EncoderParams& params,
                                                       const text::Vocabulary& vocab,
                                                       const std::string& product_id,
                                                       std::string_view query_text, std::size_t k);
std::vector<std::pair<std::string, double>> query_topk_serial(
    const SemanticIndex& index, const encoder::EncoderParams& params,
    const text::Vocabulary& vocab, const std::string& product_id, std::string_view query_text,
    std::size_t k);

std::string index_to_bytes(const SemanticIndex& index);
SemanticIndex index_from_bytes(std::string_view bytes);
void save_index(const SemanticIndex& index, const std::string& path);
SemanticIndex load_index(const std::string& path);

}  // namespace semqa::index
