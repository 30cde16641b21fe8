#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semqa/text.hpp"

namespace semqa::encoder {

/// Trainable parameters of the embedding function: a token embedding table
/// over word ids + trigram buckets, and optionally one self-attention mixing
/// layer. One parameter set encodes queries and candidates alike.
struct EncoderParams {
    std::uint32_t dim = 64;
    bool use_attention = false;
    std::uint64_t seed = 0;
    std::size_t rows = 0;        // vocab.total_ids()
    std::vector<double> table;   // rows x dim, row-major
    std::vector<double> wq, wk, wv;  // dim x dim each when attention is on

    double* row(std::size_t r) { return table.data() + r * dim; }
    const double* row(std::size_t r) const { return table.data() + r * dim; }
};

/// Embedding rows ~ uniform(-0.1, 0.1); attention matrices start at identity
/// plus uniform(-0.01, 0.01) noise so the untrained layer is near pass-through.
EncoderParams init_params(const text::Vocabulary& vocab, std::uint32_t dim, bool use_attention,
                          std::uint64_t seed);

/// Mean pool of the (optionally attention-mixed) token embeddings. Raw
/// Euclidean geometry: output is not length-normalized. Empty text encodes
/// to the zero vector.
std::vector<double> encode(const EncoderParams& params, const text::Vocabulary& vocab,
                           std::string_view input);

/// Element-wise encode over a batch; OpenMP-parallel, output order preserved
/// and bit-identical to the serial reference.
std::vector<std::vector<double>> encode_batch(const EncoderParams& params,
                                              const text::Vocabulary& vocab,
                                              std::span<const std::string> texts);
std::vector<std::vector<double>> encode_batch_serial(const EncoderParams& params,
                                                     const text::Vocabulary& vocab,
                                                     std::span<const std::string> texts);

/// Forward pass with intermediates retained; the training module backpropagates
/// through it. x/q/k/v/attn are n x dim (attn n x n), row-major.
struct ForwardTrace {
    std::vector<std::uint32_t> ids;
    std::vector<double> x;
    std::vector<double> q, k, v, attn;
    std::vector<double> pooled;
};
ForwardTrace encode_trace(const EncoderParams& params, const text::Vocabulary& vocab,
                          std::string_view input);

/// Encoder invocations made by the calling thread; the serving layer and the
/// query-cost tests read deltas of this counter.
std::uint64_t encode_calls_this_thread();

std::string params_to_bytes(const EncoderParams& params);
EncoderParams params_from_bytes(std::string_view bytes);
void save_params(const EncoderParams& params, const std::string& path);
EncoderParams load_params(const std::string& path);

/// FNV-1a of the serialized byte image; equals the hash of the saved file.
std::uint64_t fingerprint(const EncoderParams& params);

}  // namespace semqa::encoder
