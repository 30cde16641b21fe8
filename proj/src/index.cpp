#include "semqa/index.hpp"

#include <algorithm>
#include <cmath>

#include "semqa/bin_io.hpp"
#include "semqa/error.hpp"
#include "semqa/text.hpp"

namespace semqa::index {
namespace {

constexpr std::uint32_t kIndexVersion = 1;

void rebuild_directory(SemanticIndex& idx) {
    idx.by_product.clear();
    std::size_t i = 0;
    while (i < idx.candidates.size()) {
        std::size_t begin = i;
        const std::string& pid = idx.candidates[i].product_id;
        while (i < idx.candidates.size() && idx.candidates[i].product_id == pid) ++i;
        if (!idx.by_product.emplace(pid, std::make_pair(begin, i)).second) {
            throw Error("index: candidates not sorted by product_id");
        }
    }
}

double norm_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

std::span<const FusedCandidate> SemanticIndex::product_range(const std::string& product_id) const {
    auto it = by_product.find(product_id);
    if (it == by_product.end()) return {};
    return std::span<const FusedCandidate>(candidates.data() + it->second.first,
                                           it->second.second - it->second.first);
}

FusedCandidate make_fused_candidate(std::string product_id, std::string qa_id,
                                    std::span<const double> question_vec,
                                    std::span<const double> answer_vec, double alpha) {
    FusedCandidate c;
    c.product_id = std::move(product_id);
    c.qa_id = std::move(qa_id);
    c.fused.resize(question_vec.size());
    for (std::size_t d = 0; d < question_vec.size(); ++d) {
        c.fused[d] = static_cast<float>(alpha * question_vec[d] + (1.0 - alpha) * answer_vec[d]);
    }
    c.sq = static_cast<float>(alpha * norm_sq(question_vec));
    c.sa = static_cast<float>((1.0 - alpha) * norm_sq(answer_vec));
    return c;
}

SemanticIndex build_index(std::span<const corpus::Product> products,
                          const encoder::EncoderParams& params, const text::Vocabulary& vocab,
                          double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw Error("index: alpha must be in [0, 1]");
    if (params.rows != vocab.total_ids()) {
        throw Error("index: encoder params do not match vocabulary (" +
                    std::to_string(params.rows) + " rows vs " +
                    std::to_string(vocab.total_ids()) + " ids)");
    }

    std::vector<std::string> texts;
    for (const auto& p : products) {
        for (const auto& pair : p.pairs) {
            texts.push_back(pair.question);
            texts.push_back(pair.answer);
        }
    }
    auto vectors = encoder::encode_batch(params, vocab, texts);

    SemanticIndex idx;
    idx.header.dim = params.dim;
    idx.header.alpha = static_cast<float>(alpha);
    idx.header.encoder_fingerprint = encoder::fingerprint(params);
    idx.header.vocab_fingerprint = text::fingerprint(vocab);

    std::size_t vi = 0;
    for (const auto& p : products) {
        for (const auto& pair : p.pairs) {
            const auto& question_vec = vectors[vi];
            const auto& answer_vec = vectors[vi + 1];
            vi += 2;
            idx.candidates.push_back(
                make_fused_candidate(p.product_id, pair.qa_id, question_vec, answer_vec, alpha));
        }
    }
    std::sort(idx.candidates.begin(), idx.candidates.end(),
              [](const FusedCandidate& a, const FusedCandidate& b) {
                  if (a.product_id != b.product_id) return a.product_id < b.product_id;
                  return a.qa_id < b.qa_id;
              });
    rebuild_directory(idx);
    return idx;
}

double score_with_norm(double query_norm_sq, std::span<const double> query_vec,
                       const FusedCandidate& candidate) {
    if (query_vec.size() != candidate.fused.size()) {
        throw Error("index: query dimension mismatch");
    }
    double dot = 0.0;
    for (std::size_t d = 0; d < query_vec.size(); ++d) {
        dot += query_vec[d] * static_cast<double>(candidate.fused[d]);
    }
    double s = query_norm_sq + static_cast<double>(candidate.sq) +
               static_cast<double>(candidate.sa) - 2.0 * dot;
    return s < 0.0 ? 0.0 : s;
}

double score(std::span<const double> query_vec, const FusedCandidate& candidate) {
    return score_with_norm(norm_sq(query_vec), query_vec, candidate);
}

namespace {

std::vector<std::pair<std::string, double>> rank_candidates(
    std::span<const FusedCandidate> range, const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> order(range.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return range[a].qa_id < range[b].qa_id;
    };
    // The comparator is a total order (qa_ids are unique within a product),
    // so partial selection returns exactly the full sort's prefix.
    if (k < order.size()) {
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                          order.end(), better);
    } else {
        std::sort(order.begin(), order.end(), better);
    }
    std::vector<std::pair<std::string, double>> out;
    out.reserve(std::min(k, order.size()));
    for (std::size_t i = 0; i < order.size() && i < k; ++i) {
        out.emplace_back(range[order[i]].qa_id, scores[order[i]]);
    }
    return out;
}

template <bool Parallel>
std::vector<std::pair<std::string, double>> topk_impl(const SemanticIndex& index,
                                                      const encoder::EncoderParams& params,
                                                      const text::Vocabulary& vocab,
                                                      const std::string& product_id,
                                                      std::string_view query_text, std::size_t k) {
    if (k < 1) throw Error("index: k must be >= 1");
    if (!index.by_product.contains(product_id)) {
        throw Error("index: unknown product_id '" + product_id + "'");
    }
    // The single online encoder invocation.
    std::vector<double> query_vec = encoder::encode(params, vocab, query_text);
    double qn = norm_sq(query_vec);

    auto range = index.product_range(product_id);
    std::vector<double> scores(range.size());
    // Thread wakeup costs more than the scan itself on small candidate sets.
    constexpr std::size_t kParallelScanThreshold = 16384;
    if (Parallel && range.size() >= kParallelScanThreshold) {
        const std::int64_t n = static_cast<std::int64_t>(range.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] =
                score_with_norm(qn, query_vec, range[static_cast<std::size_t>(i)]);
        }
    } else {
        for (std::size_t i = 0; i < range.size(); ++i) {
            scores[i] = score_with_norm(qn, query_vec, range[i]);
        }
    }
    return rank_candidates(range, scores, k);
}

}  // namespace

std::vector<std::pair<std::string, double>> query_topk(const SemanticIndex& index,
                                                       const encoder::EncoderParams& params,
                                                       const text::Vocabulary& vocab,
                                                       const std::string& product_id,
                                                       std::string_view query_text,
                                                       std::size_t k) {
    return topk_impl<true>(index, params, vocab, product_id, query_text, k);
}

std::vector<std::pair<std::string, double>> query_topk_serial(
    const SemanticIndex& index, const encoder::EncoderParams& params,
    const text::Vocabulary& vocab, const std::string& product_id, std::string_view query_text,
    std::size_t k) {
    return topk_impl<false>(index, params, vocab, product_id, query_text, k);
}

std::string index_to_bytes(const SemanticIndex& index) {
    std::string out;
    out.reserve(40 + index.candidates.size() * (index.header.dim * 4 + 32));
    bin::put_bytes(out, "SQAI");
    bin::put_u32(out, kIndexVersion);
    bin::put_u32(out, index.header.dim);
    bin::put_f32(out, index.header.alpha);
    bin::put_u64(out, index.header.encoder_fingerprint);
    bin::put_u64(out, index.header.vocab_fingerprint);
    bin::put_u64(out, index.candidates.size());
    for (const auto& c : index.candidates) {
        if (c.product_id.size() > 0xffff || c.qa_id.size() > 0xffff) {
            throw Error("index: id longer than 65535 bytes");
        }
        bin::put_u16(out, static_cast<std::uint16_t>(c.product_id.size()));
        bin::put_bytes(out, c.product_id);
        bin::put_u16(out, static_cast<std::uint16_t>(c.qa_id.size()));
        bin::put_bytes(out, c.qa_id);
        for (float v : c.fused) bin::put_f32(out, v);
        bin::put_f32(out, c.sq);
        bin::put_f32(out, c.sa);
    }
    return out;
}

SemanticIndex index_from_bytes(std::string_view bytes) {
    bin::Reader r(bytes, "index");
    if (r.bytes(4) != "SQAI") throw Error("index: bad magic");
    std::uint32_t version = r.u32();
    if (version != kIndexVersion) {
        throw Error("index: unsupported version " + std::to_string(version));
    }
    SemanticIndex idx;
    idx.header.dim = r.u32();
    idx.header.alpha = r.f32();
    idx.header.encoder_fingerprint = r.u64();
    idx.header.vocab_fingerprint = r.u64();
    std::uint64_t count = r.u64();
    idx.candidates.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        FusedCandidate c;
        c.product_id = r.bytes(r.u16());
        c.qa_id = r.bytes(r.u16());
        c.fused.resize(idx.header.dim);
        for (auto& v : c.fused) v = r.f32();
        c.sq = r.f32();
        c.sa = r.f32();
        idx.candidates.push_back(std::move(c));
    }
    r.expect_end();
    rebuild_directory(idx);
    return idx;
}

void save_index(const SemanticIndex& index, const std::string& path) {
    bin::write_file(path, index_to_bytes(index));
}

SemanticIndex load_index(const std::string& path) {
    return index_from_bytes(bin::read_file(path));
}

}  // namespace semqa::index
