#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semqa/corpus.hpp"

namespace semqa::bm25 {

enum class Side { kQuestions, kAnswers };

/// Per-product, per-side document statistics. Each CQA side (question or
/// answer) of each pair is one document; N, avgdl and document frequencies
/// are scoped to that collection so IDF never leaks across products.
struct ProductStats {
    struct Doc {
        std::unordered_map<std::string, std::uint32_t> term_freq;
        std::size_t length = 0;
    };

    double k = 1.5;
    double b = 0.75;
    std::size_t num_docs = 0;  // N
    double avgdl = 0.0;
    std::unordered_map<std::string, std::uint32_t> doc_freq;  // m(term)
    std::unordered_map<std::string, Doc> docs;                // qa_id -> document
};

ProductStats build_stats(const corpus::Product& product, Side side, double k = 1.5,
                         double b = 0.75);

/// Exact Okapi BM25 with IDF(q_i) = ln((N - m + 0.5)/(m + 0.5) + 1); the +1
/// keeps every IDF positive, so scores are never negative. Repeated query
/// terms contribute once per occurrence.
double bm25_score(const ProductStats& stats, std::span<const std::string> query_tokens,
                  const std::string& doc_id);

/// alpha * bm25(query, question doc) + (1 - alpha) * bm25(query, answer doc).
double qa_relevance_bm25(const ProductStats& question_stats, const ProductStats& answer_stats,
                         std::span<const std::string> query_tokens, const std::string& qa_id,
                         double alpha);

/// Ranked (qa_id, combined score), descending score, ties by ascending
/// qa_id. Pairs with combined score 0 are omitted: no syntactic evidence
/// means the teacher abstains.
std::vector<std::pair<std::string, double>> bm25_topk(const corpus::Product& product,
                                                      std::string_view query_text, std::size_t k,
                                                      double alpha);

/// Same ranking from prebuilt stats; used where per-product stats are cached.
std::vector<std::pair<std::string, double>> bm25_topk_cached(
    const corpus::Product& product, const ProductStats& question_stats,
    const ProductStats& answer_stats, std::string_view query_text, std::size_t k, double alpha);

}  // namespace semqa::bm25
