#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semqa/corpus.hpp"
#include "semqa/encoder.hpp"
#include "semqa/index.hpp"

namespace semqa::eval {

/// Relevance judgments of a ranked candidate list, best score first.
using RankedJudgments = std::vector<bool>;

/// 1.0 when the top entry is relevant, else 0.0.
double precision_at_1(const RankedJudgments& judgments);

/// Mean over relevant positions i (1-based) of (#relevant in top i) / i.
double average_precision(const RankedJudgments& judgments);

/// Rank convention for MRR: the rank of the first relevant entry counts the
/// irrelevant entries above it plus one, so relevant entries never discount
/// each other.
double reciprocal_rank_adjusted(const RankedJudgments& judgments);

/// Area under the precision-recall curve, computed as average precision over
/// pairs sorted by descending score. Higher score = more relevant (pass
/// negated distances). Equal scores order irrelevant-first (pessimal, hence
/// deterministic).
double pr_auc(std::span<const std::pair<double, bool>> scored_pairs);

struct PerQueryResult {
    std::string product_id;
    std::string anchor_id;
    double p_at_1 = 0.0;
    double ap = 0.0;
    double rr = 0.0;
};

struct CqaEvalReport {
    std::string model;
    double p_at_1 = 0.0;
    double map = 0.0;
    double mrr = 0.0;
    std::size_t num_queries = 0;
    std::size_t excluded_queries = 0;
    std::vector<PerQueryResult> per_query;
};

struct UserEvalReport {
    std::string model;
    double pr_auc = 0.0;
    std::size_t num_queries = 0;
    std::size_t uncovered_queries = 0;  // queries the scorer returned nothing for
    std::size_t num_pairs = 0;          // pooled (query, response) pairs
};

/// Ranks pair answers against a query; must score by the relevance of
/// pair.answer to the query text. Pure and thread-safe.
using PairScorer =
    std::function<double(const corpus::Product&, std::string_view query, const corpus::CqaPair&)>;

/// Top-k (qa_id, score) for a query on a product; higher score = more
/// relevant. Empty result means the scorer abstains.
using Retriever = std::function<std::vector<std::pair<std::string, double>>(
    const std::string& product_id, std::string_view query, std::size_t k)>;

/// CQA ranking protocol: sample questions from products with >= min_pairs
/// pairs; candidates are all answers of the product; relevant = answers
/// paired to the sampled question text. Reports P@1 / mAP / MRR.
CqaEvalReport run_cqa_eval(std::span<const corpus::Product> products, const PairScorer& scorer,
                           std::size_t min_pairs, std::size_t sample_size, std::uint64_t seed);

/// User-query protocol: pool the scorer's top-k responses over all labeled
/// queries and compute PR-AUC over (score, label) pairs. Queries with no
/// response count as uncovered; an entirely degenerate pool is an error that
/// carries the uncovered count.
UserEvalReport run_user_query_eval(const Retriever& retriever,
                                   std::span<const corpus::Product> products,
                                   std::span<const corpus::UserQueryRecord> queries,
                                   std::size_t k);

// Scorer / retriever adapters over the artifact's models.
PairScorer make_encoder_pair_scorer(const encoder::EncoderParams& params,
                                    const text::Vocabulary& vocab);
PairScorer make_bm25_answer_scorer(double k = 1.5, double b = 0.75);
Retriever make_semantic_retriever(const index::SemanticIndex& idx,
                                  const encoder::EncoderParams& params,
                                  const text::Vocabulary& vocab);
Retriever make_bm25_retriever(std::span<const corpus::Product> products, double alpha);

std::string report_to_json(const CqaEvalReport& report);
std::string report_to_json(const UserEvalReport& report);

}  // namespace semqa::eval
