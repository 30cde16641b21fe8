#include "semqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <unordered_map>

#include <json.hpp>

#include "semqa/bm25.hpp"
#include "semqa/error.hpp"
#include "semqa/rng.hpp"

namespace semqa::eval {

double precision_at_1(const RankedJudgments& judgments) {
    if (judgments.empty()) throw Error("precision_at_1: empty ranking");
    return judgments.front() ? 1.0 : 0.0;
}

double average_precision(const RankedJudgments& judgments) {
    std::size_t relevant_seen = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < judgments.size(); ++i) {
        if (judgments[i]) {
            ++relevant_seen;
            sum += static_cast<double>(relevant_seen) / static_cast<double>(i + 1);
        }
    }
    if (relevant_seen == 0) throw Error("average_precision: no relevant entry");
    return sum / static_cast<double>(relevant_seen);
}

double reciprocal_rank_adjusted(const RankedJudgments& judgments) {
    std::size_t irrelevant_above = 0;
    for (bool relevant : judgments) {
        if (relevant) {
            return 1.0 / static_cast<double>(irrelevant_above + 1);
        }
        ++irrelevant_above;
    }
    throw Error("reciprocal_rank_adjusted: no relevant entry");
}

double pr_auc(std::span<const std::pair<double, bool>> scored_pairs) {
    std::size_t positives = 0;
    for (const auto& [score, label] : scored_pairs) {
        if (label) ++positives;
    }
    if (positives == 0 || positives == scored_pairs.size()) {
        throw Error("pr_auc: degenerate label set");
    }
    std::vector<std::pair<double, bool>> sorted(scored_pairs.begin(), scored_pairs.end());
    // Descending score; equal scores put irrelevant entries first (pessimal).
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return !a.second && b.second;
    });
    std::size_t relevant_seen = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].second) {
            ++relevant_seen;
            sum += static_cast<double>(relevant_seen) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(positives);
}

CqaEvalReport run_cqa_eval(std::span<const corpus::Product> products, const PairScorer& scorer,
                           std::size_t min_pairs, std::size_t sample_size, std::uint64_t seed) {
    struct Anchor {
        std::size_t product;
        std::size_t pair;
    };
    std::vector<Anchor> anchors;
    for (std::size_t pi = 0; pi < products.size(); ++pi) {
        if (products[pi].pairs.size() < min_pairs) continue;
        for (std::size_t ki = 0; ki < products[pi].pairs.size(); ++ki) {
            anchors.push_back({pi, ki});
        }
    }
    if (anchors.empty()) {
        throw Error("cqa eval: no product has at least " + std::to_string(min_pairs) + " pairs");
    }

    Rng rng(seed);
    CqaEvalReport report;
    for (std::size_t s = 0; s < sample_size; ++s) {
        const Anchor& a = anchors[rng.below(anchors.size())];
        const corpus::Product& product = products[a.product];
        const corpus::CqaPair& anchor_pair = product.pairs[a.pair];

        struct ScoredCandidate {
            double score;
            bool relevant;
        };
        std::vector<ScoredCandidate> cands;
        cands.reserve(product.pairs.size());
        for (const auto& pair : product.pairs) {
            cands.push_back({scorer(product, anchor_pair.question, pair),
                             pair.question == anchor_pair.question});
        }
        std::stable_sort(cands.begin(), cands.end(),
                         [](const ScoredCandidate& x, const ScoredCandidate& y) {
                             return x.score > y.score;
                         });
        RankedJudgments judgments;
        judgments.reserve(cands.size());
        bool any_relevant = false;
        for (const auto& c : cands) {
            judgments.push_back(c.relevant);
            any_relevant |= c.relevant;
        }
        if (!any_relevant) {
            ++report.excluded_queries;
            continue;
        }
        PerQueryResult pq;
        pq.product_id = product.product_id;
        pq.anchor_id = anchor_pair.qa_id;
        pq.p_at_1 = precision_at_1(judgments);
        pq.ap = average_precision(judgments);
        pq.rr = reciprocal_rank_adjusted(judgments);
        report.p_at_1 += pq.p_at_1;
        report.map += pq.ap;
        report.mrr += pq.rr;
        report.per_query.push_back(std::move(pq));
        ++report.num_queries;
    }
    if (report.num_queries > 0) {
        double n = static_cast<double>(report.num_queries);
        report.p_at_1 /= n;
        report.map /= n;
        report.mrr /= n;
    }
    return report;
}

UserEvalReport run_user_query_eval(const Retriever& retriever,
                                   std::span<const corpus::Product> products,
                                   std::span<const corpus::UserQueryRecord> queries,
                                   std::size_t k) {
    (void)products;  // labels travel on the records; products stay with the retriever
    UserEvalReport report;
    std::vector<std::pair<double, bool>> pooled;
    for (const auto& record : queries) {
        if (!record.relevance_labels) continue;
        ++report.num_queries;
        auto results = retriever(record.product_id, record.query_text, k);
        if (results.empty()) {
            ++report.uncovered_queries;
            continue;
        }
        for (const auto& [qa_id, relevance] : results) {
            auto it = record.relevance_labels->find(qa_id);
            if (it == record.relevance_labels->end()) continue;  // unlabeled response
            pooled.emplace_back(relevance, it->second);
        }
    }
    if (report.num_queries == 0) throw Error("user eval: no labeled queries");
    report.num_pairs = pooled.size();
    try {
        report.pr_auc = pr_auc(pooled);
    } catch (const Error&) {
        throw Error("user eval: degenerate label set over " + std::to_string(pooled.size()) +
                    " pooled pairs (uncovered queries: " +
                    std::to_string(report.uncovered_queries) + " of " +
                    std::to_string(report.num_queries) + ")");
    }
    return report;
}

PairScorer make_encoder_pair_scorer(const encoder::EncoderParams& params,
                                    const text::Vocabulary& vocab) {
    const encoder::EncoderParams* p = &params;
    const text::Vocabulary* v = &vocab;
    return [p, v](const corpus::Product&, std::string_view query, const corpus::CqaPair& pair) {
        auto eq = encoder::encode(*p, *v, query);
        auto ea = encoder::encode(*p, *v, pair.answer);
        double d = 0.0;
        for (std::size_t i = 0; i < eq.size(); ++i) {
            double diff = eq[i] - ea[i];
            d += diff * diff;
        }
        return -d;  // higher is better
    };
}

PairScorer make_bm25_answer_scorer(double k, double b) {
    struct Cache {
        std::mutex mu;
        std::unordered_map<std::string, bm25::ProductStats> stats;
    };
    auto cache = std::make_shared<Cache>();
    return [cache, k, b](const corpus::Product& product, std::string_view query,
                         const corpus::CqaPair& pair) {
        std::lock_guard<std::mutex> lock(cache->mu);
        auto it = cache->stats.find(product.product_id);
        if (it == cache->stats.end()) {
            it = cache->stats
                     .emplace(product.product_id,
                              bm25::build_stats(product, bm25::Side::kAnswers, k, b))
                     .first;
        }
        auto tokens = text::tokenize(query);
        return bm25::bm25_score(it->second, tokens, pair.qa_id);
    };
}

Retriever make_semantic_retriever(const index::SemanticIndex& idx,
                                  const encoder::EncoderParams& params,
                                  const text::Vocabulary& vocab) {
    const index::SemanticIndex* ip = &idx;
    const encoder::EncoderParams* pp = &params;
    const text::Vocabulary* vp = &vocab;
    return [ip, pp, vp](const std::string& product_id, std::string_view query, std::size_t k)
               -> std::vector<std::pair<std::string, double>> {
        if (!ip->by_product.contains(product_id)) return {};
        auto ranked = index::query_topk(*ip, *pp, *vp, product_id, query, k);
        for (auto& [qa_id, s] : ranked) s = -s;  // distances -> higher-is-better
        return ranked;
    };
}

Retriever make_bm25_retriever(std::span<const corpus::Product> products, double alpha) {
    struct Entry {
        const corpus::Product* product;
        bm25::ProductStats questions, answers;
    };
    auto table = std::make_shared<std::unordered_map<std::string, Entry>>();
    for (const auto& p : products) {
        if (p.pairs.empty()) continue;
        (*table)[p.product_id] = Entry{&p, bm25::build_stats(p, bm25::Side::kQuestions),
                                       bm25::build_stats(p, bm25::Side::kAnswers)};
    }
    return [table, alpha](const std::string& product_id, std::string_view query, std::size_t k)
               -> std::vector<std::pair<std::string, double>> {
        auto it = table->find(product_id);
        if (it == table->end()) return {};
        return bm25::bm25_topk_cached(*it->second.product, it->second.questions,
                                      it->second.answers, query, k, alpha);
    };
}

std::string report_to_json(const CqaEvalReport& report) {
    nlohmann::json j;
    j["model"] = report.model;
    j["metrics"] = {{"p_at_1", report.p_at_1}, {"map", report.map}, {"mrr", report.mrr}};
    j["num_queries"] = report.num_queries;
    j["excluded_queries"] = report.excluded_queries;
    auto& pq = j["per_query"] = nlohmann::json::array();
    for (const auto& q : report.per_query) {
        pq.push_back({{"product_id", q.product_id},
                      {"anchor_id", q.anchor_id},
                      {"p_at_1", q.p_at_1},
                      {"ap", q.ap},
                      {"rr", q.rr}});
    }
    return j.dump(2) + "\n";
}

std::string report_to_json(const UserEvalReport& report) {
    nlohmann::json j;
    j["model"] = report.model;
    j["metrics"] = {{"pr_auc", report.pr_auc}};
    j["num_queries"] = report.num_queries;
    j["uncovered_queries"] = report.uncovered_queries;
    j["num_pairs"] = report.num_pairs;
    return j.dump(2) + "\n";
}

}  // namespace semqa::eval
