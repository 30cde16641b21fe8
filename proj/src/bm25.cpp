#include "semqa/bm25.hpp"

#include <algorithm>
#include <cmath>

#include "semqa/error.hpp"
#include "semqa/text.hpp"

namespace semqa::bm25 {

ProductStats build_stats(const corpus::Product& product, Side side, double k, double b) {
    if (product.pairs.empty()) {
        throw Error("bm25: product '" + product.product_id + "' has no pairs");
    }
    ProductStats stats;
    stats.k = k;
    stats.b = b;
    stats.num_docs = product.pairs.size();

    std::size_t total_len = 0;
    for (const auto& pair : product.pairs) {
        const std::string& source = side == Side::kQuestions ? pair.question : pair.answer;
        ProductStats::Doc doc;
        for (const auto& tok : text::tokenize(source)) {
            ++doc.term_freq[tok];
            ++doc.length;
        }
        total_len += doc.length;
        for (const auto& [term, tf] : doc.term_freq) ++stats.doc_freq[term];
        stats.docs.emplace(pair.qa_id, std::move(doc));
    }
    stats.avgdl = static_cast<double>(total_len) / static_cast<double>(stats.num_docs);
    return stats;
}

double bm25_score(const ProductStats& stats, std::span<const std::string> query_tokens,
                  const std::string& doc_id) {
    auto doc_it = stats.docs.find(doc_id);
    if (doc_it == stats.docs.end()) throw Error("bm25: unknown doc_id '" + doc_id + "'");
    const ProductStats::Doc& doc = doc_it->second;

    const double n = static_cast<double>(stats.num_docs);
    double score = 0.0;
    for (const auto& term : query_tokens) {
        auto tf_it = doc.term_freq.find(term);
        if (tf_it == doc.term_freq.end()) continue;  // TF = 0 contributes nothing
        double tf = static_cast<double>(tf_it->second);

        auto df_it = stats.doc_freq.find(term);
        double m = df_it == stats.doc_freq.end() ? 0.0 : static_cast<double>(df_it->second);
        double idf = std::log((n - m + 0.5) / (m + 0.5) + 1.0);

        double len_norm = 1.0 - stats.b +
                          stats.b * static_cast<double>(doc.length) / stats.avgdl;
        score += idf * tf * (stats.k + 1.0) / (tf + stats.k * len_norm);
    }
    return score;
}

double qa_relevance_bm25(const ProductStats& question_stats, const ProductStats& answer_stats,
                         std::span<const std::string> query_tokens, const std::string& qa_id,
                         double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw Error("bm25: alpha must be in [0, 1]");
    return alpha * bm25_score(question_stats, query_tokens, qa_id) +
           (1.0 - alpha) * bm25_score(answer_stats, query_tokens, qa_id);
}

std::vector<std::pair<std::string, double>> bm25_topk_cached(
    const corpus::Product& product, const ProductStats& question_stats,
    const ProductStats& answer_stats, std::string_view query_text, std::size_t k, double alpha) {
    if (k < 1) throw Error("bm25: k must be >= 1");
    auto tokens = text::tokenize(query_text);

    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(product.pairs.size());
    for (const auto& pair : product.pairs) {
        double s = qa_relevance_bm25(question_stats, answer_stats, tokens, pair.qa_id, alpha);
        if (s == 0.0) continue;  // teacher abstains without syntactic evidence
        scored.emplace_back(pair.qa_id, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<std::pair<std::string, double>> bm25_topk(const corpus::Product& product,
                                                      std::string_view query_text, std::size_t k,
                                                      double alpha) {
    ProductStats q_stats = build_stats(product, Side::kQuestions);
    ProductStats a_stats = build_stats(product, Side::kAnswers);
    return bm25_topk_cached(product, q_stats, a_stats, query_text, k, alpha);
}

}  // namespace semqa::bm25
