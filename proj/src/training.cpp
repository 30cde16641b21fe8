#include "semqa/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semqa/bin_io.hpp"
#include "semqa/bm25.hpp"
#include "semqa/error.hpp"
#include "semqa/rng.hpp"

namespace semqa::training {
namespace {

using corpus::Product;
using encoder::EncoderParams;
using encoder::ForwardTrace;

struct PairRef {
    std::size_t product = 0;
    std::size_t pair = 0;
};

std::vector<PairRef> all_pairs(std::span<const Product> products) {
    std::vector<PairRef> refs;
    for (std::size_t pi = 0; pi < products.size(); ++pi) {
        for (std::size_t ki = 0; ki < products[pi].pairs.size(); ++ki) {
            refs.push_back({pi, ki});
        }
    }
    return refs;
}

struct NegativeDraw {
    PairRef ref;
    bool hard = false;
};

// Hard negatives are sampled without replacement from the same product's
// other pairs; easy negatives from other products. Shortfalls of one kind
// are backfilled with the other.
std::vector<NegativeDraw> draw_negatives(Rng& rng, std::span<const Product> products,
                                         const std::vector<PairRef>& global_pairs,
                                         std::size_t product_idx, std::size_t positive_pair_idx,
                                         std::size_t count, double hard_fraction) {
    std::vector<std::size_t> hard_pool;
    for (std::size_t ki = 0; ki < products[product_idx].pairs.size(); ++ki) {
        if (ki != positive_pair_idx) hard_pool.push_back(ki);
    }
    rng.shuffle(hard_pool);

    bool easy_possible = false;
    for (const auto& ref : global_pairs) {
        if (ref.product != product_idx) {
            easy_possible = true;
            break;
        }
    }

    std::size_t hard_target =
        static_cast<std::size_t>(hard_fraction * static_cast<double>(count) + 0.5);
    hard_target = std::min(hard_target, count);

    std::vector<NegativeDraw> out;
    std::size_t hard_taken = 0;
    while (hard_taken < hard_target && hard_taken < hard_pool.size()) {
        out.push_back({{product_idx, hard_pool[hard_taken]}, true});
        ++hard_taken;
    }

    auto draw_easy = [&]() -> bool {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const PairRef& ref = global_pairs[rng.below(global_pairs.size())];
            if (ref.product == product_idx) continue;
            bool dup = std::any_of(out.begin(), out.end(), [&](const NegativeDraw& d) {
                return d.ref.product == ref.product && d.ref.pair == ref.pair;
            });
            if (dup) continue;
            out.push_back({ref, false});
            return true;
        }
        return false;
    };

    while (out.size() < count) {
        bool want_easy = easy_possible;
        if (want_easy && draw_easy()) continue;
        if (hard_taken < hard_pool.size()) {
            out.push_back({{product_idx, hard_pool[hard_taken]}, true});
            ++hard_taken;
            continue;
        }
        break;  // no further distinct negatives exist
    }
    if (out.size() > count) out.resize(count);
    return out;
}

double euclid(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Backprop through the encoder forward pass.
// ---------------------------------------------------------------------------

struct TripletGrad {
    std::vector<std::uint32_t> row_order;
    std::unordered_map<std::uint32_t, std::vector<double>> rows;
    std::vector<double> wq, wk, wv;
    double loss = 0.0;
};

void add_row(TripletGrad& g, std::uint32_t row, const double* grad, std::size_t dim) {
    auto [it, inserted] = g.rows.try_emplace(row);
    if (inserted) {
        it->second.assign(dim, 0.0);
        g.row_order.push_back(row);
    }
    for (std::size_t d = 0; d < dim; ++d) it->second[d] += grad[d];
}

// Distributes d(loss)/d(pooled) onto the embedding rows and attention
// matrices reached by one text.
void backprop_text(const EncoderParams& params, const ForwardTrace& t,
                   std::span<const double> g_pooled, TripletGrad& out) {
    const std::size_t n = t.ids.size();
    if (n == 0) return;
    const std::size_t dim = params.dim;
    const double inv_n = 1.0 / static_cast<double>(n);

    // gY: every row of the pooled mean receives g/n.
    std::vector<double> gy(dim);
    for (std::size_t d = 0; d < dim; ++d) gy[d] = g_pooled[d] * inv_n;

    if (!params.use_attention) {
        for (std::size_t i = 0; i < n; ++i) add_row(out, t.ids[i], gy.data(), dim);
        return;
    }

    std::vector<double> gx(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(gy.begin(), gy.end(), gx.data() + i * dim);  // residual path
    }

    // gA[i][j] = <gY, V[j]>;  gV[j] += sum_i A[i][j] * gY
    std::vector<double> ga(n * n, 0.0);
    std::vector<double> gv(n * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double* vj = t.v.data() + j * dim;
            double s = 0.0;
            for (std::size_t d = 0; d < dim; ++d) s += gy[d] * vj[d];
            ga[i * n + j] = s;
            double aij = t.attn[i * n + j];
            double* gvj = gv.data() + j * dim;
            for (std::size_t d = 0; d < dim; ++d) gvj[d] += aij * gy[d];
        }
    }

    // Softmax backward, row-wise.
    std::vector<double> gs(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = t.attn.data() + i * n;
        const double* gai = ga.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gai[j] * ai[j];
        for (std::size_t j = 0; j < n; ++j) gs[i * n + j] = ai[j] * (gai[j] - dot);
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    std::vector<double> gq(n * dim, 0.0);
    std::vector<double> gk(n * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = gs[i * n + j] * scale;
            if (s == 0.0) continue;
            const double* kj = t.k.data() + j * dim;
            const double* qi = t.q.data() + i * dim;
            double* gqi = gq.data() + i * dim;
            double* gkj = gk.data() + j * dim;
            for (std::size_t d = 0; d < dim; ++d) {
                gqi[d] += s * kj[d];
                gkj[d] += s * qi[d];
            }
        }
    }

    if (out.wq.empty()) {
        const std::size_t mat = dim * dim;
        out.wq.assign(mat, 0.0);
        out.wk.assign(mat, 0.0);
        out.wv.assign(mat, 0.0);
    }
    // gW* += X^T * g*, and gX += g* W*^T.
    auto accumulate = [&](const std::vector<double>& gmat, const std::vector<double>& w,
                          std::vector<double>& gw) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = t.x.data() + i * dim;
            const double* gi = gmat.data() + i * dim;
            double* gxi = gx.data() + i * dim;
            for (std::size_t e = 0; e < dim; ++e) {
                double xv = xi[e];
                double* gwe = gw.data() + e * dim;
                const double* we = w.data() + e * dim;
                double acc = 0.0;
                for (std::size_t d = 0; d < dim; ++d) {
                    gwe[d] += xv * gi[d];
                    acc += gi[d] * we[d];
                }
                gxi[e] += acc;
            }
        }
    };
    accumulate(gq, params.wq, out.wq);
    accumulate(gk, params.wk, out.wk);
    accumulate(gv, params.wv, out.wv);

    for (std::size_t i = 0; i < n; ++i) add_row(out, t.ids[i], gx.data() + i * dim, dim);
}

TripletGrad triplet_gradient(const EncoderParams& params, const text::Vocabulary& vocab,
                             const Triplet& triplet, double margin) {
    TripletGrad g;
    ForwardTrace ta = encoder::encode_trace(params, vocab, triplet.anchor);
    ForwardTrace tp = encoder::encode_trace(params, vocab, triplet.positive);
    ForwardTrace tn = encoder::encode_trace(params, vocab, triplet.negative);

    const std::size_t dim = params.dim;
    double dp = euclid(ta.pooled, tp.pooled);
    double dn = euclid(ta.pooled, tn.pooled);
    double activation = dp - dn + margin;
    if (activation <= 0.0) return g;  // inactive hinge, subgradient 0
    g.loss = activation;

    // Unit directions; defined as 0 at coincident embeddings.
    std::vector<double> up(dim, 0.0), un(dim, 0.0);
    if (dp > 0.0) {
        for (std::size_t d = 0; d < dim; ++d) up[d] = (ta.pooled[d] - tp.pooled[d]) / dp;
    }
    if (dn > 0.0) {
        for (std::size_t d = 0; d < dim; ++d) un[d] = (ta.pooled[d] - tn.pooled[d]) / dn;
    }
    std::vector<double> g_anchor(dim), g_pos(dim), g_neg(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        g_anchor[d] = up[d] - un[d];
        g_pos[d] = -up[d];
        g_neg[d] = un[d];
    }
    backprop_text(params, ta, g_anchor, g);
    backprop_text(params, tp, g_pos, g);
    backprop_text(params, tn, g_neg, g);
    return g;
}

Gradients reduce_triplet_grads(const EncoderParams& params, std::vector<TripletGrad>& parts) {
    Gradients g;
    const std::size_t dim = params.dim;
    const std::size_t count = parts.size();
    if (params.use_attention) {
        const std::size_t mat = dim * dim;
        g.wq.assign(mat, 0.0);
        g.wk.assign(mat, 0.0);
        g.wv.assign(mat, 0.0);
    }
    double loss_sum = 0.0;
    for (auto& part : parts) {  // fixed order: batch index, then first-touch rows
        loss_sum += part.loss;
        for (std::uint32_t row : part.row_order) {
            auto [it, inserted] = g.rows.try_emplace(row);
            if (inserted) {
                it->second.assign(dim, 0.0);
                g.row_order.push_back(row);
            }
            const auto& src = part.rows.at(row);
            for (std::size_t d = 0; d < dim; ++d) it->second[d] += src[d];
        }
        if (!part.wq.empty()) {
            for (std::size_t i = 0; i < g.wq.size(); ++i) {
                g.wq[i] += part.wq[i];
                g.wk[i] += part.wk[i];
                g.wv[i] += part.wv[i];
            }
        }
    }
    const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
    for (std::uint32_t row : g.row_order) {
        for (auto& v : g.rows.at(row)) v *= inv;
    }
    for (auto& v : g.wq) v *= inv;
    for (auto& v : g.wk) v *= inv;
    for (auto& v : g.wv) v *= inv;
    g.mean_loss = loss_sum * inv;
    return g;
}

}  // namespace

std::vector<Triplet> sample_cqa_triplets(std::span<const Product> products,
                                         std::size_t negatives_per_positive,
                                         double hard_negative_fraction, std::uint64_t seed) {
    if (negatives_per_positive < 1) throw Error("triplets: negatives_per_positive must be >= 1");
    if (hard_negative_fraction < 0.0 || hard_negative_fraction > 1.0) {
        throw Error("triplets: hard_negative_fraction must be in [0, 1]");
    }
    auto global_pairs = all_pairs(products);
    Rng rng(seed);

    std::vector<Triplet> out;
    for (std::size_t pi = 0; pi < products.size(); ++pi) {
        const Product& product = products[pi];
        for (std::size_t ki = 0; ki < product.pairs.size(); ++ki) {
            const corpus::CqaPair& anchor_pair = product.pairs[ki];
            auto negatives = draw_negatives(rng, products, global_pairs, pi, ki,
                                            negatives_per_positive, hard_negative_fraction);
            for (const auto& neg : negatives) {
                Triplet t;
                t.anchor = anchor_pair.question;
                t.positive = anchor_pair.answer;
                t.negative = products[neg.ref.product].pairs[neg.ref.pair].answer;
                t.source = TripletSource::kCqa;
                t.hard = neg.hard;
                out.push_back(std::move(t));
            }
        }
    }
    if (out.empty()) throw Error("triplets: corpus too small, no valid negative exists");
    return out;
}

std::vector<Triplet> generate_distant_triplets(std::span<const Product> products,
                                               std::span<const corpus::UserQueryRecord> query_log,
                                               double teacher_alpha,
                                               std::size_t negatives_per_positive,
                                               double hard_negative_fraction, std::uint64_t seed) {
    if (query_log.empty()) throw Error("triplets: query log is empty");
    auto global_pairs = all_pairs(products);
    Rng rng(seed);

    std::unordered_map<std::string, std::size_t> product_index;
    for (std::size_t pi = 0; pi < products.size(); ++pi) {
        product_index.emplace(products[pi].product_id, pi);
    }
    struct TeacherStats {
        bm25::ProductStats questions, answers;
    };
    std::unordered_map<std::size_t, TeacherStats> stats_cache;

    std::vector<Triplet> out;
    for (const auto& record : query_log) {
        auto idx_it = product_index.find(record.product_id);
        if (idx_it == product_index.end()) continue;  // dirty log entry
        std::size_t pi = idx_it->second;
        const Product& product = products[pi];
        if (record.query_text.empty() || product.pairs.empty()) continue;

        std::size_t positive_idx = product.pairs.size();
        if (record.teacher_qa_id) {
            for (std::size_t ki = 0; ki < product.pairs.size(); ++ki) {
                if (product.pairs[ki].qa_id == *record.teacher_qa_id) {
                    positive_idx = ki;
                    break;
                }
            }
            if (positive_idx == product.pairs.size()) continue;  // stale teacher reference
        } else {
            auto cache_it = stats_cache.find(pi);
            if (cache_it == stats_cache.end()) {
                cache_it = stats_cache
                               .emplace(pi, TeacherStats{
                                                bm25::build_stats(product, bm25::Side::kQuestions),
                                                bm25::build_stats(product, bm25::Side::kAnswers)})
                               .first;
            }
            auto top = bm25::bm25_topk_cached(product, cache_it->second.questions,
                                              cache_it->second.answers, record.query_text, 1,
                                              teacher_alpha);
            if (top.empty()) continue;  // teacher abstains
            for (std::size_t ki = 0; ki < product.pairs.size(); ++ki) {
                if (product.pairs[ki].qa_id == top[0].first) {
                    positive_idx = ki;
                    break;
                }
            }
        }

        auto negatives = draw_negatives(rng, products, global_pairs, pi, positive_idx,
                                        negatives_per_positive, hard_negative_fraction);
        for (const auto& neg : negatives) {
            Triplet t;
            t.anchor = record.query_text;
            t.positive = product.pairs[positive_idx].answer;
            t.negative = products[neg.ref.product].pairs[neg.ref.pair].answer;
            t.source = TripletSource::kDistant;
            t.hard = neg.hard;
            out.push_back(std::move(t));
        }
    }
    return out;
}

double triplet_loss(const EncoderParams& params, const text::Vocabulary& vocab,
                    const Triplet& triplet, double margin) {
    if (margin <= 0.0) throw Error("triplet_loss: margin must be > 0");
    auto ea = encoder::encode(params, vocab, triplet.anchor);
    auto ep = encoder::encode(params, vocab, triplet.positive);
    auto en = encoder::encode(params, vocab, triplet.negative);
    double activation = euclid(ea, ep) - euclid(ea, en) + margin;
    return activation > 0.0 ? activation : 0.0;
}

Gradients loss_gradient_serial(const EncoderParams& params, const text::Vocabulary& vocab,
                               std::span<const Triplet> batch, double margin) {
    if (batch.empty()) throw Error("loss_gradient: batch is empty");
    std::vector<TripletGrad> parts(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        parts[i] = triplet_gradient(params, vocab, batch[i], margin);
    }
    return reduce_triplet_grads(params, parts);
}

Gradients loss_gradient(const EncoderParams& params, const text::Vocabulary& vocab,
                        std::span<const Triplet> batch, double margin) {
    if (batch.empty()) throw Error("loss_gradient: batch is empty");
    std::vector<TripletGrad> parts(batch.size());
    const std::int64_t n = static_cast<std::int64_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) {
        parts[static_cast<std::size_t>(i)] =
            triplet_gradient(params, vocab, batch[static_cast<std::size_t>(i)], margin);
    }
    // Reduction stays serial and ordered so results are thread-count invariant.
    return reduce_triplet_grads(params, parts);
}

namespace {

class OptimizerState {
  public:
    OptimizerState(const EncoderParams& params, const TrainConfig& config, std::size_t total_steps)
        : config_(config), total_steps_(total_steps) {
        if (config.optimizer == Optimizer::kAdam) {
            std::size_t total = params.table.size() + params.wq.size() + params.wk.size() +
                                params.wv.size();
            m_.assign(total, 0.0);
            v_.assign(total, 0.0);
            dense_grad_.assign(total, 0.0);
        }
    }

    void step(EncoderParams& params, const Gradients& g) {
        double lr = config_.learning_rate * schedule();
        if (config_.optimizer == Optimizer::kSgd) {
            apply_sgd(params, g, lr);
        } else {
            apply_adam(params, g, lr);
        }
        ++step_count_;
    }

  private:
    double schedule() const {
        if (config_.warmup_steps == 0) return 1.0;
        double t = static_cast<double>(step_count_);
        double warm = static_cast<double>(config_.warmup_steps);
        if (t < warm) return (t + 1.0) / warm;
        double total = static_cast<double>(std::max(total_steps_, config_.warmup_steps + 1));
        return std::max(0.0, (total - t) / (total - warm));
    }

    void apply_sgd(EncoderParams& params, const Gradients& g, double lr) {
        for (std::uint32_t row : g.row_order) {
            const auto& gr = g.rows.at(row);
            double* pr = params.row(row);
            for (std::size_t d = 0; d < params.dim; ++d) pr[d] -= lr * gr[d];
        }
        for (std::size_t i = 0; i < g.wq.size(); ++i) params.wq[i] -= lr * g.wq[i];
        for (std::size_t i = 0; i < g.wk.size(); ++i) params.wk[i] -= lr * g.wk[i];
        for (std::size_t i = 0; i < g.wv.size(); ++i) params.wv[i] -= lr * g.wv[i];
    }

    void apply_adam(EncoderParams& params, const Gradients& g, double lr) {
        for (std::uint32_t row : g.row_order) {
            const auto& gr = g.rows.at(row);
            std::copy(gr.begin(), gr.end(),
                      dense_grad_.begin() + static_cast<std::ptrdiff_t>(row * params.dim));
        }
        std::size_t off = params.table.size();
        std::copy(g.wq.begin(), g.wq.end(), dense_grad_.begin() + static_cast<std::ptrdiff_t>(off));
        std::copy(g.wk.begin(), g.wk.end(),
                  dense_grad_.begin() + static_cast<std::ptrdiff_t>(off + g.wq.size()));
        std::copy(g.wv.begin(), g.wv.end(),
                  dense_grad_.begin() + static_cast<std::ptrdiff_t>(off + 2 * g.wq.size()));

        double t = static_cast<double>(step_count_ + 1);
        double bc1 = 1.0 - std::pow(config_.adam_beta1, t);
        double bc2 = 1.0 - std::pow(config_.adam_beta2, t);
        auto update_span = [&](double* theta, std::size_t begin, std::size_t len) {
            for (std::size_t i = 0; i < len; ++i) {
                double grad = dense_grad_[begin + i];
                double& m = m_[begin + i];
                double& v = v_[begin + i];
                m = config_.adam_beta1 * m + (1.0 - config_.adam_beta1) * grad;
                v = config_.adam_beta2 * v + (1.0 - config_.adam_beta2) * grad * grad;
                theta[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + config_.adam_eps);
            }
        };
        update_span(params.table.data(), 0, params.table.size());
        if (!params.wq.empty()) {
            update_span(params.wq.data(), off, params.wq.size());
            update_span(params.wk.data(), off + params.wq.size(), params.wk.size());
            update_span(params.wv.data(), off + 2 * params.wq.size(), params.wv.size());
        }
        // Clear only the touched entries; everything else is already 0.
        for (std::uint32_t row : g.row_order) {
            std::fill_n(dense_grad_.begin() + static_cast<std::ptrdiff_t>(row * params.dim),
                        params.dim, 0.0);
        }
        std::fill(dense_grad_.begin() + static_cast<std::ptrdiff_t>(off), dense_grad_.end(), 0.0);
    }

    const TrainConfig& config_;
    std::size_t total_steps_;
    std::size_t step_count_ = 0;
    std::vector<double> m_, v_, dense_grad_;
};

}  // namespace

std::pair<EncoderParams, TrainReport> train(EncoderParams params, const text::Vocabulary& vocab,
                                            std::span<const Triplet> cqa_triplets,
                                            std::span<const Triplet> distant_triplets,
                                            const TrainConfig& config) {
    if (cqa_triplets.empty() && distant_triplets.empty()) {
        throw Error("train: no training triplets");
    }
    if (config.margin <= 0.0) throw Error("train: margin must be > 0");
    if (config.learning_rate <= 0.0) throw Error("train: learning_rate must be > 0");
    if (config.batch_size < 1) throw Error("train: batch_size must be >= 1");

    auto started = std::chrono::steady_clock::now();
    TrainReport report;
    Rng rng(config.seed);

    const std::size_t bs = config.batch_size;
    auto batches_of = [bs](std::size_t n) { return n == 0 ? 0 : (n + bs - 1) / bs; };
    std::size_t steps_per_epoch = 0;
    if (config.strategy == Strategy::kDataMix || cqa_triplets.empty() ||
        distant_triplets.empty()) {
        steps_per_epoch = batches_of(cqa_triplets.size() + distant_triplets.size());
    } else {
        steps_per_epoch = 2 * std::max(batches_of(cqa_triplets.size()),
                                       batches_of(distant_triplets.size()));
    }
    OptimizerState optimizer(params, config, steps_per_epoch * config.epochs);

    std::vector<Triplet> batch;
    batch.reserve(bs);
    double epoch_loss_sum = 0.0;
    std::size_t epoch_loss_count = 0;
    auto run_batch = [&](const std::vector<const Triplet*>& order, std::size_t& cursor,
                         std::size_t take) {
        batch.clear();
        for (std::size_t i = 0; i < take; ++i) {
            batch.push_back(*order[cursor % order.size()]);
            ++cursor;
        }
        Gradients g = loss_gradient(params, vocab, batch, config.margin);
        epoch_loss_sum += g.mean_loss * static_cast<double>(batch.size());
        epoch_loss_count += batch.size();
        optimizer.step(params, g);
        ++report.steps;
    };

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        epoch_loss_sum = 0.0;
        epoch_loss_count = 0;

        if (config.strategy == Strategy::kDataMix || cqa_triplets.empty() ||
            distant_triplets.empty()) {
            std::vector<const Triplet*> order;
            order.reserve(cqa_triplets.size() + distant_triplets.size());
            for (const auto& t : cqa_triplets) order.push_back(&t);
            for (const auto& t : distant_triplets) order.push_back(&t);
            rng.shuffle(order);
            std::size_t cursor = 0;
            while (cursor < order.size()) {
                run_batch(order, cursor, std::min(bs, order.size() - cursor));
            }
        } else {
            std::vector<const Triplet*> cqa_order, distant_order;
            cqa_order.reserve(cqa_triplets.size());
            distant_order.reserve(distant_triplets.size());
            for (const auto& t : cqa_triplets) cqa_order.push_back(&t);
            for (const auto& t : distant_triplets) distant_order.push_back(&t);
            rng.shuffle(cqa_order);
            rng.shuffle(distant_order);

            std::size_t paired_steps = std::max(batches_of(cqa_order.size()),
                                                batches_of(distant_order.size()));
            std::size_t cqa_cursor = 0, distant_cursor = 0;
            for (std::size_t s = 0; s < paired_steps; ++s) {
                run_batch(cqa_order, cqa_cursor, std::min(bs, cqa_order.size()));
                run_batch(distant_order, distant_cursor, std::min(bs, distant_order.size()));
            }
        }
        report.epoch_mean_loss.push_back(
            epoch_loss_count > 0 ? epoch_loss_sum / static_cast<double>(epoch_loss_count) : 0.0);
    }

    std::size_t violations = 0;
    std::size_t total = cqa_triplets.size() + distant_triplets.size();
    for (const auto& t : cqa_triplets) {
        if (triplet_loss(params, vocab, t, config.margin) > 0.0) ++violations;
    }
    for (const auto& t : distant_triplets) {
        if (triplet_loss(params, vocab, t, config.margin) > 0.0) ++violations;
    }
    report.final_violation_rate =
        total > 0 ? static_cast<double>(violations) / static_cast<double>(total) : 0.0;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(params), std::move(report)};
}

std::string triplets_to_jsonl(std::span<const Triplet> triplets) {
    std::string out;
    for (const auto& t : triplets) {
        nlohmann::json j;
        j["anchor"] = t.anchor;
        j["positive"] = t.positive;
        j["negative"] = t.negative;
        j["source"] = t.source == TripletSource::kCqa ? "CQA" : "DISTANT";
        j["hard"] = t.hard;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Triplet> triplets_from_jsonl(const std::string& content) {
    std::vector<Triplet> out;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("triplets: parse error at line " + std::to_string(line_no) + ": " +
                        e.what());
        }
        Triplet t;
        t.anchor = j.at("anchor").get<std::string>();
        t.positive = j.at("positive").get<std::string>();
        t.negative = j.at("negative").get<std::string>();
        std::string source = j.value("source", "CQA");
        if (source != "CQA" && source != "DISTANT") {
            throw Error("triplets: bad source at line " + std::to_string(line_no));
        }
        t.source = source == "CQA" ? TripletSource::kCqa : TripletSource::kDistant;
        t.hard = j.value("hard", false);
        out.push_back(std::move(t));
    }
    return out;
}

void save_triplets(std::span<const Triplet> triplets, const std::string& path) {
    bin::write_file(path, triplets_to_jsonl(triplets));
}

std::vector<Triplet> load_triplets(const std::string& path) {
    return triplets_from_jsonl(bin::read_file(path));
}

std::string report_to_json(const TrainReport& report) {
    nlohmann::json j;
    j["epoch_mean_loss"] = report.epoch_mean_loss;
    j["final_violation_rate"] = report.final_violation_rate;
    j["wall_time_seconds"] = report.wall_time_seconds;
    j["steps"] = report.steps;
    return j.dump(2) + "\n";
}

}  // namespace semqa::training
