#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "semqa/corpus.hpp"
#include "semqa/encoder.hpp"

namespace semqa::training {

enum class TripletSource { kCqa, kDistant };

struct Triplet {
    std::string anchor;
    std::string positive;
    std::string negative;
    TripletSource source = TripletSource::kCqa;
    bool hard = false;  // negative drawn from the same product

    bool operator==(const Triplet&) const = default;
};

enum class Strategy { kDataMix, kMultiTask };
enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
    double margin = 1.0;
    double learning_rate = 0.05;
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    Strategy strategy = Strategy::kDataMix;
    double hard_negative_fraction = 0.5;
    std::size_t negatives_per_positive = 2;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::kSgd;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // Linear warmup then linear decay; disabled at 0 warmup steps.
    std::size_t warmup_steps = 0;
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    double final_violation_rate = 0.0;  // fraction of training triplets with loss > 0
    double wall_time_seconds = 0.0;
    std::size_t steps = 0;
};

/// CQA-sourced triplets: every pair's question anchors one triplet group;
/// positive is its paired answer; hard negatives are answers of other pairs
/// on the same product, easy negatives come from other products. The
/// requested hard fraction is honored where the product has enough pairs
/// and backfilled with the other kind otherwise. Deterministic per seed.
std::vector<Triplet> sample_cqa_triplets(std::span<const corpus::Product> products,
                                         std::size_t negatives_per_positive,
                                         double hard_negative_fraction, std::uint64_t seed);

/// Distantly supervised triplets: the user query anchors; the positive is
/// the answer of the pair named by teacher_qa_id or, absent that, the BM25
/// teacher's top retrieval. Queries whose teacher abstains (and queries on
/// unknown products) are skipped. Negatives follow the CQA strategy.
std::vector<Triplet> generate_distant_triplets(std::span<const corpus::Product> products,
                                               std::span<const corpus::UserQueryRecord> query_log,
                                               double teacher_alpha,
                                               std::size_t negatives_per_positive,
                                               double hard_negative_fraction, std::uint64_t seed);

/// max(||e(a) - e(p)|| - ||e(a) - e(n)|| + margin, 0), Euclidean distances.
double triplet_loss(const encoder::EncoderParams& params, const text::Vocabulary& vocab,
                    const Triplet& triplet, double margin);

/// Gradient of the mean batch loss. Embedding rows appear in first-touch
/// order so downstream accumulation is reproducible; attention gradients are
/// dense dim x dim. Subgradient at the hinge kink is 0, and the direction
/// vector at coincident embeddings is defined as 0.
struct Gradients {
    std::vector<std::uint32_t> row_order;
    std::unordered_map<std::uint32_t, std::vector<double>> rows;
    std::vector<double> wq, wk, wv;
    double mean_loss = 0.0;
};

Gradients loss_gradient(const encoder::EncoderParams& params, const text::Vocabulary& vocab,
                        std::span<const Triplet> batch, double margin);
Gradients loss_gradient_serial(const encoder::EncoderParams& params,
                               const text::Vocabulary& vocab, std::span<const Triplet> batch,
                               double margin);

/// Minimizes the triplet objective. DATA_MIX shuffles the union once per
/// epoch; MULTI_TASK alternates strictly one batch per source per step with
/// the exhausted source cycling. Bit-deterministic per seed.
std::pair<encoder::EncoderParams, TrainReport> train(encoder::EncoderParams params,
                                                     const text::Vocabulary& vocab,
                                                     std::span<const Triplet> cqa_triplets,
                                                     std::span<const Triplet> distant_triplets,
                                                     const TrainConfig& config);

std::string triplets_to_jsonl(std::span<const Triplet> triplets);
std::vector<Triplet> triplets_from_jsonl(const std::string& content);
void save_triplets(std::span<const Triplet> triplets, const std::string& path);
std::vector<Triplet> load_triplets(const std::string& path);

std::string report_to_json(const TrainReport& report);

}  // namespace semqa::training
