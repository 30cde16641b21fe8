// Compares the serial reference kernels against their OpenMP counterparts:
// batch encoding, batch triplet gradients, and the per-product top-k scan.
// Both paths must agree bit-for-bit; wall times and speedups are printed.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "semqa/corpus.hpp"
#include "semqa/encoder.hpp"
#include "semqa/index.hpp"
#include "semqa/text.hpp"
#include "semqa/training.hpp"

using namespace semqa;

namespace {

template <typename F>
double timed(F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool equal_vectors(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-24s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp; parallel paths run serially\n");
#endif

    corpus::SynthConfig cfg;
    cfg.num_products = 120;
    cfg.pairs_per_product = 8;
    cfg.num_queries = 4000;
    cfg.noise_level = 0.5;
    cfg.seed = 99;
    auto [products, queries] = corpus::generate_synthetic_corpus(cfg);

    std::vector<std::string> texts;
    for (const auto& p : products) {
        for (const auto& pair : p.pairs) {
            texts.push_back(pair.question);
            texts.push_back(pair.answer);
        }
    }
    for (const auto& q : queries) texts.push_back(q.query_text);

    auto vocab = text::build_vocab(texts, 2, 4096);
    auto params = encoder::init_params(vocab, 64, true, 7);

    // Batch encoding.
    std::vector<std::vector<double>> enc_serial, enc_parallel;
    double t_enc_serial = timed([&] { enc_serial = encoder::encode_batch_serial(params, vocab, texts); });
    double t_enc_parallel = timed([&] { enc_parallel = encoder::encode_batch(params, vocab, texts); });
    report("encode_batch", t_enc_serial, t_enc_parallel, equal_vectors(enc_serial, enc_parallel));

    // Batch gradient.
    auto triplets = training::sample_cqa_triplets(products, 2, 0.5, 3);
    training::Gradients g_serial, g_parallel;
    double t_g_serial =
        timed([&] { g_serial = training::loss_gradient_serial(params, vocab, triplets, 1.0); });
    double t_g_parallel =
        timed([&] { g_parallel = training::loss_gradient(params, vocab, triplets, 1.0); });
    bool g_equal = g_serial.row_order == g_parallel.row_order &&
                   g_serial.wq == g_parallel.wq && g_serial.wk == g_parallel.wk &&
                   g_serial.wv == g_parallel.wv && g_serial.mean_loss == g_parallel.mean_loss;
    for (auto row : g_serial.row_order) {
        g_equal = g_equal && g_serial.rows.at(row) == g_parallel.rows.at(row);
    }
    report("loss_gradient", t_g_serial, t_g_parallel, g_equal);

    // Top-k scan over one large product.
    corpus::Product big;
    big.product_id = "bench";
    for (std::size_t i = 0; i < 100000; ++i) {
        corpus::CqaPair pair;
        pair.qa_id = "q" + std::to_string(100000 + i);
        pair.question = products[i % products.size()].pairs[i % 8].question;
        pair.answer = products[(i * 7) % products.size()].pairs[(i * 3) % 8].answer;
        big.pairs.push_back(std::move(pair));
    }
    std::vector<corpus::Product> big_corpus = {big};
    auto idx = index::build_index(big_corpus, params, vocab, 0.4);

    std::vector<std::pair<std::string, double>> topk_serial, topk_parallel;
    double t_q_serial = timed([&] {
        for (int rep = 0; rep < 20; ++rep) {
            topk_serial = index::query_topk_serial(idx, params, vocab, "bench", "battery life", 10);
        }
    });
    double t_q_parallel = timed([&] {
        for (int rep = 0; rep < 20; ++rep) {
            topk_parallel = index::query_topk(idx, params, vocab, "bench", "battery life", 10);
        }
    });
    report("query_topk x20", t_q_serial, t_q_parallel, topk_serial == topk_parallel);
    return 0;
}
