#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "semqa/bin_io.hpp"
#include "semqa/bm25.hpp"
#include "semqa/corpus.hpp"
#include "semqa/encoder.hpp"
#include "semqa/error.hpp"
#include "semqa/eval.hpp"
#include "semqa/index.hpp"
#include "semqa/service.hpp"
#include "semqa/text.hpp"
#include "semqa/training.hpp"

namespace fs = std::filesystem;
using namespace semqa;

namespace {

std::string corpus_path(const std::string& dir) { return dir + "/corpus.jsonl"; }
std::string queries_path(const std::string& dir) { return dir + "/queries.jsonl"; }
std::string vocab_path(const std::string& dir) { return dir + "/vocab.json"; }
std::string stats_path(const std::string& dir) { return dir + "/stats.json"; }

text::Vocabulary build_working_vocab(std::span<const corpus::Product> products,
                                     std::span<const corpus::UserQueryRecord> queries,
                                     std::uint32_t min_freq, std::uint32_t buckets) {
    std::vector<std::string> texts;
    for (const auto& p : products) {
        for (const auto& pair : p.pairs) {
            texts.push_back(pair.question);
            texts.push_back(pair.answer);
        }
    }
    for (const auto& q : queries) texts.push_back(q.query_text);
    return text::build_vocab(texts, min_freq, buckets);
}

void write_working_set(const std::string& out_dir, std::span<const corpus::Product> products,
                       std::span<const corpus::UserQueryRecord> queries, std::uint32_t min_freq,
                       std::uint32_t buckets) {
    fs::create_directories(out_dir);
    corpus::save_corpus(products, corpus_path(out_dir));
    corpus::save_query_log(queries, queries_path(out_dir));
    text::save_vocab(build_working_vocab(products, queries, min_freq, buckets),
                     vocab_path(out_dir));
    auto stats = corpus::corpus_stats(products, queries);
    bin::write_file(stats_path(out_dir), corpus::stats_to_json(stats));
    std::printf("wrote %s: %zu products, %zu pairs, %zu queries\n", out_dir.c_str(),
                stats.num_products, stats.num_pairs, queries.size());
    std::printf("vocab overlap %.2f%%, avg query len %.2f, avg cqa question len %.2f\n",
                stats.vocab_overlap_pct, stats.avg_query_len, stats.avg_cqa_question_len);
}

void warn_fingerprints(const index::SemanticIndex& idx, const encoder::EncoderParams& params,
                       const text::Vocabulary& vocab) {
    if (encoder::fingerprint(params) != idx.header.encoder_fingerprint) {
        std::fprintf(stderr,
                     "warning: encoder fingerprint mismatch, index was built with different "
                     "params (index %016" PRIx64 ", loaded %016" PRIx64 ")\n",
                     idx.header.encoder_fingerprint, encoder::fingerprint(params));
    }
    if (text::fingerprint(vocab) != idx.header.vocab_fingerprint) {
        std::fprintf(stderr, "warning: vocabulary fingerprint mismatch\n");
    }
}

training::Strategy parse_strategy(const std::string& s) {
    if (s == "data-mix") return training::Strategy::kDataMix;
    if (s == "multi-task") return training::Strategy::kMultiTask;
    throw Error("train: strategy must be data-mix or multi-task");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semqa: instant product QA over community question/answer pairs"};
    app.require_subcommand(1);

    // --- ingest ---------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "validate a corpus and build a working set");
    std::string ingest_corpus, ingest_queries, ingest_out;
    std::uint32_t ingest_min_freq = 2, ingest_buckets = 4096;
    ingest->add_option("--corpus", ingest_corpus, "corpus JSONL file")->required();
    ingest->add_option("--queries", ingest_queries, "query log JSONL file");
    ingest->add_option("--out", ingest_out, "output working-set directory")->required();
    ingest->add_option("--min-freq", ingest_min_freq, "vocabulary min frequency");
    ingest->add_option("--buckets", ingest_buckets, "trigram hash buckets");
    ingest->callback([&] {
        auto products = corpus::load_corpus(ingest_corpus);
        std::vector<corpus::UserQueryRecord> queries;
        if (!ingest_queries.empty()) {
            std::unordered_set<std::string> known;
            for (const auto& p : products) known.insert(p.product_id);
            std::vector<std::string> warnings;
            queries = corpus::load_query_log(ingest_queries, &known, &warnings);
            for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        }
        write_working_set(ingest_out, products, queries, ingest_min_freq, ingest_buckets);
    });

    // --- gen-synthetic ---------------------------------------------------
    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic corpus and query log");
    corpus::SynthConfig synth;
    std::string gen_out;
    std::uint32_t gen_min_freq = 2, gen_buckets = 4096;
    gen->add_option("--products", synth.num_products, "number of products")->required();
    gen->add_option("--pairs", synth.pairs_per_product, "CQA pairs per product")->required();
    gen->add_option("--queries", synth.num_queries, "number of user queries")->required();
    gen->add_option("--noise", synth.noise_level, "query corruption level in [0,1]");
    gen->add_option("--seed", synth.seed, "random seed");
    gen->add_option("--out", gen_out, "output working-set directory")->required();
    gen->add_option("--min-freq", gen_min_freq, "vocabulary min frequency");
    gen->add_option("--buckets", gen_buckets, "trigram hash buckets");
    gen->callback([&] {
        auto [products, queries] = corpus::generate_synthetic_corpus(synth);
        write_working_set(gen_out, products, queries, gen_min_freq, gen_buckets);
    });

    // --- gen-triplets ----------------------------------------------------
    auto* gt = app.add_subcommand("gen-triplets", "sample CQA training triplets");
    std::string gt_corpus, gt_out;
    std::size_t gt_negatives = 2;
    double gt_hard_frac = 0.5;
    std::uint64_t gt_seed = 0;
    gt->add_option("--corpus", gt_corpus, "working-set directory")->required();
    gt->add_option("--negatives", gt_negatives, "negatives per positive");
    gt->add_option("--hard-frac", gt_hard_frac, "fraction of hard negatives");
    gt->add_option("--seed", gt_seed, "random seed");
    gt->add_option("--out", gt_out, "output triplet JSONL")->required();
    gt->callback([&] {
        auto products = corpus::load_corpus(corpus_path(gt_corpus));
        auto triplets = training::sample_cqa_triplets(products, gt_negatives, gt_hard_frac,
                                                      gt_seed);
        training::save_triplets(triplets, gt_out);
        std::printf("wrote %zu CQA triplets to %s\n", triplets.size(), gt_out.c_str());
    });

    // --- gen-distant -----------------------------------------------------
    auto* gd = app.add_subcommand("gen-distant",
                                  "distill distant triplets from the BM25 teacher");
    std::string gd_corpus, gd_queries, gd_out;
    double gd_alpha = 0.4, gd_hard_frac = 0.5;
    std::size_t gd_negatives = 2;
    std::uint64_t gd_seed = 0;
    gd->add_option("--corpus", gd_corpus, "working-set directory")->required();
    gd->add_option("--queries", gd_queries, "query log JSONL (default: working set's)");
    gd->add_option("--alpha", gd_alpha, "teacher question/answer weight");
    gd->add_option("--negatives", gd_negatives, "negatives per positive");
    gd->add_option("--hard-frac", gd_hard_frac, "fraction of hard negatives");
    gd->add_option("--seed", gd_seed, "random seed");
    gd->add_option("--out", gd_out, "output triplet JSONL")->required();
    gd->callback([&] {
        auto products = corpus::load_corpus(corpus_path(gd_corpus));
        std::string qp = gd_queries.empty() ? queries_path(gd_corpus) : gd_queries;
        auto queries = corpus::load_query_log(qp);
        auto triplets = training::generate_distant_triplets(products, queries, gd_alpha,
                                                            gd_negatives, gd_hard_frac, gd_seed);
        training::save_triplets(triplets, gd_out);
        std::printf("wrote %zu distant triplets to %s (from %zu queries)\n", triplets.size(),
                    gd_out.c_str(), queries.size());
    });

    // --- train -----------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train the encoder on triplets");
    std::string tr_cqa, tr_distant, tr_vocab, tr_out, tr_report;
    std::string tr_strategy = "data-mix", tr_attention = "off", tr_optimizer = "sgd";
    training::TrainConfig tc;
    std::uint32_t tr_dim = 64;
    tr->add_option("--cqa", tr_cqa, "CQA triplet JSONL")->required();
    tr->add_option("--distant", tr_distant, "distant triplet JSONL");
    tr->add_option("--vocab", tr_vocab, "vocabulary JSON")->required();
    tr->add_option("--strategy", tr_strategy, "data-mix | multi-task");
    tr->add_option("--dim", tr_dim, "embedding dimension");
    tr->add_option("--epochs", tc.epochs, "training epochs");
    tr->add_option("--lr", tc.learning_rate, "learning rate");
    tr->add_option("--margin", tc.margin, "triplet margin");
    tr->add_option("--batch-size", tc.batch_size, "batch size");
    tr->add_option("--seed", tc.seed, "random seed");
    tr->add_option("--attention", tr_attention, "on | off");
    tr->add_option("--optimizer", tr_optimizer, "sgd | adam");
    tr->add_option("--warmup-steps", tc.warmup_steps, "linear warmup then decay (0 = constant)");
    tr->add_option("--out", tr_out, "output params file")->required();
    tr->add_option("--report", tr_report, "training report JSON path");
    tr->callback([&] {
        tc.strategy = parse_strategy(tr_strategy);
        if (tr_attention != "on" && tr_attention != "off") {
            throw Error("train: --attention must be on or off");
        }
        if (tr_optimizer == "sgd") {
            tc.optimizer = training::Optimizer::kSgd;
        } else if (tr_optimizer == "adam") {
            tc.optimizer = training::Optimizer::kAdam;
        } else {
            throw Error("train: --optimizer must be sgd or adam");
        }
        auto vocab = text::load_vocab(tr_vocab);
        auto cqa = training::load_triplets(tr_cqa);
        std::vector<training::Triplet> distant;
        if (!tr_distant.empty()) distant = training::load_triplets(tr_distant);

        auto params = encoder::init_params(vocab, tr_dim, tr_attention == "on", tc.seed);
        auto [trained, report] = training::train(std::move(params), vocab, cqa, distant, tc);
        encoder::save_params(trained, tr_out);
        if (!tr_report.empty()) bin::write_file(tr_report, training::report_to_json(report));
        std::printf("trained %zu epochs on %zu cqa + %zu distant triplets\n", tc.epochs,
                    cqa.size(), distant.size());
        if (!report.epoch_mean_loss.empty()) {
            std::printf("first epoch loss %.4f, last %.4f, violation rate %.4f\n",
                        report.epoch_mean_loss.front(), report.epoch_mean_loss.back(),
                        report.final_violation_rate);
        }
        std::printf("wrote params to %s (fingerprint %016" PRIx64 ")\n", tr_out.c_str(),
                    encoder::fingerprint(trained));
    });

    // --- build-index -------------------------------------------------------
    auto* bi = app.add_subcommand("build-index", "encode all CQA pairs into a fused index");
    std::string bi_corpus, bi_params, bi_out;
    double bi_alpha = 0.4;
    bi->add_option("--corpus", bi_corpus, "working-set directory")->required();
    bi->add_option("--params", bi_params, "encoder params file")->required();
    bi->add_option("--alpha", bi_alpha, "question/answer weight (baked into storage)");
    bi->add_option("--out", bi_out, "output index file")->required();
    bi->callback([&] {
        auto products = corpus::load_corpus(corpus_path(bi_corpus));
        auto vocab = text::load_vocab(vocab_path(bi_corpus));
        auto params = encoder::load_params(bi_params);
        auto idx = index::build_index(products, params, vocab, bi_alpha);
        index::save_index(idx, bi_out);
        std::printf("wrote index with %zu candidates (dim %u, alpha %.2f) to %s\n",
                    idx.candidates.size(), idx.header.dim, bi_alpha, bi_out.c_str());
    });

    // --- query -------------------------------------------------------------
    auto* qc = app.add_subcommand("query", "run one query against the index");
    std::string qc_index, qc_params, qc_vocab, qc_product, qc_text, qc_corpus;
    std::size_t qc_k = 3;
    qc->add_option("--index", qc_index, "index file")->required();
    qc->add_option("--params", qc_params, "encoder params file")->required();
    qc->add_option("--vocab", qc_vocab, "vocabulary JSON")->required();
    qc->add_option("--product", qc_product, "product id")->required();
    qc->add_option("--q", qc_text, "query text")->required();
    qc->add_option("--k", qc_k, "results to return");
    qc->add_option("--corpus", qc_corpus, "corpus JSONL for result texts");
    qc->callback([&] {
        auto idx = index::load_index(qc_index);
        auto params = encoder::load_params(qc_params);
        auto vocab = text::load_vocab(qc_vocab);
        warn_fingerprints(idx, params, vocab);
        auto ranked = index::query_topk(idx, params, vocab, qc_product, qc_text, qc_k);

        std::unordered_map<std::string, const corpus::CqaPair*> texts;
        std::vector<corpus::Product> products;
        if (!qc_corpus.empty()) {
            products = corpus::load_corpus(qc_corpus);
            for (const auto& p : products) {
                if (p.product_id != qc_product) continue;
                for (const auto& pair : p.pairs) texts.emplace(pair.qa_id, &pair);
            }
        }
        std::printf("%-4s %-12s %-12s\n", "rank", "qa_id", "relevance");
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            std::printf("%-4zu %-12s %-12.6f", i + 1, ranked[i].first.c_str(),
                        -ranked[i].second);
            auto it = texts.find(ranked[i].first);
            if (it != texts.end()) {
                std::printf("  Q: %s  A: %s", it->second->question.c_str(),
                            it->second->answer.c_str());
            }
            std::printf("\n");
        }
    });

    // --- eval ---------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "offline evaluation protocols");
    ev->require_subcommand(1);
    std::string ev_corpus, ev_params, ev_index, ev_baseline, ev_out, ev_queries;
    std::size_t ev_min_pairs = 5, ev_sample = 500, ev_k = 3;
    std::uint64_t ev_seed = 17;
    double ev_alpha = 0.4;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--corpus", ev_corpus, "working-set directory")->required();
        sub->add_option("--params", ev_params, "encoder params file");
        sub->add_option("--baseline", ev_baseline, "bm25 to evaluate the syntactic baseline");
        sub->add_option("--out", ev_out, "report JSON path")->required();
        sub->add_option("--seed", ev_seed, "sampling seed");
    };
    auto* ev_cqa = ev->add_subcommand("cqa", "P@1 / mAP / MRR over CQA rankings");
    add_common(ev_cqa);
    ev_cqa->add_option("--min-pairs", ev_min_pairs, "minimum pairs per product");
    ev_cqa->add_option("--sample", ev_sample, "sampled questions");
    ev_cqa->callback([&] {
        auto products = corpus::load_corpus(corpus_path(ev_corpus));
        eval::CqaEvalReport report;
        std::unique_ptr<encoder::EncoderParams> params;
        std::unique_ptr<text::Vocabulary> vocab;
        eval::PairScorer scorer;
        if (ev_baseline == "bm25") {
            scorer = eval::make_bm25_answer_scorer();
            report.model = "bm25";
        } else {
            if (ev_params.empty()) throw Error("eval cqa: --params or --baseline bm25 required");
            params = std::make_unique<encoder::EncoderParams>(encoder::load_params(ev_params));
            vocab = std::make_unique<text::Vocabulary>(text::load_vocab(vocab_path(ev_corpus)));
            scorer = eval::make_encoder_pair_scorer(*params, *vocab);
            report.model = ev_params;
        }
        auto result = eval::run_cqa_eval(products, scorer, ev_min_pairs, ev_sample, ev_seed);
        result.model = report.model;
        bin::write_file(ev_out, eval::report_to_json(result));
        std::printf("cqa eval (%s): P@1 %.4f  mAP %.4f  MRR %.4f over %zu queries\n",
                    result.model.c_str(), result.p_at_1, result.map, result.mrr,
                    result.num_queries);
    });

    auto* ev_user = ev->add_subcommand("user", "PR-AUC over labeled user queries");
    add_common(ev_user);
    ev_user->add_option("--index", ev_index, "semantic index file");
    ev_user->add_option("--queries", ev_queries, "labeled query log (default: working set's)");
    ev_user->add_option("--k", ev_k, "responses pooled per query");
    ev_user->add_option("--alpha", ev_alpha, "bm25 baseline alpha");
    ev_user->callback([&] {
        auto products = corpus::load_corpus(corpus_path(ev_corpus));
        std::string qp = ev_queries.empty() ? queries_path(ev_corpus) : ev_queries;
        auto queries = corpus::load_query_log(qp);

        eval::UserEvalReport result;
        std::unique_ptr<encoder::EncoderParams> params;
        std::unique_ptr<text::Vocabulary> vocab;
        std::unique_ptr<index::SemanticIndex> idx;
        eval::Retriever retriever;
        std::string model;
        if (ev_baseline == "bm25") {
            retriever = eval::make_bm25_retriever(products, ev_alpha);
            model = "bm25";
        } else {
            if (ev_params.empty() || ev_index.empty()) {
                throw Error("eval user: --params and --index, or --baseline bm25, required");
            }
            params = std::make_unique<encoder::EncoderParams>(encoder::load_params(ev_params));
            vocab = std::make_unique<text::Vocabulary>(text::load_vocab(vocab_path(ev_corpus)));
            idx = std::make_unique<index::SemanticIndex>(index::load_index(ev_index));
            warn_fingerprints(*idx, *params, *vocab);
            retriever = eval::make_semantic_retriever(*idx, *params, *vocab);
            model = ev_params;
        }
        result = eval::run_user_query_eval(retriever, products, queries, ev_k);
        result.model = model;
        bin::write_file(ev_out, eval::report_to_json(result));
        std::printf("user eval (%s): PR-AUC %.4f over %zu queries (%zu uncovered, %zu pairs)\n",
                    result.model.c_str(), result.pr_auc, result.num_queries,
                    result.uncovered_queries, result.num_pairs);
    });

    // --- serve ---------------------------------------------------------------
    auto* sv = app.add_subcommand("serve", "read-only HTTP answer service");
    std::string sv_index, sv_params, sv_vocab, sv_corpus, sv_host = "0.0.0.0";
    int sv_port = 8080;
    sv->add_option("--index", sv_index, "index file")->required();
    sv->add_option("--params", sv_params, "encoder params file")->required();
    sv->add_option("--vocab", sv_vocab, "vocabulary JSON")->required();
    sv->add_option("--corpus", sv_corpus, "corpus JSONL for answer texts")->required();
    sv->add_option("--port", sv_port, "listen port (env SEMQA_PORT overrides)");
    sv->add_option("--host", sv_host, "bind address");
    sv->callback([&] {
        if (const char* env_port = std::getenv("SEMQA_PORT")) {
            sv_port = std::atoi(env_port);
        }
        service::QaServer server;
        int bound = server.start(sv_host, sv_port);
        std::fprintf(stderr, "listening on %s:%d, loading artifacts...\n", sv_host.c_str(),
                     bound);

        auto idx = index::load_index(sv_index);
        auto params = encoder::load_params(sv_params);
        auto vocab = text::load_vocab(sv_vocab);
        auto products = corpus::load_corpus(sv_corpus);
        warn_fingerprints(idx, params, vocab);
        server.set_service(std::make_shared<service::QaService>(
            std::move(idx), std::move(params), std::move(vocab), std::move(products)));
        std::fprintf(stderr, "ready\n");
        server.wait();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
