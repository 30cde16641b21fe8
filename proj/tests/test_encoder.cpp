#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "semqa/encoder.hpp"
#include "semqa/error.hpp"
#include "semqa/rng.hpp"
#include "semqa/text.hpp"

using namespace semqa;

namespace {

text::Vocabulary small_vocab() {
    std::vector<std::string> texts = {"battery life is good and long",
                                      "battery color size weight all fine",
                                      "life color size weight warranty screen"};
    return text::build_vocab(texts, 1, 256);
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("init_params is deterministic and validates dim") {
    auto vocab = small_vocab();
    auto a = encoder::init_params(vocab, 16, true, 5);
    auto b = encoder::init_params(vocab, 16, true, 5);
    CHECK(a.table == b.table);
    CHECK(a.wq == b.wq);
    CHECK(a.rows == vocab.total_ids());

    auto c = encoder::init_params(vocab, 16, true, 6);
    CHECK(a.table != c.table);

    CHECK_THROWS_AS(encoder::init_params(vocab, 1, false, 5), Error);

    auto no_attn = encoder::init_params(vocab, 16, false, 5);
    CHECK(no_attn.wq.empty());
    CHECK(no_attn.wk.empty());
    CHECK(no_attn.wv.empty());
}

TEST_CASE("attention matrices start near identity") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 8, true, 9);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) {
            double expect = i == j ? 1.0 : 0.0;
            CHECK(std::abs(p.wq[i * 8 + j] - expect) <= 0.01);
        }
    }
}

TEST_CASE("encode: single token returns its row; empty text the zero vector") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 12, false, 3);
    auto id = vocab.token_to_id.at("battery");
    auto e = encoder::encode(p, vocab, "battery");
    for (std::size_t d = 0; d < 12; ++d) CHECK(e[d] == p.row(id)[d]);

    auto z = encoder::encode(p, vocab, "");
    CHECK(norm(z) == 0.0);
    CHECK(z.size() == 12);
}

TEST_CASE("encode: opposite token vectors cancel under mean pooling") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 6, false, 3);
    auto ia = vocab.token_to_id.at("battery");
    auto ib = vocab.token_to_id.at("life");
    for (std::size_t d = 0; d < 6; ++d) {
        p.row(ia)[d] = 0.5 * static_cast<double>(d + 1);
        p.row(ib)[d] = -0.5 * static_cast<double>(d + 1);
    }
    auto e = encoder::encode(p, vocab, "battery life");
    for (double x : e) CHECK(x == doctest::Approx(0.0));
}

TEST_CASE("encode: mean of looked-up rows matches hand computation") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 10, false, 4);
    auto ia = vocab.token_to_id.at("battery");
    auto ib = vocab.token_to_id.at("life");
    auto e = encoder::encode(p, vocab, "battery life");
    for (std::size_t d = 0; d < 10; ++d) {
        CHECK(e[d] == doctest::Approx(0.5 * (p.row(ia)[d] + p.row(ib)[d])).epsilon(1e-15));
    }
}

TEST_CASE("encode with attention: single token equals x + x Wv") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 5, true, 8);
    auto id = vocab.token_to_id.at("battery");
    auto e = encoder::encode(p, vocab, "battery");
    for (std::size_t d = 0; d < 5; ++d) {
        double xv = 0.0;
        for (std::size_t k = 0; k < 5; ++k) xv += p.row(id)[k] * p.wv[k * 5 + d];
        CHECK(e[d] == doctest::Approx(p.row(id)[d] + xv).epsilon(1e-12));
    }
}

TEST_CASE("pooled output is invariant to token permutation, attention on and off") {
    auto vocab = small_vocab();
    for (bool attn : {false, true}) {
        auto p = encoder::init_params(vocab, 16, attn, 11);
        auto a = encoder::encode(p, vocab, "battery life color size");
        auto b = encoder::encode(p, vocab, "size color battery life");
        for (std::size_t d = 0; d < 16; ++d) {
            CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-12));
        }
    }
}

TEST_CASE("mean pooling is a convex combination: norm bounded by max row norm") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 24, false, 13);
    Rng rng(2);
    std::vector<std::string> words = {"battery", "life", "color", "size", "weight", "warranty"};
    for (int iter = 0; iter < 100; ++iter) {
        std::string txt;
        std::size_t len = 1 + rng.below(5);
        std::vector<std::string> used;
        for (std::size_t i = 0; i < len; ++i) {
            const auto& w = words[rng.below(words.size())];
            used.push_back(w);
            if (!txt.empty()) txt += ' ';
            txt += w;
        }
        double max_row_norm = 0.0;
        for (const auto& w : used) {
            std::vector<double> row(p.row(vocab.token_to_id.at(w)),
                                    p.row(vocab.token_to_id.at(w)) + 24);
            max_row_norm = std::max(max_row_norm, norm(row));
        }
        CHECK(norm(encoder::encode(p, vocab, txt)) <= max_row_norm + 1e-12);
    }
}

TEST_CASE("encode_batch equals element-wise encode and concatenation of sub-batches") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 16, true, 17);
    std::vector<std::string> texts = {"battery life", "color", "", "warranty screen size",
                                      "bettry"};
    auto batch = encoder::encode_batch(p, vocab, texts);
    REQUIRE(batch.size() == texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        CHECK(batch[i] == encoder::encode(p, vocab, texts[i]));
    }

    std::vector<std::string> first(texts.begin(), texts.begin() + 2);
    std::vector<std::string> rest(texts.begin() + 2, texts.end());
    auto b1 = encoder::encode_batch(p, vocab, first);
    auto b2 = encoder::encode_batch(p, vocab, rest);
    b1.insert(b1.end(), b2.begin(), b2.end());
    CHECK(b1 == batch);

    CHECK(encoder::encode_batch(p, vocab, {}).empty());
}

TEST_CASE("params file round trip is bit-exact and validates its header") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 8, true, 19);
    auto bytes = encoder::params_to_bytes(p);
    auto q = encoder::params_from_bytes(bytes);
    CHECK(encoder::params_to_bytes(q) == bytes);  // f32 storage is stable
    CHECK(q.dim == p.dim);
    CHECK(q.use_attention);
    CHECK(q.rows == p.rows);
    for (std::size_t i = 0; i < p.table.size(); ++i) {
        CHECK(q.table[i] == static_cast<double>(static_cast<float>(p.table[i])));
    }

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(encoder::params_from_bytes(bad_magic), Error);

    auto truncated = bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(encoder::params_from_bytes(truncated), Error);

    auto trailing = bytes + "junk";
    CHECK_THROWS_AS(encoder::params_from_bytes(trailing), Error);
}

TEST_CASE("fingerprint tracks parameter content") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 8, false, 19);
    auto fp1 = encoder::fingerprint(p);
    CHECK(fp1 == encoder::fingerprint(p));
    p.table[0] += 1.0;
    CHECK(encoder::fingerprint(p) != fp1);
}

TEST_CASE("encode call instrumentation counts per invocation") {
    auto vocab = small_vocab();
    auto p = encoder::init_params(vocab, 8, false, 1);
    auto before = encoder::encode_calls_this_thread();
    encoder::encode(p, vocab, "battery");
    CHECK(encoder::encode_calls_this_thread() - before == 1);
    std::vector<std::string> texts(7, "life");
    encoder::encode_batch(p, vocab, texts);
    CHECK(encoder::encode_calls_this_thread() - before == 8);
}
