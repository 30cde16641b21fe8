#include "semqa/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "semqa/bin_io.hpp"
#include "semqa/error.hpp"
#include "semqa/rng.hpp"

namespace semqa::encoder {
namespace {

thread_local std::uint64_t g_encode_calls = 0;

constexpr std::uint32_t kParamsVersion = 1;
constexpr std::uint32_t kAttentionFlag = 1u;

double uniform_draw(Rng& rng, double lo, double hi) { return rng.uniform(lo, hi); }

// out[n x dim] = x[n x dim] * w[dim x dim]
void matmul_nd_dd(const std::vector<double>& x, const std::vector<double>& w, std::size_t n,
                  std::size_t dim, std::vector<double>& out) {
    out.assign(n * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data() + i * dim;
        double* oi = out.data() + i * dim;
        for (std::size_t k = 0; k < dim; ++k) {
            double xv = xi[k];
            if (xv == 0.0) continue;
            const double* wk = w.data() + k * dim;
            for (std::size_t j = 0; j < dim; ++j) oi[j] += xv * wk[j];
        }
    }
}

ForwardTrace forward(const EncoderParams& params, const text::Vocabulary& vocab,
                     std::string_view input) {
    ForwardTrace t;
    t.ids = text::token_ids(vocab, input);
    const std::size_t n = t.ids.size();
    const std::size_t dim = params.dim;
    t.pooled.assign(dim, 0.0);
    if (n == 0) return t;

    t.x.resize(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = params.row(t.ids[i]);
        std::copy(src, src + dim, t.x.data() + i * dim);
    }

    const std::vector<double>* mixed = &t.x;
    std::vector<double> y;
    if (params.use_attention) {
        matmul_nd_dd(t.x, params.wq, n, dim, t.q);
        matmul_nd_dd(t.x, params.wk, n, dim, t.k);
        matmul_nd_dd(t.x, params.wv, n, dim, t.v);

        const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
        t.attn.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = t.attn.data() + i * n;
            const double* qi = t.q.data() + i * dim;
            double max_s = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                const double* kj = t.k.data() + j * dim;
                double s = 0.0;
                for (std::size_t d = 0; d < dim; ++d) s += qi[d] * kj[d];
                row[j] = s * scale;
                max_s = std::max(max_s, row[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] = std::exp(row[j] - max_s);
                sum += row[j];
            }
            for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
        }

        // y = x + attn * v  (residual)
        y = t.x;
        for (std::size_t i = 0; i < n; ++i) {
            const double* ai = t.attn.data() + i * n;
            double* yi = y.data() + i * dim;
            for (std::size_t j = 0; j < n; ++j) {
                double w = ai[j];
                const double* vj = t.v.data() + j * dim;
                for (std::size_t d = 0; d < dim; ++d) yi[d] += w * vj[d];
            }
        }
        mixed = &y;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* mi = mixed->data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) t.pooled[d] += mi[d];
    }
    for (std::size_t d = 0; d < dim; ++d) t.pooled[d] *= inv_n;
    return t;
}

}  // namespace

EncoderParams init_params(const text::Vocabulary& vocab, std::uint32_t dim, bool use_attention,
                          std::uint64_t seed) {
    if (dim < 2) throw Error("encoder: dim must be >= 2");
    EncoderParams p;
    p.dim = dim;
    p.use_attention = use_attention;
    p.seed = seed;
    p.rows = vocab.total_ids();

    Rng rng(seed);
    p.table.resize(p.rows * dim);
    for (auto& v : p.table) v = uniform_draw(rng, -0.1, 0.1);

    if (use_attention) {
        auto init_matrix = [&](std::vector<double>& w) {
            w.assign(static_cast<std::size_t>(dim) * dim, 0.0);
            for (std::uint32_t i = 0; i < dim; ++i) {
                for (std::uint32_t j = 0; j < dim; ++j) {
                    w[i * dim + j] = (i == j ? 1.0 : 0.0) + uniform_draw(rng, -0.01, 0.01);
                }
            }
        };
        init_matrix(p.wq);
        init_matrix(p.wk);
        init_matrix(p.wv);
    }
    return p;
}

ForwardTrace encode_trace(const EncoderParams& params, const text::Vocabulary& vocab,
                          std::string_view input) {
    return forward(params, vocab, input);
}

std::vector<double> encode(const EncoderParams& params, const text::Vocabulary& vocab,
                           std::string_view input) {
    ++g_encode_calls;
    return forward(params, vocab, input).pooled;
}

std::vector<std::vector<double>> encode_batch_serial(const EncoderParams& params,
                                                     const text::Vocabulary& vocab,
                                                     std::span<const std::string> texts) {
    g_encode_calls += texts.size();
    std::vector<std::vector<double>> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out[i] = forward(params, vocab, texts[i]).pooled;
    }
    return out;
}

std::vector<std::vector<double>> encode_batch(const EncoderParams& params,
                                              const text::Vocabulary& vocab,
                                              std::span<const std::string> texts) {
    g_encode_calls += texts.size();
    std::vector<std::vector<double>> out(texts.size());
    const std::int64_t n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] =
            forward(params, vocab, texts[static_cast<std::size_t>(i)]).pooled;
    }
    return out;
}

std::uint64_t encode_calls_this_thread() { return g_encode_calls; }

std::string params_to_bytes(const EncoderParams& params) {
    std::string out;
    out.reserve(24 + params.table.size() * 4 + params.wq.size() * 12);
    bin::put_bytes(out, "SQEP");
    bin::put_u32(out, kParamsVersion);
    bin::put_u32(out, params.dim);
    bin::put_u32(out, params.use_attention ? kAttentionFlag : 0u);
    bin::put_u64(out, params.rows);
    for (double v : params.table) bin::put_f32(out, static_cast<float>(v));
    if (params.use_attention) {
        for (double v : params.wq) bin::put_f32(out, static_cast<float>(v));
        for (double v : params.wk) bin::put_f32(out, static_cast<float>(v));
        for (double v : params.wv) bin::put_f32(out, static_cast<float>(v));
    }
    return out;
}

EncoderParams params_from_bytes(std::string_view bytes) {
    bin::Reader r(bytes, "encoder params");
    if (r.bytes(4) != "SQEP") throw Error("encoder params: bad magic");
    std::uint32_t version = r.u32();
    if (version != kParamsVersion) {
        throw Error("encoder params: unsupported version " + std::to_string(version));
    }
    EncoderParams p;
    p.dim = r.u32();
    if (p.dim < 2) throw Error("encoder params: invalid dim");
    std::uint32_t flags = r.u32();
    p.use_attention = (flags & kAttentionFlag) != 0;
    p.rows = r.u64();

    p.table.resize(p.rows * p.dim);
    for (auto& v : p.table) v = static_cast<double>(r.f32());
    if (p.use_attention) {
        const std::size_t mat = static_cast<std::size_t>(p.dim) * p.dim;
        p.wq.resize(mat);
        p.wk.resize(mat);
        p.wv.resize(mat);
        for (auto& v : p.wq) v = static_cast<double>(r.f32());
        for (auto& v : p.wk) v = static_cast<double>(r.f32());
        for (auto& v : p.wv) v = static_cast<double>(r.f32());
    }
    r.expect_end();
    return p;
}

void save_params(const EncoderParams& params, const std::string& path) {
    bin::write_file(path, params_to_bytes(params));
}

EncoderParams load_params(const std::string& path) {
    return params_from_bytes(bin::read_file(path));
}

std::uint64_t fingerprint(const EncoderParams& params) {
    return text::fnv1a64(params_to_bytes(params));
}

}  // namespace semqa::encoder
