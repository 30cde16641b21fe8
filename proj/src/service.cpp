#include "semqa/service.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <ctime>

#include <httplib.h>
#include <json.hpp>

#include "semqa/error.hpp"
#include "semqa/text.hpp"

namespace semqa::service {

using nlohmann::json;

QaService::QaService(index::SemanticIndex idx, encoder::EncoderParams params,
                     text::Vocabulary vocab, std::vector<corpus::Product> products)
    : index_(std::move(idx)),
      params_(std::move(params)),
      vocab_(std::move(vocab)),
      products_(std::move(products)) {
    for (const auto& p : products_) {
        auto& by_qa = texts_[p.product_id];
        for (const auto& pair : p.pairs) by_qa.emplace(pair.qa_id, &pair);
    }
}

QaService::Answer QaService::answer(const std::string& product_id, std::string_view query,
                                    std::size_t k) const {
    auto started = std::chrono::steady_clock::now();
    std::uint64_t calls_before = encoder::encode_calls_this_thread();

    auto ranked = index::query_topk(index_, params_, vocab_, product_id, query, k);

    Answer out;
    out.query = std::string(query);
    out.product_id = product_id;
    out.encoder_calls = encoder::encode_calls_this_thread() - calls_before;

    auto texts_it = texts_.find(product_id);
    for (const auto& [qa_id, distance] : ranked) {
        Result r;
        r.qa_id = qa_id;
        r.relevance = -distance;  // callers see higher-is-better
        if (texts_it != texts_.end()) {
            auto pair_it = texts_it->second.find(qa_id);
            if (pair_it != texts_it->second.end()) {
                r.question = pair_it->second->question;
                r.answer = pair_it->second->answer;
            }
        }
        out.results.push_back(std::move(r));
    }
    out.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    return out;
}

std::string answer_to_json(const QaService::Answer& answer) {
    json j;
    j["query"] = answer.query;
    j["product_id"] = answer.product_id;
    auto& results = j["results"] = json::array();
    for (const auto& r : answer.results) {
        results.push_back({{"qa_id", r.qa_id},
                           {"question", r.question},
                           {"answer", r.answer},
                           {"relevance", r.relevance}});
    }
    j["latency_ms"] = answer.latency_ms;
    j["encoder_calls"] = answer.encoder_calls;
    return j.dump();
}

namespace {

void log_request(const std::string& product_id, std::size_t token_count, double latency_ms) {
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::fprintf(stderr, "%s product=%s tokens=%zu latency_ms=%.3f\n", stamp, product_id.c_str(),
                 token_count, latency_ms);
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

struct QaServer::Impl {
    httplib::Server server;
    mutable std::mutex mu;
    std::shared_ptr<const QaService> service;
    std::thread listener;
};

QaServer::QaServer() : impl_(std::make_unique<Impl>()) {
    impl_->server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        auto svc = snapshot();
        if (!svc) {
            reply_error(res, 503, "index not loaded yet");
            return;
        }
        json j;
        j["status"] = "ok";
        j["candidates"] = svc->idx().candidates.size();
        j["products"] = svc->num_products();
        j["dim"] = svc->idx().header.dim;
        j["alpha"] = svc->idx().header.alpha;
        j["encoder_fingerprint"] = hex64(svc->idx().header.encoder_fingerprint);
        j["vocab_fingerprint"] = hex64(svc->idx().header.vocab_fingerprint);
        res.set_content(j.dump(), "application/json");
    });

    impl_->server.Get("/v1/answers", [this](const httplib::Request& req, httplib::Response& res) {
        auto svc = snapshot();
        if (!svc) {
            reply_error(res, 503, "index not loaded yet");
            return;
        }
        if (!req.has_param("q")) {
            reply_error(res, 400, "missing query parameter 'q'");
            return;
        }
        if (!req.has_param("product_id")) {
            reply_error(res, 400, "missing query parameter 'product_id'");
            return;
        }
        std::string q = req.get_param_value("q");
        std::string product_id = req.get_param_value("product_id");
        std::size_t k = 3;
        if (req.has_param("k")) {
            try {
                long parsed = std::stol(req.get_param_value("k"));
                if (parsed < 1) throw std::invalid_argument("k");
                k = static_cast<std::size_t>(parsed);
            } catch (const std::exception&) {
                reply_error(res, 400, "parameter 'k' must be a positive integer");
                return;
            }
        }
        if (!svc->idx().by_product.contains(product_id)) {
            reply_error(res, 404, "unknown product_id '" + product_id + "'");
            return;
        }
        auto answer = svc->answer(product_id, q, k);
        res.set_content(answer_to_json(answer), "application/json");
        log_request(product_id, text::tokenize(q).size(), answer.latency_ms);
    });
}

QaServer::~QaServer() { stop(); }

std::shared_ptr<const QaService> QaServer::snapshot() const {
    std::lock_guard<std::mutex> lock(impl_->mu);
    return impl_->service;
}

void QaServer::set_service(std::shared_ptr<const QaService> service) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->service = std::move(service);
}

int QaServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error("serve: failed to bind any port on " + host);
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            throw Error("serve: failed to bind port " + std::to_string(port) + " on " + host);
        }
    }
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void QaServer::wait() {
    if (impl_->listener.joinable()) impl_->listener.join();
}

void QaServer::stop() {
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

}  // namespace semqa::service
