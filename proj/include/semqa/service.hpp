#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "semqa/corpus.hpp"
#include "semqa/encoder.hpp"
#include "semqa/index.hpp"

namespace semqa::service {

/// Immutable query-answering state: loaded index, encoder params, vocabulary
/// and the corpus texts candidates resolve to. Serving never touches training
/// or index-build code; everything here is shared read-only across requests.
class QaService {
  public:
    QaService(index::SemanticIndex idx, encoder::EncoderParams params, text::Vocabulary vocab,
              std::vector<corpus::Product> products);

    struct Result {
        std::string qa_id;
        std::string question;
        std::string answer;
        double relevance = 0.0;  // negated distance, higher is better
    };
    struct Answer {
        std::string query;
        std::string product_id;
        std::vector<Result> results;
        double latency_ms = 0.0;
        std::uint64_t encoder_calls = 0;
    };

    /// Encodes the query once and scans the product's candidates.
    /// Throws on unknown product_id.
    Answer answer(const std::string& product_id, std::string_view query, std::size_t k) const;

    const index::SemanticIndex& idx() const { return index_; }
    std::size_t num_products() const { return products_.size(); }

  private:
    index::SemanticIndex index_;
    encoder::EncoderParams params_;
    text::Vocabulary vocab_;
    std::vector<corpus::Product> products_;
    std::unordered_map<std::string, std::unordered_map<std::string, const corpus::CqaPair*>>
        texts_;
};

std::string answer_to_json(const QaService::Answer& answer);

/// HTTP front end. The server can start listening before artifacts finish
/// loading; /healthz and /v1/answers return 503 until set_service publishes
/// the loaded state. Strictly read-only: GET endpoints only.
class QaServer {
  public:
    QaServer();
    ~QaServer();

    /// Binds (port 0 picks a free port) and starts the accept loop in a
    /// background thread. Returns the bound port.
    int start(const std::string& host, int port);

    /// Publishes the loaded service; requests see it atomically.
    void set_service(std::shared_ptr<const QaService> service);

    void wait();
    void stop();

  private:
    std::shared_ptr<const QaService> snapshot() const;

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace semqa::service
