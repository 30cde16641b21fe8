#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace semqa::corpus {

/// One community question/answer pair of a product.
struct CqaPair {
    std::string qa_id;
    std::string question;
    std::string answer;

    bool operator==(const CqaPair&) const = default;
};

struct Product {
    std::string product_id;
    std::optional<std::string> title;
    std::vector<CqaPair> pairs;

    bool operator==(const Product&) const = default;

    const CqaPair* find_pair(const std::string& qa_id) const;
};

/// A logged user query on the instant-answer widget. teacher_qa_id, when
/// present, names the pair the existing syntactic system retrieved.
/// relevance_labels, when present, map qa_id -> true (relevant) / false.
struct UserQueryRecord {
    std::string query_id;
    std::string product_id;
    std::string query_text;
    std::optional<std::string> teacher_qa_id;
    std::optional<std::map<std::string, bool>> relevance_labels;

    bool operator==(const UserQueryRecord&) const = default;
};

struct CorpusStats {
    std::size_t num_products = 0;
    std::size_t num_pairs = 0;
    double avg_query_len = 0.0;
    double avg_cqa_question_len = 0.0;
    double vocab_overlap_pct = 0.0;
};

/// Parses one product per JSONL line. Rejects duplicate product ids,
/// duplicate qa_ids within a product, and blank question/answer texts,
/// always naming the offending line.
std::vector<Product> load_corpus(const std::string& path);
std::string corpus_to_jsonl(std::span<const Product> products);
void save_corpus(std::span<const Product> products, const std::string& path);

/// Parses the query log. Records referencing a product missing from
/// `known_products` are kept; a warning line is appended per offender
/// (logs may outlive the catalog).
std::vector<UserQueryRecord> load_query_log(
    const std::string& path, const std::unordered_set<std::string>* known_products = nullptr,
    std::vector<std::string>* warnings = nullptr);
std::string query_log_to_jsonl(std::span<const UserQueryRecord> records);
void save_query_log(std::span<const UserQueryRecord> records, const std::string& path);

struct SynthConfig {
    std::size_t num_products = 10;
    std::size_t pairs_per_product = 8;
    std::size_t num_queries = 50;
    double noise_level = 0.0;  // in [0, 1]
    std::uint64_t seed = 0;
};

/// Deterministic synthetic catalog + query log. Each product draws attribute
/// Q/A pairs from built-in templates; each query targets one attribute of one
/// product and is corrupted per noise_level (synonym substitution, character
/// swaps/deletions, truncation to <= 4 tokens). relevance_labels mark exactly
/// the pairs about the targeted attribute relevant, all others irrelevant.
std::pair<std::vector<Product>, std::vector<UserQueryRecord>> generate_synthetic_corpus(
    const SynthConfig& config);

CorpusStats corpus_stats(std::span<const Product> products,
                         std::span<const UserQueryRecord> queries);
std::string stats_to_json(const CorpusStats& stats);

/// True when the query text shares no token with the question/answer text of
/// any pair the record labels relevant. Tokenization is the module tokenizer.
bool zero_overlap_with_relevant(const UserQueryRecord& record, const Product& product);

/// Seeded partition of the query log; fraction lands in the second half.
std::pair<std::vector<UserQueryRecord>, std::vector<UserQueryRecord>> split_query_log(
    std::span<const UserQueryRecord> records, double test_fraction, std::uint64_t seed);

std::pair<std::vector<Product>, std::vector<Product>> split_products(
    std::span<const Product> products, double test_fraction, std::uint64_t seed);

}  // namespace semqa::corpus
