#include "semqa/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "semqa/bin_io.hpp"
#include "semqa/error.hpp"
#include "semqa/rng.hpp"
#include "semqa/text.hpp"

namespace semqa::corpus {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

std::string padded_id(char prefix, std::size_t n, std::size_t width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, static_cast<int>(width), n);
    return buf;
}

std::size_t digits(std::size_t n) {
    std::size_t d = 1;
    while (n >= 10) {
        n /= 10;
        ++d;
    }
    return d;
}

json parse_line(const std::string& line, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw Error("parse error at line " + std::to_string(line_no) + ": " + e.what());
    }
}

std::string require_string(const json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw Error("parse error at line " + std::to_string(line_no) + ": missing string field '" +
                    key + "'");
    }
    return j[key].get<std::string>();
}

// ---------------------------------------------------------------------------
// Synthetic attribute templates. Every question and noise-0 query template
// contains the attribute head token, so clean queries always token-overlap
// their relevant pair; answer paraphrases deliberately omit it.
// ---------------------------------------------------------------------------

struct AttributeSpec {
    const char* head;
    const char* synonym;
    std::vector<const char*> questions;
    std::vector<const char*> answers_with;
    std::vector<const char*> answers_para;
    std::vector<const char*> queries;
    std::vector<const char*> values;
};

const std::vector<AttributeSpec>& attribute_table() {
    static const std::vector<AttributeSpec> table = {
        {"battery",
         "power",
         {"How long does the battery last?", "What is the battery life on a single charge?",
          "Does the battery drain fast?"},
         {"The battery lasts about {V} hours.", "Battery backup is close to {V} hours."},
         {"You get roughly {V} hours before it needs charging again.",
          "It keeps going for nearly {V} hours of continuous use."},
         {"battery life", "battery backup", "battery hours", "how long battery", "battery"},
         {"6", "8", "10", "12", "15", "18", "20", "24", "30", "36", "48"}},
        {"material",
         "fabric",
         {"What material is this made of?", "Which material is used here?",
          "Is the material durable?"},
         {"The material is {V}.", "It uses genuine {V} material throughout."},
         {"Made of pure {V}.", "It is crafted from high grade {V}."},
         {"material type", "which material", "made of which material", "material"},
         {"cotton", "leather", "steel", "aluminium", "plastic", "bamboo", "ceramic", "rubber",
          "canvas", "silk", "wool"}},
        {"weight",
         "mass",
         {"What is the weight of this item?", "How much weight does it add to a bag?",
          "Is the weight manageable for travel?"},
         {"The weight is {V} grams.", "Net weight comes to {V} grams."},
         {"It tips the scale at {V} grams.", "Expect around {V} grams on a kitchen scale."},
         {"total weight", "item weight", "weight in grams", "weight"},
         {"120", "250", "300", "450", "500", "750", "900", "1200", "1500", "2000"}},
        {"size",
         "dimensions",
         {"Is this available in a bigger size?", "What size variants are sold?",
          "Does the size run small or true?"},
         {"The size options are {V} and {V2}.", "Every size from {V} to {V2} is stocked."},
         {"You can pick between {V} and {V2}.", "Variants go from {V} up to {V2}."},
         {"size options", "bigger size", "size variants", "size"},
         {"small", "medium", "large", "xl", "xxl", "38", "40", "42", "44"}},
        {"color",
         "shade",
         {"What color choices does this come in?", "Is the color shown in the picture accurate?",
          "Will the color fade after washing?"},
         {"The color is {V}.", "It comes in {V} and {V2} color finishes."},
         {"Only {V} and {V2} are listed right now.", "Expect a deep {V} tone in person."},
         {"color choices", "which color", "accurate color", "color"},
         {"black", "white", "red", "blue", "green", "grey", "navy", "maroon", "beige", "teal"}},
        {"warranty",
         "guarantee",
         {"Does it come with a warranty?", "What is the warranty period?",
          "Is the warranty valid without a bill?"},
         {"It has a {V} year warranty.", "Warranty coverage runs for {V} years."},
         {"The maker covers defects for {V} years.",
          "You are protected for {V} years from purchase."},
         {"warranty period", "warranty years", "warranty coverage", "warranty"},
         {"1", "2", "3", "5"}},
        {"compatible",
         "supported",
         {"Is it compatible with {V}?", "Is this compatible with every {V} model?",
          "Are older {V} devices compatible too?"},
         {"Yes it is fully compatible with {V}.", "Compatible with any recent {V} build."},
         {"Works without issues on {V}.", "Pairs fine with all current {V} hardware."},
         {"compatible", "compatible with {V}", "{V} compatible"},
         {"android", "iphone", "windows", "macbook", "ps5", "xbox", "linux", "chromebook"}},
        {"waterproof",
         "watertight",
         {"Is this waterproof?", "Is it waterproof enough for swimming?",
          "How deep can the waterproof seal go?"},
         {"Yes it is waterproof up to {V} meters.", "The waterproof rating holds to {V} meters."},
         {"Rain and quick dips will not harm it.",
          "It shrugs off splashes but avoid full submersion."},
         {"waterproof rating", "is it waterproof", "waterproof"},
         {"1", "2", "3", "5"}},
        {"capacity",
         "volume",
         {"What is the storage capacity?", "How much capacity does it offer?",
          "Is the stated capacity real in practice?"},
         {"The capacity is {V} GB.", "Rated capacity stands at {V} GB."},
         {"You get {V} GB of usable space.", "About {V} GB remains free after setup."},
         {"storage capacity", "usable capacity", "real capacity", "capacity"},
         {"32", "64", "128", "256", "512"}},
        {"screen",
         "display",
         {"How big is the screen?", "What kind of screen panel is fitted?",
          "Does the screen scratch easily?"},
         {"The screen measures {V} inches.", "It sports a {V} inch screen."},
         {"The display spans {V} inches diagonally.",
          "Viewing area is {V} inches corner to corner."},
         {"screen panel", "big screen", "screen inches", "screen"},
         {"5", "6", "7", "10", "13", "15", "24", "27", "32"}},
    };
    return table;
}

const std::vector<const char*>& category_table() {
    static const std::vector<const char*> cats = {"phone",   "laptop",  "backpack",   "smartwatch",
                                                  "speaker", "camera",  "jacket",     "blender",
                                                  "monitor", "headset", "powerstrip", "kettle"};
    return cats;
}

std::string fill(std::string tpl, const std::string& v1, const std::string& v2) {
    auto replace_all = [&](const std::string& key, const std::string& val) {
        std::size_t pos = 0;
        while ((pos = tpl.find(key, pos)) != std::string::npos) {
            tpl.replace(pos, key.size(), val);
            pos += val.size();
        }
    };
    replace_all("{V2}", v2);
    replace_all("{V}", v1);
    return tpl;
}

bool all_ascii(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool all_digits(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

// One random character swap or deletion; numbers and short tokens are left
// alone so corruption always yields a plausible misspelling.
std::string corrupt_token(const std::string& tok, Rng& rng) {
    if (tok.size() < 3 || all_digits(tok) || !all_ascii(tok)) return tok;
    std::string out = tok;
    if (rng.chance(0.7)) {
        std::size_t i = static_cast<std::size_t>(rng.below(out.size() - 1));
        std::swap(out[i], out[i + 1]);
    } else {
        std::size_t i = static_cast<std::size_t>(rng.below(out.size()));
        out.erase(i, 1);
    }
    return out;
}

}  // namespace

const CqaPair* Product::find_pair(const std::string& qa_id) const {
    for (const auto& p : pairs) {
        if (p.qa_id == qa_id) return &p;
    }
    return nullptr;
}

std::vector<Product> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);

    std::vector<Product> products;
    std::unordered_set<std::string> seen_products;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = parse_line(line, line_no);

        Product p;
        p.product_id = require_string(j, "product_id", line_no);
        if (p.product_id.empty()) {
            throw Error("parse error at line " + std::to_string(line_no) + ": empty product_id");
        }
        if (!seen_products.insert(p.product_id).second) {
            throw Error("duplicate product_id '" + p.product_id + "' at line " +
                        std::to_string(line_no));
        }
        if (j.contains("title") && j["title"].is_string()) {
            p.title = j["title"].get<std::string>();
        }
        std::unordered_set<std::string> seen_qa;
        if (j.contains("pairs")) {
            if (!j["pairs"].is_array()) {
                throw Error("parse error at line " + std::to_string(line_no) +
                            ": 'pairs' must be an array");
            }
            for (const auto& pj : j["pairs"]) {
                CqaPair pair;
                pair.qa_id = require_string(pj, "qa_id", line_no);
                pair.question = trim(require_string(pj, "question", line_no));
                pair.answer = trim(require_string(pj, "answer", line_no));
                if (pair.question.empty() || pair.answer.empty()) {
                    throw Error("parse error at line " + std::to_string(line_no) + ": pair '" +
                                pair.qa_id + "' has empty question or answer");
                }
                if (!seen_qa.insert(pair.qa_id).second) {
                    throw Error("duplicate qa_id '" + pair.qa_id + "' in product '" +
                                p.product_id + "' at line " + std::to_string(line_no));
                }
                p.pairs.push_back(std::move(pair));
            }
        }
        products.push_back(std::move(p));
    }
    return products;
}

std::string corpus_to_jsonl(std::span<const Product> products) {
    std::string out;
    for (const auto& p : products) {
        json j;
        j["product_id"] = p.product_id;
        if (p.title) j["title"] = *p.title;
        j["pairs"] = json::array();
        for (const auto& pair : p.pairs) {
            j["pairs"].push_back(
                {{"qa_id", pair.qa_id}, {"question", pair.question}, {"answer", pair.answer}});
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_corpus(std::span<const Product> products, const std::string& path) {
    bin::write_file(path, corpus_to_jsonl(products));
}

std::vector<UserQueryRecord> load_query_log(const std::string& path,
                                            const std::unordered_set<std::string>* known_products,
                                            std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);

    std::vector<UserQueryRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = parse_line(line, line_no);

        UserQueryRecord r;
        r.query_id = require_string(j, "query_id", line_no);
        r.product_id = require_string(j, "product_id", line_no);
        r.query_text = require_string(j, "query", line_no);
        if (j.contains("teacher_qa_id") && j["teacher_qa_id"].is_string()) {
            r.teacher_qa_id = j["teacher_qa_id"].get<std::string>();
        }
        if (j.contains("labels") && !j["labels"].is_null()) {
            if (!j["labels"].is_object()) {
                throw Error("parse error at line " + std::to_string(line_no) +
                            ": 'labels' must be an object");
            }
            std::map<std::string, bool> labels;
            for (const auto& [qa_id, val] : j["labels"].items()) {
                std::string s = val.is_string() ? val.get<std::string>() : "";
                if (s != "relevant" && s != "irrelevant") {
                    throw Error("parse error at line " + std::to_string(line_no) +
                                ": label for '" + qa_id + "' must be relevant|irrelevant");
                }
                labels[qa_id] = (s == "relevant");
            }
            r.relevance_labels = std::move(labels);
        }
        if (known_products && warnings && !known_products->contains(r.product_id)) {
            warnings->push_back("line " + std::to_string(line_no) + ": unknown product_id '" +
                                r.product_id + "' in query '" + r.query_id + "'");
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::string query_log_to_jsonl(std::span<const UserQueryRecord> records) {
    std::string out;
    for (const auto& r : records) {
        json j;
        j["query_id"] = r.query_id;
        j["product_id"] = r.product_id;
        j["query"] = r.query_text;
        if (r.teacher_qa_id) j["teacher_qa_id"] = *r.teacher_qa_id;
        if (r.relevance_labels) {
            json labels = json::object();
            for (const auto& [qa_id, rel] : *r.relevance_labels) {
                labels[qa_id] = rel ? "relevant" : "irrelevant";
            }
            j["labels"] = labels;
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_query_log(std::span<const UserQueryRecord> records, const std::string& path) {
    bin::write_file(path, query_log_to_jsonl(records));
}

std::pair<std::vector<Product>, std::vector<UserQueryRecord>> generate_synthetic_corpus(
    const SynthConfig& config) {
    if (config.num_products < 1) throw Error("gen-synthetic: num_products must be >= 1");
    if (config.pairs_per_product < 2) throw Error("gen-synthetic: pairs_per_product must be >= 2");
    if (config.noise_level < 0.0 || config.noise_level > 1.0) {
        throw Error("gen-synthetic: noise_level must be in [0, 1]");
    }

    const auto& attrs = attribute_table();
    Rng rng(config.seed);
    const double noise = config.noise_level;

    std::size_t pid_width = std::max<std::size_t>(4, digits(config.num_products));
    std::size_t qa_width = std::max<std::size_t>(2, digits(config.pairs_per_product));
    std::size_t uid_width = std::max<std::size_t>(5, digits(std::max<std::size_t>(1, config.num_queries)));

    std::vector<Product> products;
    products.reserve(config.num_products);
    // Per product: which attribute each pair is about, and the value it uses.
    std::vector<std::vector<std::size_t>> pair_attr(config.num_products);
    std::vector<std::unordered_map<std::size_t, std::pair<std::string, std::string>>> attr_values(
        config.num_products);

    for (std::size_t pi = 0; pi < config.num_products; ++pi) {
        Product prod;
        prod.product_id = padded_id('p', pi + 1, pid_width);
        prod.title = std::string(rng.pick(category_table())) + " model " +
                     std::to_string(1 + rng.below(99));

        std::vector<std::size_t> order(attrs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        for (std::size_t k = 0; k < config.pairs_per_product; ++k) {
            std::size_t ai = order[k % attrs.size()];
            const AttributeSpec& a = attrs[ai];

            auto& vals = attr_values[pi];
            if (!vals.contains(ai)) {
                std::string v1 = rng.pick(a.values);
                std::string v2 = rng.pick(a.values);
                while (a.values.size() > 1 && v2 == v1) v2 = rng.pick(a.values);
                vals.emplace(ai, std::make_pair(v1, v2));
            }
            const auto& [v1, v2] = vals.at(ai);

            CqaPair pair;
            pair.qa_id = padded_id('q', k + 1, qa_width);
            pair.question = fill(rng.pick(a.questions), v1, v2);
            pair.answer = rng.chance(0.5) ? fill(rng.pick(a.answers_with), v1, v2)
                                          : fill(rng.pick(a.answers_para), v1, v2);
            prod.pairs.push_back(std::move(pair));
            pair_attr[pi].push_back(ai);
        }
        products.push_back(std::move(prod));
    }

    std::vector<UserQueryRecord> queries;
    queries.reserve(config.num_queries);
    for (std::size_t qi = 0; qi < config.num_queries; ++qi) {
        std::size_t pi = static_cast<std::size_t>(rng.below(config.num_products));
        const auto& attrs_here = pair_attr[pi];
        std::size_t ai = attrs_here[rng.below(attrs_here.size())];
        const AttributeSpec& a = attrs[ai];
        const auto& [v1, v2] = attr_values[pi].at(ai);

        std::vector<std::string> tokens = text::tokenize(fill(rng.pick(a.queries), v1, v2));

        // Corruption pipeline: synonym substitution, character edits, truncation.
        for (auto& tok : tokens) {
            if (tok == a.head && rng.chance(0.55 * noise)) tok = a.synonym;
        }
        for (auto& tok : tokens) {
            if (rng.chance(0.35 * noise)) tok = corrupt_token(tok, rng);
        }
        if (tokens.size() > 1 && rng.chance(0.4 * noise)) {
            std::size_t keep = 1 + static_cast<std::size_t>(rng.below(4));
            if (keep < tokens.size()) tokens.resize(keep);
        }

        std::string query_text;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) query_text += ' ';
            query_text += tokens[i];
        }

        UserQueryRecord r;
        r.query_id = padded_id('u', qi + 1, uid_width);
        r.product_id = products[pi].product_id;
        r.query_text = std::move(query_text);
        std::map<std::string, bool> labels;
        for (std::size_t k = 0; k < products[pi].pairs.size(); ++k) {
            labels[products[pi].pairs[k].qa_id] = (pair_attr[pi][k] == ai);
        }
        r.relevance_labels = std::move(labels);
        queries.push_back(std::move(r));
    }
    return {std::move(products), std::move(queries)};
}

CorpusStats corpus_stats(std::span<const Product> products,
                         std::span<const UserQueryRecord> queries) {
    CorpusStats s;
    s.num_products = products.size();

    std::unordered_set<std::string> cqa_vocab;
    std::size_t question_tokens = 0;
    for (const auto& p : products) {
        s.num_pairs += p.pairs.size();
        for (const auto& pair : p.pairs) {
            auto qt = text::tokenize(pair.question);
            question_tokens += qt.size();
            for (auto& t : qt) cqa_vocab.insert(std::move(t));
            for (auto& t : text::tokenize(pair.answer)) cqa_vocab.insert(std::move(t));
        }
    }
    if (s.num_pairs > 0) {
        s.avg_cqa_question_len = static_cast<double>(question_tokens) /
                                 static_cast<double>(s.num_pairs);
    }

    std::unordered_set<std::string> query_vocab;
    std::size_t query_tokens = 0;
    for (const auto& q : queries) {
        auto qt = text::tokenize(q.query_text);
        query_tokens += qt.size();
        for (auto& t : qt) query_vocab.insert(std::move(t));
    }
    if (!queries.empty()) {
        s.avg_query_len = static_cast<double>(query_tokens) / static_cast<double>(queries.size());
    }
    if (!query_vocab.empty()) {
        std::size_t shared = 0;
        for (const auto& t : query_vocab) {
            if (cqa_vocab.contains(t)) ++shared;
        }
        s.vocab_overlap_pct = 100.0 * static_cast<double>(shared) /
                              static_cast<double>(query_vocab.size());
    }
    return s;
}

std::string stats_to_json(const CorpusStats& stats) {
    json j;
    j["num_products"] = stats.num_products;
    j["num_pairs"] = stats.num_pairs;
    j["avg_query_len"] = stats.avg_query_len;
    j["avg_cqa_question_len"] = stats.avg_cqa_question_len;
    j["vocab_overlap_pct"] = stats.vocab_overlap_pct;
    return j.dump(2) + "\n";
}

bool zero_overlap_with_relevant(const UserQueryRecord& record, const Product& product) {
    if (!record.relevance_labels) return false;
    auto query_tokens = text::tokenize(record.query_text);
    std::unordered_set<std::string> qset(query_tokens.begin(), query_tokens.end());
    bool any_relevant = false;
    for (const auto& [qa_id, relevant] : *record.relevance_labels) {
        if (!relevant) continue;
        const CqaPair* pair = product.find_pair(qa_id);
        if (!pair) continue;
        any_relevant = true;
        for (const auto& t : text::tokenize(pair->question)) {
            if (qset.contains(t)) return false;
        }
        for (const auto& t : text::tokenize(pair->answer)) {
            if (qset.contains(t)) return false;
        }
    }
    return any_relevant;
}

namespace {

std::vector<std::size_t> test_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::size_t test_count = static_cast<std::size_t>(test_fraction * static_cast<double>(n) + 0.5);
    idx.resize(std::min(test_count, n));
    return idx;
}

}  // namespace

std::pair<std::vector<UserQueryRecord>, std::vector<UserQueryRecord>> split_query_log(
    std::span<const UserQueryRecord> records, double test_fraction, std::uint64_t seed) {
    auto test_idx = test_indices(records.size(), test_fraction, seed);
    std::unordered_set<std::size_t> in_test(test_idx.begin(), test_idx.end());
    std::pair<std::vector<UserQueryRecord>, std::vector<UserQueryRecord>> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        (in_test.contains(i) ? out.second : out.first).push_back(records[i]);
    }
    return out;
}

std::pair<std::vector<Product>, std::vector<Product>> split_products(
    std::span<const Product> products, double test_fraction, std::uint64_t seed) {
    auto test_idx = test_indices(products.size(), test_fraction, seed);
    std::unordered_set<std::size_t> in_test(test_idx.begin(), test_idx.end());
    std::pair<std::vector<Product>, std::vector<Product>> out;
    for (std::size_t i = 0; i < products.size(); ++i) {
        (in_test.contains(i) ? out.second : out.first).push_back(products[i]);
    }
    return out;
}

}  // namespace semqa::corpus
