#include "phishlens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "phishlens/random.hpp"

namespace phishlens {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

// Sizes for one group of n elements: round half up on train and validation,
// remainder to test.
std::array<std::size_t, 3> part_sizes(std::size_t n, const SplitFractions& f) {
    std::size_t train = std::min(n, round_half_up(static_cast<double>(n) * f.train));
    std::size_t val = std::min(n - train, round_half_up(static_cast<double>(n) * f.validation));
    return {train, val, n - train - val};
}

}  // namespace

std::string_view to_string(Label label) {
    return label == Label::benign ? "benign" : "phishing";
}

std::optional<Label> label_from_string(std::string_view s) {
    if (s == "benign") return Label::benign;
    if (s == "phishing") return Label::phishing;
    return std::nullopt;
}

std::vector<LabeledDocument> load_corpus(const std::filesystem::path& path,
                                         const DomainRules* rules) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());

    std::vector<LabeledDocument> docs;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            fail(path, line_no, "malformed record (expected a JSON object)");
        }
        for (const auto& [key, value] : record.items()) {
            if (key != "id" && key != "url" && key != "label" && key != "html") {
                fail(path, line_no, "unknown key \"" + key + "\"");
            }
        }
        if (!record.contains("id") || !record["id"].is_string()) {
            fail(path, line_no, "missing or non-string \"id\"");
        }
        if (!record.contains("label") || !record["label"].is_string()) {
            fail(path, line_no, "missing or non-string \"label\"");
        }
        if (!record.contains("html") || !record["html"].is_string()) {
            fail(path, line_no, "missing or non-string \"html\"");
        }

        LabeledDocument doc;
        doc.id = record["id"].get<std::string>();
        if (doc.id.empty()) fail(path, line_no, "empty id");
        if (!seen_ids.insert(doc.id).second) {
            fail(path, line_no, "duplicate id \"" + doc.id + "\"");
        }
        auto label = label_from_string(record["label"].get<std::string>());
        if (!label) {
            fail(path, line_no,
                 "unknown label \"" + record["label"].get<std::string>() + "\"");
        }
        doc.label = *label;
        doc.html = record["html"].get<std::string>();
        if (record.contains("url") && !record["url"].is_null()) {
            if (!record["url"].is_string()) fail(path, line_no, "non-string \"url\"");
            doc.url = record["url"].get<std::string>();
            doc.base_domain = base_domain_of(*doc.url, rules);
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void save_corpus(const std::vector<LabeledDocument>& docs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path.string());
    for (const auto& doc : docs) {
        json record;
        record["id"] = doc.id;
        record["url"] = doc.url ? json(*doc.url) : json(nullptr);
        record["label"] = std::string(to_string(doc.label));
        record["html"] = doc.html;
        out << record.dump() << '\n';
    }
    if (!out) throw std::runtime_error("failed writing corpus file: " + path.string());
}

ClassCounts corpus_stats(const std::vector<LabeledDocument>& docs) {
    ClassCounts counts;
    for (const auto& doc : docs) {
        (doc.label == Label::benign ? counts.benign : counts.phishing) += 1;
    }
    return counts;
}

CorpusSplit split_corpus(const std::vector<LabeledDocument>& docs, SplitFractions fractions,
                         std::uint64_t seed, bool stratified) {
    const double sum = fractions.train + fractions.validation + fractions.test;
    if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
        std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must be non-negative and sum to 1");
    }

    CorpusSplit split;
    split.seed = seed;
    split.fractions = fractions;
    split.stratified = stratified;

    std::mt19937_64 rng(seed);
    auto assign_group = [&](const std::vector<std::size_t>& group) {
        std::vector<std::size_t> order = group;
        seeded_shuffle(order, rng);
        auto [n_train, n_val, n_test] = part_sizes(order.size(), fractions);
        for (std::size_t i = 0; i < order.size(); ++i) {
            auto& part = i < n_train              ? split.train
                         : i < n_train + n_val    ? split.validation
                                                  : split.test;
            part.push_back(docs[order[i]].id);
        }
    };

    if (stratified) {
        std::vector<std::size_t> benign, phishing;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            (docs[i].label == Label::benign ? benign : phishing).push_back(i);
        }
        assign_group(benign);
        assign_group(phishing);
    } else {
        std::vector<std::size_t> all(docs.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        assign_group(all);
    }

    auto require_nonempty = [&](double fraction, const std::vector<std::string>& part,
                                const char* name) {
        if (fraction > 0 && !docs.empty() && part.empty()) {
            throw std::invalid_argument(std::string("corpus too small: the ") + name +
                                        " part received no documents");
        }
    };
    require_nonempty(fractions.train, split.train, "train");
    require_nonempty(fractions.validation, split.validation, "validation");
    require_nonempty(fractions.test, split.test, "test");
    return split;
}

void save_split(const CorpusSplit& split, const std::filesystem::path& path) {
    json doc;
    doc["seed"] = split.seed;
    doc["fractions"] = {split.fractions.train, split.fractions.validation, split.fractions.test};
    doc["stratified"] = split.stratified;
    doc["train"] = split.train;
    doc["validation"] = split.validation;
    doc["test"] = split.test;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write split file: " + path.string());
    out << doc.dump(2) << '\n';
}

CorpusSplit load_split(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open split file: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw std::runtime_error("malformed split file: " + path.string());
    }
    CorpusSplit split;
    try {
        split.seed = doc.at("seed").get<std::uint64_t>();
        auto f = doc.at("fractions");
        split.fractions = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
        split.stratified = doc.at("stratified").get<bool>();
        split.train = doc.at("train").get<std::vector<std::string>>();
        split.validation = doc.at("validation").get<std::vector<std::string>>();
        split.test = doc.at("test").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed split file " + path.string() + ": " + e.what());
    }
    return split;
}

}  // namespace phishlens
