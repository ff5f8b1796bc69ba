#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phishlens/url.hpp"

namespace phishlens {

enum class Label : std::uint8_t { benign = 0, phishing = 1 };

std::string_view to_string(Label label);
std::optional<Label> label_from_string(std::string_view s);

struct LabeledDocument {
    std::string id;
    std::optional<std::string> url;
    std::string base_domain;  // derived from url; lowercase registrable domain
    std::string html;
    Label label = Label::benign;
};

struct ClassCounts {
    std::size_t benign = 0;
    std::size_t phishing = 0;
    std::size_t total() const { return benign + phishing; }
};

struct SplitFractions {
    double train = 0.7;
    double validation = 0.15;
    double test = 0.15;
};

struct CorpusSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
    SplitFractions fractions;
    bool stratified = true;
};

// One JSON object per line with keys exactly {id, url, label, html}.
// Rejects unknown keys, duplicate ids and unknown labels, reporting the
// offending line number.
std::vector<LabeledDocument> load_corpus(const std::filesystem::path& path,
                                         const DomainRules* rules = nullptr);
void save_corpus(const std::vector<LabeledDocument>& docs, const std::filesystem::path& path);

ClassCounts corpus_stats(const std::vector<LabeledDocument>& docs);

// Deterministic partition of the corpus ids. Train and validation sizes are
// rounded half up, the test part takes the remainder; with stratification
// the rounding is applied per class.
CorpusSplit split_corpus(const std::vector<LabeledDocument>& docs, SplitFractions fractions,
                         std::uint64_t seed, bool stratified = true);

void save_split(const CorpusSplit& split, const std::filesystem::path& path);
CorpusSplit load_split(const std::filesystem::path& path);

}  // namespace phishlens
