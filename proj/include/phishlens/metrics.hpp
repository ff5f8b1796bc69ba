#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "phishlens/corpus.hpp"

namespace phishlens {

// Confusion counts with phishing as the positive class, plus the derived
// scores. A metric whose denominator is zero is defined as 0.
struct EvalReport {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
};

Confusion confusion(std::span<const Label> predictions, std::span<const Label> truths);

EvalReport report(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn);
EvalReport report(const Confusion& counts);

// Percentages with two decimals, one metric per line.
std::string render_report(const EvalReport& r);

}  // namespace phishlens
