#include "phishlens/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace phishlens {

Confusion confusion(std::span<const Label> predictions, std::span<const Label> truths) {
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("confusion: prediction/truth length mismatch");
    }
    if (predictions.empty()) {
        throw std::invalid_argument("confusion: empty input");
    }
    Confusion c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred_phish = predictions[i] == Label::phishing;
        const bool true_phish = truths[i] == Label::phishing;
        if (pred_phish && true_phish) ++c.tp;
        else if (pred_phish && !true_phish) ++c.fp;
        else if (!pred_phish && !true_phish) ++c.tn;
        else ++c.fn;
    }
    return c;
}

EvalReport report(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
    EvalReport r;
    r.tp = tp;
    r.fp = fp;
    r.tn = tn;
    r.fn = fn;
    const std::uint64_t total = r.total();
    if (total == 0) throw std::invalid_argument("report: all confusion counts are zero");

    r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
    r.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = (r.precision + r.recall > 0.0)
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

EvalReport report(const Confusion& c) {
    return report(c.tp, c.fp, c.tn, c.fn);
}

std::string render_report(const EvalReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "tp=%llu fp=%llu tn=%llu fn=%llu\n"
                  "accuracy:  %.2f%%\n"
                  "precision: %.2f%%\n"
                  "recall:    %.2f%%\n"
                  "f1:        %.2f%%\n",
                  static_cast<unsigned long long>(r.tp), static_cast<unsigned long long>(r.fp),
                  static_cast<unsigned long long>(r.tn), static_cast<unsigned long long>(r.fn),
                  r.accuracy * 100.0, r.precision * 100.0, r.recall * 100.0, r.f1 * 100.0);
    return buf;
}

}  // namespace phishlens
