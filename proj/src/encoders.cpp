#include "phishlens/encoders.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "phishlens/random.hpp"
#include "phishlens/text.hpp"

namespace phishlens {

namespace {

bool is_token_char(unsigned char c) {
    // ASCII alphanumerics; bytes >= 0x80 are treated as word characters so
    // non-ASCII text forms tokens instead of disappearing.
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
}

void bump(std::map<std::uint32_t, double>& counts, std::string_view bytes,
          std::uint32_t buckets) {
    counts[static_cast<std::uint32_t>(fnv1a64(bytes) % buckets)] += 1.0;
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
    switch (kind) {
        case EncoderKind::char_ngram: return "char_ngram";
        case EncoderKind::word_hash: return "word_hash";
        case EncoderKind::precomputed: return "precomputed";
    }
    return "unknown";
}

void EncoderConfig::validate() const {
    if (buckets < 2) throw std::invalid_argument("encoder: need at least 2 buckets");
    if (dim < 1) throw std::invalid_argument("encoder: dimension must be positive");
    if (kind == EncoderKind::char_ngram && (ngram_min == 0 || ngram_min > ngram_max)) {
        throw std::invalid_argument("encoder: invalid n-gram range");
    }
}

SparseCounts hash_features(std::string_view text, const EncoderConfig& config) {
    if (config.kind == EncoderKind::precomputed) {
        throw std::invalid_argument("hash_features: precomputed encoders have no hashed input");
    }
    config.validate();
    const std::string normalized = collapse_whitespace(to_lower(text));
    std::map<std::uint32_t, double> counts;

    if (config.kind == EncoderKind::word_hash) {
        std::size_t pos = 0;
        while (pos < normalized.size()) {
            while (pos < normalized.size() &&
                   !is_token_char(static_cast<unsigned char>(normalized[pos]))) {
                ++pos;
            }
            std::size_t start = pos;
            while (pos < normalized.size() &&
                   is_token_char(static_cast<unsigned char>(normalized[pos]))) {
                ++pos;
            }
            if (pos > start) {
                bump(counts, std::string_view(normalized).substr(start, pos - start),
                     config.buckets);
            }
        }
    } else {
        // Character n-grams over code points, hashed over their UTF-8 bytes.
        std::vector<std::size_t> offsets;
        std::size_t pos = 0;
        while (pos < normalized.size()) {
            offsets.push_back(pos);
            pos += utf8_char_len(normalized, pos);
        }
        offsets.push_back(normalized.size());
        const std::size_t n_chars = offsets.size() - 1;
        for (std::size_t n = config.ngram_min; n <= config.ngram_max; ++n) {
            if (n > n_chars) break;
            for (std::size_t i = 0; i + n <= n_chars; ++i) {
                bump(counts,
                     std::string_view(normalized)
                         .substr(offsets[i], offsets[i + n] - offsets[i]),
                     config.buckets);
            }
        }
    }
    return SparseCounts(counts.begin(), counts.end());
}

SparseCounts l2_normalize(SparseCounts counts) {
    double sq = 0.0;
    for (const auto& [bucket, value] : counts) sq += value * value;
    if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& [bucket, value] : counts) value *= inv;
    }
    return counts;
}

TextEncoderParams encoder_init(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    TextEncoderParams params;
    params.projection.resize(config.dim, config.buckets);
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.buckets));
    for (Eigen::Index r = 0; r < params.projection.rows(); ++r) {
        for (Eigen::Index c = 0; c < params.projection.cols(); ++c) {
            params.projection(r, c) = (2.0 * uniform_unit(rng()) - 1.0) * bound;
        }
    }
    params.bias = Eigen::VectorXd::Zero(config.dim);
    return params;
}

Eigen::VectorXd encode_counts(const SparseCounts& normalized, const EncoderConfig& config,
                              const TextEncoderParams& params, Eigen::VectorXd* pre_act) {
    if (params.projection.rows() != static_cast<Eigen::Index>(config.dim) ||
        params.projection.cols() != static_cast<Eigen::Index>(config.buckets) ||
        params.bias.size() != static_cast<Eigen::Index>(config.dim)) {
        throw std::invalid_argument("encode: parameter shapes do not match config");
    }
    Eigen::VectorXd z = params.bias;
    for (const auto& [bucket, value] : normalized) {
        if (bucket >= config.buckets) {
            throw std::invalid_argument("encode: bucket index out of range");
        }
        z += params.projection.col(bucket) * value;
    }
    if (pre_act) *pre_act = z;
    return z.array().max(z.array() * kEncoderLeakySlope).matrix();
}

Eigen::VectorXd encode(std::string_view text, const EncoderConfig& config,
                       const TextEncoderParams& params) {
    return encode_counts(l2_normalize(hash_features(text, config)), config, params);
}

EncoderGrads make_zero_grads(const TextEncoderParams& params) {
    return {Eigen::MatrixXd::Zero(params.projection.rows(), params.projection.cols()),
            Eigen::VectorXd::Zero(params.bias.size())};
}

void encoder_backward(const SparseCounts& normalized, const Eigen::VectorXd& pre_act,
                      const Eigen::VectorXd& d_out, EncoderGrads& grads) {
    Eigen::VectorXd d_pre =
        d_out.array() *
        ((pre_act.array() > 0.0).cast<double>() * (1.0 - kEncoderLeakySlope) +
         kEncoderLeakySlope);
    grads.bias += d_pre;
    for (const auto& [bucket, value] : normalized) {
        grads.projection.col(bucket) += d_pre * value;
    }
}

PrecomputedMap load_precomputed(const std::filesystem::path& path, std::size_t expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path.string());
    PrecomputedMap map;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) -> void {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) fail("expected \"id<TAB>floats\"");
        std::string id = line.substr(0, tab);
        Eigen::VectorXd vec(static_cast<Eigen::Index>(expected_dim));
        std::size_t count = 0;
        const char* p = line.data() + tab + 1;
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            double value = 0.0;
            auto [next, ec] = std::from_chars(p, end, value);
            if (ec != std::errc()) fail("bad float value");
            if (count >= expected_dim) {
                fail("vector longer than expected dimension " + std::to_string(expected_dim));
            }
            vec[static_cast<Eigen::Index>(count++)] = value;
            p = next;
        }
        if (count != expected_dim) {
            fail("vector has " + std::to_string(count) + " values, expected " +
                 std::to_string(expected_dim));
        }
        if (!map.emplace(std::move(id), std::move(vec)).second) {
            fail("duplicate id \"" + line.substr(0, tab) + "\"");
        }
    }
    return map;
}

}  // namespace phishlens
