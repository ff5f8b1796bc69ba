#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace phishlens {

// Hashing text encoders: deterministic bucketed counts (FNV-1a 64 over
// UTF-8 bytes) followed by a trainable linear projection. They stand in for
// large pretrained encoders; externally computed embeddings can be plugged
// in through the precomputed file interface instead.

enum class EncoderKind : std::uint8_t { char_ngram, word_hash, precomputed };

std::string_view to_string(EncoderKind kind);

struct EncoderConfig {
    EncoderKind kind = EncoderKind::char_ngram;
    std::uint32_t buckets = 4096;
    std::uint32_t ngram_min = 2;  // char_ngram only
    std::uint32_t ngram_max = 4;
    std::uint32_t dim = 64;

    void validate() const;

    static EncoderConfig title_default() { return {EncoderKind::char_ngram, 4096, 2, 4, 64}; }
    static EncoderConfig content_default() { return {EncoderKind::word_hash, 16384, 1, 1, 64}; }
};

// Sparse counts ordered by bucket index.
using SparseCounts = std::vector<std::pair<std::uint32_t, double>>;

SparseCounts hash_features(std::string_view text, const EncoderConfig& config);
SparseCounts l2_normalize(SparseCounts counts);

struct TextEncoderParams {
    Eigen::MatrixXd projection;  // dim x buckets
    Eigen::VectorXd bias;        // dim
};

TextEncoderParams encoder_init(const EncoderConfig& config, std::uint64_t seed);

// leaky-ReLU(0.1)(projection . l2_normalize(counts) + bias)
Eigen::VectorXd encode(std::string_view text, const EncoderConfig& config,
                       const TextEncoderParams& params);

inline constexpr double kEncoderLeakySlope = 0.1;

// Forward over already-normalized counts; pre_act is what the gradient
// needs on the way back.
Eigen::VectorXd encode_counts(const SparseCounts& normalized, const EncoderConfig& config,
                              const TextEncoderParams& params,
                              Eigen::VectorXd* pre_act = nullptr);

struct EncoderGrads {
    Eigen::MatrixXd projection;
    Eigen::VectorXd bias;
};

EncoderGrads make_zero_grads(const TextEncoderParams& params);

// Accumulates the gradient of one sample into grads.
void encoder_backward(const SparseCounts& normalized, const Eigen::VectorXd& pre_act,
                      const Eigen::VectorXd& d_out, EncoderGrads& grads);

using PrecomputedMap = std::unordered_map<std::string, Eigen::VectorXd>;

// One record per line: id, tab, dim space-separated decimal floats.
PrecomputedMap load_precomputed(const std::filesystem::path& path, std::size_t expected_dim);

}  // namespace phishlens
