#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phishlens/corpus.hpp"
#include "phishlens/encoders.hpp"
#include "phishlens/extractor.hpp"
#include "phishlens/metrics.hpp"
#include "phishlens/tabnet.hpp"

namespace phishlens {

// Which embedding streams feed the classification head. Disabled streams
// contribute nothing to the fused vector (empty concatenation).
struct StreamMask {
    bool mlp = true;
    bool title = true;
    bool content = true;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::size_t early_stop_patience = 5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool stratified = true;
    SplitFractions fractions;

    void validate() const;
};

// Flat key=value text file mapping onto TrainConfig fields.
TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const TrainConfig& config, const std::filesystem::path& path);

struct FusedConfig {
    MlpConfig mlp;
    EncoderConfig title_enc = EncoderConfig::title_default();
    EncoderConfig content_enc = EncoderConfig::content_default();
    StreamMask mask;

    Eigen::Index fused_dim() const;
};

struct FusedModel {
    FusedConfig config;
    MlpParams mlp;
    NormStats norm;
    TextEncoderParams title_params;    // unused when masked off or precomputed
    TextEncoderParams content_params;
    LinearLayer head;                  // 2 x fused_dim
    std::uint64_t seed = 0;
    TrainConfig train_config;

    // Embedding maps for precomputed streams, keyed by document id.
    std::shared_ptr<PrecomputedMap> title_pre;
    std::shared_ptr<PrecomputedMap> content_pre;
    std::string title_pre_path;
    std::string content_pre_path;
};

FusedModel fused_init(const FusedConfig& config, std::uint64_t seed);

struct Prediction {
    Label label = Label::benign;  // ties go to benign
    double score = 0.0;           // phishing probability
};

struct FusedForwardResult {
    Eigen::Vector2d logits;
    Eigen::VectorXd fused;  // concatenated embedding
};

FusedForwardResult fused_forward(const FusedModel& model, const FeatureRow& row, RunMode mode,
                                 std::uint64_t dropout_seed = 0);

Prediction predict(const FusedModel& model, const FeatureRow& row);
Prediction predict_document(const FusedModel& model, const LabeledDocument& doc,
                            std::size_t cap_chars = kDefaultContentCap,
                            const DomainRules* rules = nullptr);

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
};

struct TrainResult {
    FusedModel model;
    std::vector<EpochStats> history;
};

// Joint end-to-end training of the network, both encoders and the head.
// Early stopping restores the parameters of the best validation F1 epoch.
TrainResult train_fused(const std::vector<FeatureRow>& rows, const CorpusSplit& split,
                        const TrainConfig& config, const FusedConfig& fused_config = {});

EvalReport evaluate(const FusedModel& model, const std::vector<FeatureRow>& rows,
                    const std::vector<std::string>& ids);

struct AblationRow {
    std::string name;
    StreamMask mask;
    EvalReport test;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    std::string render() const;          // aligned text
    std::string to_json_lines() const;   // machine-readable records
};

// Trains {numeric-only, title-only, content-only, fused} under the same
// config and seed and evaluates each on the test part.
AblationTable ablate(const std::vector<FeatureRow>& rows, const CorpusSplit& split,
                     const TrainConfig& config, const FusedConfig& fused_config = {});

// Binary checkpoint: magic, format version, JSON manifest, then raw
// little-endian float32 tensor blobs in manifest order.
void save_model(const FusedModel& model, const std::filesystem::path& path);
FusedModel load_model(const std::filesystem::path& path);

}  // namespace phishlens
