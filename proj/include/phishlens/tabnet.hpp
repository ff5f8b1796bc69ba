#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "phishlens/extractor.hpp"
#include "phishlens/random.hpp"

namespace phishlens {

// Fully connected network over the 11 numeric features: four hidden blocks
// (linear -> batch norm -> leaky ReLU -> dropout) and a final linear layer.
// The 16-wide output of the last hidden block doubles as the embedding the
// fusion model consumes.
struct MlpConfig {
    std::vector<Eigen::Index> dims{11, 1024, 2056, 512, 16, 2};
    std::vector<double> dropout{0.2, 0.2, 0.2, 0.3};
    double leaky_slope = 0.1;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    std::size_t hidden_blocks() const { return dims.size() - 2; }
    Eigen::Index input_dim() const { return dims.front(); }
    Eigen::Index output_dim() const { return dims.back(); }
    Eigen::Index embedding_dim() const { return dims[dims.size() - 2]; }
    void validate() const;
};

struct LinearLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

struct BatchNormLayer {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

struct MlpParams {
    MlpConfig config;
    std::vector<LinearLayer> linear;   // dims.size() - 1 layers
    std::vector<BatchNormLayer> bn;    // one per hidden block
};

struct BatchNormGrads {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
};

struct MlpGrads {
    std::vector<LinearLayer> linear;
    std::vector<BatchNormGrads> bn;
};

enum class RunMode { train, eval };

// Everything the backward pass needs; forward never mutates parameters,
// running-statistics updates are an explicit separate step.
struct MlpForwardContext {
    RunMode mode = RunMode::eval;
    struct Block {
        Eigen::MatrixXd input;       // batch x in
        Eigen::MatrixXd normalized;  // batch x out, post batch norm scale input
        Eigen::MatrixXd batch_mean;  // 1 x out (train mode)
        Eigen::MatrixXd batch_var;   // 1 x out, biased (train mode)
        Eigen::MatrixXd pre_act;     // batch x out, after batch norm
        Eigen::MatrixXd dropout_scale;  // batch x out, 0 or 1/(1-p)
        Eigen::MatrixXd output;      // batch x out, block output
    };
    std::vector<Block> blocks;
    Eigen::MatrixXd final_input;  // embedding fed to the last linear layer
    Eigen::MatrixXd logits;
};

struct MlpOutput {
    Eigen::MatrixXd logits;     // batch x output_dim
    Eigen::MatrixXd embedding;  // batch x embedding_dim
};

// Fan-in scaled uniform weights, zero biases, identity batch-norm state.
MlpParams mlp_init(const MlpConfig& config, std::uint64_t seed);
MlpParams mlp_init(std::uint64_t seed);  // production dimensions

MlpOutput mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x, RunMode mode,
                      std::uint64_t dropout_seed, MlpForwardContext* ctx = nullptr);

// Mean cross-entropy over softmax of the logits.
MlpGrads mlp_backward(const MlpParams& params, const MlpForwardContext& ctx,
                      std::span<const Label> labels);

// Entry point for fusion: gradient arrives at the embedding, the final
// linear layer is not part of that path.
MlpGrads mlp_backward_from_embedding(const MlpParams& params, const MlpForwardContext& ctx,
                                     const Eigen::MatrixXd& d_embedding);

// Momentum update of running mean/var from the captured batch statistics.
void update_running_stats(MlpParams& params, const MlpForwardContext& ctx);

MlpGrads make_zero_grads(const MlpParams& params);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const Label> labels);

// Per-feature standardization statistics, fitted on training rows only.
// Population convention; zero spread maps to std 1.
struct NormStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

NormStats fit_norm_stats(std::span<const FeatureRow> rows);
Eigen::MatrixXd numeric_matrix(std::span<const FeatureRow> rows);
Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const NormStats& stats);

struct TensorRef {
    double* data = nullptr;
    std::size_t size = 0;
};

std::vector<TensorRef> trainable_tensors(MlpParams& params);
std::vector<TensorRef> grad_tensors(MlpGrads& grads);

// Adaptive moment estimation with bias correction.
class Adam {
  public:
    Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);

  private:
    double lr_, beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace phishlens
