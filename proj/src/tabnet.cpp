#include "phishlens/tabnet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace phishlens {

namespace {

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

void fill_fan_in_uniform(Eigen::MatrixXd& w, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            w(r, c) = (2.0 * uniform_unit(rng()) - 1.0) * bound;
        }
    }
}

Eigen::MatrixXd dropout_scale_matrix(Eigen::Index rows, Eigen::Index cols, double rate,
                                     std::mt19937_64& rng) {
    Eigen::MatrixXd scale(rows, cols);
    if (rate <= 0.0) {
        scale.setOnes();
        return scale;
    }
    const double inv_keep = 1.0 / (1.0 - rate);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            scale(r, c) = uniform_unit(rng()) < rate ? 0.0 : inv_keep;
        }
    }
    return scale;
}

// 1 where positive, leaky slope elsewhere.
Eigen::ArrayXXd leaky_gate(const Eigen::MatrixXd& pre_act, double slope) {
    return (pre_act.array() > 0.0).cast<double>() * (1.0 - slope) + slope;
}

}  // namespace

void MlpConfig::validate() const {
    if (dims.size() < 3) throw std::invalid_argument("mlp: need at least one hidden layer");
    for (auto d : dims) {
        if (d <= 0) throw std::invalid_argument("mlp: non-positive layer width");
    }
    if (dropout.size() != hidden_blocks()) {
        throw std::invalid_argument("mlp: dropout rate count must match hidden blocks");
    }
    for (double p : dropout) {
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("mlp: dropout rate out of [0,1)");
    }
    if (bn_eps <= 0.0) throw std::invalid_argument("mlp: bn epsilon must be positive");
}

MlpParams mlp_init(const MlpConfig& config, std::uint64_t seed) {
    config.validate();
    MlpParams params;
    params.config = config;
    std::mt19937_64 rng(mix_seed(seed, 0));
    for (std::size_t i = 0; i + 1 < config.dims.size(); ++i) {
        LinearLayer layer;
        layer.weight.resize(config.dims[i + 1], config.dims[i]);
        fill_fan_in_uniform(layer.weight, rng);
        layer.bias = Eigen::VectorXd::Zero(config.dims[i + 1]);
        params.linear.push_back(std::move(layer));
    }
    for (std::size_t i = 0; i < config.hidden_blocks(); ++i) {
        BatchNormLayer bn;
        const Eigen::Index width = config.dims[i + 1];
        bn.gamma = Eigen::VectorXd::Ones(width);
        bn.beta = Eigen::VectorXd::Zero(width);
        bn.running_mean = Eigen::VectorXd::Zero(width);
        bn.running_var = Eigen::VectorXd::Ones(width);
        params.bn.push_back(std::move(bn));
    }
    return params;
}

MlpParams mlp_init(std::uint64_t seed) {
    return mlp_init(MlpConfig{}, seed);
}

MlpOutput mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x, RunMode mode,
                      std::uint64_t dropout_seed, MlpForwardContext* ctx) {
    const MlpConfig& cfg = params.config;
    if (x.cols() != cfg.input_dim()) {
        throw std::invalid_argument("mlp_forward: input width mismatch");
    }
    if (x.rows() < 1) throw std::invalid_argument("mlp_forward: empty batch");
    if (mode == RunMode::train && x.rows() < 2) {
        throw std::invalid_argument("mlp_forward: train mode needs batch size >= 2");
    }

    MlpForwardContext local;
    MlpForwardContext& c = ctx ? *ctx : local;
    c = MlpForwardContext{};
    c.mode = mode;
    c.blocks.resize(cfg.hidden_blocks());

    const double m = static_cast<double>(x.rows());
    Eigen::MatrixXd cur = x;
    for (std::size_t i = 0; i < cfg.hidden_blocks(); ++i) {
        auto& blk = c.blocks[i];
        blk.input = cur;
        Eigen::MatrixXd z = cur * params.linear[i].weight.transpose();
        z.rowwise() += params.linear[i].bias.transpose();

        const auto& bn = params.bn[i];
        RowArray mean, var;
        if (mode == RunMode::train) {
            mean = z.colwise().mean().array();
            Eigen::MatrixXd centered = z.rowwise() - mean.matrix();
            var = centered.array().square().colwise().sum() / m;
            blk.batch_mean = mean.matrix();
            blk.batch_var = var.matrix();
        } else {
            mean = bn.running_mean.transpose().array();
            var = bn.running_var.transpose().array();
        }
        const RowArray inv_std = (var + cfg.bn_eps).sqrt().inverse();

        Eigen::ArrayXXd hat = z.array();
        hat.rowwise() -= mean;
        hat.rowwise() *= inv_std;
        blk.normalized = hat.matrix();

        Eigen::ArrayXXd pre = hat;
        pre.rowwise() *= RowArray(bn.gamma.transpose().array());
        pre.rowwise() += RowArray(bn.beta.transpose().array());
        blk.pre_act = pre.matrix();

        Eigen::MatrixXd act = pre.max(pre * cfg.leaky_slope).matrix();

        if (mode == RunMode::train && cfg.dropout[i] > 0.0) {
            std::mt19937_64 rng(mix_seed(dropout_seed, i + 1));
            blk.dropout_scale =
                dropout_scale_matrix(act.rows(), act.cols(), cfg.dropout[i], rng);
            blk.output = (act.array() * blk.dropout_scale.array()).matrix();
        } else {
            blk.dropout_scale = Eigen::MatrixXd::Ones(act.rows(), act.cols());
            blk.output = std::move(act);
        }
        cur = blk.output;
    }

    c.final_input = cur;
    c.logits = cur * params.linear.back().weight.transpose();
    c.logits.rowwise() += params.linear.back().bias.transpose();

    MlpOutput out;
    out.logits = c.logits;
    out.embedding = c.final_input;
    return out;
}

MlpGrads make_zero_grads(const MlpParams& params) {
    MlpGrads g;
    for (const auto& layer : params.linear) {
        g.linear.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                            Eigen::VectorXd::Zero(layer.bias.size())});
    }
    for (const auto& bn : params.bn) {
        g.bn.push_back({Eigen::VectorXd::Zero(bn.gamma.size()),
                        Eigen::VectorXd::Zero(bn.beta.size())});
    }
    return g;
}

namespace {

// From the last hidden block's output gradient down to the first layer.
void backward_hidden_chain(const MlpParams& params, const MlpForwardContext& ctx,
                           Eigen::MatrixXd d_out, MlpGrads& grads) {
    const MlpConfig& cfg = params.config;
    const double m = static_cast<double>(d_out.rows());
    for (std::size_t i = cfg.hidden_blocks(); i-- > 0;) {
        const auto& blk = ctx.blocks[i];
        const auto& bn = params.bn[i];

        Eigen::ArrayXXd d_act = d_out.array() * blk.dropout_scale.array();
        Eigen::ArrayXXd d_pre = d_act * leaky_gate(blk.pre_act, cfg.leaky_slope);

        const Eigen::ArrayXXd hat = blk.normalized.array();
        grads.bn[i].gamma = (d_pre * hat).colwise().sum().matrix().transpose();
        grads.bn[i].beta = d_pre.colwise().sum().matrix().transpose();

        Eigen::ArrayXXd d_hat = d_pre;
        d_hat.rowwise() *= RowArray(bn.gamma.transpose().array());

        Eigen::MatrixXd d_z;
        if (ctx.mode == RunMode::train) {
            const RowArray inv_std =
                (blk.batch_var.row(0).array() + cfg.bn_eps).sqrt().inverse();
            const RowArray sum_dhat = d_hat.colwise().sum();
            const RowArray sum_dhat_hat = (d_hat * hat).colwise().sum();
            Eigen::ArrayXXd dz = d_hat * m;
            dz.rowwise() -= sum_dhat;
            dz -= hat.rowwise() * sum_dhat_hat;
            dz.rowwise() *= inv_std;
            dz /= m;
            d_z = dz.matrix();
        } else {
            const RowArray inv_std =
                (bn.running_var.transpose().array() + cfg.bn_eps).sqrt().inverse();
            Eigen::ArrayXXd dz = d_hat;
            dz.rowwise() *= inv_std;
            d_z = dz.matrix();
        }

        grads.linear[i].weight = d_z.transpose() * blk.input;
        grads.linear[i].bias = d_z.colwise().sum().transpose();
        if (i > 0) d_out = d_z * params.linear[i].weight;
    }
}

}  // namespace

MlpGrads mlp_backward(const MlpParams& params, const MlpForwardContext& ctx,
                      std::span<const Label> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != ctx.logits.rows()) {
        throw std::invalid_argument("mlp_backward: label count mismatch");
    }
    const double m = static_cast<double>(ctx.logits.rows());
    Eigen::MatrixXd d_logits = softmax_rows(ctx.logits);
    for (Eigen::Index r = 0; r < d_logits.rows(); ++r) {
        d_logits(r, static_cast<Eigen::Index>(labels[r])) -= 1.0;
    }
    d_logits /= m;

    MlpGrads grads = make_zero_grads(params);
    grads.linear.back().weight = d_logits.transpose() * ctx.final_input;
    grads.linear.back().bias = d_logits.colwise().sum().transpose();
    Eigen::MatrixXd d_embedding = d_logits * params.linear.back().weight;
    backward_hidden_chain(params, ctx, std::move(d_embedding), grads);
    return grads;
}

MlpGrads mlp_backward_from_embedding(const MlpParams& params, const MlpForwardContext& ctx,
                                     const Eigen::MatrixXd& d_embedding) {
    if (d_embedding.rows() != ctx.final_input.rows() ||
        d_embedding.cols() != ctx.final_input.cols()) {
        throw std::invalid_argument("mlp_backward_from_embedding: shape mismatch");
    }
    MlpGrads grads = make_zero_grads(params);
    backward_hidden_chain(params, ctx, d_embedding, grads);
    return grads;
}

void update_running_stats(MlpParams& params, const MlpForwardContext& ctx) {
    if (ctx.mode != RunMode::train) return;
    const double momentum = params.config.bn_momentum;
    for (std::size_t i = 0; i < params.bn.size(); ++i) {
        const auto& blk = ctx.blocks[i];
        if (blk.batch_mean.size() == 0) continue;
        const double m = static_cast<double>(blk.input.rows());
        // Running variance tracks the unbiased batch estimate.
        Eigen::VectorXd unbiased = blk.batch_var.row(0).transpose() * (m / (m - 1.0));
        params.bn[i].running_mean = (1.0 - momentum) * params.bn[i].running_mean +
                                    momentum * blk.batch_mean.row(0).transpose();
        params.bn[i].running_var =
            (1.0 - momentum) * params.bn[i].running_var + momentum * unbiased;
    }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::ArrayXXd shifted = logits.array();
    shifted.colwise() -= logits.rowwise().maxCoeff().array();
    Eigen::ArrayXXd e = shifted.exp();
    Eigen::ArrayXd row_sums = e.rowwise().sum();
    e.colwise() /= row_sums;
    return e.matrix();
}

double cross_entropy(const Eigen::MatrixXd& logits, std::span<const Label> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        throw std::invalid_argument("cross_entropy: label count mismatch");
    }
    double loss = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
        loss += lse - logits(r, static_cast<Eigen::Index>(labels[r]));
    }
    return loss / static_cast<double>(logits.rows());
}

Eigen::MatrixXd numeric_matrix(std::span<const FeatureRow> rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(FeatureRow::kNumericWidth));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto values = rows[r].numeric();
        for (std::size_t c = 0; c < values.size(); ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[c];
        }
    }
    return x;
}

NormStats fit_norm_stats(std::span<const FeatureRow> rows) {
    if (rows.empty()) throw std::invalid_argument("fit_norm_stats: empty input");
    Eigen::MatrixXd x = numeric_matrix(rows);
    NormStats stats;
    stats.mean = x.colwise().mean().transpose();
    Eigen::VectorXd var = (x.rowwise() - stats.mean.transpose())
                              .array()
                              .square()
                              .colwise()
                              .mean()
                              .matrix()
                              .transpose();
    stats.std = var.array().sqrt().matrix();
    for (Eigen::Index i = 0; i < stats.std.size(); ++i) {
        if (stats.std[i] < 1e-12) stats.std[i] = 1.0;
    }
    return stats;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x, const NormStats& stats) {
    if (x.cols() != stats.mean.size()) {
        throw std::invalid_argument("standardize: width mismatch");
    }
    Eigen::ArrayXXd out = x.array();
    out.rowwise() -= RowArray(stats.mean.transpose().array());
    out.rowwise() /= RowArray(stats.std.transpose().array());
    return out.matrix();
}

std::vector<TensorRef> trainable_tensors(MlpParams& params) {
    std::vector<TensorRef> refs;
    for (auto& layer : params.linear) {
        refs.push_back({layer.weight.data(), static_cast<std::size_t>(layer.weight.size())});
        refs.push_back({layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
    }
    for (auto& bn : params.bn) {
        refs.push_back({bn.gamma.data(), static_cast<std::size_t>(bn.gamma.size())});
        refs.push_back({bn.beta.data(), static_cast<std::size_t>(bn.beta.size())});
    }
    return refs;
}

std::vector<TensorRef> grad_tensors(MlpGrads& grads) {
    std::vector<TensorRef> refs;
    for (auto& layer : grads.linear) {
        refs.push_back({layer.weight.data(), static_cast<std::size_t>(layer.weight.size())});
        refs.push_back({layer.bias.data(), static_cast<std::size_t>(layer.bias.size())});
    }
    for (auto& bn : grads.bn) {
        refs.push_back({bn.gamma.data(), static_cast<std::size_t>(bn.gamma.size())});
        refs.push_back({bn.beta.data(), static_cast<std::size_t>(bn.beta.size())});
    }
    return refs;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adam: parameter/gradient tensor count mismatch");
    }
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].size, 0.0);
            v_[i].assign(params[i].size, 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size != grads[i].size || m_[i].size() != params[i].size) {
            throw std::invalid_argument("adam: tensor shape changed between steps");
        }
        double* p = params[i].data;
        const double* g = grads[i].data;
        for (std::size_t k = 0; k < params[i].size; ++k) {
            m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
            v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
            const double mhat = m_[i][k] / bc1;
            const double vhat = v_[i][k] / bc2;
            p[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace phishlens
