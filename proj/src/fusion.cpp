#include "phishlens/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "phishlens/random.hpp"

namespace phishlens {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

constexpr char kMagic[4] = {'M', 'T', 'L', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "char_ngram") return EncoderKind::char_ngram;
    if (s == "word_hash") return EncoderKind::word_hash;
    if (s == "precomputed") return EncoderKind::precomputed;
    throw std::runtime_error("unknown encoder kind \"" + s + "\"");
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
    if (learning_rate <= 0) throw std::invalid_argument("train: learning rate must be > 0");
    if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
        throw std::invalid_argument("train: adam betas must lie in [0, 1)");
    }
    if (adam_epsilon <= 0) throw std::invalid_argument("train: adam epsilon must be > 0");
}

TrainConfig load_train_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    TrainConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected key=value");
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "epochs") config.epochs = std::stoull(value);
            else if (key == "batch_size") config.batch_size = std::stoull(value);
            else if (key == "learning_rate") config.learning_rate = std::stod(value);
            else if (key == "seed") config.seed = std::stoull(value);
            else if (key == "early_stop_patience") config.early_stop_patience = std::stoull(value);
            else if (key == "adam_beta1") config.adam_beta1 = std::stod(value);
            else if (key == "adam_beta2") config.adam_beta2 = std::stod(value);
            else if (key == "adam_epsilon") config.adam_epsilon = std::stod(value);
            else if (key == "stratified") config.stratified = (value == "true" || value == "1");
            else if (key == "fractions") {
                std::stringstream ss(value);
                std::string part;
                std::vector<double> f;
                while (std::getline(ss, part, ',')) f.push_back(std::stod(part));
                if (f.size() != 3) throw std::runtime_error("need three fractions");
                config.fractions = {f[0], f[1], f[2]};
            } else {
                throw std::runtime_error("unknown key \"" + key + "\"");
            }
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    config.validate();
    return config;
}

void save_train_config(const TrainConfig& c, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write config file: " + path.string());
    out << "epochs = " << c.epochs << "\n"
        << "batch_size = " << c.batch_size << "\n"
        << "learning_rate = " << c.learning_rate << "\n"
        << "seed = " << c.seed << "\n"
        << "early_stop_patience = " << c.early_stop_patience << "\n"
        << "adam_beta1 = " << c.adam_beta1 << "\n"
        << "adam_beta2 = " << c.adam_beta2 << "\n"
        << "adam_epsilon = " << c.adam_epsilon << "\n"
        << "stratified = " << (c.stratified ? "true" : "false") << "\n"
        << "fractions = " << c.fractions.train << "," << c.fractions.validation << ","
        << c.fractions.test << "\n";
}

Eigen::Index FusedConfig::fused_dim() const {
    Eigen::Index dim = 0;
    if (mask.mlp) dim += mlp.embedding_dim();
    if (mask.title) dim += static_cast<Eigen::Index>(title_enc.dim);
    if (mask.content) dim += static_cast<Eigen::Index>(content_enc.dim);
    return dim;
}

FusedModel fused_init(const FusedConfig& config, std::uint64_t seed) {
    if (config.fused_dim() <= 0) {
        throw std::invalid_argument("fused model needs at least one enabled stream");
    }
    FusedModel model;
    model.config = config;
    model.seed = seed;
    model.mlp = mlp_init(config.mlp, mix_seed(seed, 11));
    if (config.title_enc.kind != EncoderKind::precomputed) {
        model.title_params = encoder_init(config.title_enc, mix_seed(seed, 12));
    }
    if (config.content_enc.kind != EncoderKind::precomputed) {
        model.content_params = encoder_init(config.content_enc, mix_seed(seed, 13));
    }
    const Eigen::Index fused = config.fused_dim();
    model.head.weight.resize(2, fused);
    std::mt19937_64 rng(mix_seed(seed, 14));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fused));
    for (Eigen::Index r = 0; r < 2; ++r) {
        for (Eigen::Index c = 0; c < fused; ++c) {
            model.head.weight(r, c) = (2.0 * uniform_unit(rng()) - 1.0) * bound;
        }
    }
    model.head.bias = Eigen::VectorXd::Zero(2);
    // Norm stats default to identity until fitted on training data.
    model.norm.mean = Eigen::VectorXd::Zero(config.mlp.input_dim());
    model.norm.std = Eigen::VectorXd::Ones(config.mlp.input_dim());
    return model;
}

// ---------------------------------------------------------------------------
// Forward/backward plumbing shared by training, prediction and evaluation.

namespace {

const Eigen::VectorXd& precomputed_lookup(const PrecomputedMap* map, const std::string& id,
                                          const char* stream) {
    if (!map) {
        throw std::runtime_error(std::string(stream) +
                                 ": precomputed embeddings not loaded");
    }
    auto it = map->find(id);
    if (it == map->end()) {
        throw std::runtime_error(std::string(stream) + ": no precomputed embedding for id \"" +
                                 id + "\"");
    }
    return it->second;
}

}  // namespace

EncodedRow encode_row(const FusedModel& model, const FeatureRow& row) {
    EncodedRow enc;
    enc.id = row.id;
    enc.label = row.label;
    const auto values = row.numeric();
    Eigen::RowVectorXd raw(FeatureRow::kNumericWidth);
    for (std::size_t i = 0; i < values.size(); ++i) {
        raw[static_cast<Eigen::Index>(i)] = values[i];
    }
    enc.numeric =
        (raw - model.norm.mean.transpose()).array() / model.norm.std.transpose().array();

    const auto& cfg = model.config;
    if (cfg.mask.title) {
        if (cfg.title_enc.kind == EncoderKind::precomputed) {
            enc.title_embed =
                &precomputed_lookup(model.title_pre.get(), row.id, "title stream");
        } else {
            enc.title_counts = l2_normalize(hash_features(row.page_title, cfg.title_enc));
        }
    }
    if (cfg.mask.content) {
        if (cfg.content_enc.kind == EncoderKind::precomputed) {
            enc.content_embed =
                &precomputed_lookup(model.content_pre.get(), row.id, "content stream");
        } else {
            enc.content_counts = l2_normalize(hash_features(row.page_content, cfg.content_enc));
        }
    }
    return enc;
}

Eigen::MatrixXd fused_forward_batch(const FusedModel& model,
                                    std::span<const EncodedRow> batch, RunMode mode,
                                    std::uint64_t dropout_seed, FusedBatchContext* ctx) {
    const auto& cfg = model.config;
    const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    if (b == 0) throw std::invalid_argument("fused_forward: empty batch");

    FusedBatchContext local;
    FusedBatchContext& c = ctx ? *ctx : local;
    c = FusedBatchContext{};
    c.mode = mode;

    Eigen::MatrixXd fused(b, cfg.fused_dim());
    Eigen::Index offset = 0;

    if (cfg.mask.mlp) {
        Eigen::MatrixXd x(b, cfg.mlp.input_dim());
        for (Eigen::Index i = 0; i < b; ++i) x.row(i) = batch[i].numeric;
        MlpOutput out = mlp_forward(model.mlp, x, mode, mix_seed(dropout_seed, 101), &c.mlp_ctx);
        fused.middleCols(offset, cfg.mlp.embedding_dim()) = out.embedding;
        offset += cfg.mlp.embedding_dim();
    }
    if (cfg.mask.title) {
        const Eigen::Index d = static_cast<Eigen::Index>(cfg.title_enc.dim);
        c.title_pre_act.resize(batch.size());
        for (Eigen::Index i = 0; i < b; ++i) {
            if (batch[i].title_embed) {
                fused.block(i, offset, 1, d) = batch[i].title_embed->transpose();
            } else {
                fused.block(i, offset, 1, d) =
                    encode_counts(batch[i].title_counts, cfg.title_enc, model.title_params,
                                  &c.title_pre_act[static_cast<std::size_t>(i)])
                        .transpose();
            }
        }
        offset += d;
    }
    if (cfg.mask.content) {
        const Eigen::Index d = static_cast<Eigen::Index>(cfg.content_enc.dim);
        c.content_pre_act.resize(batch.size());
        for (Eigen::Index i = 0; i < b; ++i) {
            if (batch[i].content_embed) {
                fused.block(i, offset, 1, d) = batch[i].content_embed->transpose();
            } else {
                fused.block(i, offset, 1, d) =
                    encode_counts(batch[i].content_counts, cfg.content_enc,
                                  model.content_params,
                                  &c.content_pre_act[static_cast<std::size_t>(i)])
                        .transpose();
            }
        }
        offset += d;
    }

    c.fused = fused;
    c.logits = fused * model.head.weight.transpose();
    c.logits.rowwise() += model.head.bias.transpose();
    return c.logits;
}

FusedGrads fused_backward_batch(const FusedModel& model, const FusedBatchContext& ctx,
                                std::span<const Label> labels) {
    const auto& cfg = model.config;
    const Eigen::Index b = ctx.logits.rows();
    if (static_cast<Eigen::Index>(labels.size()) != b) {
        throw std::invalid_argument("fused_backward: label count mismatch");
    }

    FusedGrads grads;
    grads.mlp = make_zero_grads(model.mlp);
    if (cfg.mask.title && cfg.title_enc.kind != EncoderKind::precomputed) {
        grads.title = make_zero_grads(model.title_params);
    }
    if (cfg.mask.content && cfg.content_enc.kind != EncoderKind::precomputed) {
        grads.content = make_zero_grads(model.content_params);
    }

    Eigen::MatrixXd d_logits = softmax_rows(ctx.logits);
    for (Eigen::Index r = 0; r < b; ++r) {
        d_logits(r, static_cast<Eigen::Index>(labels[r])) -= 1.0;
    }
    d_logits /= static_cast<double>(b);

    grads.head.weight = d_logits.transpose() * ctx.fused;
    grads.head.bias = d_logits.colwise().sum().transpose();

    Eigen::MatrixXd d_fused = d_logits * model.head.weight;
    Eigen::Index offset = 0;
    if (cfg.mask.mlp) {
        grads.mlp = mlp_backward_from_embedding(
            model.mlp, ctx.mlp_ctx, d_fused.middleCols(offset, cfg.mlp.embedding_dim()));
        offset += cfg.mlp.embedding_dim();
    }
    if (cfg.mask.title) {
        const Eigen::Index d = static_cast<Eigen::Index>(cfg.title_enc.dim);
        if (cfg.title_enc.kind != EncoderKind::precomputed) {
            for (Eigen::Index i = 0; i < b; ++i) {
                encoder_backward(ctx.batch->at(static_cast<std::size_t>(i)).title_counts,
                                 ctx.title_pre_act[static_cast<std::size_t>(i)],
                                 d_fused.block(i, offset, 1, d).transpose(), grads.title);
            }
        }
        offset += d;
    }
    if (cfg.mask.content) {
        const Eigen::Index d = static_cast<Eigen::Index>(cfg.content_enc.dim);
        if (cfg.content_enc.kind != EncoderKind::precomputed) {
            for (Eigen::Index i = 0; i < b; ++i) {
                encoder_backward(ctx.batch->at(static_cast<std::size_t>(i)).content_counts,
                                 ctx.content_pre_act[static_cast<std::size_t>(i)],
                                 d_fused.block(i, offset, 1, d).transpose(), grads.content);
            }
        }
        offset += d;
    }
    return grads;
}

FusedForwardResult fused_forward(const FusedModel& model, const FeatureRow& row, RunMode mode,
                                 std::uint64_t dropout_seed) {
    std::vector<EncodedRow> batch{encode_row(model, row)};
    FusedBatchContext ctx;
    ctx.batch = &batch;
    fused_forward_batch(model, batch, mode, dropout_seed, &ctx);
    FusedForwardResult out;
    out.logits = ctx.logits.row(0).transpose();
    out.fused = ctx.fused.row(0).transpose();
    return out;
}

Prediction predict(const FusedModel& model, const FeatureRow& row) {
    FusedForwardResult fwd = fused_forward(model, row, RunMode::eval);
    Prediction p;
    const Eigen::Index phish = static_cast<Eigen::Index>(Label::phishing);
    const Eigen::Index benign = static_cast<Eigen::Index>(Label::benign);
    const double shift = std::max(fwd.logits[phish], fwd.logits[benign]);
    const double ep = std::exp(fwd.logits[phish] - shift);
    const double eb = std::exp(fwd.logits[benign] - shift);
    p.score = ep / (ep + eb);
    p.label = fwd.logits[phish] > fwd.logits[benign] ? Label::phishing : Label::benign;
    return p;
}

Prediction predict_document(const FusedModel& model, const LabeledDocument& doc,
                            std::size_t cap_chars, const DomainRules* rules) {
    return predict(model, extract_all(doc, cap_chars, rules));
}

// ---------------------------------------------------------------------------
// Training.

namespace {

struct Snapshot {
    MlpParams mlp;
    TextEncoderParams title, content;
    LinearLayer head;
};

Snapshot take_snapshot(const FusedModel& m) {
    return {m.mlp, m.title_params, m.content_params, m.head};
}

void restore_snapshot(FusedModel& m, const Snapshot& s) {
    m.mlp = s.mlp;
    m.title_params = s.title;
    m.content_params = s.content;
    m.head = s.head;
}

std::vector<TensorRef> model_tensors(FusedModel& model, MlpGrads* mlp_grads,
                                     EncoderGrads* title_grads, EncoderGrads* content_grads,
                                     LinearLayer* head_grads, std::vector<TensorRef>* grads_out) {
    std::vector<TensorRef> params = trainable_tensors(model.mlp);
    std::vector<TensorRef> grads = grad_tensors(*mlp_grads);
    const auto& cfg = model.config;
    auto add = [&](Eigen::MatrixXd& p, Eigen::MatrixXd& g) {
        params.push_back({p.data(), static_cast<std::size_t>(p.size())});
        grads.push_back({g.data(), static_cast<std::size_t>(g.size())});
    };
    auto addv = [&](Eigen::VectorXd& p, Eigen::VectorXd& g) {
        params.push_back({p.data(), static_cast<std::size_t>(p.size())});
        grads.push_back({g.data(), static_cast<std::size_t>(g.size())});
    };
    if (cfg.mask.title && cfg.title_enc.kind != EncoderKind::precomputed) {
        add(model.title_params.projection, title_grads->projection);
        addv(model.title_params.bias, title_grads->bias);
    }
    if (cfg.mask.content && cfg.content_enc.kind != EncoderKind::precomputed) {
        add(model.content_params.projection, content_grads->projection);
        addv(model.content_params.bias, content_grads->bias);
    }
    add(model.head.weight, head_grads->weight);
    addv(model.head.bias, head_grads->bias);
    *grads_out = std::move(grads);
    return params;
}

EvalReport evaluate_encoded(const FusedModel& model, std::span<const EncodedRow> rows) {
    FusedBatchContext ctx;
    fused_forward_batch(model, rows, RunMode::eval, 0, &ctx);
    std::vector<Label> predictions(rows.size()), truths(rows.size());
    const Eigen::Index phish = static_cast<Eigen::Index>(Label::phishing);
    const Eigen::Index benign = static_cast<Eigen::Index>(Label::benign);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(i);
        predictions[i] = ctx.logits(r, phish) > ctx.logits(r, benign) ? Label::phishing
                                                                      : Label::benign;
        truths[i] = rows[i].label;
    }
    return report(confusion(predictions, truths));
}

}  // namespace

TrainResult train_fused(const std::vector<FeatureRow>& rows, const CorpusSplit& split,
                        const TrainConfig& config, const FusedConfig& fused_config) {
    config.validate();
    std::unordered_map<std::string, const FeatureRow*> by_id;
    by_id.reserve(rows.size());
    for (const auto& row : rows) by_id.emplace(row.id, &row);

    auto gather = [&](const std::vector<std::string>& ids, const char* part) {
        std::vector<const FeatureRow*> out;
        out.reserve(ids.size());
        for (const auto& id : ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                throw std::runtime_error(std::string("split ") + part +
                                         " references unknown id \"" + id + "\"");
            }
            out.push_back(it->second);
        }
        return out;
    };
    const auto train_rows = gather(split.train, "train");
    const auto val_rows = gather(split.validation, "validation");
    if (train_rows.empty()) throw std::invalid_argument("train: empty train part");
    if (val_rows.empty()) throw std::invalid_argument("train: empty validation part");

    TrainResult result;
    result.model = fused_init(fused_config, config.seed);
    result.model.train_config = config;

    std::vector<FeatureRow> train_copy;
    train_copy.reserve(train_rows.size());
    for (const auto* r : train_rows) train_copy.push_back(*r);
    result.model.norm = fit_norm_stats(train_copy);

    FusedModel& model = result.model;
    std::vector<EncodedRow> train_enc, val_enc;
    train_enc.reserve(train_rows.size());
    for (const auto* r : train_rows) train_enc.push_back(encode_row(model, *r));
    val_enc.reserve(val_rows.size());
    for (const auto* r : val_rows) val_enc.push_back(encode_row(model, *r));

    Adam optimizer(config.learning_rate, config.adam_beta1, config.adam_beta2,
                   config.adam_epsilon);

    Snapshot best = take_snapshot(model);
    double best_f1 = -1.0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_enc.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(config.seed, 1000 + epoch));
        seeded_shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0;
        const Eigen::Index phish = static_cast<Eigen::Index>(Label::phishing);
        const Eigen::Index benign = static_cast<Eigen::Index>(Label::benign);

        for (std::size_t start = 0, batch_index = 0; start < order.size();
             start += config.batch_size, ++batch_index) {
            const std::size_t n = std::min(config.batch_size, order.size() - start);
            if (n < 2) break;  // batch norm needs at least two samples
            std::vector<EncodedRow> batch;
            std::vector<Label> labels;
            batch.reserve(n);
            labels.reserve(n);
            for (std::size_t k = 0; k < n; ++k) {
                batch.push_back(train_enc[order[start + k]]);
                labels.push_back(batch.back().label);
            }

            FusedBatchContext ctx;
            ctx.batch = &batch;
            const std::uint64_t step_seed =
                mix_seed(config.seed, (epoch + 1) * 100000 + batch_index);
            fused_forward_batch(model, batch, RunMode::train, step_seed, &ctx);

            const double loss = cross_entropy(ctx.logits, labels);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_index));
            }
            loss_sum += loss * static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) {
                const Eigen::Index r = static_cast<Eigen::Index>(k);
                const Label pred = ctx.logits(r, phish) > ctx.logits(r, benign)
                                       ? Label::phishing
                                       : Label::benign;
                if (pred == labels[k]) ++correct;
            }
            seen += n;

            FusedGrads grads = fused_backward_batch(model, ctx, labels);
            std::vector<TensorRef> grad_refs;
            std::vector<TensorRef> param_refs = model_tensors(
                model, &grads.mlp, &grads.title, &grads.content, &grads.head, &grad_refs);
            optimizer.step(param_refs, grad_refs);
            update_running_stats(model.mlp, ctx.mlp_ctx);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        stats.train_accuracy =
            seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        const EvalReport val = evaluate_encoded(model, val_enc);
        stats.val_accuracy = val.accuracy;
        stats.val_precision = val.precision;
        stats.val_recall = val.recall;
        stats.val_f1 = val.f1;
        result.history.push_back(stats);

        if (val.f1 > best_f1) {
            best_f1 = val.f1;
            best = take_snapshot(model);
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= config.early_stop_patience) break;
        }
    }

    if (config.epochs > 0) restore_snapshot(model, best);
    return result;
}

EvalReport evaluate(const FusedModel& model, const std::vector<FeatureRow>& rows,
                    const std::vector<std::string>& ids) {
    std::unordered_map<std::string, const FeatureRow*> by_id;
    by_id.reserve(rows.size());
    for (const auto& row : rows) by_id.emplace(row.id, &row);
    std::vector<EncodedRow> encoded;
    encoded.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw std::runtime_error("evaluate: unknown id \"" + id + "\"");
        }
        encoded.push_back(encode_row(model, *it->second));
    }
    if (encoded.empty()) throw std::invalid_argument("evaluate: no ids to evaluate");
    return evaluate_encoded(model, encoded);
}

AblationTable ablate(const std::vector<FeatureRow>& rows, const CorpusSplit& split,
                     const TrainConfig& config, const FusedConfig& fused_config) {
    struct Variant {
        const char* name;
        StreamMask mask;
    };
    const Variant variants[] = {
        {"mlp_only", {true, false, false}},
        {"title_only", {false, true, false}},
        {"content_only", {false, false, true}},
        {"fused", {true, true, true}},
    };
    AblationTable table;
    for (const auto& variant : variants) {
        FusedConfig cfg = fused_config;
        cfg.mask = variant.mask;
        TrainResult trained = train_fused(rows, split, config, cfg);
        AblationRow row;
        row.name = variant.name;
        row.mask = variant.mask;
        row.test = evaluate(trained.model, rows, split.test);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string AblationTable::render() const {
    char buf[160];
    std::string out =
        "model          accuracy  precision  recall    f1\n"
        "-------------  --------  ---------  --------  --------\n";
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%-13s  %7.2f%%  %8.2f%%  %7.2f%%  %7.2f%%\n",
                      row.name.c_str(), row.test.accuracy * 100.0, row.test.precision * 100.0,
                      row.test.recall * 100.0, row.test.f1 * 100.0);
        out += buf;
    }
    return out;
}

std::string AblationTable::to_json_lines() const {
    std::string out;
    for (const auto& row : rows) {
        json record;
        record["model"] = row.name;
        record["streams"] = {{"mlp", row.mask.mlp},
                             {"title", row.mask.title},
                             {"content", row.mask.content}};
        record["accuracy"] = row.test.accuracy;
        record["precision"] = row.test.precision;
        record["recall"] = row.test.recall;
        record["f1"] = row.test.f1;
        record["tp"] = row.test.tp;
        record["fp"] = row.test.fp;
        record["tn"] = row.test.tn;
        record["fn"] = row.test.fn;
        out += record.dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format.

namespace {

struct TensorEntry {
    std::string name;
    const Eigen::MatrixXd* matrix = nullptr;
    const Eigen::VectorXd* vector = nullptr;

    std::size_t size() const {
        return matrix ? static_cast<std::size_t>(matrix->size())
                      : static_cast<std::size_t>(vector->size());
    }
    std::vector<std::int64_t> shape() const {
        if (matrix) return {matrix->rows(), matrix->cols()};
        return {vector->size()};
    }
    const double* data() const { return matrix ? matrix->data() : vector->data(); }
};

// Manifest order; the loader reads blobs in exactly this order.
std::vector<TensorEntry> tensor_entries(const FusedModel& model) {
    std::vector<TensorEntry> entries;
    auto add_m = [&](std::string name, const Eigen::MatrixXd& m) {
        entries.push_back({std::move(name), &m, nullptr});
    };
    auto add_v = [&](std::string name, const Eigen::VectorXd& v) {
        entries.push_back({std::move(name), nullptr, &v});
    };
    for (std::size_t i = 0; i < model.mlp.linear.size(); ++i) {
        add_m("mlp.linear" + std::to_string(i) + ".weight", model.mlp.linear[i].weight);
        add_v("mlp.linear" + std::to_string(i) + ".bias", model.mlp.linear[i].bias);
    }
    for (std::size_t i = 0; i < model.mlp.bn.size(); ++i) {
        const std::string prefix = "mlp.bn" + std::to_string(i) + ".";
        add_v(prefix + "gamma", model.mlp.bn[i].gamma);
        add_v(prefix + "beta", model.mlp.bn[i].beta);
        add_v(prefix + "running_mean", model.mlp.bn[i].running_mean);
        add_v(prefix + "running_var", model.mlp.bn[i].running_var);
    }
    add_v("norm.mean", model.norm.mean);
    add_v("norm.std", model.norm.std);
    if (model.config.mask.title && model.config.title_enc.kind != EncoderKind::precomputed) {
        add_m("title.projection", model.title_params.projection);
        add_v("title.bias", model.title_params.bias);
    }
    if (model.config.mask.content &&
        model.config.content_enc.kind != EncoderKind::precomputed) {
        add_m("content.projection", model.content_params.projection);
        add_v("content.bias", model.content_params.bias);
    }
    add_m("head.weight", model.head.weight);
    add_v("head.bias", model.head.bias);
    return entries;
}

json encoder_to_json(const EncoderConfig& cfg, const std::string& pre_path) {
    json j;
    j["kind"] = std::string(to_string(cfg.kind));
    j["buckets"] = cfg.buckets;
    j["ngram_min"] = cfg.ngram_min;
    j["ngram_max"] = cfg.ngram_max;
    j["dim"] = cfg.dim;
    if (cfg.kind == EncoderKind::precomputed) j["path"] = pre_path;
    return j;
}

EncoderConfig encoder_from_json(const json& j, std::string* pre_path) {
    EncoderConfig cfg;
    cfg.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
    cfg.buckets = j.at("buckets").get<std::uint32_t>();
    cfg.ngram_min = j.at("ngram_min").get<std::uint32_t>();
    cfg.ngram_max = j.at("ngram_max").get<std::uint32_t>();
    cfg.dim = j.at("dim").get<std::uint32_t>();
    if (cfg.kind == EncoderKind::precomputed && j.contains("path")) {
        *pre_path = j.at("path").get<std::string>();
    }
    return cfg;
}

json train_config_to_json(const TrainConfig& c) {
    json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["seed"] = c.seed;
    j["early_stop_patience"] = c.early_stop_patience;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["stratified"] = c.stratified;
    j["fractions"] = {c.fractions.train, c.fractions.validation, c.fractions.test};
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_epsilon = j.at("adam_epsilon").get<double>();
    c.stratified = j.at("stratified").get<bool>();
    auto f = j.at("fractions");
    c.fractions = {f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>()};
    return c;
}

}  // namespace

void save_model(const FusedModel& model, const std::filesystem::path& path) {
    const auto entries = tensor_entries(model);

    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["seed"] = model.seed;
    manifest["mask"] = {{"mlp", model.config.mask.mlp},
                        {"title", model.config.mask.title},
                        {"content", model.config.mask.content}};
    json mlp_cfg;
    mlp_cfg["dims"] = model.config.mlp.dims;
    mlp_cfg["dropout"] = model.config.mlp.dropout;
    mlp_cfg["leaky_slope"] = model.config.mlp.leaky_slope;
    mlp_cfg["bn_momentum"] = model.config.mlp.bn_momentum;
    mlp_cfg["bn_eps"] = model.config.mlp.bn_eps;
    manifest["mlp"] = mlp_cfg;
    manifest["title_encoder"] = encoder_to_json(model.config.title_enc, model.title_pre_path);
    manifest["content_encoder"] =
        encoder_to_json(model.config.content_enc, model.content_pre_path);
    manifest["train_config"] = train_config_to_json(model.train_config);
    json tensors = json::array();
    for (const auto& entry : entries) {
        tensors.push_back({{"name", entry.name}, {"shape", entry.shape()}});
    }
    manifest["tensors"] = tensors;

    const std::string manifest_bytes = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write model file: " + path.string());
    out.write(kMagic, 4);
    const std::uint32_t version = kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t manifest_len = manifest_bytes.size();
    out.write(reinterpret_cast<const char*>(&manifest_len), sizeof(manifest_len));
    out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));

    std::vector<float> buffer;
    for (const auto& entry : entries) {
        buffer.resize(entry.size());
        const double* src = entry.data();
        for (std::size_t i = 0; i < buffer.size(); ++i) {
            buffer[i] = static_cast<float>(src[i]);
        }
        out.write(reinterpret_cast<const char*>(buffer.data()),
                  static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("failed writing model file: " + path.string());
}

FusedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());

    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("bad model file magic: " + path.string());
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kFormatVersion) {
        throw std::runtime_error("unsupported model format version " +
                                 std::to_string(version));
    }
    std::uint64_t manifest_len = 0;
    in.read(reinterpret_cast<char*>(&manifest_len), sizeof(manifest_len));
    if (!in || manifest_len > (1ull << 30)) {
        throw std::runtime_error("truncated or corrupt model manifest");
    }
    std::string manifest_bytes(manifest_len, '\0');
    in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw std::runtime_error("truncated model manifest");

    json manifest = json::parse(manifest_bytes, nullptr, false);
    if (manifest.is_discarded()) throw std::runtime_error("malformed model manifest");

    FusedConfig cfg;
    std::string title_path, content_path;
    try {
        cfg.mask.mlp = manifest.at("mask").at("mlp").get<bool>();
        cfg.mask.title = manifest.at("mask").at("title").get<bool>();
        cfg.mask.content = manifest.at("mask").at("content").get<bool>();
        const auto& mlp_cfg = manifest.at("mlp");
        cfg.mlp.dims = mlp_cfg.at("dims").get<std::vector<Eigen::Index>>();
        cfg.mlp.dropout = mlp_cfg.at("dropout").get<std::vector<double>>();
        cfg.mlp.leaky_slope = mlp_cfg.at("leaky_slope").get<double>();
        cfg.mlp.bn_momentum = mlp_cfg.at("bn_momentum").get<double>();
        cfg.mlp.bn_eps = mlp_cfg.at("bn_eps").get<double>();
        cfg.title_enc = encoder_from_json(manifest.at("title_encoder"), &title_path);
        cfg.content_enc = encoder_from_json(manifest.at("content_encoder"), &content_path);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed model manifest: ") + e.what());
    }

    FusedModel model = fused_init(cfg, manifest.value("seed", std::uint64_t{0}));
    if (manifest.contains("train_config")) {
        try {
            model.train_config = train_config_from_json(manifest.at("train_config"));
        } catch (const json::exception& e) {
            throw std::runtime_error(std::string("malformed model manifest: ") + e.what());
        }
    }
    model.title_pre_path = title_path;
    model.content_pre_path = content_path;

    const auto entries = tensor_entries(model);
    const auto& tensor_list = manifest.at("tensors");
    if (tensor_list.size() != entries.size()) {
        throw std::runtime_error("model manifest lists " + std::to_string(tensor_list.size()) +
                                 " tensors, expected " + std::to_string(entries.size()));
    }
    std::vector<float> buffer;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& meta = tensor_list.at(i);
        const std::string name = meta.at("name").get<std::string>();
        if (name != entries[i].name) {
            throw std::runtime_error("unexpected tensor \"" + name + "\" (expected \"" +
                                     entries[i].name + "\")");
        }
        const auto shape = meta.at("shape").get<std::vector<std::int64_t>>();
        std::size_t declared = 1;
        for (auto d : shape) declared *= static_cast<std::size_t>(d);
        if (shape != entries[i].shape() || declared != entries[i].size()) {
            throw std::runtime_error("tensor \"" + name + "\" has mismatched shape");
        }
        buffer.resize(entries[i].size());
        in.read(reinterpret_cast<char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size() * sizeof(float)));
        if (!in) {
            throw std::runtime_error("model file truncated while reading tensor \"" + name +
                                     "\"");
        }
        double* dst = const_cast<double*>(entries[i].data());
        for (std::size_t k = 0; k < buffer.size(); ++k) {
            dst[k] = static_cast<double>(buffer[k]);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error("model file has trailing bytes: " + path.string());
    }

    if (cfg.title_enc.kind == EncoderKind::precomputed && cfg.mask.title) {
        model.title_pre = std::make_shared<PrecomputedMap>(
            load_precomputed(title_path, cfg.title_enc.dim));
    }
    if (cfg.content_enc.kind == EncoderKind::precomputed && cfg.mask.content) {
        model.content_pre = std::make_shared<PrecomputedMap>(
            load_precomputed(content_path, cfg.content_enc.dim));
    }
    return model;
}

}  // namespace phishlens
