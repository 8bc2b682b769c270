#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "retistack/error.hpp"
#include "retistack/image.hpp"
#include "retistack/losses.hpp"
#include "retistack/matrix.hpp"
#include "retistack/prediction.hpp"
#include "retistack/rng.hpp"
#include "retistack/sampling.hpp"

namespace retistack {

struct TrainingConfig {
    int phase1_epochs = 10;          // transfer phase, fixed lr, head only
    double phase1_lr = 1e-4;
    double phase2_lr_start = 1e-5;   // fine-tune phase start
    double lr_floor = 1e-7;
    double lr_factor = 0.1;
    int plateau_patience = 8;        // epochs without improvement per decay
    int early_stop_patience = 20;
    int early_stop_active_after = 60; // phase-2 epoch where checks begin
    int max_phase2_epochs = 290;
    int iterations_per_epoch = 250;  // an epoch is a fixed iteration budget
    int batch_size = 32;
    double focal_gamma = 2.0;        // used by LossKind::focal
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr_floor < phase2_lr_start)) fail_validation("lr_floor must be < phase2_lr_start");
        if (!(lr_factor > 0.0 && lr_factor < 1.0)) fail_validation("lr_factor must be in (0,1)");
        if (batch_size < 1 || iterations_per_epoch < 1) fail_validation("bad batch configuration");
    }
};

inline nlohmann::json training_config_to_json(const TrainingConfig& c) {
    return nlohmann::json{{"phase1_epochs", c.phase1_epochs},
                          {"phase1_lr", c.phase1_lr},
                          {"phase2_lr_start", c.phase2_lr_start},
                          {"lr_floor", c.lr_floor},
                          {"lr_factor", c.lr_factor},
                          {"plateau_patience", c.plateau_patience},
                          {"early_stop_patience", c.early_stop_patience},
                          {"early_stop_active_after", c.early_stop_active_after},
                          {"max_phase2_epochs", c.max_phase2_epochs},
                          {"iterations_per_epoch", c.iterations_per_epoch},
                          {"batch_size", c.batch_size},
                          {"focal_gamma", c.focal_gamma},
                          {"seed", c.seed}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.phase1_epochs = j.value("phase1_epochs", c.phase1_epochs);
    c.phase1_lr = j.value("phase1_lr", c.phase1_lr);
    c.phase2_lr_start = j.value("phase2_lr_start", c.phase2_lr_start);
    c.lr_floor = j.value("lr_floor", c.lr_floor);
    c.lr_factor = j.value("lr_factor", c.lr_factor);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.early_stop_active_after = j.value("early_stop_active_after", c.early_stop_active_after);
    c.max_phase2_epochs = j.value("max_phase2_epochs", c.max_phase2_epochs);
    c.iterations_per_epoch = j.value("iterations_per_epoch", c.iterations_per_epoch);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.focal_gamma = j.value("focal_gamma", c.focal_gamma);
    c.seed = j.value("seed", c.seed);
    return c;
}

// Plateau decay and early stopping need different counters: the plateau one
// resets after each decay, the staleness one only resets on improvement.
struct ScheduleState {
    double current_lr = 0.0;
    int epochs_since_improvement = 0; // staleness, feeds early stopping
    int plateau_counter = 0;          // resets when the lr decays
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
};

// Strict improvement resets both counters and records the best; otherwise the
// counters advance and, at plateau_patience, the lr decays by lr_factor down
// to lr_floor.
inline ScheduleState plateau_step(ScheduleState s, double val_loss, int epoch,
                                  const TrainingConfig& cfg) {
    if (val_loss < s.best_val_loss) {
        s.best_val_loss = val_loss;
        s.best_epoch = epoch;
        s.epochs_since_improvement = 0;
        s.plateau_counter = 0;
        return s;
    }
    ++s.epochs_since_improvement;
    ++s.plateau_counter;
    if (s.plateau_counter >= cfg.plateau_patience) {
        s.current_lr = std::max(s.current_lr * cfg.lr_factor, cfg.lr_floor);
        s.plateau_counter = 0;
    }
    return s;
}

// Checks begin at early_stop_active_after (phase-2 epochs); before that the
// staleness window keeps counting but cannot stop the run.
inline bool early_stop_check(const ScheduleState& s, int epoch, const TrainingConfig& cfg) {
    return epoch >= cfg.early_stop_active_after &&
           s.epochs_since_improvement >= cfg.early_stop_patience;
}

struct AdamState {
    std::vector<double> m; // first moment
    std::vector<double> v; // second moment
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        fail_validation("adam_step shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

// Feature source for the reference model: flattened downscaled pixels of the
// preprocessed image, or externally supplied embedding vectors.
struct FeatureSpec {
    enum class Kind { pixels, embedding };
    Kind kind = Kind::pixels;
    int downscale = 16; // pixels mode: features = downscale^2 * 3
    std::size_t dim = 0; // embedding mode

    std::size_t feature_dim() const {
        return kind == Kind::pixels ? static_cast<std::size_t>(downscale) * downscale * 3 : dim;
    }
};

inline nlohmann::json feature_spec_to_json(const FeatureSpec& s) {
    if (s.kind == FeatureSpec::Kind::pixels)
        return nlohmann::json{{"type", "pixels"}, {"downscale", s.downscale}};
    return nlohmann::json{{"type", "embedding"}, {"dim", s.dim}};
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
    FeatureSpec s;
    const std::string type = j.at("type").get<std::string>();
    if (type == "pixels") {
        s.kind = FeatureSpec::Kind::pixels;
        s.downscale = j.at("downscale").get<int>();
    } else if (type == "embedding") {
        s.kind = FeatureSpec::Kind::embedding;
        s.dim = j.at("dim").get<std::size_t>();
    } else {
        fail_validation("unknown feature spec type: " + type);
    }
    return s;
}

inline std::vector<double> extract_features(const ImageBuffer& preprocessed,
                                            const FeatureSpec& spec) {
    if (spec.kind != FeatureSpec::Kind::pixels)
        fail_validation("extract_features requires a pixel feature spec");
    const ImageBuffer small = resize_bilinear(preprocessed, spec.downscale);
    return std::vector<double>(small.data.begin(), small.data.end());
}

// Linear multi-label model with per-class sigmoid outputs. Stands in for the
// CNN backbones behind the same predictor contract.
struct ReferenceModel {
    FeatureSpec feature_spec;
    std::vector<std::string> classes;
    Matrix weights; // features x classes
    std::vector<double> bias;

    std::size_t feature_dim() const { return weights.rows; }
};

inline Matrix predict_probs(const ReferenceModel& model, const Matrix& X) {
    if (X.cols != model.weights.rows) fail_validation("predict feature dimension mismatch");
    Matrix out(X.rows, model.classes.size());
    for (std::size_t i = 0; i < X.rows; ++i) {
        const double* xi = X.row(i);
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
            double z = model.bias[c];
            for (std::size_t j = 0; j < X.cols; ++j) z += xi[j] * model.weights(j, c);
            out(i, c) = 1.0 / (1.0 + std::exp(-z));
        }
    }
    return out;
}

inline PredictionMatrix predict(const ReferenceModel& model, const Matrix& X,
                                std::vector<std::string> sample_ids, std::string model_id) {
    if (sample_ids.size() != X.rows) fail_validation("sample id / feature row mismatch");
    PredictionMatrix p;
    p.model_id = std::move(model_id);
    p.sample_ids = std::move(sample_ids);
    p.class_names = model.classes;
    p.values = predict_probs(model, X);
    return p;
}

struct Checkpoint {
    Matrix weights;
    std::vector<double> bias;
    int epoch = 0;
    double val_loss = std::numeric_limits<double>::infinity();
};

struct EpochStats {
    int epoch = 0; // global, phase 1 and 2 numbered consecutively from 1
    int phase = 1;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

enum class LossKind { focal, bce };

struct FitResult {
    ReferenceModel model; // restored best checkpoint
    Checkpoint best;
    std::vector<EpochStats> history;
    bool early_stopped = false;
};

namespace train_detail {

// Mean-over-samples multi-label loss of the model on (X, Y).
inline double dataset_loss(const Matrix& X, const Matrix& Y, const Matrix& weights,
                           const std::vector<double>& bias, const ClassWeights& w,
                           const FocalConfig& cfg) {
    const std::size_t n = X.rows, n_classes = Y.cols;
    std::vector<double> p(n_classes);
    std::vector<std::uint8_t> y(n_classes);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = X.row(i);
        for (std::size_t c = 0; c < n_classes; ++c) {
            double z = bias[c];
            for (std::size_t j = 0; j < X.cols; ++j) z += xi[j] * weights(j, c);
            p[c] = 1.0 / (1.0 + std::exp(-z));
            y[c] = Y(i, c) != 0.0;
        }
        total += focal_loss(p, y, w, cfg);
    }
    return total / static_cast<double>(n);
}

} // namespace train_detail

// Two-phase fit of the reference model: phase 1 trains the bias head only at
// a fixed lr (the frozen-backbone transfer phase), phase 2 trains everything
// under the plateau schedule with early stopping. An epoch is a fixed number
// of seeded with-replacement mini-batches, not a dataset pass. Returns the
// best-validation-loss checkpoint and the full history.
inline FitResult fit_reference_model(const Matrix& Xtr, const Matrix& Ytr, const Matrix& Xval,
                                     const Matrix& Yval, const ClassWeights& class_w,
                                     LossKind loss_kind, const TrainingConfig& cfg,
                                     FeatureSpec spec = {},
                                     std::vector<std::string> class_names = {}) {
    cfg.validate();
    if (Xtr.rows != Ytr.rows || Xval.rows != Yval.rows || Xtr.cols != Xval.cols ||
        Ytr.cols != Yval.cols)
        fail_validation("fit_reference_model shape mismatch");
    if (Xtr.rows == 0 || Xval.rows == 0) fail_validation("empty training or validation split");
    if (class_w.size() != Ytr.cols) fail_validation("class weight count mismatch");

    const std::size_t d = Xtr.cols, n_classes = Ytr.cols;
    FocalConfig focal_cfg;
    focal_cfg.gamma = loss_kind == LossKind::focal ? cfg.focal_gamma : 0.0;

    Matrix weights(d, n_classes, 0.0);
    std::vector<double> bias(n_classes, 0.0);

    Checkpoint best;
    std::vector<EpochStats> history;
    ScheduleState sched;
    sched.current_lr = cfg.phase2_lr_start;
    bool early_stopped = false;

    std::vector<double> p(n_classes), dLdp(n_classes);
    std::vector<std::uint8_t> y(n_classes);

    auto run_epoch = [&](int phase, int global_epoch, double lr, AdamState& adam,
                         std::vector<double>& params, bool bias_only) {
        const std::size_t n_params = params.size();
        std::vector<double> grad(n_params);
        double epoch_loss = 0.0;
        for (int it = 0; it < cfg.iterations_per_epoch; ++it) {
            Rng rng(derive_seed(cfg.seed, {seed_stream::training,
                                           static_cast<std::uint64_t>(phase),
                                           static_cast<std::uint64_t>(global_epoch),
                                           static_cast<std::uint64_t>(it)}));
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                const std::size_t i = rng.below(Xtr.rows);
                const double* xi = Xtr.row(i);
                for (std::size_t c = 0; c < n_classes; ++c) {
                    double z = bias_only ? params[c] : params[d * n_classes + c];
                    if (!bias_only)
                        for (std::size_t j = 0; j < d; ++j) z += xi[j] * params[j * n_classes + c];
                    else
                        for (std::size_t j = 0; j < d; ++j) z += xi[j] * weights(j, c);
                    p[c] = 1.0 / (1.0 + std::exp(-z));
                    y[c] = Ytr(i, c) != 0.0;
                }
                batch_loss += focal_loss(p, y, class_w, focal_cfg);
                focal_loss_grad(p, y, class_w, focal_cfg, dLdp);
                for (std::size_t c = 0; c < n_classes; ++c) {
                    const double dz = dLdp[c] * p[c] * (1.0 - p[c]);
                    if (bias_only) {
                        grad[c] += dz;
                    } else {
                        grad[d * n_classes + c] += dz;
                        for (std::size_t j = 0; j < d; ++j) grad[j * n_classes + c] += dz * xi[j];
                    }
                }
            }
            const double scale = 1.0 / cfg.batch_size;
            for (auto& g : grad) g *= scale;
            batch_loss *= scale;
            if (!std::isfinite(batch_loss))
                fail_numeric("NaN loss at epoch " + std::to_string(global_epoch));
            adam_step(params, grad, adam, lr);
            epoch_loss += batch_loss;
        }
        return epoch_loss / cfg.iterations_per_epoch;
    };

    auto record_epoch = [&](int phase, int global_epoch, double lr, double train_loss) {
        const double val_loss =
            train_detail::dataset_loss(Xval, Yval, weights, bias, class_w, focal_cfg);
        if (!std::isfinite(val_loss))
            fail_numeric("NaN validation loss at epoch " + std::to_string(global_epoch));
        history.push_back({global_epoch, phase, lr, train_loss, val_loss});
        if (val_loss < best.val_loss) {
            best.weights = weights;
            best.bias = bias;
            best.epoch = global_epoch;
            best.val_loss = val_loss;
        }
        return val_loss;
    };

    int global_epoch = 0;

    // Phase 1: head only.
    {
        AdamState adam(n_classes);
        for (int e = 0; e < cfg.phase1_epochs; ++e) {
            ++global_epoch;
            const double train_loss = run_epoch(1, global_epoch, cfg.phase1_lr, adam, bias, true);
            record_epoch(1, global_epoch, cfg.phase1_lr, train_loss);
        }
    }

    // Phase 2: all parameters, fresh optimizer state, plateau + early stop.
    {
        std::vector<double> params(d * n_classes + n_classes);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t c = 0; c < n_classes; ++c) params[j * n_classes + c] = weights(j, c);
        for (std::size_t c = 0; c < n_classes; ++c) params[d * n_classes + c] = bias[c];

        AdamState adam(params.size());
        for (int e = 1; e <= cfg.max_phase2_epochs; ++e) {
            ++global_epoch;
            const double lr = sched.current_lr;
            const double train_loss = run_epoch(2, global_epoch, lr, adam, params, false);
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t c = 0; c < n_classes; ++c) weights(j, c) = params[j * n_classes + c];
            for (std::size_t c = 0; c < n_classes; ++c) bias[c] = params[d * n_classes + c];
            const double val_loss = record_epoch(2, global_epoch, lr, train_loss);
            sched = plateau_step(sched, val_loss, global_epoch, cfg);
            if (early_stop_check(sched, e, cfg)) {
                early_stopped = true;
                break;
            }
        }
    }

    FitResult result;
    result.best = std::move(best);
    result.history = std::move(history);
    result.early_stopped = early_stopped;
    result.model.feature_spec = spec;
    result.model.classes = std::move(class_names);
    if (result.model.classes.empty())
        for (std::size_t c = 0; c < n_classes; ++c)
            result.model.classes.push_back("class_" + std::to_string(c));
    result.model.weights = result.best.weights;
    result.model.bias = result.best.bias;
    return result;
}

inline std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,phase,lr,train_loss,val_loss\n";
    for (const auto& e : history)
        out += std::to_string(e.epoch) + "," + std::to_string(e.phase) + "," +
               csv::format_double(e.lr) + "," + csv::format_double(e.train_loss) + "," +
               csv::format_double(e.val_loss) + "\n";
    return out;
}

inline nlohmann::json reference_model_to_json(const ReferenceModel& m, const TrainingConfig& cfg,
                                              int best_epoch, double val_loss) {
    return nlohmann::json{{"feature_spec", feature_spec_to_json(m.feature_spec)},
                          {"classes", m.classes},
                          {"weights", m.weights.data}, // row-major, features x classes
                          {"bias", m.bias},
                          {"training_config", training_config_to_json(cfg)},
                          {"best_epoch", best_epoch},
                          {"val_loss", val_loss}};
}

inline ReferenceModel reference_model_from_json(const nlohmann::json& j) {
    ReferenceModel m;
    m.feature_spec = feature_spec_from_json(j.at("feature_spec"));
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.bias = j.at("bias").get<std::vector<double>>();
    const auto flat = j.at("weights").get<std::vector<double>>();
    if (m.classes.empty() || flat.size() % m.classes.size() != 0)
        fail_validation("model json weight shape mismatch");
    m.weights = Matrix(flat.size() / m.classes.size(), m.classes.size());
    m.weights.data = flat;
    return m;
}

} // namespace retistack
