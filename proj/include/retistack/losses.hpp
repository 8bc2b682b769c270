#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "retistack/error.hpp"

namespace retistack {

// Per-label binary weight pair. Each label is balanced as its own binary
// decision: pos = n / (2 * count), neg = n / (2 * (n - count)).
struct ClassWeights {
    std::vector<std::string> class_names;
    std::vector<double> pos;
    std::vector<double> neg;

    std::size_t size() const { return pos.size(); }

    static ClassWeights uniform(std::vector<std::string> names) {
        ClassWeights w;
        w.pos.assign(names.size(), 1.0);
        w.neg.assign(names.size(), 1.0);
        w.class_names = std::move(names);
        return w;
    }
};

// n_samples / (n_classes_in_decision * count) -- the balanced-class formula
// with K = 2 for per-label binary decisions.
inline double class_weight(std::size_t n_samples, std::size_t n_classes_in_decision,
                           std::size_t count) {
    if (count == 0) fail_degenerate("unweightable empty class");
    if (n_classes_in_decision == 0) fail_validation("n_classes_in_decision must be >= 1");
    return static_cast<double>(n_samples) /
           (static_cast<double>(n_classes_in_decision) * static_cast<double>(count));
}

inline ClassWeights class_weights_from_counts(std::size_t n_samples,
                                              std::vector<std::string> class_names,
                                              const std::vector<std::size_t>& positives) {
    if (class_names.size() != positives.size())
        fail_validation("class name / count length mismatch");
    ClassWeights w;
    w.class_names = std::move(class_names);
    w.pos.reserve(positives.size());
    w.neg.reserve(positives.size());
    for (std::size_t c = 0; c < positives.size(); ++c) {
        w.pos.push_back(class_weight(n_samples, 2, positives[c]));
        w.neg.push_back(class_weight(n_samples, 2, n_samples - positives[c]));
    }
    return w;
}

inline nlohmann::json class_weights_to_json(const ClassWeights& w) {
    nlohmann::json j;
    for (std::size_t c = 0; c < w.size(); ++c)
        j[w.class_names[c]] = {{"pos", w.pos[c]}, {"neg", w.neg[c]}};
    return j;
}

inline ClassWeights class_weights_from_json(const nlohmann::json& j,
                                            const std::vector<std::string>& class_order) {
    ClassWeights w;
    w.class_names = class_order;
    for (const auto& name : class_order) {
        if (!j.contains(name)) fail_validation("class weights json missing class " + name);
        w.pos.push_back(j.at(name).at("pos").get<double>());
        w.neg.push_back(j.at(name).at("neg").get<double>());
    }
    return w;
}

struct FocalConfig {
    double gamma = 2.0;     // focusing parameter
    double epsilon = 1e-7;  // probability clamp, keeps log() finite
};

namespace detail {

inline double clamp_prob(double p, double eps) {
    if (p < eps) return eps;
    if (p > 1.0 - eps) return 1.0 - eps;
    return p;
}

} // namespace detail

// Sum over classes of -alpha_t * (1 - p_t)^gamma * log(p_t), where p_t is
// the probability assigned to the true outcome of each label and alpha_t the
// matching pos/neg weight. The multi-label total is a sum, not a mean: each
// label is its own weighted binary decision.
inline double focal_loss(const std::vector<double>& p, const std::vector<std::uint8_t>& y,
                         const ClassWeights& w, const FocalConfig& cfg = {}) {
    if (p.size() != y.size() || p.size() != w.size())
        fail_validation("focal_loss length mismatch");
    double total = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double pt = detail::clamp_prob(y[c] ? p[c] : 1.0 - p[c], cfg.epsilon);
        const double alpha = y[c] ? w.pos[c] : w.neg[c];
        total += -alpha * std::pow(1.0 - pt, cfg.gamma) * std::log(pt);
    }
    return total;
}

// d(loss)/d(p_c), evaluated at the clamped p_t. For the true-class proba q:
//   d/dq [-(1-q)^g log q] = g (1-q)^(g-1) log q - (1-q)^g / q
// and the y=0 branch flips the sign via q = 1 - p.
inline void focal_loss_grad(const std::vector<double>& p, const std::vector<std::uint8_t>& y,
                            const ClassWeights& w, const FocalConfig& cfg,
                            std::vector<double>& grad_out) {
    if (p.size() != y.size() || p.size() != w.size())
        fail_validation("focal_loss_grad length mismatch");
    grad_out.resize(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
        const double q = detail::clamp_prob(y[c] ? p[c] : 1.0 - p[c], cfg.epsilon);
        const double alpha = y[c] ? w.pos[c] : w.neg[c];
        const double one_minus_q = 1.0 - q;
        double dq = -alpha * std::pow(one_minus_q, cfg.gamma) / q;
        if (cfg.gamma != 0.0)
            dq += alpha * cfg.gamma * std::pow(one_minus_q, cfg.gamma - 1.0) * std::log(q);
        grad_out[c] = y[c] ? dq : -dq;
    }
}

inline std::vector<double> focal_loss_grad(const std::vector<double>& p,
                                           const std::vector<std::uint8_t>& y,
                                           const ClassWeights& w, const FocalConfig& cfg = {}) {
    std::vector<double> grad;
    focal_loss_grad(p, y, w, cfg, grad);
    return grad;
}

// Weighted binary cross-entropy == focal loss with gamma = 0.
inline double weighted_bce(const std::vector<double>& p, const std::vector<std::uint8_t>& y,
                           const ClassWeights& w, double epsilon = 1e-7) {
    FocalConfig cfg;
    cfg.gamma = 0.0;
    cfg.epsilon = epsilon;
    return focal_loss(p, y, w, cfg);
}

} // namespace retistack
