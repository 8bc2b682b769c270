#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "retistack/error.hpp"
#include "retistack/lbfgs.hpp"
#include "retistack/matrix.hpp"

namespace retistack {

struct LogisticModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double l2_lambda = 0.0;
    bool degenerate = false; // single-class training data, constant output
    std::vector<std::string> feature_names;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

constexpr double kProbClamp = 1e-7; // shared with the losses module

// Minimizes mean log-loss + (lambda/2)*||coef||^2 (intercept unpenalized)
// with L-BFGS from a zero start. The objective is evaluated through the
// smooth softplus form, so no probability clamp enters the optimization.
inline LogisticModel fit_logistic(const Matrix& X, const std::vector<std::uint8_t>& y,
                                  double lambda, const LbfgsConfig& cfg = {}) {
    if (X.rows != y.size()) fail_validation("fit_logistic row/label mismatch");
    if (X.rows == 0) fail_validation("fit_logistic needs at least one sample");
    if (lambda < 0.0) fail_validation("lambda must be >= 0");

    const std::size_t n = X.rows, d = X.cols;

    std::size_t positives = 0;
    for (auto v : y) positives += v;
    if (positives == 0 || positives == n) {
        // Single-class data: fall back to the constant model at the clamped
        // empirical rate and flag it.
        const double rate = std::min(1.0 - kProbClamp,
                                     std::max(kProbClamp, static_cast<double>(positives) /
                                                              static_cast<double>(n)));
        LogisticModel model;
        model.coefficients.assign(d, 0.0);
        model.intercept = std::log(rate / (1.0 - rate));
        model.l2_lambda = lambda;
        model.degenerate = true;
        return model;
    }

    // theta = [coefficients..., intercept]
    Objective objective = [&](const std::vector<double>& theta, std::vector<double>& grad) {
        grad.assign(d + 1, 0.0);
        const double b = theta[d];
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = X.row(i);
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += xi[j] * theta[j];
            loss += softplus(z) - (y[i] ? z : 0.0);
            const double residual = sigmoid(z) - static_cast<double>(y[i]);
            for (std::size_t j = 0; j < d; ++j) grad[j] += residual * xi[j];
            grad[d] += residual;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        loss *= inv_n;
        for (auto& g : grad) g *= inv_n;
        for (std::size_t j = 0; j < d; ++j) {
            loss += 0.5 * lambda * theta[j] * theta[j];
            grad[j] += lambda * theta[j];
        }
        return loss;
    };

    auto result = lbfgs_minimize(objective, std::vector<double>(d + 1, 0.0), cfg);

    LogisticModel model;
    model.coefficients.assign(result.x.begin(), result.x.begin() + d);
    model.intercept = result.x[d];
    model.l2_lambda = lambda;
    return model;
}

inline std::vector<double> predict_logistic(const LogisticModel& model, const Matrix& X) {
    if (X.cols != model.coefficients.size()) fail_validation("predict_logistic dimension mismatch");
    std::vector<double> probs(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
        const double* xi = X.row(i);
        double z = model.intercept;
        for (std::size_t j = 0; j < X.cols; ++j) z += xi[j] * model.coefficients[j];
        probs[i] = sigmoid(z);
    }
    return probs;
}

inline nlohmann::json logistic_to_json(const LogisticModel& m) {
    return nlohmann::json{{"lambda", m.l2_lambda},
                          {"intercept", m.intercept},
                          {"coefficients", m.coefficients},
                          {"feature_names", m.feature_names},
                          {"degenerate", m.degenerate}};
}

inline LogisticModel logistic_from_json(const nlohmann::json& j) {
    LogisticModel m;
    m.l2_lambda = j.at("lambda").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.feature_names = j.value("feature_names", std::vector<std::string>{});
    m.degenerate = j.value("degenerate", false);
    return m;
}

} // namespace retistack
