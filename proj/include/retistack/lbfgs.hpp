#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "retistack/error.hpp"

namespace retistack {

struct LbfgsConfig {
    int memory = 10;              // stored correction pairs
    int max_iterations = 500;
    double grad_tolerance = 1e-8; // terminate on ||grad||_inf <= tol
    double c1 = 1e-4;             // Armijo (sufficient decrease)
    double c2 = 0.9;              // strong Wolfe curvature
    int max_line_search = 60;     // function evaluations per search
};

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Evaluates f(x), fills grad (same length as x), returns the value.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

namespace lbfgs_detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline bool all_finite(double value, const std::vector<double>& grad) {
    if (!std::isfinite(value)) return false;
    for (double g : grad)
        if (!std::isfinite(g)) return false;
    return true;
}

struct CorrectionPair {
    std::vector<double> s; // x_{k+1} - x_k
    std::vector<double> y; // g_{k+1} - g_k
    double rho;            // 1 / (y.s)
};

// Minimizer of the cubic through (a, fa, dfa) and (b, fb, dfb); falls back to
// the midpoint when the interpolant is degenerate or lands outside the
// bracket's safeguarded interior.
inline double cubic_step(double a, double fa, double dfa, double b, double fb, double dfb) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double width = hi - lo;
    const double safeguard = 0.1 * width;
    double alpha;
    const double d1 = dfa + dfb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - dfa * dfb;
    if (disc >= 0.0) {
        double d2 = std::sqrt(disc);
        if (b < a) d2 = -d2;
        alpha = b - (b - a) * (dfb + d2 - d1) / (dfb - dfa + 2.0 * d2);
    } else {
        alpha = 0.5 * (lo + hi);
    }
    if (!std::isfinite(alpha) || alpha < lo + safeguard || alpha > hi - safeguard)
        alpha = 0.5 * (lo + hi);
    return alpha;
}

struct ProbeState {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0; // grad . direction
};

} // namespace lbfgs_detail

// Plain (unconstrained) limited-memory BFGS: two-loop recursion for the
// search direction, strong-Wolfe line search with bracketing and cubic zoom.
// Throws on a non-finite objective at the start point; a failed line search
// ends the run with the best iterate and converged = false.
inline LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                                  const LbfgsConfig& cfg = {}) {
    using namespace lbfgs_detail;
    if (cfg.memory < 1 || !(cfg.c1 > 0.0 && cfg.c1 < cfg.c2 && cfg.c2 < 1.0))
        fail_validation("invalid lbfgs configuration");

    const std::size_t n = x0.size();
    std::vector<double> x = std::move(x0);
    std::vector<double> grad(n);
    double value = objective(x, grad);
    if (!all_finite(value, grad)) fail_numeric("non-finite objective at the initial point");

    std::deque<CorrectionPair> pairs;
    std::vector<double> direction(n), x_trial(n), grad_trial(n), alpha_coeff;

    LbfgsResult result;
    result.x = x;
    result.value = value;

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        if (inf_norm(grad) <= cfg.grad_tolerance) {
            result.x = x;
            result.value = value;
            result.iterations = iter;
            result.converged = true;
            return result;
        }

        // Two-loop recursion: direction = -H grad.
        direction = grad;
        alpha_coeff.assign(pairs.size(), 0.0);
        for (std::size_t i = pairs.size(); i-- > 0;) {
            const auto& p = pairs[i];
            alpha_coeff[i] = p.rho * dot(p.s, direction);
            for (std::size_t k = 0; k < n; ++k) direction[k] -= alpha_coeff[i] * p.y[k];
        }
        if (!pairs.empty()) {
            const auto& newest = pairs.back();
            const double gamma = 1.0 / (newest.rho * dot(newest.y, newest.y));
            for (auto& d : direction) d *= gamma;
        }
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto& p = pairs[i];
            const double beta = p.rho * dot(p.y, direction);
            for (std::size_t k = 0; k < n; ++k) direction[k] += p.s[k] * (alpha_coeff[i] - beta);
        }
        for (auto& d : direction) d = -d;

        double slope0 = dot(grad, direction);
        if (slope0 >= 0.0) {
            // Curvature information went stale; restart from steepest descent.
            pairs.clear();
            for (std::size_t k = 0; k < n; ++k) direction[k] = -grad[k];
            slope0 = dot(grad, direction);
        }

        const double value0 = value;
        auto probe = [&](double alpha) {
            for (std::size_t k = 0; k < n; ++k) x_trial[k] = x[k] + alpha * direction[k];
            ProbeState st;
            st.alpha = alpha;
            st.value = objective(x_trial, grad_trial);
            st.slope = all_finite(st.value, grad_trial)
                           ? dot(grad_trial, direction)
                           : std::numeric_limits<double>::quiet_NaN();
            return st;
        };

        // Bracketing phase (Nocedal & Wright alg. 3.5). A non-finite trial
        // value counts as overshooting and tightens the bracket.
        ProbeState lo{0.0, value0, slope0};
        ProbeState accepted;
        bool have_bracket = false, have_accepted = false;
        ProbeState hi;
        double alpha = (iter == 0) ? std::min(1.0, 1.0 / inf_norm(grad)) : 1.0;
        int evals = 0;

        ProbeState prev = lo;
        while (evals < cfg.max_line_search) {
            ProbeState cur = probe(alpha);
            ++evals;
            if (std::isnan(cur.slope) || cur.value > value0 + cfg.c1 * alpha * slope0 ||
                (evals > 1 && cur.value >= prev.value)) {
                lo = prev;
                hi = cur;
                have_bracket = true;
                break;
            }
            if (std::abs(cur.slope) <= -cfg.c2 * slope0) {
                accepted = cur;
                have_accepted = true;
                break;
            }
            if (cur.slope >= 0.0) {
                lo = cur;
                hi = prev;
                have_bracket = true;
                break;
            }
            prev = cur;
            alpha *= 2.0;
        }

        // Zoom phase (alg. 3.6).
        if (!have_accepted && have_bracket) {
            while (evals < cfg.max_line_search) {
                const double a = std::isnan(hi.slope)
                                     ? 0.5 * (lo.alpha + hi.alpha)
                                     : cubic_step(lo.alpha, lo.value, lo.slope,
                                                  hi.alpha, hi.value, hi.slope);
                ProbeState cur = probe(a);
                ++evals;
                if (std::isnan(cur.slope) || cur.value > value0 + cfg.c1 * a * slope0 ||
                    cur.value >= lo.value) {
                    hi = cur;
                } else {
                    if (std::abs(cur.slope) <= -cfg.c2 * slope0) {
                        accepted = cur;
                        have_accepted = true;
                        break;
                    }
                    if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                    lo = cur;
                }
                if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha)))
                    break;
            }
            // A bracket point that made progress still moves the iterate even
            // if the curvature condition never checked out.
            if (!have_accepted && lo.alpha > 0.0 && lo.value < value0 && !std::isnan(lo.slope)) {
                accepted = probe(lo.alpha);
                have_accepted = true;
            }
        }

        if (!have_accepted) {
            result.iterations = iter;
            result.converged = false;
            return result; // best iterate so far
        }

        // Curvature update; skip the pair when y.s is not safely positive.
        CorrectionPair pair;
        pair.s.resize(n);
        pair.y.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            pair.s[k] = x_trial[k] - x[k];
            pair.y[k] = grad_trial[k] - grad[k];
        }
        const double sy = dot(pair.s, pair.y);
        if (sy > 1e-12 * std::sqrt(dot(pair.s, pair.s)) * std::sqrt(dot(pair.y, pair.y))) {
            pair.rho = 1.0 / sy;
            pairs.push_back(std::move(pair));
            if (pairs.size() > static_cast<std::size_t>(cfg.memory)) pairs.pop_front();
        }

        x = x_trial;
        grad = grad_trial;
        value = accepted.value;
        if (value < result.value) {
            result.x = x;
            result.value = value;
        }
        result.iterations = iter + 1;
    }

    result.x = x;
    result.value = value;
    result.converged = inf_norm(grad) <= cfg.grad_tolerance;
    return result;
}

} // namespace retistack
