#include <catch_amalgamated.hpp>

#include <cmath>

#include "retistack/lbfgs.hpp"
#include "retistack/rng.hpp"

using namespace retistack;

namespace {

// Random SPD quadratic 0.5 x'Ax - b'x with a controlled condition number:
// A = Q diag(lambda) Q' from a Gram-Schmidt-orthogonalized random matrix.
struct Quadratic {
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    std::size_t dim;
};

Quadratic random_quadratic(Rng& rng, std::size_t dim, double condition) {
    std::vector<std::vector<double>> q(dim, std::vector<double>(dim));
    for (auto& row : q)
        for (auto& v : row) v = rng.normal();
    // Gram-Schmidt on rows
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += q[i][k] * q[j][k];
            for (std::size_t k = 0; k < dim; ++k) q[i][k] -= dot * q[j][k];
        }
        double norm = 0.0;
        for (double v : q[i]) norm += v * v;
        norm = std::sqrt(norm);
        for (auto& v : q[i]) v /= norm;
    }
    std::vector<double> lambda(dim);
    for (std::size_t i = 0; i < dim; ++i)
        lambda[i] = std::exp(std::log(condition) * rng.next_double());
    lambda[0] = 1.0;
    if (dim > 1) lambda[1] = condition;

    Quadratic prob;
    prob.dim = dim;
    prob.A.assign(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            for (std::size_t k = 0; k < dim; ++k)
                prob.A[i][j] += q[k][i] * lambda[k] * q[k][j];
    prob.b.resize(dim);
    for (auto& v : prob.b) v = rng.normal();
    return prob;
}

Objective quadratic_objective(const Quadratic& prob) {
    return [&prob](const std::vector<double>& x, std::vector<double>& grad) {
        grad.assign(prob.dim, 0.0);
        double value = 0.0;
        for (std::size_t i = 0; i < prob.dim; ++i) {
            double ax = 0.0;
            for (std::size_t j = 0; j < prob.dim; ++j) ax += prob.A[i][j] * x[j];
            grad[i] = ax - prob.b[i];
            value += 0.5 * x[i] * ax - prob.b[i] * x[i];
        }
        return value;
    };
}

// Cholesky solve of A x = b: the direct-solve oracle.
std::vector<double> solve_spd(const std::vector<std::vector<double>>& A,
                              const std::vector<double>& b) {
    const std::size_t n = b.size();
    std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = A[i][j];
            for (std::size_t k = 0; k < j; ++k) sum -= L[i][k] * L[j][k];
            if (i == j) L[i][j] = std::sqrt(sum);
            else L[i][j] = sum / L[j][j];
        }
    }
    std::vector<double> y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= L[i][k] * y[k];
        y[i] = sum / L[i][i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double sum = y[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= L[k][i] * x[k];
        x[i] = sum / L[i][i];
    }
    return x;
}

} // namespace

TEST_CASE("exact quadratic converges in a handful of iterations") {
    const std::vector<double> target{3.0, -1.5, 0.25, 7.0};
    Objective f = [&](const std::vector<double>& x, std::vector<double>& grad) {
        grad.resize(x.size());
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - target[i];
            v += d * d;
            grad[i] = 2.0 * d;
        }
        return v;
    };
    const LbfgsResult r = lbfgs_minimize(f, std::vector<double>(4, 0.0));
    REQUIRE(r.converged);
    CHECK(r.iterations <= 5);
    for (std::size_t i = 0; i < target.size(); ++i)
        CHECK_THAT(r.x[i], Catch::Matchers::WithinAbs(target[i], 1e-8));
}

TEST_CASE("rosenbrock reaches the global minimum") {
    Objective f = [](const std::vector<double>& x, std::vector<double>& grad) {
        const double a = x[0], b = x[1];
        grad = {-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)};
        const double t1 = 1.0 - a, t2 = b - a * a;
        return t1 * t1 + 100.0 * t2 * t2;
    };
    const LbfgsResult r = lbfgs_minimize(f, {-1.2, 1.0});
    REQUIRE(r.converged);
    CHECK_THAT(r.x[0], Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK_THAT(r.x[1], Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("random ill-conditioned quadratics match the direct solve") {
    Rng rng(314);
    for (int t = 0; t < 30; ++t) {
        const std::size_t dim = 2 + rng.below(19);
        const Quadratic prob = random_quadratic(rng, dim, 1000.0);
        const LbfgsResult r =
            lbfgs_minimize(quadratic_objective(prob), std::vector<double>(dim, 0.0));
        REQUIRE(r.converged);
        CHECK(r.iterations <= 200);

        const auto exact = solve_spd(prob.A, prob.b);
        for (std::size_t i = 0; i < dim; ++i)
            CHECK_THAT(r.x[i], Catch::Matchers::WithinAbs(exact[i], 1e-6));

        double exact_value = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            double ax = 0.0;
            for (std::size_t j = 0; j < dim; ++j) ax += prob.A[i][j] * exact[j];
            exact_value += 0.5 * exact[i] * ax - prob.b[i] * exact[i];
        }
        CHECK_THAT(r.value, Catch::Matchers::WithinAbs(exact_value, 1e-8));
    }
}

TEST_CASE("unbounded direction ends with converged=false") {
    Objective f = [](const std::vector<double>& x, std::vector<double>& grad) {
        grad = {1.0};
        return x[0];
    };
    const LbfgsResult r = lbfgs_minimize(f, {0.0});
    CHECK_FALSE(r.converged);
}

TEST_CASE("non-finite start throws a numeric error") {
    Objective f = [](const std::vector<double>&, std::vector<double>& grad) {
        grad = {0.0};
        return std::numeric_limits<double>::quiet_NaN();
    };
    try {
        lbfgs_minimize(f, {0.0});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.exit_code() == 3);
    }
}

TEST_CASE("invalid configuration is rejected") {
    LbfgsConfig cfg;
    cfg.c1 = 0.95; // violates c1 < c2
    Objective f = [](const std::vector<double>& x, std::vector<double>& grad) {
        grad = {2.0 * x[0]};
        return x[0] * x[0];
    };
    CHECK_THROWS_AS(lbfgs_minimize(f, {1.0}, cfg), Error);
}
