#pragma once

#include <cstddef>
#include <vector>

#include "retistack/error.hpp"

namespace retistack {

// Dense row-major double matrix. Heavy linear algebra is out of scope for
// this library; the handful of mat-vec products it needs live next to their
// callers.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }
};

inline void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows != rows || m.cols != cols)
        fail_validation(std::string("shape mismatch in ") + what);
}

} // namespace retistack
