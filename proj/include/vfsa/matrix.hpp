#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vfsa {

/// Dense row-major float32 matrix. Immutable by convention once built;
/// kernels return fresh matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    Matrix(std::size_t r, std::size_t c, std::vector<float> d)
        : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != rows * cols)
            throw std::invalid_argument("Matrix: data length " + std::to_string(data.size()) +
                                        " != " + std::to_string(rows) + "x" + std::to_string(cols));
        check_finite();
    }

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void check_finite() const {
        for (float v : data)
            if (!std::isfinite(v))
                throw std::invalid_argument("Matrix: non-finite value");
    }
};

namespace detail {

inline void matmul_rows(const Matrix& a, const Matrix& b, Matrix& c,
                        std::size_t r0, std::size_t r1) {
    // ikj order: per-element accumulation is ascending in k, identical to the
    // naive triple loop, and the inner j loop vectorizes.
    const std::size_t n = b.cols, kk = a.cols;
    for (std::size_t i = r0; i < r1; ++i) {
        float* crow = c.data.data() + i * n;
        const float* arow = a.data.data() + i * kk;
        for (std::size_t k = 0; k < kk; ++k) {
            const float aik = arow[k];
            const float* brow = b.data.data() + k * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

} // namespace detail

/// C = A * B, serial deterministic reduction (ascending k per element).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: shape mismatch " + std::to_string(a.rows) + "x" +
                                    std::to_string(a.cols) + " * " + std::to_string(b.rows) +
                                    "x" + std::to_string(b.cols));
    Matrix c(a.rows, b.cols);
    detail::matmul_rows(a, b, c, 0, a.rows);
    c.check_finite();
    return c;
}

/// Opt-in parallel matmul. Rows are partitioned across threads; each row is
/// reduced in the same order as the serial kernel.
inline Matrix matmul_parallel(const Matrix& a, const Matrix& b, unsigned threads) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul_parallel: shape mismatch");
    if (threads <= 1) return matmul(a, b);
    Matrix c(a.rows, b.cols);
    std::vector<std::thread> pool;
    const std::size_t chunk = (a.rows + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t r0 = std::min<std::size_t>(t * chunk, a.rows);
        std::size_t r1 = std::min<std::size_t>(r0 + chunk, a.rows);
        if (r0 < r1)
            pool.emplace_back([&, r0, r1] { detail::matmul_rows(a, b, c, r0, r1); });
    }
    for (auto& th : pool) th.join();
    c.check_finite();
    return c;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

/// Row-wise softmax, stabilized by per-row max subtraction.
inline Matrix softmax_rows(const Matrix& m) {
    if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("softmax_rows: empty matrix");
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const float* src = m.data.data() + i * m.cols;
        float* dst = out.data.data() + i * m.cols;
        float mx = src[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, src[j]);
        float sum = 0.0f;
        for (std::size_t j = 0; j < m.cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) dst[j] /= sum;
    }
    return out;
}

/// Row-wise layer normalization. A row whose variance does not exceed eps is
/// emitted as all zeros and counted in degenerate_rows when the pointer is set.
inline Matrix layer_norm_rows(const Matrix& m, float eps = 1e-5f,
                              std::size_t* degenerate_rows = nullptr) {
    if (m.cols < 2) throw std::invalid_argument("layer_norm_rows: need at least 2 columns");
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const float* src = m.data.data() + i * m.cols;
        float* dst = out.data.data() + i * m.cols;
        float mean = 0.0f;
        for (std::size_t j = 0; j < m.cols; ++j) mean += src[j];
        mean /= static_cast<float>(m.cols);
        float var = 0.0f;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const float d = src[j] - mean;
            var += d * d;
        }
        var /= static_cast<float>(m.cols);
        if (var <= eps) {
            if (degenerate_rows) ++*degenerate_rows;
            continue; // row stays zero
        }
        const float inv = 1.0f / std::sqrt(var);
        for (std::size_t j = 0; j < m.cols; ++j) dst[j] = (src[j] - mean) * inv;
    }
    return out;
}

/// Row-wise L2 normalization. Rejects zero rows.
inline Matrix unit_norm_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const float* src = m.data.data() + i * m.cols;
        float nrm = 0.0f;
        for (std::size_t j = 0; j < m.cols; ++j) nrm += src[j] * src[j];
        nrm = std::sqrt(nrm);
        if (nrm <= 0.0f)
            throw std::invalid_argument("unit_norm_rows: zero row " + std::to_string(i));
        float* dst = out.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) dst[j] = src[j] / nrm;
    }
    return out;
}

/// X * W + b with b broadcast over rows (b is 1 x W.cols).
inline Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
    if (b.rows != 1 || b.cols != w.cols)
        throw std::invalid_argument("linear: bias shape mismatch");
    Matrix out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) += b.at(0, j);
    return out;
}

inline Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("hconcat: row mismatch");
    Matrix out(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        float* dst = out.data.data() + i * out.cols;
        const float* ra = a.data.data() + i * a.cols;
        const float* rb = b.data.data() + i * b.cols;
        for (std::size_t j = 0; j < a.cols; ++j) dst[j] = ra[j];
        for (std::size_t j = 0; j < b.cols; ++j) dst[a.cols + j] = rb[j];
    }
    return out;
}

} // namespace vfsa
