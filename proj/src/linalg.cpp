// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vitprune/error.hpp"

namespace vitprune {

namespace {

std::string dims(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : m_rows(rows), m_cols(cols), m_data(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : m_rows(rows), m_cols(cols), m_data(std::move(data)) {
    if (m_data.size() != rows * cols) {
        throw InvalidInput("matrix data length " + std::to_string(m_data.size()) + " does not match " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    m_rows = rows.size();
    m_cols = m_rows ? rows.begin()->size() : 0;
    m_data.reserve(m_rows * m_cols);
    for (const auto& r : rows) {
        if (r.size() != m_cols) {
            throw InvalidInput("ragged matrix initializer");
        }
        m_data.insert(m_data.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), m_cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m_rows) {
            throw InvalidInput("row index " + std::to_string(indices[i]) + " out of range");
        }
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::transpose() const {
    Matrix out(m_cols, m_rows);
    for (std::size_t i = 0; i < m_rows; ++i) {
        for (std::size_t j = 0; j < m_cols; ++j) {
            out(j, i) = (*this)(i, j);
        }
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw InvalidInput("matmul dimension mismatch: " + dims(a) + " x " + dims(b));
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix linear(const Matrix& x, const Matrix& w, std::span<const double> bias) {
    if (x.cols() != w.cols()) {
        throw InvalidInput("linear dimension mismatch: input " + dims(x) + ", weight " + dims(w));
    }
    if (!bias.empty() && bias.size() != w.rows()) {
        throw InvalidInput("linear bias length " + std::to_string(bias.size()) + " != " +
                           std::to_string(w.rows()));
    }
    Matrix y(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto xi = x.row(i);
        auto yi = y.row(i);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            yi[o] = dot(xi, w.row(o)) + (bias.empty() ? 0.0 : bias[o]);
        }
    }
    return y;
}

void row_softmax_inplace(Matrix& a) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        if (r.empty()) {
            continue;
        }
        const double mx = *std::max_element(r.begin(), r.end());
        double sum = 0.0;
        for (double& v : r) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : r) {
            v /= sum;
        }
    }
}

Matrix row_softmax(const Matrix& a) {
    Matrix out = a;
    row_softmax_inplace(out);
    return out;
}

Matrix layer_norm(const Matrix& a, std::span<const double> gamma, std::span<const double> beta, double eps) {
    if (gamma.size() != a.cols() || beta.size() != a.cols()) {
        throw InvalidInput("layer_norm parameter length mismatch: expected " + std::to_string(a.cols()));
    }
    if (!(eps > 0.0)) {
        throw InvalidInput("layer_norm eps must be positive");
    }
    Matrix out(a.rows(), a.cols());
    const double n = static_cast<double>(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        double mean = 0.0;
        for (double v : r) {
            mean += v;
        }
        mean /= n;
        double var = 0.0;
        for (double v : r) {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        auto o = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            o[j] = (r[j] - mean) * inv * gamma[j] + beta[j];
        }
    }
    return out;
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

void gelu_inplace(Matrix& a) {
    for (double& v : a.data()) {
        v = gelu(v);
    }
}

Matrix pairwise_sqdist(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        auto ri = a.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            auto rj = a.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ri.size(); ++k) {
                const double diff = ri[k] - rj[k];
                s += diff * diff;
            }
            d(i, j) = s;
            d(j, i) = s;
        }
    }
    return d;
}

double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        s += u[k] * v[k];
    }
    return s;
}

double norm2(std::span<const double> u) {
    return std::sqrt(dot(u, u));
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw InvalidInput("cosine_similarity length mismatch");
    }
    const double nu = norm2(u);
    const double nv = norm2(v);
    if (nu == 0.0 || nv == 0.0) {
        throw InvalidInput("cosine_similarity of a zero-norm vector");
    }
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

std::vector<double> column_median(const Matrix& a) {
    if (a.rows() == 0) {
        throw InvalidInput("column_median of an empty matrix");
    }
    std::vector<double> out(a.cols());
    std::vector<double> col(a.rows());
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < a.cols(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = a(i, j);
        }
        std::sort(col.begin(), col.end());
        out[j] = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    }
    return out;
}

}  // namespace vitprune
