// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace vitprune {

/// Dense row-major matrix of doubles.
///
/// Weights are stored on disk as 32-bit floats but every kernel works in
/// double precision, so results do not depend on accumulation order at the
/// tolerances used by the tests.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    bool empty() const { return m_rows == 0 || m_cols == 0; }

    double& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<double> row(std::size_t r) { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const double> row(std::size_t r) const { return {m_data.data() + r * m_cols, m_cols}; }

    std::span<const double> data() const { return m_data; }
    std::span<double> data() { return m_data; }

    static Matrix identity(std::size_t n);

    /// Rows picked by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;
    Matrix transpose() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// x * w^T + bias, with w laid out as [out_features, in_features].
/// An empty bias means no bias.
Matrix linear(const Matrix& x, const Matrix& w, std::span<const double> bias = {});

Matrix row_softmax(const Matrix& a);
void row_softmax_inplace(Matrix& a);

Matrix layer_norm(const Matrix& a, std::span<const double> gamma, std::span<const double> beta, double eps);

/// Exact x * Phi(x).
double gelu(double x);
void gelu_inplace(Matrix& a);

/// Squared Euclidean distance matrix between rows; symmetric with zero diagonal.
Matrix pairwise_sqdist(const Matrix& a);

double dot(std::span<const double> u, std::span<const double> v);
double norm2(std::span<const double> u);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Per-column median; even row counts take the midpoint of the two central values.
std::vector<double> column_median(const Matrix& a);

}  // namespace vitprune
