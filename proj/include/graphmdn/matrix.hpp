#pragma once

#include <cstddef>
#include <vector>

#include "graphmdn/errors.hpp"

namespace graphmdn {

/// Dense row-major matrix of doubles. The only storage type used for
/// features, weights, poses and gradients throughout the library.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    void fill(double v);
    void set_zero() { fill(0.0); }
    bool all_finite() const;

    bool operator==(const Matrix& other) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b. Throws ShapeError on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T. The X * W^T pattern used by every layer.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a^T * b. The dW = dY^T * X pattern in backward passes.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

void add_inplace(Matrix& a, const Matrix& b);            // a += b
void add_scaled_inplace(Matrix& a, const Matrix& b, double s); // a += s*b
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// Raw-weight variants: W lives in a flat parameter store, no Matrix wrapper.
Matrix matmul_nt_raw(const Matrix& a, const double* w, std::size_t w_rows, std::size_t w_cols);
Matrix matmul_raw(const Matrix& a, const double* w, std::size_t w_rows, std::size_t w_cols);
/// gw(a.cols x b.cols) += a^T * b.
void accumulate_tn_raw(const Matrix& a, const Matrix& b, double* gw);

/// Raw-pointer product of two K-row blocks: out(K x f) += attn(K x K) * x(K x f).
/// Used for per-sample graph mixing inside batch tensors.
void block_mix_accumulate(const double* attn, const double* x, double* out,
                          std::size_t k, std::size_t f);

/// out(K x K) += a(K x f) * b(K x f)^T, raw-pointer form for attention backward.
void block_outer_accumulate(const double* a, const double* b, double* out,
                            std::size_t k, std::size_t f);

/// out(K x f) += attn(K x K)^T * x(K x f).
void block_mix_transposed_accumulate(const double* attn, const double* x, double* out,
                                     std::size_t k, std::size_t f);

} // namespace graphmdn
