#include "graphmdn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace graphmdn {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* outi = out.row(i);
        const double* ai = a.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b.row(p);
            for (std::size_t j = 0; j < m; ++j) outi[j] += av * bp[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
    }
    Matrix out(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a.row(i);
        double* outi = out.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            outi[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: " + shape_str(a) + "^T * " + shape_str(b));
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t r = 0; r < n; ++r) {
        const double* ar = a.row(r);
        const double* br = b.row(r);
        for (std::size_t i = 0; i < k; ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            double* outi = out.row(i);
            for (std::size_t j = 0; j < m; ++j) outi[j] += av * br[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("add: " + shape_str(a) + " + " + shape_str(b));
    }
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void add_scaled_inplace(Matrix& a, const Matrix& b, double s) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("add_scaled: " + shape_str(a) + " + s*" + shape_str(b));
    }
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

Matrix add(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    add_inplace(out, b);
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    add_scaled_inplace(out, b, -1.0);
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    double* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) p[i] *= s;
    return out;
}

Matrix matmul_nt_raw(const Matrix& a, const double* w, std::size_t w_rows, std::size_t w_cols) {
    if (a.cols() != w_cols) {
        throw ShapeError("matmul_nt_raw: " + shape_str(a) + " * (" + std::to_string(w_rows) +
                         "x" + std::to_string(w_cols) + ")^T");
    }
    Matrix out(a.rows(), w_rows);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* outi = out.row(i);
        for (std::size_t j = 0; j < w_rows; ++j) {
            const double* wj = w + j * w_cols;
            double acc = 0.0;
            for (std::size_t p = 0; p < w_cols; ++p) acc += ai[p] * wj[p];
            outi[j] = acc;
        }
    }
    return out;
}

Matrix matmul_raw(const Matrix& a, const double* w, std::size_t w_rows, std::size_t w_cols) {
    if (a.cols() != w_rows) {
        throw ShapeError("matmul_raw: " + shape_str(a) + " * (" + std::to_string(w_rows) + "x" +
                         std::to_string(w_cols) + ")");
    }
    Matrix out(a.rows(), w_cols);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* outi = out.row(i);
        for (std::size_t p = 0; p < w_rows; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* wp = w + p * w_cols;
            for (std::size_t j = 0; j < w_cols; ++j) outi[j] += av * wp[j];
        }
    }
    return out;
}

void accumulate_tn_raw(const Matrix& a, const Matrix& b, double* gw) {
    if (a.rows() != b.rows()) {
        throw ShapeError("accumulate_tn_raw: " + shape_str(a) + "^T * " + shape_str(b));
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t r = 0; r < n; ++r) {
        const double* ar = a.row(r);
        const double* br = b.row(r);
        for (std::size_t i = 0; i < k; ++i) {
            const double av = ar[i];
            if (av == 0.0) continue;
            double* gi = gw + i * m;
            for (std::size_t j = 0; j < m; ++j) gi[j] += av * br[j];
        }
    }
}

void block_mix_accumulate(const double* attn, const double* x, double* out,
                          std::size_t k, std::size_t f) {
    for (std::size_t i = 0; i < k; ++i) {
        const double* arow = attn + i * k;
        double* orow = out + i * f;
        for (std::size_t j = 0; j < k; ++j) {
            const double a = arow[j];
            if (a == 0.0) continue;
            const double* xrow = x + j * f;
            for (std::size_t c = 0; c < f; ++c) orow[c] += a * xrow[c];
        }
    }
}

void block_outer_accumulate(const double* a, const double* b, double* out,
                            std::size_t k, std::size_t f) {
    for (std::size_t i = 0; i < k; ++i) {
        const double* ai = a + i * f;
        double* orow = out + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const double* bj = b + j * f;
            double acc = 0.0;
            for (std::size_t c = 0; c < f; ++c) acc += ai[c] * bj[c];
            orow[j] += acc;
        }
    }
}

void block_mix_transposed_accumulate(const double* attn, const double* x, double* out,
                                     std::size_t k, std::size_t f) {
    for (std::size_t j = 0; j < k; ++j) {
        const double* xrow = x + j * f;
        const double* acol = attn + j * k; // row j of attn = column j of attn^T
        for (std::size_t i = 0; i < k; ++i) {
            const double a = acol[i];
            if (a == 0.0) continue;
            double* orow = out + i * f;
            for (std::size_t c = 0; c < f; ++c) orow[c] += a * xrow[c];
        }
    }
}

} // namespace graphmdn
