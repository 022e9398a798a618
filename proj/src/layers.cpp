#include "graphmdn/layers.hpp"

#include <cmath>

#include "graphmdn/errors.hpp"
#include "graphmdn/numeric.hpp"

namespace graphmdn {

TensorRef ParamStore::alloc(const std::string& name, std::size_t rows, std::size_t cols) {
    TensorRef ref{name, values_.size(), rows, cols};
    values_.resize(values_.size() + rows * cols, 0.0);
    tensors_.push_back(ref);
    return ref;
}

std::string ParamStore::describe(std::size_t flat_index) const {
    for (const TensorRef& t : tensors_) {
        if (flat_index >= t.offset && flat_index < t.offset + t.size()) {
            const std::size_t local = flat_index - t.offset;
            return t.name + "[" + std::to_string(local / t.cols) + "," +
                   std::to_string(local % t.cols) + "]";
        }
    }
    return "param[" + std::to_string(flat_index) + "]";
}

namespace {

void xavier_fill(double* w, std::size_t rows, std::size_t cols, std::size_t fan_in,
                 std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < rows * cols; ++i) w[i] = rng.uniform(-a, a);
}

void check_batch_shape(const Matrix& x, std::size_t k, std::size_t f, int n, const char* who) {
    if (n <= 0 || x.rows() != static_cast<std::size_t>(n) * k || x.cols() != f) {
        throw ShapeError(std::string(who) + ": expected (" + std::to_string(n) + "*" +
                         std::to_string(k) + ") x " + std::to_string(f) + ", got " +
                         std::to_string(x.rows()) + " x " + std::to_string(x.cols()));
    }
}

} // namespace

// ---------------------------------------------------------------------------
// SemGraphConv

void SemGraphConv::allocate(ParamStore& store, const std::string& prefix,
                            const Matrix& neighbor_mask, std::size_t features_in,
                            std::size_t features_out, bool with_bias) {
    k = neighbor_mask.rows();
    f_in = features_in;
    f_out = features_out;
    has_bias = with_bias;
    mask = neighbor_mask;
    w_self = store.alloc(prefix + ".w_self", f_out, f_in);
    w_neigh = store.alloc(prefix + ".w_neigh", f_out, f_in);
    if (has_bias) bias = store.alloc(prefix + ".bias", 1, f_out);
    edge_scores = store.alloc(prefix + ".edge_scores", k, k);
}

void SemGraphConv::init(std::span<double> params, Rng& rng) const {
    xavier_fill(params.data() + w_self.offset, f_out, f_in, f_in, f_out, rng);
    xavier_fill(params.data() + w_neigh.offset, f_out, f_in, f_in, f_out, rng);
    // bias and edge scores start at zero: uniform attention, centred output
}

Matrix SemGraphConv::attention(std::span<const double> params) const {
    const double* s = params.data() + edge_scores.offset;
    Matrix attn(k, k);
    std::vector<std::size_t> nbr;
    std::vector<double> row;
    for (std::size_t i = 0; i < k; ++i) {
        nbr.clear();
        row.clear();
        for (std::size_t j = 0; j < k; ++j) {
            if (j != i && mask(i, j) != 0.0) {
                nbr.push_back(j);
                row.push_back(s[i * k + j]);
            }
        }
        if (nbr.empty()) continue; // isolated node: neighbors contribute nothing
        softmax_inplace(row.data(), row.size());
        for (std::size_t t = 0; t < nbr.size(); ++t) attn(i, nbr[t]) = row[t];
    }
    return attn;
}

Matrix SemGraphConv::forward(std::span<const double> params, const Matrix& x, int n,
                             Cache* cache) const {
    check_batch_shape(x, k, f_in, n, "semgconv_forward");
    const double* p = params.data();

    Matrix y = matmul_nt_raw(x, p + w_self.offset, f_out, f_in);
    Matrix xn = matmul_nt_raw(x, p + w_neigh.offset, f_out, f_in);
    Matrix attn = attention(params);

    for (int s = 0; s < n; ++s) {
        block_mix_accumulate(attn.data(), xn.row(static_cast<std::size_t>(s) * k),
                             y.row(static_cast<std::size_t>(s) * k), k, f_out);
    }
    if (has_bias) {
        const double* b = p + bias.offset;
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double* yr = y.row(r);
            for (std::size_t c = 0; c < f_out; ++c) yr[c] += b[c];
        }
    }

    if (cache) {
        cache->x = x;
        cache->xn = std::move(xn);
        cache->attn = std::move(attn);
        cache->n = n;
    }
    return y;
}

Matrix SemGraphConv::backward(std::span<const double> params, std::span<double> grads,
                              const Matrix& dy, const Cache& cache) const {
    check_batch_shape(dy, k, f_out, cache.n, "semgconv_backward");
    const double* p = params.data();
    double* g = grads.data();
    const int n = cache.n;

    if (has_bias) {
        double* gb = g + bias.offset;
        for (std::size_t r = 0; r < dy.rows(); ++r) {
            const double* dr = dy.row(r);
            for (std::size_t c = 0; c < f_out; ++c) gb[c] += dr[c];
        }
    }

    // self path
    accumulate_tn_raw(dy, cache.x, g + w_self.offset);
    Matrix dx = matmul_raw(dy, p + w_self.offset, f_out, f_in);

    // neighbor path
    Matrix dxn(dy.rows(), f_out);
    Matrix dattn(k, k);
    for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * k;
        block_mix_transposed_accumulate(cache.attn.data(), dy.row(off), dxn.row(off), k, f_out);
        block_outer_accumulate(dy.row(off), cache.xn.row(off), dattn.data(), k, f_out);
    }
    accumulate_tn_raw(dxn, cache.x, g + w_neigh.offset);
    add_inplace(dx, matmul_raw(dxn, p + w_neigh.offset, f_out, f_in));

    // masked softmax backward into the edge scores
    double* gs = g + edge_scores.offset;
    for (std::size_t i = 0; i < k; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += dattn(i, j) * cache.attn(i, j);
        for (std::size_t j = 0; j < k; ++j) {
            const double a = cache.attn(i, j);
            if (a != 0.0) gs[i * k + j] += a * (dattn(i, j) - dot);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// NonLocalLayer

void NonLocalLayer::allocate(ParamStore& store, const std::string& prefix, std::size_t nodes,
                             std::size_t width) {
    k = nodes;
    h = width;
    w_theta = store.alloc(prefix + ".theta", h, h);
    w_phi = store.alloc(prefix + ".phi", h, h);
    w_g = store.alloc(prefix + ".g", h, h);
    w_out = store.alloc(prefix + ".out", h, h);
}

void NonLocalLayer::init(std::span<double> params, Rng& rng) const {
    xavier_fill(params.data() + w_theta.offset, h, h, h, h, rng);
    xavier_fill(params.data() + w_phi.offset, h, h, h, h, rng);
    xavier_fill(params.data() + w_g.offset, h, h, h, h, rng);
    xavier_fill(params.data() + w_out.offset, h, h, h, h, rng);
}

Matrix NonLocalLayer::forward(std::span<const double> params, const Matrix& x, int n,
                              Cache* cache) const {
    check_batch_shape(x, k, h, n, "nonlocal_forward");
    const double* p = params.data();
    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));

    Matrix t = matmul_nt_raw(x, p + w_theta.offset, h, h);
    Matrix ph = matmul_nt_raw(x, p + w_phi.offset, h, h);
    Matrix gm = matmul_nt_raw(x, p + w_g.offset, h, h);

    Matrix attn(x.rows(), k);
    Matrix u(x.rows(), h);
    for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * k;
        double* arow = attn.row(off);
        block_outer_accumulate(t.row(off), ph.row(off), arow, k, h);
        for (std::size_t i = 0; i < k; ++i) {
            double* r = arow + i * k;
            for (std::size_t j = 0; j < k; ++j) r[j] *= inv_sqrt_h;
            softmax_inplace(r, k);
        }
        block_mix_accumulate(arow, gm.row(off), u.row(off), k, h);
    }

    Matrix y = matmul_nt_raw(u, p + w_out.offset, h, h);
    add_inplace(y, x);

    if (cache) {
        cache->x = x;
        cache->t = std::move(t);
        cache->p = std::move(ph);
        cache->g = std::move(gm);
        cache->u = std::move(u);
        cache->attn = std::move(attn);
        cache->n = n;
    }
    return y;
}

Matrix NonLocalLayer::backward(std::span<const double> params, std::span<double> grads,
                               const Matrix& dy, const Cache& cache) const {
    check_batch_shape(dy, k, h, cache.n, "nonlocal_backward");
    const double* p = params.data();
    double* g = grads.data();
    const int n = cache.n;
    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));

    Matrix dx = dy; // residual path

    accumulate_tn_raw(dy, cache.u, g + w_out.offset);
    Matrix du = matmul_raw(dy, p + w_out.offset, h, h);

    Matrix dt(dy.rows(), h);
    Matrix dp(dy.rows(), h);
    Matrix dg(dy.rows(), h);
    std::vector<double> dattn(k * k);
    for (int s = 0; s < n; ++s) {
        const std::size_t off = static_cast<std::size_t>(s) * k;
        const double* arow = cache.attn.row(off);

        std::fill(dattn.begin(), dattn.end(), 0.0);
        block_outer_accumulate(du.row(off), cache.g.row(off), dattn.data(), k, h);
        block_mix_transposed_accumulate(arow, du.row(off), dg.row(off), k, h);

        // softmax rows, then the 1/sqrt(h) scaling
        for (std::size_t i = 0; i < k; ++i) {
            const double* ai = arow + i * k;
            double* di = dattn.data() + i * k;
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += di[j] * ai[j];
            for (std::size_t j = 0; j < k; ++j) di[j] = ai[j] * (di[j] - dot) * inv_sqrt_h;
        }
        block_mix_accumulate(dattn.data(), cache.p.row(off), dt.row(off), k, h);
        block_mix_transposed_accumulate(dattn.data(), cache.t.row(off), dp.row(off), k, h);
    }

    accumulate_tn_raw(dt, cache.x, g + w_theta.offset);
    add_inplace(dx, matmul_raw(dt, p + w_theta.offset, h, h));
    accumulate_tn_raw(dp, cache.x, g + w_phi.offset);
    add_inplace(dx, matmul_raw(dp, p + w_phi.offset, h, h));
    accumulate_tn_raw(dg, cache.x, g + w_g.offset);
    add_inplace(dx, matmul_raw(dg, p + w_g.offset, h, h));
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm

void BatchNorm::allocate(ParamStore& store, ParamStore& aux, const std::string& prefix,
                         std::size_t width) {
    h = width;
    gamma = store.alloc(prefix + ".gamma", 1, h);
    beta = store.alloc(prefix + ".beta", 1, h);
    run_mean = aux.alloc(prefix + ".running_mean", 1, h);
    run_var = aux.alloc(prefix + ".running_var", 1, h);
}

void BatchNorm::init(std::span<double> params, std::span<double> aux) const {
    for (std::size_t i = 0; i < h; ++i) {
        params[gamma.offset + i] = 1.0;
        params[beta.offset + i] = 0.0;
        aux[run_mean.offset + i] = 0.0;
        aux[run_var.offset + i] = 1.0;
    }
}

Matrix BatchNorm::forward_eval(std::span<const double> params, std::span<const double> aux,
                               const Matrix& x) const {
    if (x.cols() != h) {
        throw ShapeError("batchnorm_forward: feature width " + std::to_string(x.cols()) +
                         " != " + std::to_string(h));
    }
    const std::size_t rows = x.rows();
    const double* gam = params.data() + gamma.offset;
    const double* bet = params.data() + beta.offset;
    const double* rm = aux.data() + run_mean.offset;
    const double* rv = aux.data() + run_var.offset;
    Matrix y(rows, h);
    for (std::size_t f = 0; f < h; ++f) {
        const double istd = 1.0 / std::sqrt(rv[f] + eps);
        for (std::size_t r = 0; r < rows; ++r) {
            y(r, f) = gam[f] * (x(r, f) - rm[f]) * istd + bet[f];
        }
    }
    return y;
}

Matrix BatchNorm::forward_train(std::span<const double> params, std::span<double> aux,
                                const Matrix& x, Cache* cache) const {
    if (x.cols() != h) {
        throw ShapeError("batchnorm_forward: feature width " + std::to_string(x.cols()) +
                         " != " + std::to_string(h));
    }
    const std::size_t rows = x.rows();
    const double* gam = params.data() + gamma.offset;
    const double* bet = params.data() + beta.offset;
    Matrix y(rows, h);

    if (rows < 2) {
        throw ConfigError("batchnorm_forward: training mode needs more than one row");
    }
    if (cache) {
        cache->xhat = Matrix(rows, h);
        cache->istd.assign(h, 0.0);
    }
    double* rm = aux.data() + run_mean.offset;
    double* rv = aux.data() + run_var.offset;
    const double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t f = 0; f < h; ++f) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += x(r, f);
        mean *= inv_rows;
        double var = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = x(r, f) - mean;
            var += d * d;
        }
        var *= inv_rows;
        const double istd = 1.0 / std::sqrt(var + eps);
        for (std::size_t r = 0; r < rows; ++r) {
            const double xh = (x(r, f) - mean) * istd;
            if (cache) cache->xhat(r, f) = xh;
            y(r, f) = gam[f] * xh + bet[f];
        }
        if (cache) cache->istd[f] = istd;
        rm[f] = (1.0 - momentum) * rm[f] + momentum * mean;
        rv[f] = (1.0 - momentum) * rv[f] + momentum * var;
    }
    return y;
}

Matrix BatchNorm::backward(std::span<const double> params, std::span<double> grads,
                           const Matrix& dy, const Cache& cache) const {
    const std::size_t rows = dy.rows();
    if (dy.cols() != h || cache.xhat.rows() != rows) {
        throw ShapeError("batchnorm_backward: shape mismatch with cached forward");
    }
    const double* gam = params.data() + gamma.offset;
    double* ggam = grads.data() + gamma.offset;
    double* gbet = grads.data() + beta.offset;
    Matrix dx(rows, h);
    const double inv_rows = 1.0 / static_cast<double>(rows);

    for (std::size_t f = 0; f < h; ++f) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            sum_dy += dy(r, f);
            sum_dy_xhat += dy(r, f) * cache.xhat(r, f);
        }
        ggam[f] += sum_dy_xhat;
        gbet[f] += sum_dy;
        const double scale = gam[f] * cache.istd[f];
        for (std::size_t r = 0; r < rows; ++r) {
            dx(r, f) = scale * (dy(r, f) - inv_rows * sum_dy -
                                cache.xhat(r, f) * inv_rows * sum_dy_xhat);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU / dropout

Matrix relu_forward(const Matrix& x, Matrix* mask) {
    Matrix y = x;
    if (mask) *mask = Matrix(x.rows(), x.cols());
    double* py = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (py[i] > 0.0) {
            if (mask) mask->data()[i] = 1.0;
        } else {
            py[i] = 0.0;
        }
    }
    return y;
}

Matrix relu_backward(const Matrix& dy, const Matrix& mask) {
    if (dy.rows() != mask.rows() || dy.cols() != mask.cols()) {
        throw ShapeError("relu_backward: mask shape mismatch");
    }
    Matrix dx = dy;
    double* p = dx.data();
    const double* m = mask.data();
    for (std::size_t i = 0; i < dx.size(); ++i) p[i] *= m[i];
    return dx;
}

Matrix dropout_forward(const Matrix& x, double rate, Rng& rng, Matrix* mask) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout rate must be in [0, 1)");
    }
    if (rate == 0.0) {
        if (mask) {
            *mask = Matrix(x.rows(), x.cols());
            mask->fill(1.0);
        }
        return x;
    }
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    Matrix y = x;
    if (mask) *mask = Matrix(x.rows(), x.cols());
    double* py = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (rng.uniform() < keep) {
            py[i] *= inv_keep;
            if (mask) mask->data()[i] = inv_keep;
        } else {
            py[i] = 0.0;
        }
    }
    return y;
}

Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
    if (dy.rows() != mask.rows() || dy.cols() != mask.cols()) {
        throw ShapeError("dropout_backward: mask shape mismatch");
    }
    Matrix dx = dy;
    double* p = dx.data();
    const double* m = mask.data();
    for (std::size_t i = 0; i < dx.size(); ++i) p[i] *= m[i];
    return dx;
}

} // namespace graphmdn
