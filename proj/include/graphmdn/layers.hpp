#pragma once

#include <span>
#include <string>
#include <vector>

#include "graphmdn/matrix.hpp"
#include "graphmdn/rng.hpp"

namespace graphmdn {

/// One named tensor inside a flat parameter vector.
struct TensorRef {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

/// Flat storage for parameters (or any aligned state such as batch-norm
/// running statistics). flatten/unflatten is the identity by construction:
/// the flat vector IS the storage.
class ParamStore {
  public:
    TensorRef alloc(const std::string& name, std::size_t rows, std::size_t cols);

    std::size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    const std::vector<TensorRef>& tensors() const { return tensors_; }

    /// "blocks[1].conv2.w_neigh[3,7]" for a flat index; used in diagnostics.
    std::string describe(std::size_t flat_index) const;

  private:
    std::vector<double> values_;
    std::vector<TensorRef> tensors_;
};

// Activation batches are stored as (n_samples * K) x features matrices;
// rows [s*K, (s+1)*K) hold sample s.

/// Graph convolution with separate self/neighbor transforms and learned
/// per-edge scores, normalized by a masked softmax over each node's
/// neighborhood (self excluded). Scores outside the mask are never read.
struct SemGraphConv {
    std::size_t k = 0, f_in = 0, f_out = 0;
    bool has_bias = true;
    Matrix mask; // K x K binary with unit diagonal
    TensorRef w_self, w_neigh, bias, edge_scores;

    struct Cache {
        Matrix x;    // input
        Matrix xn;   // neighbor-transformed input
        Matrix attn; // K x K
        int n = 0;
    };

    /// `with_bias` false drops the bias term; used where a batch-norm layer
    /// follows immediately and would cancel it, leaving a dead parameter.
    void allocate(ParamStore& store, const std::string& prefix, const Matrix& neighbor_mask,
                  std::size_t features_in, std::size_t features_out, bool with_bias = true);
    void init(std::span<double> params, Rng& rng) const;

    /// Row-softmax attention over each masked neighborhood; zero rows for
    /// isolated nodes, zeros outside the mask.
    Matrix attention(std::span<const double> params) const;

    Matrix forward(std::span<const double> params, const Matrix& x, int n, Cache* cache) const;
    Matrix backward(std::span<const double> params, std::span<double> grads, const Matrix& dy,
                    const Cache& cache) const;
};

/// Residual all-pairs attention: y = x + out(softmax(theta(x) phi(x)^T / sqrt(H)) g(x)).
struct NonLocalLayer {
    std::size_t k = 0, h = 0;
    TensorRef w_theta, w_phi, w_g, w_out;

    struct Cache {
        Matrix x, t, p, g, u;
        Matrix attn; // (n*K) x K, rows [s*K, (s+1)*K) = attention of sample s
        int n = 0;
    };

    void allocate(ParamStore& store, const std::string& prefix, std::size_t nodes,
                  std::size_t width);
    void init(std::span<double> params, Rng& rng) const;

    Matrix forward(std::span<const double> params, const Matrix& x, int n, Cache* cache) const;
    Matrix backward(std::span<const double> params, std::span<double> grads, const Matrix& dy,
                    const Cache& cache) const;
};

/// Feature-wise batch normalization over all rows (samples x nodes).
/// Running statistics live in a separate aux store and are only read at
/// inference.
struct BatchNorm {
    std::size_t h = 0;
    double momentum = 0.1;
    double eps = 1e-5;
    TensorRef gamma, beta;     // trainable store
    TensorRef run_mean, run_var; // aux store

    struct Cache {
        Matrix xhat;
        std::vector<double> istd;
    };

    void allocate(ParamStore& store, ParamStore& aux, const std::string& prefix,
                  std::size_t width);
    void init(std::span<double> params, std::span<double> aux) const;

    /// Normalizes with batch statistics (requires more than one row) and
    /// updates the running stats in `aux`.
    Matrix forward_train(std::span<const double> params, std::span<double> aux, const Matrix& x,
                         Cache* cache) const;
    /// Normalizes with the stored running statistics; read-only.
    Matrix forward_eval(std::span<const double> params, std::span<const double> aux,
                        const Matrix& x) const;
    Matrix backward(std::span<const double> params, std::span<double> grads, const Matrix& dy,
                    const Cache& cache) const;
};

Matrix relu_forward(const Matrix& x, Matrix* mask);
Matrix relu_backward(const Matrix& dy, const Matrix& mask);

/// Inverted dropout: kept activations are scaled by 1/(1-rate) at train time
/// so inference needs no rescale. rate = 0 is the identity.
Matrix dropout_forward(const Matrix& x, double rate, Rng& rng, Matrix* mask);
Matrix dropout_backward(const Matrix& dy, const Matrix& mask);

} // namespace graphmdn
