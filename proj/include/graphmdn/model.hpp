#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "graphmdn/graph.hpp"
#include "graphmdn/layers.hpp"
#include "graphmdn/rng.hpp"

namespace graphmdn {

struct BackboneConfig {
    std::size_t blocks = 4;
    std::size_t hidden_dim = 128;
    std::size_t kernels = 5; // M, consumed by the mixture head
    double dropout = 0.1;

    void validate() const;
    bool operator==(const BackboneConfig&) const = default;
};

/// Backbone plus mixture head. An input graph convolution (2 -> H) and a
/// non-local layer, then `blocks` residual units of two conv+BN+ReLU+dropout
/// stages each followed by a non-local layer, and a final graph convolution
/// emitting 5M raw logits per node.
class GraphMdnModel {
  public:
    GraphMdnModel(const SkeletonGraph& graph, BackboneConfig config);

    const BackboneConfig& config() const { return config_; }
    const SkeletonGraph& graph() const { return graph_; }
    std::size_t node_count() const { return graph_.node_count(); }
    std::size_t output_width() const { return 5 * config_.kernels; }

    /// Xavier weights, zero edge scores and biases, unit batch-norm.
    void init_params(Rng rng);

    /// x2d: (n*K) x 2 node-major inputs. Returns (n*K) x 5M raw logits.
    /// Training mode uses batch statistics, applies dropout (drawing masks
    /// from `dropout_rng`) and caches activations for backward().
    Matrix forward(const Matrix& x2d, int n, bool training, Rng* dropout_rng = nullptr);

    /// Pure inference: running statistics, no dropout, no cache writes.
    /// Safe to call concurrently on a shared model.
    Matrix infer(const Matrix& x2d, int n) const;

    /// Reverse-mode gradient of every trainable parameter given the upstream
    /// gradient on the raw logits. Requires a cached training forward.
    std::vector<double> backward(const Matrix& dlogits);

    ParamStore& param_store() { return params_; }
    const ParamStore& param_store() const { return params_; }
    std::vector<double>& param_values() { return params_.values(); }
    const std::vector<double>& param_values() const { return params_.values(); }
    std::vector<double>& aux_values() { return aux_.values(); }
    const std::vector<double>& aux_values() const { return aux_.values(); }

    std::string param_name(std::size_t flat_index) const { return params_.describe(flat_index); }

    /// Closed-form trainable parameter count for a config; cross-checked in
    /// tests against the allocated store.
    static std::size_t expected_param_count(const BackboneConfig& config, std::size_t node_count);

  private:
    struct Block {
        SemGraphConv conv1, conv2;
        BatchNorm bn1, bn2;
        NonLocalLayer nl;
    };

    struct BlockCache {
        SemGraphConv::Cache conv1, conv2;
        BatchNorm::Cache bn1, bn2;
        Matrix relu1, drop1, relu2, drop2; // masks
        NonLocalLayer::Cache nl;
    };

    struct ForwardCache {
        SemGraphConv::Cache in_conv;
        NonLocalLayer::Cache in_nl;
        std::vector<BlockCache> blocks;
        SemGraphConv::Cache head;
        int n = 0;
    };

    SkeletonGraph graph_;
    BackboneConfig config_;
    ParamStore params_;
    ParamStore aux_; // batch-norm running statistics

    SemGraphConv in_conv_;
    NonLocalLayer in_nl_;
    std::vector<Block> blocks_;
    SemGraphConv head_conv_;

    std::optional<ForwardCache> cache_;
};

} // namespace graphmdn
