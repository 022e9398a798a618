#include "graphmdn/model.hpp"

#include "graphmdn/errors.hpp"

namespace graphmdn {

void BackboneConfig::validate() const {
    if (blocks < 1) throw ConfigError("blocks must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (kernels < 1) throw ConfigError("kernels must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

GraphMdnModel::GraphMdnModel(const SkeletonGraph& graph, BackboneConfig config)
    : graph_(graph), config_(config) {
    config_.validate();
    const Matrix mask = neighbor_mask(graph_);
    const std::size_t h = config_.hidden_dim;

    in_conv_.allocate(params_, "in.conv", mask, 2, h);
    in_nl_.allocate(params_, "in.nonlocal", graph_.node_count(), h);
    blocks_.resize(config_.blocks);
    for (std::size_t b = 0; b < config_.blocks; ++b) {
        const std::string prefix = "blocks[" + std::to_string(b) + "]";
        // block convs feed straight into batch norm: no bias
        blocks_[b].conv1.allocate(params_, prefix + ".conv1", mask, h, h, false);
        blocks_[b].bn1.allocate(params_, aux_, prefix + ".bn1", h);
        blocks_[b].conv2.allocate(params_, prefix + ".conv2", mask, h, h, false);
        blocks_[b].bn2.allocate(params_, aux_, prefix + ".bn2", h);
        blocks_[b].nl.allocate(params_, prefix + ".nonlocal", graph_.node_count(), h);
    }
    head_conv_.allocate(params_, "head.conv", mask, h, output_width());
}

void GraphMdnModel::init_params(Rng rng) {
    std::span<double> p(params_.values());
    std::span<double> a(aux_.values());
    in_conv_.init(p, rng);
    in_nl_.init(p, rng);
    for (Block& blk : blocks_) {
        blk.conv1.init(p, rng);
        blk.bn1.init(p, a);
        blk.conv2.init(p, rng);
        blk.bn2.init(p, a);
        blk.nl.init(p, rng);
    }
    head_conv_.init(p, rng);
}

Matrix GraphMdnModel::forward(const Matrix& x2d, int n, bool training, Rng* dropout_rng) {
    if (!training) return infer(x2d, n);

    std::span<const double> p(params_.values());
    std::span<double> a(aux_.values());

    cache_.emplace();
    cache_->blocks.resize(blocks_.size());
    cache_->n = n;
    ForwardCache* c = &*cache_;

    Rng no_dropout(0);
    Rng& drop_rng = dropout_rng ? *dropout_rng : no_dropout;
    const double rate = config_.dropout;

    Matrix x = in_conv_.forward(p, x2d, n, &c->in_conv);
    x = in_nl_.forward(p, x, n, &c->in_nl);

    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        Block& blk = blocks_[b];
        BlockCache* bc = &c->blocks[b];

        Matrix t = blk.conv1.forward(p, x, n, &bc->conv1);
        t = blk.bn1.forward_train(p, a, t, &bc->bn1);
        t = relu_forward(t, &bc->relu1);
        t = dropout_forward(t, rate, drop_rng, &bc->drop1);
        t = blk.conv2.forward(p, t, n, &bc->conv2);
        t = blk.bn2.forward_train(p, a, t, &bc->bn2);
        t = relu_forward(t, &bc->relu2);
        t = dropout_forward(t, rate, drop_rng, &bc->drop2);

        add_inplace(t, x); // residual skip over the two-conv unit
        x = blk.nl.forward(p, t, n, &bc->nl);
    }

    return head_conv_.forward(p, x, n, &c->head);
}

Matrix GraphMdnModel::infer(const Matrix& x2d, int n) const {
    std::span<const double> p(params_.values());
    std::span<const double> a(aux_.values());

    Matrix x = in_conv_.forward(p, x2d, n, nullptr);
    x = in_nl_.forward(p, x, n, nullptr);
    for (const Block& blk : blocks_) {
        Matrix t = blk.conv1.forward(p, x, n, nullptr);
        t = blk.bn1.forward_eval(p, a, t);
        t = relu_forward(t, nullptr);
        t = blk.conv2.forward(p, t, n, nullptr);
        t = blk.bn2.forward_eval(p, a, t);
        t = relu_forward(t, nullptr);
        add_inplace(t, x);
        x = blk.nl.forward(p, t, n, nullptr);
    }
    return head_conv_.forward(p, x, n, nullptr);
}

std::vector<double> GraphMdnModel::backward(const Matrix& dlogits) {
    if (!cache_) {
        throw std::logic_error("GraphMdnModel::backward: no cached training forward");
    }
    std::span<const double> p(params_.values());
    std::vector<double> grad_vec(params_.size(), 0.0);
    std::span<double> g(grad_vec);

    Matrix dx = head_conv_.backward(p, g, dlogits, cache_->head);

    for (std::size_t bi = blocks_.size(); bi-- > 0;) {
        Block& blk = blocks_[bi];
        BlockCache& bc = cache_->blocks[bi];

        Matrix dt = blk.nl.backward(p, g, dx, bc.nl);
        // dt flows into both the block body and the skip connection
        Matrix dbody = dropout_backward(dt, bc.drop2);
        dbody = relu_backward(dbody, bc.relu2);
        dbody = blk.bn2.backward(p, g, dbody, bc.bn2);
        dbody = blk.conv2.backward(p, g, dbody, bc.conv2);
        dbody = dropout_backward(dbody, bc.drop1);
        dbody = relu_backward(dbody, bc.relu1);
        dbody = blk.bn1.backward(p, g, dbody, bc.bn1);
        dbody = blk.conv1.backward(p, g, dbody, bc.conv1);

        add_inplace(dbody, dt); // skip path
        dx = std::move(dbody);
    }

    dx = in_nl_.backward(p, g, dx, cache_->in_nl);
    in_conv_.backward(p, g, dx, cache_->in_conv);
    return grad_vec;
}

std::size_t GraphMdnModel::expected_param_count(const BackboneConfig& config,
                                                std::size_t node_count) {
    const std::size_t k2 = node_count * node_count;
    const std::size_t h = config.hidden_dim;
    auto conv = [k2](std::size_t fin, std::size_t fout, bool with_bias) {
        return 2 * fin * fout + (with_bias ? fout : 0) + k2;
    };
    const std::size_t nonlocal = 4 * h * h;
    const std::size_t bn = 2 * h;
    std::size_t total = conv(2, h, true) + nonlocal;
    total += config.blocks * (2 * conv(h, h, false) + 2 * bn + nonlocal);
    total += conv(h, 5 * config.kernels, true);
    return total;
}

} // namespace graphmdn
