#include <cmath>

#include <doctest.h>

#include "graphmdn/errors.hpp"
#include "graphmdn/gradcheck.hpp"
#include "graphmdn/layers.hpp"
#include "graphmdn/mdn.hpp"
#include "graphmdn/model.hpp"

using namespace graphmdn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

const SkeletonGraph& toy_graph() {
    static const SkeletonGraph g(4, {{0, 1}, {1, 2}, {1, 3}});
    return g;
}

} // namespace

TEST_CASE("semgconv with diagonal-only mask reduces to the self transform") {
    ParamStore store;
    SemGraphConv conv;
    Matrix mask = Matrix::identity(3);
    conv.allocate(store, "conv", mask, 2, 2);
    Rng rng(5);
    conv.init(store.values(), rng);
    store.values()[conv.bias.offset] = 0.25;
    store.values()[conv.bias.offset + 1] = -0.5;

    Rng data_rng(6);
    const Matrix x = random_matrix(3, 2, data_rng);
    const Matrix y = conv.forward(store.values(), x, 1, nullptr);

    const double* ws = store.values().data() + conv.w_self.offset;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t o = 0; o < 2; ++o) {
            const double expect = ws[o * 2] * x(i, 0) + ws[o * 2 + 1] * x(i, 1) +
                                  store.values()[conv.bias.offset + o];
            CHECK(y(i, o) == doctest::Approx(expect).epsilon(1e-15));
        }
    }
}

TEST_CASE("semgconv attention is uniform at zero scores and respects the mask") {
    ParamStore store;
    SemGraphConv conv;
    const SkeletonGraph star(4, {{0, 1}, {0, 2}, {0, 3}});
    conv.allocate(store, "conv", neighbor_mask(star), 2, 2);
    const Matrix attn = conv.attention(store.values());
    for (std::size_t j = 1; j < 4; ++j) {
        CHECK(attn(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-15));
    }
    CHECK(attn(0, 0) == 0.0); // self excluded
    CHECK(attn(1, 2) == 0.0); // outside the mask
    // leaf rows: the single neighbor takes all the weight
    CHECK(attn(1, 0) == 1.0);

    // rows sum to one over the neighborhood
    for (std::size_t i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 4; ++j) sum += attn(i, j);
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("semgconv two-node hand computation") {
    // K=2 path, 1x1 transforms: w_self=2, w_neigh=3, h=[1,5]
    ParamStore store;
    SemGraphConv conv;
    const SkeletonGraph pair(2, {{0, 1}});
    conv.allocate(store, "conv", neighbor_mask(pair), 1, 1);
    store.values()[conv.w_self.offset] = 2.0;
    store.values()[conv.w_neigh.offset] = 3.0;
    store.values()[conv.bias.offset] = 0.125;

    Matrix x(2, 1, {1.0, 5.0});
    const Matrix y = conv.forward(store.values(), x, 1, nullptr);
    CHECK(y(0, 0) == doctest::Approx(17.0 + 0.125).epsilon(1e-15));
    CHECK(y(1, 0) == doctest::Approx(13.0 + 0.125).epsilon(1e-15));
}

TEST_CASE("semgconv node permutation equivariance") {
    Rng rng(17);
    const SkeletonGraph g(4, {{0, 1}, {1, 2}, {1, 3}});
    const std::vector<std::size_t> perm = {2, 0, 3, 1}; // new index of old node i

    // permuted graph: edge (a,b) -> (perm[a], perm[b])
    const SkeletonGraph gp(4, {{perm[0], perm[1]}, {perm[1], perm[2]}, {perm[1], perm[3]}});

    ParamStore store, store_p;
    SemGraphConv conv, conv_p;
    conv.allocate(store, "conv", neighbor_mask(g), 3, 2);
    conv_p.allocate(store_p, "conv", neighbor_mask(gp), 3, 2);
    conv.init(store.values(), rng);

    // share transforms; permute the edge scores
    std::copy(store.values().begin() + conv.w_self.offset,
              store.values().begin() + conv.w_self.offset + conv.w_self.size(),
              store_p.values().begin() + conv_p.w_self.offset);
    std::copy(store.values().begin() + conv.w_neigh.offset,
              store.values().begin() + conv.w_neigh.offset + conv.w_neigh.size(),
              store_p.values().begin() + conv_p.w_neigh.offset);
    Rng score_rng(18);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double s = score_rng.uniform(-1.0, 1.0);
            store.values()[conv.edge_scores.offset + i * 4 + j] = s;
            store_p.values()[conv_p.edge_scores.offset + perm[i] * 4 + perm[j]] = s;
        }
    }

    Rng data_rng(19);
    const Matrix x = random_matrix(4, 3, data_rng);
    Matrix xp(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 3; ++c) xp(perm[i], c) = x(i, c);
    }

    const Matrix y = conv.forward(store.values(), x, 1, nullptr);
    const Matrix yp = conv_p.forward(store_p.values(), xp, 1, nullptr);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(yp(perm[i], c) == doctest::Approx(y(i, c)).epsilon(1e-13));
        }
    }
}

TEST_CASE("nonlocal layer degenerate cases") {
    SUBCASE("zero transforms: residual identity") {
        ParamStore store;
        NonLocalLayer nl;
        nl.allocate(store, "nl", 3, 4);
        Rng rng(23);
        const Matrix x = random_matrix(6, 4, rng);
        const Matrix y = nl.forward(store.values(), x, 2, nullptr);
        CHECK(y == x);
    }
    SUBCASE("single node: attention collapses to 1") {
        ParamStore store;
        NonLocalLayer nl;
        nl.allocate(store, "nl", 1, 2);
        Rng rng(24);
        nl.init(store.values(), rng);
        const Matrix x = random_matrix(1, 2, rng);

        NonLocalLayer::Cache cache;
        const Matrix y = nl.forward(store.values(), x, 1, &cache);
        CHECK(cache.attn(0, 0) == 1.0);
        // y = x + out(g(x))
        const double* wg = store.values().data() + nl.w_g.offset;
        const double* wo = store.values().data() + nl.w_out.offset;
        const double g0 = wg[0] * x(0, 0) + wg[1] * x(0, 1);
        const double g1 = wg[2] * x(0, 0) + wg[3] * x(0, 1);
        CHECK(y(0, 0) == doctest::Approx(x(0, 0) + wo[0] * g0 + wo[1] * g1).epsilon(1e-14));
        CHECK(y(0, 1) == doctest::Approx(x(0, 1) + wo[2] * g0 + wo[3] * g1).epsilon(1e-14));
    }
    SUBCASE("two nodes with hand-set 1x1 transforms") {
        ParamStore store;
        NonLocalLayer nl;
        nl.allocate(store, "nl", 2, 1);
        store.values()[nl.w_theta.offset] = 0.5;
        store.values()[nl.w_phi.offset] = -1.5;
        store.values()[nl.w_g.offset] = 2.0;
        store.values()[nl.w_out.offset] = 0.75;
        Matrix x(2, 1, {1.0, -2.0});
        const Matrix y = nl.forward(store.values(), x, 1, nullptr);

        // scalar hand computation, H = 1 so the 1/sqrt(H) scale is 1
        const double t0 = 0.5, t1 = -1.0;
        const double p0 = -1.5, p1 = 3.0;
        const double g0 = 2.0, g1 = -4.0;
        auto softmax2 = [](double a, double b) {
            const double m = std::max(a, b);
            const double ea = std::exp(a - m), eb = std::exp(b - m);
            return std::pair<double, double>(ea / (ea + eb), eb / (ea + eb));
        };
        const auto [a00, a01] = softmax2(t0 * p0, t0 * p1);
        const auto [a10, a11] = softmax2(t1 * p0, t1 * p1);
        CHECK(y(0, 0) ==
              doctest::Approx(1.0 + 0.75 * (a00 * g0 + a01 * g1)).epsilon(1e-14));
        CHECK(y(1, 0) ==
              doctest::Approx(-2.0 + 0.75 * (a10 * g0 + a11 * g1)).epsilon(1e-14));
    }
}

TEST_CASE("batchnorm training statistics and gamma/beta behavior") {
    ParamStore store, aux;
    BatchNorm bn;
    bn.allocate(store, aux, "bn", 3);
    bn.init(store.values(), aux.values());

    Rng rng(31);
    Matrix x(64, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * 2.0 + 1.0;

    SUBCASE("unit gamma, zero beta: output is standardized") {
        const Matrix y = bn.forward_train(store.values(), aux.values(), x, nullptr);
        for (std::size_t f = 0; f < 3; ++f) {
            double mean = 0.0, var = 0.0;
            for (std::size_t r = 0; r < 64; ++r) mean += y(r, f);
            mean /= 64.0;
            for (std::size_t r = 0; r < 64; ++r) var += (y(r, f) - mean) * (y(r, f) - mean);
            var /= 64.0;
            CHECK(std::abs(mean) < 1e-12);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-3)); // eps in the denominator
        }
    }
    SUBCASE("zero gamma: output equals beta everywhere") {
        for (std::size_t f = 0; f < 3; ++f) {
            store.values()[bn.gamma.offset + f] = 0.0;
            store.values()[bn.beta.offset + f] = 0.5 + f;
        }
        const Matrix y = bn.forward_train(store.values(), aux.values(), x, nullptr);
        for (std::size_t r = 0; r < 64; ++r) {
            for (std::size_t f = 0; f < 3; ++f) CHECK(y(r, f) == 0.5 + f);
        }
    }
    SUBCASE("two-element feature normalizes to +-1") {
        Matrix two(2, 1, {3.0, 7.0});
        ParamStore s2, a2;
        BatchNorm bn2;
        bn2.allocate(s2, a2, "bn", 1);
        bn2.init(s2.values(), a2.values());
        const Matrix y = bn2.forward_train(s2.values(), a2.values(), two, nullptr);
        // guard epsilon shifts the result just below +-1
        CHECK(y(0, 0) == doctest::Approx(-1.0).epsilon(1e-5));
        CHECK(y(1, 0) == doctest::Approx(1.0).epsilon(1e-5));
    }
    SUBCASE("single row in training mode is a configuration error") {
        Matrix one(1, 3, {1.0, 2.0, 3.0});
        CHECK_THROWS_AS(bn.forward_train(store.values(), aux.values(), one, nullptr),
                        ConfigError);
    }
    SUBCASE("inference uses running statistics only") {
        bn.forward_train(store.values(), aux.values(), x, nullptr);
        const std::vector<double> aux_after = aux.values();
        const Matrix y1 = bn.forward_eval(store.values(), aux.values(), x);
        CHECK(aux.values() == aux_after); // eval never mutates
        // running stats were only partially updated (momentum), so eval and
        // train outputs differ
        const Matrix y2 = bn.forward_train(store.values(), aux.values(), x, nullptr);
        bool any_diff = false;
        for (std::size_t i = 0; i < y1.size(); ++i) {
            any_diff = any_diff || std::abs(y1.data()[i] - y2.data()[i]) > 1e-9;
        }
        CHECK(any_diff);
    }
}

TEST_CASE("relu and dropout masks") {
    Matrix x(2, 3, {-1.0, 0.0, 2.0, 3.0, -0.5, 1.0});
    Matrix mask;
    const Matrix y = relu_forward(x, &mask);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 2) == 2.0);
    Matrix dy(2, 3);
    dy.fill(1.0);
    const Matrix dx = relu_backward(dy, mask);
    CHECK(dx(0, 0) == 0.0);
    CHECK(dx(0, 2) == 1.0);

    Rng rng(37);
    Matrix dmask;
    const Matrix dropped = dropout_forward(y, 0.5, rng, &dmask);
    for (std::size_t i = 0; i < dropped.size(); ++i) {
        const double v = dropped.data()[i];
        CHECK((v == 0.0 || v == doctest::Approx(2.0 * y.data()[i])));
    }
    // rate 0 is the identity
    Rng rng2(38);
    CHECK(dropout_forward(y, 0.0, rng2, nullptr) == y);
    CHECK_THROWS_AS(dropout_forward(y, 1.0, rng2, nullptr), ConfigError);
}

namespace {

// central-difference check of one layer's parameter and input gradients
template <typename Forward, typename Backward>
void check_layer_gradients(ParamStore& store, const Matrix& x, Forward&& fwd, Backward&& bwd,
                           double tol = 1e-4) {
    Rng up_rng(101);
    // random upstream gradient defines a scalar loss L = sum(dy .* y)
    const Matrix y0 = fwd(store.values(), x);
    Matrix upstream(y0.rows(), y0.cols());
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream.data()[i] = up_rng.uniform(-1, 1);

    std::vector<double> grads(store.size(), 0.0);
    Matrix dx = bwd(store.values(), grads, upstream);

    auto loss_for_params = [&](std::span<const double> params) {
        std::vector<double> saved = store.values();
        store.values().assign(params.begin(), params.end());
        const Matrix y = fwd(store.values(), x);
        store.values() = saved;
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += upstream.data()[i] * y.data()[i];
        return acc;
    };
    const GradCheckReport report =
        grad_check(loss_for_params, store.values(), grads, 1e-5);
    CHECK(report.max_rel_error < tol);

    // input gradient via the same finite differences
    Matrix xmut = x;
    std::vector<double> dx_numeric(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = xmut.data()[i];
        xmut.data()[i] = saved + 1e-5;
        const Matrix yp = fwd(store.values(), xmut);
        xmut.data()[i] = saved - 1e-5;
        const Matrix ym = fwd(store.values(), xmut);
        xmut.data()[i] = saved;
        double acc = 0.0;
        for (std::size_t t = 0; t < yp.size(); ++t) {
            acc += upstream.data()[t] * (yp.data()[t] - ym.data()[t]);
        }
        dx_numeric[i] = acc / 2e-5;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double denom = std::max({std::abs(dx.data()[i]), std::abs(dx_numeric[i]), 1e-8});
        CHECK(std::abs(dx.data()[i] - dx_numeric[i]) / denom < tol);
    }
}

} // namespace

TEST_CASE("semgconv backward matches finite differences across seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ParamStore store;
        SemGraphConv conv;
        conv.allocate(store, "conv", neighbor_mask(toy_graph()), 3, 5);
        Rng rng(seed);
        conv.init(store.values(), rng);
        for (std::size_t i = 0; i < 16; ++i) {
            store.values()[conv.edge_scores.offset + i] = rng.uniform(-0.5, 0.5);
        }
        const Matrix x = random_matrix(8, 3, rng); // batch of 2 samples

        SemGraphConv::Cache cache;
        check_layer_gradients(
            store, x,
            [&](std::span<const double> p, const Matrix& in) {
                return conv.forward(p, in, 2, &cache);
            },
            [&](std::span<const double> p, std::vector<double>& g, const Matrix& dy) {
                conv.forward(p, x, 2, &cache);
                return conv.backward(p, g, dy, cache);
            });
    }
}

TEST_CASE("semgconv gradient is zero outside the mask") {
    ParamStore store;
    SemGraphConv conv;
    conv.allocate(store, "conv", neighbor_mask(toy_graph()), 2, 2);
    Rng rng(43);
    conv.init(store.values(), rng);
    const Matrix x = random_matrix(4, 2, rng);

    SemGraphConv::Cache cache;
    conv.forward(store.values(), x, 1, &cache);
    Matrix dy(4, 2);
    dy.fill(1.0);
    std::vector<double> grads(store.size(), 0.0);
    conv.backward(store.values(), grads, dy, cache);

    const Matrix& mask = conv.mask;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            if (mask(i, j) == 0.0 || i == j) {
                CHECK(grads[conv.edge_scores.offset + i * 4 + j] == 0.0);
            }
        }
    }
}

TEST_CASE("nonlocal backward matches finite differences across seeds") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ParamStore store;
        NonLocalLayer nl;
        nl.allocate(store, "nl", 4, 5);
        Rng rng(seed);
        nl.init(store.values(), rng);
        const Matrix x = random_matrix(8, 5, rng);

        NonLocalLayer::Cache cache;
        check_layer_gradients(
            store, x,
            [&](std::span<const double> p, const Matrix& in) {
                return nl.forward(p, in, 2, &cache);
            },
            [&](std::span<const double> p, std::vector<double>& g, const Matrix& dy) {
                nl.forward(p, x, 2, &cache);
                return nl.backward(p, g, dy, cache);
            });
    }
}

TEST_CASE("batchnorm backward matches finite differences across seeds") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ParamStore store, aux;
    BatchNorm bn;
    bn.allocate(store, aux, "bn", 4);
    bn.init(store.values(), aux.values());
    Rng rng(seed);
    store.values()[bn.gamma.offset + 1] = 1.7;
    store.values()[bn.beta.offset + 2] = -0.3;
    const Matrix x = random_matrix(12, 4, rng, -2.0, 2.0);

    BatchNorm::Cache cache;
    check_layer_gradients(
        store, x,
        [&](std::span<const double> p, const Matrix& in) {
            std::vector<double> aux_copy = aux.values(); // keep running stats fixed
            Matrix y = bn.forward_train(p, aux_copy, in, &cache);
            return y;
        },
        [&](std::span<const double> p, std::vector<double>& g, const Matrix& dy) {
            std::vector<double> aux_copy = aux.values();
            bn.forward_train(p, aux_copy, x, &cache);
            return bn.backward(p, g, dy, cache);
        });
  }
}

TEST_CASE("backbone shape contract and determinism") {
    const SkeletonGraph& g = toy_graph();
    BackboneConfig config{2, 8, 3, 0.0};
    GraphMdnModel model(g, config);
    model.init_params(Rng(3).stream(rng_streams::kWeightInit));

    Rng rng(61);
    const Matrix x = random_matrix(3 * 4, 2, rng);
    Matrix a = model.forward(x, 3, true);
    Matrix b = model.forward(x, 3, true);
    CHECK(a.rows() == 12);
    CHECK(a.cols() == 5 * 3);
    CHECK(a == b); // bitwise with dropout off

    const Matrix inferred = model.infer(x, 3);
    CHECK(inferred.rows() == 12);
    CHECK(inferred.cols() == 15);
}

TEST_CASE("zero input with zero weights propagates only head bias") {
    const SkeletonGraph& g = toy_graph();
    BackboneConfig config{1, 4, 2, 0.0};
    GraphMdnModel model(g, config);
    // params stay zero-initialized; set one head bias entry
    auto& store = model.param_store();
    double* values = model.param_values().data();
    for (const TensorRef& t : store.tensors()) {
        if (t.name == "head.conv.bias") values[t.offset + 3] = 0.75;
    }
    Matrix x(4, 2);
    const Matrix y = model.forward(x, 1, true);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        for (std::size_t c = 0; c < y.cols(); ++c) {
            CHECK(y(r, c) == (c == 3 ? 0.75 : 0.0));
        }
    }
}

TEST_CASE("parameter count matches the closed form") {
    SUBCASE("paper-default configuration") {
        BackboneConfig config{4, 128, 5, 0.1};
        GraphMdnModel model(human_skeleton(), config);
        CHECK(model.param_values().size() ==
              GraphMdnModel::expected_param_count(config, 16));
    }
    SUBCASE("toy configuration") {
        BackboneConfig config{2, 8, 2, 0.0};
        GraphMdnModel model(toy_graph(), config);
        CHECK(model.param_values().size() == GraphMdnModel::expected_param_count(config, 4));
    }
}

TEST_CASE("backbone backward: zero upstream gives zero gradients") {
    BackboneConfig config{2, 6, 2, 0.0};
    GraphMdnModel model(toy_graph(), config);
    model.init_params(Rng(71).stream(rng_streams::kWeightInit));
    Rng rng(72);
    const Matrix x = random_matrix(8, 2, rng);
    model.forward(x, 2, true);
    Matrix dlogits(8, 10);
    const std::vector<double> grads = model.backward(dlogits);
    for (double gval : grads) CHECK(gval == 0.0);
}

TEST_CASE("backward without a cached forward is a state error") {
    BackboneConfig config{1, 4, 2, 0.0};
    GraphMdnModel model(toy_graph(), config);
    Matrix dlogits(4, 10);
    CHECK_THROWS_AS(model.backward(dlogits), std::logic_error);
}

TEST_CASE("single linear map backward equals the closed-form outer product") {
    // isolated-node graph turns the conv into an independent linear map
    ParamStore store;
    SemGraphConv conv;
    conv.allocate(store, "conv", Matrix::identity(2), 3, 2);
    Rng rng(83);
    conv.init(store.values(), rng);
    const Matrix x = random_matrix(2, 3, rng);

    SemGraphConv::Cache cache;
    conv.forward(store.values(), x, 1, &cache);
    Matrix dy(2, 2);
    for (std::size_t i = 0; i < dy.size(); ++i) dy.data()[i] = rng.uniform(-1, 1);
    std::vector<double> grads(store.size(), 0.0);
    conv.backward(store.values(), grads, dy, cache);

    // dW_self = dy^T x
    const Matrix expected = matmul_tn(dy, x);
    for (std::size_t o = 0; o < 2; ++o) {
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(grads[conv.w_self.offset + o * 3 + i] ==
                  doctest::Approx(expected(o, i)).epsilon(1e-13));
        }
    }
}
