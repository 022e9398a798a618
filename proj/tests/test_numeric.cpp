#include <cmath>

#include <doctest.h>

#include "graphmdn/errors.hpp"
#include "graphmdn/gradcheck.hpp"
#include "graphmdn/matrix.hpp"
#include "graphmdn/numeric.hpp"
#include "graphmdn/rng.hpp"

using namespace graphmdn;

TEST_CASE("matmul identity and hand-checked products") {
    Matrix a(3, 2, {1, 2, 3, 4, 5, 6});
    const Matrix i3 = Matrix::identity(3);
    CHECK(matmul(i3, a) == a);

    Matrix b(2, 2, {1, 2, 3, 4});
    Matrix v(2, 1, {0, 1});
    const Matrix prod = matmul(b, v);
    CHECK(prod(0, 0) == 2.0);
    CHECK(prod(1, 0) == 4.0);

    Matrix zero(2, 2);
    const Matrix annihilated = matmul(zero, b);
    for (std::size_t i = 0; i < annihilated.size(); ++i) CHECK(annihilated.data()[i] == 0.0);
}

TEST_CASE("matmul shape mismatch throws") {
    Matrix a(2, 3), b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(matmul_tn(Matrix(2, 2), Matrix(3, 2)), ShapeError);
    CHECK_THROWS_AS(matmul_nt(Matrix(2, 2), Matrix(3, 3)), ShapeError);
}

TEST_CASE("matmul associativity on random matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto random_matrix = [&rng](std::size_t r, std::size_t c) {
            Matrix m(r, c);
            for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-2.0, 2.0);
            return m;
        };
        const std::size_t n1 = 1 + rng.uniform_int(5), n2 = 1 + rng.uniform_int(5),
                          n3 = 1 + rng.uniform_int(5), n4 = 1 + rng.uniform_int(5);
        const Matrix a = random_matrix(n1, n2);
        const Matrix b = random_matrix(n2, n3);
        const Matrix c = random_matrix(n3, n4);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            const double denom = std::max(std::abs(left.data()[i]), 1.0);
            CHECK(std::abs(left.data()[i] - right.data()[i]) / denom < 1e-9);
        }
    }
}

TEST_CASE("transposed product variants agree with explicit transpose") {
    Rng rng(12);
    Matrix a(4, 3), b(4, 5);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-1, 1);
    const Matrix tn = matmul_tn(a, b);
    const Matrix expected = matmul(transpose(a), b);
    REQUIRE(tn.rows() == expected.rows());
    for (std::size_t i = 0; i < tn.size(); ++i) {
        CHECK(tn.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("log_sum_exp basics") {
    const double single[] = {3.25};
    CHECK(log_sum_exp(single) == 3.25);

    const double pair[] = {0.0, 0.0};
    CHECK(log_sum_exp(pair) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

    const double huge[] = {1000.0, 1000.0};
    const double lse = log_sum_exp(huge);
    CHECK(std::isfinite(lse));
    CHECK(lse == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));

    CHECK_THROWS_AS(log_sum_exp(std::span<const double>{}), std::domain_error);
}

TEST_CASE("log_sum_exp shift invariance") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + rng.uniform_int(8));
        for (double& x : v) x = rng.uniform(-10.0, 10.0);
        const double c = rng.uniform(-500.0, 500.0);
        std::vector<double> shifted = v;
        for (double& x : shifted) x += c;
        CHECK(std::abs(log_sum_exp(shifted) - (log_sum_exp(v) + c)) <
              1e-12 * std::max(1.0, std::abs(c)));
    }
}

TEST_CASE("softmax symmetry and closed forms") {
    const double zeros[] = {0, 0, 0, 0, 0};
    for (double p : softmax(zeros)) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));

    const double logits[] = {std::log(1.0), std::log(3.0)};
    const auto p = softmax(logits);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));

    const double constant[] = {7.5, 7.5, 7.5};
    for (double q : softmax(constant)) CHECK(q == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax output is a distribution for random finite inputs") {
    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng.uniform_int(12));
        for (double& x : v) x = rng.uniform(-700.0, 700.0);
        const auto p = softmax(v);
        double sum = 0.0;
        for (double q : p) {
            CHECK(q > 0.0);
            CHECK(q < 1.0 + 1e-12);
            sum += q;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("elu_plus_one matches its piecewise definition and floor") {
    CHECK(elu_plus_one(0.0) == 1.0);
    CHECK(elu_plus_one(2.5) == 3.5);
    CHECK(elu_plus_one(-1.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(elu_plus_one(-20.0) == 1e-6); // exp(-20) ~ 2e-9 clamps at the floor
    CHECK(elu_plus_one_grad(-20.0) == 0.0);
    CHECK(elu_plus_one_grad(1.0) == 1.0);
    CHECK(elu_plus_one_grad(-0.5) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("rng determinism and stream independence") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(42), d(43);
    int equal = 0;
    for (int i = 0; i < 1000; ++i) equal += c.next_u64() == d.next_u64();
    CHECK(equal == 0);

    Rng base(7);
    Rng s0 = base.stream(0), s1 = base.stream(1);
    int same = 0;
    for (int i = 0; i < 1000; ++i) same += s0.next_u64() == s1.next_u64();
    CHECK(same == 0);

    // identical derived streams replay identically
    Rng r1 = Rng(9).stream(5), r2 = Rng(9).stream(5);
    for (int i = 0; i < 100; ++i) CHECK(r1.uniform() == r2.uniform());
}

TEST_CASE("rng uniform and normal ranges") {
    Rng rng(21);
    double mean = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        mean += rng.normal();
    }
    CHECK(std::abs(mean / 10000.0) < 0.05);
}

TEST_CASE("grad_check validates a quadratic") {
    std::vector<double> params = {0.5, -1.25, 2.0, 0.0};
    auto loss = [](std::span<const double> p) {
        double acc = 0.0;
        for (double x : p) acc += x * x;
        return acc;
    };
    std::vector<double> analytic(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) analytic[i] = 2.0 * params[i];
    const GradCheckReport report = grad_check(loss, params, analytic, 1e-5);
    CHECK(report.max_rel_error < 1e-8);
}

TEST_CASE("grad_check on a constant loss reports near-zero both sides") {
    std::vector<double> params = {1.0, 2.0, 3.0};
    auto loss = [](std::span<const double>) { return 4.5; };
    std::vector<double> analytic = {0.0, 0.0, 0.0};
    const GradCheckReport report = grad_check(loss, params, analytic, 1e-5);
    for (double g : report.numeric) CHECK(g == 0.0);
    CHECK(report.max_rel_error == 0.0);
}

TEST_CASE("grad_check flags a corrupted analytic gradient") {
    std::vector<double> params = {1.0, -2.0};
    auto loss = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
    std::vector<double> analytic = {2.0 + 0.1, -4.0};
    const GradCheckReport report = grad_check(loss, params, analytic, 1e-5);
    CHECK(report.max_rel_error > 1e-3);
    CHECK(report.argmax_index == 0);
}

TEST_CASE("grad_check reports non-finite losses with the parameter index") {
    std::vector<double> params = {0.0};
    auto loss = [](std::span<const double> p) { return std::log(p[0]); };
    std::vector<double> analytic = {0.0};
    // the negative perturbation drives the loss to NaN
    CHECK_THROWS_WITH_AS(grad_check(loss, params, analytic, 1e-5),
                         "grad_check: non-finite loss at parameter index 0", NumericError);
}
