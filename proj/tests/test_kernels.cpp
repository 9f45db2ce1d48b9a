#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "kernlearn/errors.hpp"
#include "kernlearn/kernels.hpp"
#include "kernlearn/rng.hpp"
#include "oracles.hpp"

using namespace kernlearn;

namespace {

Eigen::RowVectorXd row(std::initializer_list<double> v) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        r[i++] = x;
    }
    return r;
}

double minEigenRatio(const Matrix &k) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    return es.eigenvalues().minCoeff() / std::max(1e-300, es.eigenvalues().maxCoeff());
}

} // namespace

TEST_CASE("closed-form kernel values") {
    const auto x = row({0.0, 0.0});
    const auto y = row({0.6, 0.8}); // distance 1
    CHECK(kernelEval(KernelSpec::gaussian(1.0), x, y) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(kernelEval(KernelSpec::gaussian(2.0), x, y) == doctest::Approx(std::exp(-0.25)).epsilon(1e-15));
    CHECK(kernelEval(KernelSpec::matern(1.0, MaternNu::ThreeHalves), x, y) ==
          doctest::Approx((1 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0))).epsilon(1e-14));
    CHECK(kernelEval(KernelSpec::matern(1.0, MaternNu::ThreeHalves), x, y) == doctest::Approx(0.48335).epsilon(1e-5));
    CHECK(kernelEval(KernelSpec::matern(1.0, MaternNu::Half), x, y) == doctest::Approx(std::exp(-1.0)));
    CHECK(kernelEval(KernelSpec::matern(1.0, MaternNu::FiveHalves), x, y) ==
          doctest::Approx((1 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0))).epsilon(1e-14));
    CHECK(kernelEval(KernelSpec::polynomial(1.0, 2.0), row({1.0, 2.0}), row({3.0, -1.0})) == doctest::Approx(4.0));
    CHECK(kernelEval(KernelSpec::gaussianArd({1.0, 2.0}), row({0.0, 0.0}), row({1.0, 2.0})) ==
          doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("rational quadratic tends to the Gaussian limit") {
    const double r = 0.7;
    const double value = kernelEval(KernelSpec::rationalQuadratic(1e6, 1.0), row({0.0}), row({r}));
    CHECK(std::abs(value - std::exp(-r * r / 2.0)) <= 1e-5);
}

TEST_CASE("ARD with equal scales equals the isotropic kernel") {
    Philox4x32 rng(9);
    const KernelSpec iso = KernelSpec::gaussian(0.8);
    const KernelSpec ard = KernelSpec::gaussianArd({0.8, 0.8, 0.8});
    for (int i = 0; i < 100; ++i) {
        const PointSet p = oracle::uniformPoints(rng, 2, 3, -2, 2);
        CHECK(std::abs(kernelEval(iso, p.row(0), p.row(1)) - kernelEval(ard, p.row(0), p.row(1))) <= 1e-15);
    }
}

TEST_CASE("kernels are symmetric and positive semi-definite") {
    Philox4x32 rng(31);
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(), 2, 3));
    std::vector<std::size_t> retained;
    std::vector<double> sig;
    for (std::size_t k = 0; k < basis->size(); ++k) {
        retained.push_back(k);
        sig.push_back(1.0 / (1.0 + static_cast<double>(k)));
    }
    const std::vector<KernelSpec> variants{
        KernelSpec::gaussian(0.7),
        KernelSpec::gaussianArd({0.5, 1.5}),
        KernelSpec::polynomial(1.0, 3.0),
        KernelSpec::matern(0.9, MaternNu::Half),
        KernelSpec::matern(0.9, MaternNu::ThreeHalves),
        KernelSpec::matern(0.9, MaternNu::FiveHalves),
        KernelSpec::rationalQuadratic(2.0, 0.6),
        spectralKernel(basis, retained, sig),
    };
    for (const auto &k : variants) {
        CAPTURE(k.name());
        for (int trial = 0; trial < 200; ++trial) {
            const auto n = 2 + static_cast<Eigen::Index>(rng.below(29));
            const PointSet x = oracle::uniformPoints(rng, n, 2, -1, 1);
            const Matrix g = gram(k, x);
            REQUIRE((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
            REQUIRE(minEigenRatio(g) >= -1e-8);
        }
    }
}

TEST_CASE("duplicate points make the Gram rank deficient") {
    PointSet x(3, 2);
    x << 0.1, 0.2, 0.1, 0.2, 0.5, -0.3;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(gram(KernelSpec::gaussian(1.0), x));
    CHECK(std::abs(es.eigenvalues().minCoeff()) <= 1e-12);
}

TEST_CASE("spectral kernel matches its Mercer sum and trace") {
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(-1, 2), 2, 4));
    const std::vector<std::size_t> retained{0, 2, 5, 9, 13};
    const std::vector<double> sig{0.5, 0.25, 0.0, 0.125, 0.0625};
    const KernelSpec k = spectralKernel(basis, retained, sig);
    const auto *s = k.as<SpectralKernel>();
    REQUIRE(s != nullptr);
    CHECK(s->active().size() == 4);
    CHECK(s->trace() == doctest::Approx(0.9375));

    Philox4x32 rng(2);
    const PointSet x = oracle::uniformPoints(rng, 6, 2, -1, 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.rows(); ++j) {
            double expected = 0.0;
            for (std::size_t r = 0; r < retained.size(); ++r) {
                expected += sig[r] * basis->eval(retained[r], x.row(i)) * basis->eval(retained[r], x.row(j));
            }
            CHECK(kernelEval(k, x.row(i), x.row(j)) == doctest::Approx(expected).epsilon(1e-13));
        }
    }
    const QuadratureRule rule = tensorRule(*basis, lobattoNodesForDegree(8));
    const Vector diag = kernelDiagonal(k, rule.nodes);
    CHECK(std::abs(rule.weights.dot(diag) - s->trace()) <= 1e-8);
}

TEST_CASE("kernel argument validation") {
    CHECK_THROWS_AS((void)KernelSpec::gaussian(0.0), InvalidArgument);
    CHECK_THROWS_AS((void)KernelSpec::gaussianArd({1.0, -1.0}), InvalidArgument);
    CHECK_THROWS_AS((void)kernelEval(KernelSpec::gaussianArd({1.0, 1.0}), row({0.0}), row({1.0})), InvalidArgument);
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(), 1, 2));
    CHECK_THROWS_AS((void)spectralKernel(basis, {0, 1}, {1.0, -1.0}), InvalidArgument);
    CHECK_THROWS_AS((void)spectralKernel(basis, {0, 7}, {1.0, 1.0}), InvalidArgument);
}
