#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "kernlearn/benchfn.hpp"
#include "kernlearn/errors.hpp"
#include "kernlearn/metrics.hpp"
#include "kernlearn/sampling.hpp"
#include "kernlearn/skrr.hpp"
#include "oracles.hpp"

using namespace kernlearn;

namespace {

Vector randomSimplexPoint(Philox4x32 &rng, Eigen::Index n, double kappa) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = -std::log(rng.uniformOpen());
    }
    return kappa * v / v.sum();
}

} // namespace

TEST_CASE("optimal sigmas on a two-term example") {
    Vector c(2);
    c << 3.0, 1.0;
    const SpectralSolution s = optimalSigmas(c, 1.0);
    REQUIRE(s.sigmas.size() == 2);
    CHECK(s.sigmas[0] == doctest::Approx(0.75));
    CHECK(s.sigmas[1] == doctest::Approx(0.25));
    Vector star(2);
    star << 0.75, 0.25;
    CHECK(normObjective(c, star) == doctest::Approx(16.0));
    CHECK(normObjective(c, Vector::Constant(2, 0.5)) == doctest::Approx(20.0));
}

TEST_CASE("optimal sigmas drop tiny coefficients and conserve the trace") {
    Philox4x32 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        Vector c = oracle::gaussianVector(rng, 20);
        c[3] = 0.0;
        c[7] = 1e-14 * c.cwiseAbs().maxCoeff();
        const double kappa = 0.1 + 10.0 * rng.uniform();
        const SpectralSolution s = optimalSigmas(c, kappa);
        double total = 0.0;
        for (double v : s.sigmas) {
            total += v;
        }
        CHECK(std::abs(total - kappa) <= 1e-12 * kappa);
        CHECK(std::find(s.retained.begin(), s.retained.end(), 3u) == s.retained.end());
        CHECK(std::find(s.retained.begin(), s.retained.end(), 7u) == s.retained.end());
        const SpectralSolution scaled = optimalSigmas(7.5 * c, kappa);
        for (std::size_t k = 0; k < s.sigmas.size(); ++k) {
            CHECK(scaled.sigmas[k] == doctest::Approx(s.sigmas[k]).epsilon(1e-13));
        }
    }
}

TEST_CASE("optimal sigmas minimize the norm objective") {
    Philox4x32 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const Vector c = oracle::gaussianVector(rng, 6);
        const double kappa = 0.5 + rng.uniform();
        const SpectralSolution s = optimalSigmas(c, kappa);
        Vector star = Vector::Zero(6);
        for (std::size_t k = 0; k < s.retained.size(); ++k) {
            star[static_cast<Eigen::Index>(s.retained[k])] = s.sigmas[k];
        }
        const double best = normObjective(c, star);
        CHECK(best == doctest::Approx(c.lpNorm<1>() * c.lpNorm<1>() / kappa).epsilon(1e-12));
        for (int j = 0; j < 30; ++j) {
            const Vector sigma = randomSimplexPoint(rng, 6, kappa);
            CHECK(normObjective(c, sigma) >= best);
        }
    }
}

TEST_CASE("spectral input validation") {
    CHECK_THROWS_AS((void)optimalSigmas(Vector::Zero(3), 1.0), DegenerateError);
    CHECK_THROWS_AS((void)optimalSigmas(Vector::Ones(3), 0.0), InvalidArgument);
    Vector c(2);
    c << 1.0, 0.0;
    Vector sigma(2);
    sigma << 0.0, 1.0;
    CHECK_THROWS_AS((void)normObjective(c, sigma), InvalidArgument);
    sigma << 1.0, 0.0;
    CHECK(normObjective(c, sigma) == doctest::Approx(1.0));
}

TEST_CASE("a single basis function is reproduced") {
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(-1, 1), 2, 5));
    const std::size_t target = 8;
    const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 2, -1, 1, 30, 4));
    Dataset d{x, buildTheta(*basis, x).col(static_cast<Eigen::Index>(target))};
    const SskrrResult r = sskrrFit(basis, d, 1e-12, {});
    REQUIRE(r.spectral.retained.size() == 1);
    CHECK(r.spectral.retained[0] == target);
    const PointSet test = sample(DesignSpec::cube(Law::Uniform, 2, -1, 1, 200, 5));
    const Vector truth = buildTheta(*basis, test).col(static_cast<Eigen::Index>(target));
    CHECK((r.regressor.predictMean(test) - truth).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("SSKRR mean depends on lambda and kappa through their ratio") {
    auto basis = std::make_shared<const TensorBasis>(
        TensorBasis::totalOrder(UnivariateFamily::legendre(-std::numbers::pi, std::numbers::pi), 3, 6));
    const auto fn = ishigamiFunction();
    const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 3, -std::numbers::pi, std::numbers::pi, 60, 8));
    const Dataset d{x, fn.evaluate(x)};
    const SparseCoefficients c = bpdnSolve(buildTheta(*basis, x), d.y, {.eta = 1e-6});
    const SskrrResult a = sskrrFromCoefficients(basis, d, 1e-4, c, 2.0);
    const SskrrResult b = sskrrFromCoefficients(basis, d, 2e-4, c, 4.0);
    const PointSet q = sample(DesignSpec::cube(Law::Uniform, 3, -std::numbers::pi, std::numbers::pi, 100, 9));
    const Vector ma = a.regressor.predictMean(q);
    CHECK((ma - b.regressor.predictMean(q)).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + ma.cwiseAbs().maxCoeff()));
    const Vector va = a.regressor.predictVariance(q);
    const Vector vb = b.regressor.predictVariance(q);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        CHECK(vb[i] == doctest::Approx(2.0 * va[i]).epsilon(1e-6).scale(1e-12));
    }
}

TEST_CASE("NSKRR concentrates on a single basis function") {
    auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(), 2, 4));
    const std::size_t target = 6;
    const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 2, -1, 1, 25, 2));
    const Dataset d{x, buildTheta(*basis, x).col(static_cast<Eigen::Index>(target))};
    const QuadratureRule rule = tensorRule(*basis, lobattoNodesForDegree(8));
    NskrrOptions opts;
    opts.iterations = 1;
    const NskrrResult r = nskrrFit(basis, d, 1e-10, rule, opts);
    REQUIRE(r.trace.size() == 1);
    const auto &s = r.trace.back().spectral;
    double share = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < s.retained.size(); ++k) {
        total += s.sigmas[k];
        if (s.retained[k] == target) {
            share = s.sigmas[k];
        }
    }
    CHECK(share / total > 0.9);
    CHECK(total == doctest::Approx(sampleVariance(d.y)).epsilon(1e-12));
}

TEST_CASE("NSKRR keeps the trace and refuses inexact rules") {
    auto basis = std::make_shared<const TensorBasis>(
        TensorBasis::totalOrder(UnivariateFamily::legendre(-std::numbers::pi, std::numbers::pi), 3, 6));
    const auto fn = ishigamiFunction();
    const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 3, -std::numbers::pi, std::numbers::pi, 80, 1));
    const Dataset d{x, fn.evaluate(x)};
    NskrrOptions opts;
    opts.iterations = 3;
    opts.kappa = 5.0;
    const NskrrResult r = nskrrFit(basis, d, 1e-8, tensorRule(*basis, lobattoNodesForDegree(12)), opts);
    REQUIRE(r.trace.size() == 3);
    for (const auto &it : r.trace) {
        double total = 0.0;
        for (double v : it.spectral.sigmas) {
            total += v;
        }
        CHECK(total == doctest::Approx(5.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)nskrrFit(basis, d, 1e-8, tensorRule(*basis, 4), opts), InvalidArgument);
}

TEST_CASE("NSKRR iterations improve on the uniform start for Ishigami") {
    auto basis = std::make_shared<const TensorBasis>(
        TensorBasis::totalOrder(UnivariateFamily::legendre(-std::numbers::pi, std::numbers::pi), 3, 10));
    const QuadratureRule rule = tensorRule(*basis, 12);
    const auto fn = ishigamiFunction();
    int better = 0;
    const int seeds = 10;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 3, -std::numbers::pi, std::numbers::pi, 100, seed));
        const Dataset d{x, fn.evaluate(x)};
        const PointSet q = sample(DesignSpec::cube(Law::Uniform, 3, -std::numbers::pi, std::numbers::pi, 2000, seed + 100));
        const Vector truth = fn.evaluate(q);
        NskrrOptions opts;
        opts.iterations = 3;
        const NskrrResult iterated = nskrrFit(basis, d, 1e-8, rule, opts);
        // Zero iterations: the uniform-sigma kernel.
        std::vector<std::size_t> all(basis->size());
        std::iota(all.begin(), all.end(), 0);
        const double kappa = sampleVariance(d.y);
        const std::vector<double> uniform(basis->size(), kappa / static_cast<double>(basis->size()));
        const TrainedRegressor flat = fit(spectralKernel(basis, all, uniform), 1e-8, d,
                                          FitOptions{.allowPseudoInverse = true});
        const double q2Iter = *score(iterated.regressor.predictMean(q), truth).q2;
        const double q2Flat = *score(flat.predictMean(q), truth).q2;
        better += q2Iter >= q2Flat ? 1 : 0;
    }
    CHECK(better > seeds / 2);
}

TEST_CASE("sample variance") {
    Vector y(4);
    y << 1, 2, 3, 4;
    CHECK(sampleVariance(y) == doctest::Approx(5.0 / 3.0));
    CHECK_THROWS_AS((void)sampleVariance(Vector::Ones(1)), InvalidArgument);
}
