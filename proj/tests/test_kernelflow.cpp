#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kernlearn/benchfn.hpp"
#include "kernlearn/errors.hpp"
#include "kernlearn/kernelflow.hpp"
#include "kernlearn/sampling.hpp"
#include "oracles.hpp"

using namespace kernlearn;

namespace {

Dataset randomDataset(Philox4x32 &rng, Eigen::Index n, int d) {
    Dataset data;
    data.X = oracle::uniformPoints(rng, n, d, -1, 1);
    data.y = oracle::gaussianVector(rng, n);
    return data;
}

Dataset headRows(const Dataset &d, Eigen::Index n) {
    return Dataset{d.X.topRows(n), d.y.head(n)};
}

} // namespace

TEST_CASE("rho from quadratic forms equals rho from interpolants") {
    Philox4x32 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Dataset fine = randomDataset(rng, 16, 2);
        const Dataset coarse = headRows(fine, 8);
        const KernelSpec k = KernelSpec::gaussian(0.3 + rng.uniform());
        const double a = rho(k, 0.0, fine, coarse);
        const double b = rhoFromInterpolants(k, 0.0, fine, coarse);
        CHECK(std::abs(a - b) <= 1e-8);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("rho with a nugget stays in the unit interval") {
    Philox4x32 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const Dataset fine = randomDataset(rng, 20, 3);
        const Dataset coarse = headRows(fine, 10);
        const double lambda = std::pow(10.0, -8.0 + 7.0 * rng.uniform());
        const double r = rho(KernelSpec::gaussianArd({0.5, 0.8, 1.2}), lambda, fine, coarse);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
        CHECK(std::abs(r - rhoFromInterpolants(KernelSpec::gaussianArd({0.5, 0.8, 1.2}), lambda, fine, coarse)) <= 1e-8);
    }
}

TEST_CASE("analytic gradient matches finite differences") {
    Philox4x32 rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(3));
        const Dataset fine = randomDataset(rng, 14, d);
        const Dataset coarse = headRows(fine, 7);
        const KernelFamily fam = KernelFamily::gaussianArd(d, true);
        Vector theta(d + 1);
        for (int j = 0; j < d; ++j) {
            theta[j] = 0.4 + rng.uniform();
        }
        theta[d] = std::pow(10.0, -4.0 + 2.0 * rng.uniform());
        const RhoGradient g = rhoGrad(fam, theta, fine, coarse);
        const Vector fd = oracle::rhoFiniteDifference(fam, theta, fine, coarse);
        CHECK(g.rho == doctest::Approx(rho(fam.kernel(theta), fam.nugget(theta), fine, coarse)).epsilon(1e-12));
        CHECK((g.gradient - fd).norm() <= 1e-5 * std::max(1e-8, fd.norm()));
    }
}

TEST_CASE("a small step decreases rho on a fixed subsample") {
    Philox4x32 rng(44);
    const Dataset fine = randomDataset(rng, 20, 2);
    const Dataset coarse = headRows(fine, 10);
    const KernelFamily fam = KernelFamily::gaussian(true);
    Vector theta(2);
    theta << 0.7, 1e-3;
    const RhoGradient g = rhoGrad(fam, theta, fine, coarse);
    double step = 1e-2;
    bool decreased = false;
    for (int halvings = 0; halvings < 30 && !decreased; ++halvings, step *= 0.5) {
        const Vector next = (theta.array().log() - step * (g.gradient.array() * theta.array())).exp().matrix();
        decreased = rho(fam.kernel(next), fam.nugget(next), fine, coarse) <= g.rho;
    }
    CHECK(decreased);
}

TEST_CASE("Kernel Flow traces are reproducible and positive") {
    const auto fn = ishigamiFunction();
    const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 3, -std::numbers::pi, std::numbers::pi, 60, 1));
    const PointSet v = sample(DesignSpec::cube(Law::Uniform, 3, -std::numbers::pi, std::numbers::pi, 200, 2));
    const Dataset train{x, fn.evaluate(x)};
    const Dataset val{v, fn.evaluate(v)};
    const KernelFamily fam = KernelFamily::gaussianArd(3, true);
    Vector theta0(4);
    theta0 << 2.0, 2.0, 2.0, 1e-6;
    KfConfig cfg;
    cfg.iterations = 15;
    cfg.nFine = 40;
    cfg.learningRate = 0.5;
    cfg.seed = 99;
    const KfTrace a = kfRun(train, val, fam, theta0, cfg);
    const KfTrace b = kfRun(train, val, fam, theta0, cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].theta == b.records[i].theta);
        CHECK((a.records[i].rho == b.records[i].rho || (std::isnan(a.records[i].rho) && std::isnan(b.records[i].rho))));
        CHECK((a.records[i].theta.array() > 0.0).all());
    }
    CHECK(a.paramNames == std::vector<std::string>{"gamma_1", "gamma_2", "gamma_3", "lambda"});
    // The selected iterate is the first minimum of the validation RMSE.
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        if (std::isfinite(a.records[i].validationRmse)) {
            CHECK(a.records[a.selected].validationRmse <= a.records[i].validationRmse);
            if (i < a.selected) {
                CHECK(a.records[a.selected].validationRmse < a.records[i].validationRmse);
            }
        }
    }
    CHECK(a.thetaStar == a.records[a.selected].theta);
}

TEST_CASE("Kernel Flow improves the Ishigami validation error in most seeds") {
    const auto fn = ishigamiFunction();
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const PointSet x = sample(DesignSpec::cube(Law::LhsMaximin, 3, -std::numbers::pi, std::numbers::pi, 100, seed));
        const PointSet v = sample(DesignSpec::cube(Law::Uniform, 3, -std::numbers::pi, std::numbers::pi, 300, seed + 50));
        const Dataset train{x, fn.evaluate(x)};
        const Dataset val{v, fn.evaluate(v)};
        const KernelFamily fam = KernelFamily::gaussianArd(3, true);
        Vector theta0(4);
        theta0.head(3).setConstant(meanPairwiseDistance(x));
        theta0[3] = 1e-6;
        KfConfig cfg;
        cfg.iterations = 40;
        cfg.learningRate = 0.05;
        cfg.seed = seed;
        const KfTrace t = kfRun(train, val, fam, theta0, cfg);
        improved += t.records[t.selected].validationRmse <= t.records.front().validationRmse ? 1 : 0;
    }
    CHECK(improved >= 8);
}

TEST_CASE("mean pairwise distance") {
    PointSet x(3, 2);
    x << 0, 0, 3, 0, 0, 4;
    CHECK(meanPairwiseDistance(x) == doctest::Approx((3.0 + 4.0 + 5.0) / 3.0));
    CHECK_THROWS_AS((void)meanPairwiseDistance(PointSet::Zero(1, 2)), InvalidArgument);
}

TEST_CASE("kernel family parameters") {
    const KernelFamily g = KernelFamily::gaussian(false, 1e-3);
    CHECK(g.paramCount() == 1);
    Vector t(1);
    t << 0.5;
    CHECK(g.nugget(t) == doctest::Approx(1e-3));
    const KernelFamily f = KernelFamily::fixed(KernelSpec::gaussian(1.0));
    CHECK(f.paramNames() == std::vector<std::string>{"lambda"});
    Vector bad(2);
    bad << 1.0, -1.0;
    CHECK_THROWS_AS(KernelFamily::gaussian(true).checkTheta(bad), InvalidArgument);
    KfConfig cfg;
    cfg.nFine = 1;
    CHECK_THROWS_AS(cfg.validate(10, 2), InvalidArgument);
}
