#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "kernlearn/errors.hpp"
#include "kernlearn/sampling.hpp"

using namespace kernlearn;

namespace {

bool stratified(const PointSet &x, const DesignSpec &spec) {
    const auto n = x.rows();
    for (int j = 0; j < spec.dim(); ++j) {
        const auto [lo, hi] = spec.bounds[static_cast<std::size_t>(j)];
        std::vector<int> counts(static_cast<std::size_t>(n), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto bin = static_cast<Eigen::Index>(std::floor((x(i, j) - lo) / (hi - lo) * static_cast<double>(n)));
            bin = std::clamp<Eigen::Index>(bin, 0, n - 1);
            ++counts[static_cast<std::size_t>(bin)];
        }
        for (int c : counts) {
            if (c != 1) {
                return false;
            }
        }
    }
    return true;
}

} // namespace

TEST_CASE("LHS stratification") {
    const DesignSpec spec = DesignSpec::cube(Law::LhsMaximin, 3, -std::numbers::pi, std::numbers::pi, 50, 7);
    CHECK(stratified(sample(spec), spec));
    for (Eigen::Index n : {1, 2, 17, 100, 1000}) {
        DesignSpec s = DesignSpec::cube(Law::LhsMaximin, 4, 0, 2, n, static_cast<std::uint64_t>(n));
        s.candidates = 5;
        CHECK(stratified(sample(s), s));
    }
}

TEST_CASE("maximin choice dominates every candidate") {
    DesignSpec spec = DesignSpec::cube(Law::LhsMaximin, 2, 0, 1, 30, 3);
    spec.candidates = 40;
    LhsReport report;
    const PointSet x = sample(spec, &report);
    REQUIRE(report.candidateScores.size() == 40);
    for (double s : report.candidateScores) {
        CHECK(report.candidateScores[report.chosen] >= s);
    }
    double minDist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index k = i + 1; k < x.rows(); ++k) {
            minDist = std::min(minDist, (x.row(i) - x.row(k)).norm());
        }
    }
    CHECK(minDist == doctest::Approx(report.candidateScores[report.chosen]).epsilon(1e-12));
}

TEST_CASE("designs are reproducible") {
    const DesignSpec spec = DesignSpec::cube(Law::LhsMaximin, 3, -1, 1, 20, 11);
    CHECK(sample(spec) == sample(spec));
    DesignSpec other = spec;
    other.seed = 12;
    CHECK(sample(spec) != sample(other));
}

TEST_CASE("uniform sampler moments") {
    const PointSet x = sample(DesignSpec::cube(Law::Uniform, 2, -2, 4, 100000, 5));
    CHECK(x.minCoeff() >= -2.0);
    CHECK(x.maxCoeff() <= 4.0);
    const double se = 6.0 / std::sqrt(12.0) / std::sqrt(100000.0);
    CHECK(std::abs(x.col(0).mean() - 1.0) <= 4 * se);
}

TEST_CASE("Beta quantiles") {
    for (double u : {0.1, 0.37, 0.5, 0.9}) {
        CHECK(betaQuantile(1, 1, u) == doctest::Approx(u).epsilon(1e-12));
        CHECK(betaQuantile(2, 1, u) == doctest::Approx(std::sqrt(u)).epsilon(1e-12));
        CHECK(betaQuantile(1, 3, u) == doctest::Approx(1 - std::cbrt(1 - u)).epsilon(1e-12));
    }
    CHECK(betaQuantile(4, 4, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("Beta sampler moments") {
    const double m = 0.6;
    const double lo = 0.95 * m;
    const double hi = 1.05 * m;
    DesignSpec spec;
    spec.n = 100000;
    spec.bounds = {{lo, hi}};
    spec.law = Law::Beta;
    spec.betaShapes = {{4, 4}};
    spec.seed = 3;
    const PointSet x = sample(spec);
    // Beta(4,4): variance 1/36 on [0,1].
    const double sd = (hi - lo) / 6.0;
    const double se = sd / std::sqrt(100000.0);
    CHECK(std::abs(x.col(0).mean() - 0.5 * (lo + hi)) <= 3 * se);
    const double var = (x.col(0).array() - x.col(0).mean()).square().sum() / (x.rows() - 1);
    CHECK(var == doctest::Approx(sd * sd).epsilon(0.02));

    spec.betaShapes = {{2, 5}};
    const PointSet y = sample(spec);
    const double mean25 = lo + (hi - lo) * 2.0 / 7.0;
    const double sd25 = (hi - lo) * std::sqrt(10.0 / (49.0 * 8.0));
    CHECK(std::abs(y.col(0).mean() - mean25) <= 3 * sd25 / std::sqrt(100000.0));
}

TEST_CASE("split sizes and disjointness") {
    Dataset d;
    d.X.resize(120, 1);
    d.y.resize(120);
    for (Eigen::Index i = 0; i < 120; ++i) {
        d.X(i, 0) = static_cast<double>(i);
        d.y[i] = static_cast<double>(i);
    }
    const Split s = split(d, {0.67, 0.12, 0.21}, 9);
    CHECK(s.train.size() == 80);
    CHECK(s.validation.size() == 15);
    CHECK(s.test.size() == 25);
    std::set<double> seen;
    for (const Dataset *part : {&s.train, &s.validation, &s.test}) {
        for (Eigen::Index i = 0; i < part->size(); ++i) {
            CHECK(part->X(i, 0) == part->y[i]);
            seen.insert(part->y[i]);
        }
    }
    CHECK(seen.size() == 120);
    CHECK_THROWS_AS((void)split(Dataset{PointSet::Zero(3, 1), Vector::Zero(3)}, {0.67, 0.12, 0.21}, 1), DegenerateError);
    CHECK_THROWS_AS((void)split(d, {0.5, 0.6, 0.1}, 1), InvalidArgument);
}

TEST_CASE("permutations") {
    const auto p = permutation(50, 4);
    std::set<Eigen::Index> s(p.begin(), p.end());
    CHECK(s.size() == 50);
    CHECK(*s.begin() == 0);
    CHECK(*s.rbegin() == 49);
    CHECK(p == permutation(50, 4));
}

TEST_CASE("design validation") {
    DesignSpec spec = DesignSpec::cube(Law::Uniform, 2, 1, 0, 5, 1);
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    spec = DesignSpec::cube(Law::Beta, 2, 0, 1, 5, 1);
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    CHECK((lawFromString("lhs") == Law::LhsMaximin));
    CHECK_THROWS_AS((void)lawFromString("sobol"), InvalidArgument);
}
