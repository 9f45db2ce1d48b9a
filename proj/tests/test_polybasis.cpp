#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kernlearn/errors.hpp"
#include "kernlearn/polybasis.hpp"
#include "kernlearn/rng.hpp"

using namespace kernlearn;

TEST_CASE("multi-index cardinality") {
    CHECK(multiIndices(3, 10).size() == 286);
    CHECK(multiIndices(10, 4).size() == 1001);
    CHECK(multiIndices(3, 8).size() == 165);
    for (int d = 1; d <= 12; ++d) {
        for (int p = 0; p <= 12; ++p) {
            if (binomial(static_cast<std::size_t>(p + d), static_cast<std::size_t>(d)) > 200000) {
                continue;
            }
            REQUIRE(multiIndices(d, p).size() == binomial(static_cast<std::size_t>(p + d), static_cast<std::size_t>(d)));
        }
    }
}

TEST_CASE("multi-indices are graded and start at zero") {
    const MultiIndexSet s = multiIndices(3, 4);
    CHECK(s.totalDegree(0) == 0);
    for (std::size_t k = 1; k < s.size(); ++k) {
        CHECK(s.totalDegree(k - 1) <= s.totalDegree(k));
    }
    const std::vector<int> probe{1, 0, 2};
    const auto at = s.find(probe);
    REQUIRE(at.has_value());
    CHECK(std::vector<int>(s[*at].begin(), s[*at].end()) == probe);
}

TEST_CASE("univariate Legendre values") {
    const auto f = UnivariateFamily::legendre();
    CHECK(evalUnivariate(f, 0, 0.3) == doctest::Approx(1.0));
    CHECK(evalUnivariate(f, 1, 0.5) == doctest::Approx(std::sqrt(3.0) * 0.5).epsilon(1e-14));
    // sqrt(5) (3x^2 - 1) / 2
    CHECK(evalUnivariate(f, 2, 0.3) == doctest::Approx(std::sqrt(5.0) * (3 * 0.09 - 1) / 2).epsilon(1e-13));
    // sqrt(7) (5x^3 - 3x) / 2
    CHECK(evalUnivariate(f, 3, -0.7) == doctest::Approx(std::sqrt(7.0) * (5 * -0.343 + 2.1) / 2).epsilon(1e-13));
}

TEST_CASE("univariate Jacobi degree one is the standardized variable") {
    const double a = 4.0;
    const double b = 2.0;
    const auto f = UnivariateFamily::jacobi(a, b, 0.0, 1.0);
    const double mean = a / (a + b);
    const double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1)));
    for (double x : {0.1, 0.5, 0.8}) {
        CHECK(std::abs(evalUnivariate(f, 1, x)) == doctest::Approx(std::abs((x - mean) / sd)).epsilon(1e-12));
    }
}

TEST_CASE("affine invariance of univariate evaluation") {
    const auto ref = UnivariateFamily::legendre();
    const auto shifted = UnivariateFamily::legendre(-std::numbers::pi, std::numbers::pi);
    const auto jref = UnivariateFamily::jacobi(4, 4, 0.0, 1.0);
    const auto jshift = UnivariateFamily::jacobi(4, 4, 2.0, 5.0);
    Philox4x32 rng(5);
    for (int i = 0; i < 200; ++i) {
        const double t = 2.0 * rng.uniform() - 1.0;
        const int k = static_cast<int>(rng.below(9));
        CHECK(evalUnivariate(shifted, k, shifted.fromReference(t)) ==
              doctest::Approx(evalUnivariate(ref, k, t)).epsilon(1e-12));
        const double s = 0.5 * (t + 1.0);
        CHECK(evalUnivariate(jshift, k, 2.0 + 3.0 * s) == doctest::Approx(evalUnivariate(jref, k, s)).epsilon(1e-11));
    }
}

TEST_CASE("tensor basis evaluation is a product") {
    const TensorBasis b = TensorBasis::totalOrder(UnivariateFamily::legendre(), 2, 2);
    const std::vector<int> i10{1, 0};
    const std::vector<int> i11{1, 1};
    Eigen::RowVector2d x(0.5, 0.9);
    CHECK(b.eval(*b.indices().find(i10), x) == doctest::Approx(std::sqrt(3.0) * 0.5));
    Eigen::RowVector2d y(0.5, 0.5);
    CHECK(b.eval(*b.indices().find(i11), y) == doctest::Approx(0.75));
    const Vector all = b.evalAll(y);
    for (std::size_t k = 0; k < b.size(); ++k) {
        CHECK(all[static_cast<Eigen::Index>(k)] == doctest::Approx(b.eval(k, y)).epsilon(1e-14));
    }
}

TEST_CASE("Lobatto rules") {
    const auto f = UnivariateFamily::legendre();
    const UnivariateRule two = lobattoRule(f, 2);
    REQUIRE(two.size() == 2);
    CHECK(two.nodes[0] == doctest::Approx(-1.0));
    CHECK(two.nodes[1] == doctest::Approx(1.0));
    CHECK(two.weights[0] == doctest::Approx(0.5));
    CHECK(two.weights[1] == doctest::Approx(0.5));

    const UnivariateRule three = lobattoRule(f, 3);
    double m2 = 0.0;
    for (std::size_t l = 0; l < three.size(); ++l) {
        m2 += three.weights[l] * three.nodes[l] * three.nodes[l];
    }
    CHECK(m2 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // Five-node rule: nodes 0, +-sqrt(3/7), +-1; weights 32/45, 49/90, 1/10 halved.
    const UnivariateRule five = lobattoRule(f, 5);
    std::vector<double> nodes = five.nodes;
    std::sort(nodes.begin(), nodes.end());
    CHECK(nodes[0] == doctest::Approx(-1.0));
    CHECK(nodes[1] == doctest::Approx(-std::sqrt(3.0 / 7.0)).epsilon(1e-14));
    CHECK(nodes[2] == doctest::Approx(0.0));
    for (std::size_t l = 0; l < five.size(); ++l) {
        const double x = five.nodes[l];
        const double expected = std::abs(x) > 0.99 ? 0.05 : (std::abs(x) < 1e-9 ? 16.0 / 45.0 : 49.0 / 180.0);
        CHECK(five.weights[l] == doctest::Approx(expected).epsilon(1e-13));
    }
    CHECK(lobattoNodesForDegree(20) == 12);
    CHECK(lobattoNodesForDegree(16) == 10);
    CHECK(lobattoNodesForDegree(8) == 6);
}

TEST_CASE("quadrature exactness on random polynomials") {
    Philox4x32 rng(17);
    const auto f = UnivariateFamily::legendre(-2.0, 3.0);
    for (int q = 2; q <= 14; ++q) {
        const UnivariateRule rule = lobattoRule(f, q);
        const int deg = 2 * q - 3;
        std::vector<double> coef(static_cast<std::size_t>(deg + 1));
        for (auto &c : coef) {
            c = 2.0 * rng.uniform() - 1.0;
        }
        // E[x^k] on U(-2, 3) = (3^(k+1) - (-2)^(k+1)) / (5 (k + 1))
        double exact = 0.0;
        for (int k = 0; k <= deg; ++k) {
            exact += coef[static_cast<std::size_t>(k)] * (std::pow(3.0, k + 1) - std::pow(-2.0, k + 1)) / (5.0 * (k + 1));
        }
        double approx = 0.0;
        for (std::size_t l = 0; l < rule.size(); ++l) {
            double v = 0.0;
            for (int k = deg; k >= 0; --k) {
                v = v * rule.nodes[l] + coef[static_cast<std::size_t>(k)];
            }
            approx += rule.weights[l] * v;
        }
        CHECK(approx == doctest::Approx(exact).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("tensor rule sizes and node guard") {
    const TensorBasis leg = TensorBasis::totalOrder(UnivariateFamily::legendre(-std::numbers::pi, std::numbers::pi), 3, 10);
    CHECK(tensorRule(leg, 12).size() == 1728);
    const TensorBasis jac = TensorBasis::totalOrder(UnivariateFamily::jacobi(4, 4, 0.0, 1.0), 3, 8);
    CHECK(tensorRule(jac, 10).size() == 1000);
    const TensorBasis ros = TensorBasis::totalOrder(UnivariateFamily::legendre(-2, 2), 10, 4);
    const std::vector<int> q(10, 6);
    CHECK(tensorNodeCount(q) == 60466176u);
    try {
        (void)tensorRule(ros, 6);
        FAIL("expected the node guard to refuse");
    } catch (const SizeGuardError &e) {
        CHECK(std::string(e.what()).find("60466176") != std::string::npos);
    }
}

TEST_CASE("orthonormality defect") {
    const TensorBasis leg = TensorBasis::totalOrder(UnivariateFamily::legendre(), 3, 10);
    CHECK(orthonormalityDefect(leg, tensorRule(leg, 12)) <= 1e-10);
    const TensorBasis jac = TensorBasis::totalOrder(UnivariateFamily::jacobi(4, 4, 0.0, 1.0), 3, 8);
    CHECK(orthonormalityDefect(jac, tensorRule(jac, 10)) <= 1e-10);
    // Under-resolved rule: exactness 2*11-3 = 19 < 20.
    CHECK(orthonormalityDefect(leg, tensorRule(leg, 11)) > 1e-6);
}

TEST_CASE("orthonormality holds across families whenever exactness >= 2p") {
    Philox4x32 rng(23);
    for (int trial = 0; trial < 12; ++trial) {
        const double a = 1.0 + 5.0 * rng.uniform();
        const double b = 1.0 + 5.0 * rng.uniform();
        const int p = 1 + static_cast<int>(rng.below(7));
        const TensorBasis basis({UnivariateFamily::jacobi(a, b, -1.0, 2.0), UnivariateFamily::legendre(0.0, 1.0)},
                                multiIndices(2, p));
        const QuadratureRule rule = tensorRule(basis, lobattoNodesForDegree(2 * p));
        REQUIRE(rule.exactness() >= 2 * p);
        CHECK(orthonormalityDefect(basis, rule) <= 1e-10);
    }
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS((void)UnivariateFamily::legendre(1.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS((void)UnivariateFamily::jacobi(0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS((void)lobattoRule(UnivariateFamily::legendre(), 1), InvalidArgument);
    CHECK_THROWS_AS((void)multiIndices(0, 3), InvalidArgument);
}
