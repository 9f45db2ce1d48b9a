#include "kernlearn/benchfn.hpp"

#include <cmath>
#include <numbers>

#include "kernlearn/errors.hpp"
#include "kernlearn/polybasis.hpp"

namespace kernlearn {

double ishigami(PointRef x, double a, double b) {
    if (x.size() != 3) {
        throw InvalidArgument("ishigami: expects a 3-dimensional point");
    }
    const double s1 = std::sin(x[0]);
    const double s2 = std::sin(x[1]);
    const double x3 = x[2];
    return s1 + a * s2 * s2 + b * x3 * x3 * x3 * x3 * s1;
}

double rosenbrock(PointRef x) {
    if (x.size() < 2) {
        throw InvalidArgument("rosenbrock: expects at least two dimensions");
    }
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double t = x[i + 1] - x[i] * x[i];
        const double u = 1.0 - x[i];
        s += 100.0 * t * t + u * u;
    }
    return s;
}

Vector BenchmarkFunction::evaluate(const PointSet &points) const {
    if (points.cols() != dim) {
        throw InvalidArgument(name + ": point dimension " + std::to_string(points.cols()) + " does not match " +
                              std::to_string(dim));
    }
    Vector out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        out[i] = f(points.row(i));
    }
    return out;
}

BatchModel BenchmarkFunction::model() const {
    auto self = std::make_shared<const BenchmarkFunction>(*this);
    return [self](const PointSet &points) { return self->evaluate(points); };
}

BenchmarkFunction ishigamiFunction(double a, double b) {
    constexpr double pi = std::numbers::pi;
    BenchmarkFunction fn;
    fn.name = "ishigami";
    fn.kind = BenchmarkFunction::Kind::Ishigami;
    fn.dim = 3;
    fn.law = DesignSpec::cube(Law::Uniform, 3, -pi, pi, 1, 0);
    fn.f = [a, b](PointRef x) { return ishigami(x, a, b); };
    const double pi4 = std::pow(pi, 4);
    const double v1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2);
    const double v2 = a * a / 8.0;
    const double v13 = b * b * std::pow(pi, 8) * (1.0 / 18.0 - 1.0 / 50.0);
    fn.mean = a / 2.0;
    fn.variance = v1 + v2 + v13;
    Vector s(3);
    s << v1 / *fn.variance, v2 / *fn.variance, 0.0;
    fn.sobol = s;
    return fn;
}

BenchmarkFunction rosenbrockFunction(int d) {
    if (d < 2) {
        throw InvalidArgument("rosenbrock: dimension must be >= 2");
    }
    BenchmarkFunction fn;
    fn.name = "rosenbrock";
    fn.kind = BenchmarkFunction::Kind::Rosenbrock;
    fn.dim = d;
    fn.law = DesignSpec::cube(Law::Uniform, d, -2.0, 2.0, 1, 0);
    fn.f = [](PointRef x) { return rosenbrock(x); };
    // E[x^2] = 4/3, E[x^4] = 16/5 on U(-2, 2).
    fn.mean = static_cast<double>(d - 1) * (100.0 * (4.0 / 3.0 + 16.0 / 5.0) + 1.0 + 4.0 / 3.0);
    return fn;
}

BenchmarkFunction constantFunction(double c, int d, double lo, double hi) {
    BenchmarkFunction fn;
    fn.name = "constant";
    fn.kind = BenchmarkFunction::Kind::Constant;
    fn.dim = d;
    fn.law = DesignSpec::cube(Law::Uniform, d, lo, hi, 1, 0);
    fn.f = [c](PointRef) { return c; };
    fn.mean = c;
    fn.variance = 0.0;
    return fn;
}

BenchmarkFunction benchmarkByName(const std::string &name) {
    if (name == "ishigami") {
        return ishigamiFunction();
    }
    if (name == "rosenbrock") {
        return rosenbrockFunction();
    }
    throw InvalidArgument("unknown benchmark function '" + name + "' (expected ishigami or rosenbrock)");
}

std::vector<std::string> benchmarkNames() {
    return {"ishigami", "rosenbrock"};
}

namespace {

std::vector<UnivariateFamily> uniformFamilies(const DesignSpec &law, int first, int count) {
    std::vector<UnivariateFamily> fams;
    for (int j = first; j < first + count; ++j) {
        const auto &[lo, hi] = law.bounds[static_cast<std::size_t>(j)];
        fams.push_back(UnivariateFamily::legendre(lo, hi));
    }
    return fams;
}

/// E[g(X)] over the block of dimensions [first, first + count).
template<class G>
double blockExpectation(const DesignSpec &law, int first, int count, int q, G &&g) {
    const std::vector<int> qs(static_cast<std::size_t>(count), q);
    const QuadratureRule rule = tensorRule(uniformFamilies(law, first, count), qs);
    double s = 0.0;
    for (Eigen::Index l = 0; l < rule.nodes.rows(); ++l) {
        s += rule.weights[l] * g(rule.nodes.row(l));
    }
    return s;
}

} // namespace

Moments momentOracle(const BenchmarkFunction &fn, int nodesPerDim) {
    if (nodesPerDim != 0 && nodesPerDim < 2) {
        throw InvalidArgument("moment oracle: need at least two nodes per dimension");
    }
    if (fn.law.law != Law::Uniform && fn.law.law != Law::LhsMaximin) {
        throw InvalidArgument("moment oracle: only uniform input laws are supported");
    }
    switch (fn.kind) {
    case BenchmarkFunction::Kind::Constant:
        return Moments{fn.f(Eigen::RowVectorXd::Zero(fn.dim)), 0.0};
    case BenchmarkFunction::Kind::Ishigami: {
        const int q = nodesPerDim == 0 ? 40 : nodesPerDim;
        const double m1 = blockExpectation(fn.law, 0, 3, q, [&](PointRef x) { return fn.f(x); });
        const double m2 = blockExpectation(fn.law, 0, 3, q, [&](PointRef x) {
            const double v = fn.f(x);
            return v * v;
        });
        return Moments{m1, m2 - m1 * m1};
    }
    case BenchmarkFunction::Kind::Rosenbrock: {
        // Term i depends on (x_i, x_{i+1}) with degree <= 4 per variable, so
        // products of two terms have degree <= 8 and q = 6 is exact.
        const int q = nodesPerDim == 0 ? 6 : nodesPerDim;
        auto term = [](double xi, double xn) {
            const double t = xn - xi * xi;
            const double u = 1.0 - xi;
            return 100.0 * t * t + u * u;
        };
        const int terms = fn.dim - 1;
        std::vector<double> mean(static_cast<std::size_t>(terms));
        double total = 0.0;
        double variance = 0.0;
        for (int i = 0; i < terms; ++i) {
            const double m = blockExpectation(fn.law, i, 2, q, [&](PointRef x) { return term(x[0], x[1]); });
            const double m2 = blockExpectation(fn.law, i, 2, q, [&](PointRef x) {
                const double v = term(x[0], x[1]);
                return v * v;
            });
            mean[static_cast<std::size_t>(i)] = m;
            total += m;
            variance += m2 - m * m;
        }
        for (int i = 0; i + 1 < terms; ++i) {
            const double cross = blockExpectation(fn.law, i, 3, q, [&](PointRef x) {
                return term(x[0], x[1]) * term(x[1], x[2]);
            });
            variance += 2.0 * (cross - mean[static_cast<std::size_t>(i)] * mean[static_cast<std::size_t>(i + 1)]);
        }
        return Moments{total, variance};
    }
    }
    throw InvalidArgument("moment oracle: unsupported function " + fn.name);
}

} // namespace kernlearn
