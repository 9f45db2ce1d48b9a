#ifndef KERNLEARN_BENCHFN_HPP
#define KERNLEARN_BENCHFN_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kernlearn/sampling.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

/// sin(x1) + a sin^2(x2) + b x3^4 sin(x1)
[[nodiscard]] double ishigami(PointRef x, double a = 7.0, double b = 0.1);

/// sum_{i<d} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
[[nodiscard]] double rosenbrock(PointRef x);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

struct BenchmarkFunction {
    enum class Kind { Ishigami, Rosenbrock, Constant };

    std::string name;
    Kind kind = Kind::Constant;
    int dim = 1;
    DesignSpec law; ///< default input law; n and seed are placeholders
    std::function<double(PointRef)> f;

    /// Closed-form references where they exist.
    std::optional<double> mean;
    std::optional<double> variance;
    std::optional<Vector> sobol;

    [[nodiscard]] Vector evaluate(const PointSet &points) const;
    [[nodiscard]] BatchModel model() const;
};

/// Ishigami on [-pi, pi]^3, uniform inputs.
[[nodiscard]] BenchmarkFunction ishigamiFunction(double a = 7.0, double b = 0.1);

/// Rosenbrock on [-2, 2]^d, uniform inputs.
[[nodiscard]] BenchmarkFunction rosenbrockFunction(int d = 10);

[[nodiscard]] BenchmarkFunction constantFunction(double c, int d, double lo = 0.0, double hi = 1.0);

/// "ishigami" or "rosenbrock"; throws InvalidArgument otherwise.
[[nodiscard]] BenchmarkFunction benchmarkByName(const std::string &name);
[[nodiscard]] std::vector<std::string> benchmarkNames();

/// Mean and variance under the function's uniform law by tensor Gauss-Lobatto
/// quadrature: the full tensor for Ishigami, one- and two-term blocks for
/// Rosenbrock. nodesPerDim = 0 picks a count that is exact (Rosenbrock) or
/// accurate to round-off (Ishigami).
[[nodiscard]] Moments momentOracle(const BenchmarkFunction &f, int nodesPerDim = 0);

} // namespace kernlearn

#endif // KERNLEARN_BENCHFN_HPP
