#ifndef KERNLEARN_SPARSE_HPP
#define KERNLEARN_SPARSE_HPP

#include "kernlearn/errors.hpp"
#include "kernlearn/polybasis.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

/// I x R measurement matrix Theta(i, k) = phi_k(X_i).
[[nodiscard]] Matrix buildTheta(const TensorBasis &basis, const PointSet &points);

struct BpdnOptions {
    double eta = 0.0;
    int maxOuter = 100;
    int maxInner = 10'000;
    double innerTol = 1e-9;
    bool normalizeColumns = false;
};

struct SparseCoefficients {
    Vector c;
    double residualL2 = 0.0;
    double l1 = 0.0;
    int iterations = 0; ///< total inner iterations over all outer steps
    int outerIterations = 0;
    double eta = 0.0;
    /// Certified lower bound on the optimal l1 norm from the best dual point seen.
    double l1LowerBound = 0.0;
};

/// Thrown when the iteration caps are hit before a feasible point is found.
class BpdnNonConvergence : public NumericalError {
public:
    BpdnNonConvergence(const std::string &what, SparseCoefficients best)
        : NumericalError(what), best_(std::move(best)) {}

    [[nodiscard]] const SparseCoefficients &best() const noexcept { return best_; }

private:
    SparseCoefficients best_;
};

/// Thrown when eta is below the least-squares residual floor.
class BpdnInfeasible : public InvalidArgument {
public:
    BpdnInfeasible(const std::string &what, double floor) : InvalidArgument(what), floor_(floor) {}

    [[nodiscard]] double residualFloor() const noexcept { return floor_; }

private:
    double floor_;
};

/// min |c|_1 subject to |Theta c - y|_2 <= eta.
///
/// Root-finding on the Pareto curve phi(tau) = min{|Theta c - y|_2 : |c|_1 <= tau}
/// with LASSO subproblems solved by spectral projected gradient. Each outer step
/// also tries an exact active-set solution on the current support and returns it
/// once it is feasible and its l1 norm is certified optimal by a dual point.
[[nodiscard]] SparseCoefficients bpdnSolve(const Matrix &theta, const Vector &y, const BpdnOptions &options = {});

/// Euclidean projection of v onto {x : |x|_1 <= tau}.
[[nodiscard]] Vector projectL1Ball(const Vector &v, double tau);

/// #{k : |c_k| > delta}.
[[nodiscard]] int sparsity(const Vector &c, double delta = 1e-3);

/// Indices k with |c_k| > delta, ascending.
[[nodiscard]] std::vector<std::size_t> supportOf(const Vector &c, double delta = 1e-3);

} // namespace kernlearn

#endif // KERNLEARN_SPARSE_HPP
