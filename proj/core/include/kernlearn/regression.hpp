#ifndef KERNLEARN_REGRESSION_HPP
#define KERNLEARN_REGRESSION_HPP

#include <memory>
#include <span>

#include "kernlearn/kernels.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

/// I observations (X_i, Y_i), X_i in R^d.
struct Dataset {
    PointSet X;
    Vector y;

    [[nodiscard]] Eigen::Index size() const noexcept { return y.size(); }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(X.cols()); }

    /// Rows listed in `rows`, in that order.
    [[nodiscard]] Dataset subset(std::span<const Eigen::Index> rows) const;

    /// Throws InvalidArgument when sizes disagree, the set is empty or an entry is not finite.
    void validate() const;
};

struct FitOptions {
    /// On a singular system fall back to an eigendecomposition pseudo-solve
    /// instead of throwing SingularMatrixError.
    bool allowPseudoInverse = false;
};

/// A fitted kernel ridge regressor. Immutable; safe to share between threads.
class TrainedRegressor {
public:
    [[nodiscard]] const KernelSpec &kernel() const noexcept { return kernel_; }
    [[nodiscard]] double nugget() const noexcept { return lambda_; }
    [[nodiscard]] const PointSet &trainInputs() const noexcept { return x_; }
    [[nodiscard]] const Vector &trainTargets() const noexcept { return y_; }
    [[nodiscard]] const Vector &alpha() const noexcept { return alpha_; }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(x_.cols()); }

    /// True when predictions go through the spectral feature space (a spectral
    /// kernel with fewer active terms than observations and lambda > 0).
    [[nodiscard]] bool featureSpace() const noexcept { return mode_ == Mode::Features; }
    [[nodiscard]] bool pseudoInverse() const noexcept { return mode_ == Mode::Pseudo; }

    [[nodiscard]] double predictMeanAt(PointRef x) const;
    [[nodiscard]] Vector predictMean(const PointSet &points) const;

    /// sigma^2(x) = K(x,x) - K(x,X) (K(X,X) + lambda I)^-1 K(X,x), clamped at zero
    /// for round-off; throws NumericalError below -1e-10 max(1, K(x,x)).
    [[nodiscard]] double predictVarianceAt(PointRef x) const;
    [[nodiscard]] Vector predictVariance(const PointSet &points) const;

    /// (K(X,X) + lambda I)^-1 B for the training system.
    [[nodiscard]] Matrix solve(const Matrix &rhs) const;

    friend TrainedRegressor fit(const KernelSpec &kernel, double lambda, const Dataset &data,
                                const FitOptions &options);

private:
    enum class Mode { Dual, Pseudo, Features };

    TrainedRegressor(KernelSpec kernel, double lambda, PointSet x, Vector y)
        : kernel_(std::move(kernel)), lambda_(lambda), x_(std::move(x)), y_(std::move(y)) {}

    void checkDim(Eigen::Index cols) const;

    KernelSpec kernel_;
    double lambda_;
    PointSet x_;
    Vector y_;
    Vector alpha_;
    Mode mode_ = Mode::Dual;

    std::shared_ptr<const Eigen::LDLT<Matrix>> ldlt_;
    // Pseudo-solve: K + lambda I = U diag(d) U^T with d^-1 zeroed below the cutoff.
    Matrix eig_vectors_;
    Vector eig_inverse_;
    // Feature space: w = (F^T F + lambda I)^-1 F^T Y with F = Phi diag(sqrt(sigma)).
    std::shared_ptr<const Eigen::LLT<Matrix>> primal_;
    Vector weights_;
};

/// Solves (K(X,X) + lambda I) alpha = Y with an LDL^T factorization. A pivot at or
/// below n * eps * max pivot raises SingularMatrixError naming that pivot.
[[nodiscard]] TrainedRegressor fit(const KernelSpec &kernel, double lambda, const Dataset &data,
                                   const FitOptions &options = {});

/// Y^T K(X,X)^-1 Y, the squared RKHS norm of the interpolant.
[[nodiscard]] double rkhsNormSq(const KernelSpec &kernel, const Dataset &data);

/// Factorizes a symmetric positive semi-definite system with the same pivot test as fit().
[[nodiscard]] Eigen::LDLT<Matrix> factorizeSpd(const Matrix &a, const char *context);

} // namespace kernlearn

#endif // KERNLEARN_REGRESSION_HPP
