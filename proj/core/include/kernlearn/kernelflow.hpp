#ifndef KERNLEARN_KERNELFLOW_HPP
#define KERNLEARN_KERNELFLOW_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kernlearn/errors.hpp"
#include "kernlearn/kernels.hpp"
#include "kernlearn/regression.hpp"

namespace kernlearn {

/// A kernel family with differentiable parameters theta (natural units).
///
/// Gaussian: theta = (gamma[, lambda]). Gaussian ARD: theta = (gamma_1..gamma_d[, lambda]).
/// Fixed: a fixed kernel whose only parameter is the nugget, theta = (lambda).
class KernelFamily {
public:
    enum class Kind { Gaussian, GaussianArd, Fixed };

    static KernelFamily gaussian(bool withNugget, double fixedNugget = 0.0);
    static KernelFamily gaussianArd(int d, bool withNugget, double fixedNugget = 0.0);
    static KernelFamily fixed(KernelSpec kernel);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] bool nuggetIncluded() const noexcept { return with_nugget_; }
    [[nodiscard]] int paramCount() const noexcept;
    [[nodiscard]] std::vector<std::string> paramNames() const;

    [[nodiscard]] KernelSpec kernel(const Vector &theta) const;
    [[nodiscard]] double nugget(const Vector &theta) const;

    /// Gram matrix K(X,X) + lambda I and its derivatives with respect to each theta component.
    [[nodiscard]] Matrix regularizedGram(const Vector &theta, const PointSet &x) const;
    [[nodiscard]] std::vector<Matrix> gramDerivatives(const Vector &theta, const PointSet &x) const;

    void checkTheta(const Vector &theta) const;

private:
    KernelFamily(Kind kind, int d, bool withNugget, double fixedNugget, std::optional<KernelSpec> fixedKernel)
        : kind_(kind), d_(d), with_nugget_(withNugget), fixed_nugget_(fixedNugget),
          fixed_kernel_(std::move(fixedKernel)) {}

    Kind kind_;
    int d_;
    bool with_nugget_;
    double fixed_nugget_;
    std::optional<KernelSpec> fixed_kernel_;
};

/// rho = 1 - Yc^T (Kc + lambda I)^-1 Yc / Yf^T (Kf + lambda I)^-1 Yf. Values
/// within 1e-10 outside [0,1] are clamped; larger violations throw NumericalError.
[[nodiscard]] double rho(const KernelSpec &kernel, double lambda, const Dataset &fine, const Dataset &coarse);

/// The same quantity as |G_f - G_c|_H^2 / |G_f|_H^2, with G_f and G_c the
/// regressors on the fine and coarse sets, computed from dual coefficients.
[[nodiscard]] double rhoFromInterpolants(const KernelSpec &kernel, double lambda, const Dataset &fine,
                                         const Dataset &coarse);

struct RhoGradient {
    double rho = 0.0;
    Vector gradient; ///< d rho / d theta in natural units
};

[[nodiscard]] RhoGradient rhoGrad(const KernelFamily &family, const Vector &theta, const Dataset &fine,
                                  const Dataset &coarse);

enum class ParamTransform { Log, Identity };

struct KfConfig {
    int nFine = 0; ///< 0 means all training rows
    double learningRate = 0.1;
    int iterations = 100;
    ParamTransform transform = ParamTransform::Log;
    double momentum = 0.0;
    std::uint64_t seed = 0;
    /// Optional per-parameter box [lo, hi] in natural units.
    std::vector<std::pair<double, double>> bounds;

    void validate(Eigen::Index trainSize, int paramCount) const;
};

struct KfRecord {
    int n = 0;
    Vector theta;
    double rho = 0.0;           ///< NaN when the Gram was singular
    double validationRmse = 0.0; ///< NaN when the fit failed
};

struct KfTrace {
    std::vector<std::string> paramNames;
    std::vector<KfRecord> records;
    std::size_t selected = 0;
    Vector thetaStar;
};

/// Kernel Flow run was aborted after too many consecutive singular iterations.
class KfAbort : public NumericalError {
public:
    KfAbort(const std::string &what, KfTrace trace) : NumericalError(what), trace_(std::move(trace)) {}
    [[nodiscard]] const KfTrace &trace() const noexcept { return trace_; }

private:
    KfTrace trace_;
};

/// Parametric Kernel Flow. Each iteration draws N_f training rows and
/// N_c = floor(N_f / 2) of those, takes a gradient step on rho, and records the
/// validation RMSE of a regressor fit on all of D_train. Returns the full trace
/// with the first minimal-validation-RMSE iterate selected.
[[nodiscard]] KfTrace kfRun(const Dataset &train, const Dataset &validation, const KernelFamily &family,
                            const Vector &theta0, const KfConfig &config);

/// 2 / (I (I - 1)) sum_{j<k} |X_j - X_k|_2.
[[nodiscard]] double meanPairwiseDistance(const PointSet &x);

} // namespace kernlearn

#endif // KERNLEARN_KERNELFLOW_HPP
