#ifndef KERNLEARN_SKRR_HPP
#define KERNLEARN_SKRR_HPP

#include <memory>
#include <optional>
#include <vector>

#include "kernlearn/kernels.hpp"
#include "kernlearn/polybasis.hpp"
#include "kernlearn/regression.hpp"
#include "kernlearn/sparse.hpp"

namespace kernlearn {

/// Eigenvalues of a spectral kernel built from expansion coefficients.
struct SpectralSolution {
    std::vector<std::size_t> retained; ///< basis indices with sigma > 0, ascending
    std::vector<double> sigmas;        ///< aligned with `retained`
    double kappa = 0.0;
    std::vector<double> sourceCoeffs;  ///< |c_k| for the retained indices
};

/// sigma_k = kappa |c_k| / sum_j |c_j| over the indices with |c_k| > dropFloor,
/// the minimizer of sum_k c_k^2 / sigma_k on {sigma >= 0, sum sigma = kappa}.
/// The default floor is 1e-12 max|c|. Throws DegenerateError when nothing survives.
[[nodiscard]] SpectralSolution optimalSigmas(const Vector &c, double kappa,
                                             std::optional<double> dropFloor = std::nullopt);

/// sum_k c_k^2 / sigma_k. Terms with c_k = 0 contribute nothing; c_k != 0 with
/// sigma_k <= 0 throws InvalidArgument.
[[nodiscard]] double normObjective(const Vector &c, const Vector &sigma);

[[nodiscard]] KernelSpec spectralKernel(std::shared_ptr<const TensorBasis> basis, const SpectralSolution &solution);

/// Unbiased sample variance of y.
[[nodiscard]] double sampleVariance(const Vector &y);

struct SskrrResult {
    TrainedRegressor regressor;
    SpectralSolution spectral;
    SparseCoefficients coefficients;
};

/// Sparse spectral KRR: BPDN recovery of the expansion coefficients on the
/// training data, then KRR with the kernel whose eigenvalues minimize the
/// target's RKHS norm. kappa defaults to the sample variance of y.
[[nodiscard]] SskrrResult sskrrFit(std::shared_ptr<const TensorBasis> basis, const Dataset &data, double lambda,
                                   const BpdnOptions &bpdn, std::optional<double> kappa = std::nullopt,
                                   const FitOptions &fitOptions = {});

/// Same as sskrrFit with coefficients already recovered (lets a lambda search
/// reuse one BPDN solve).
[[nodiscard]] SskrrResult sskrrFromCoefficients(std::shared_ptr<const TensorBasis> basis, const Dataset &data,
                                                double lambda, const SparseCoefficients &coefficients,
                                                std::optional<double> kappa = std::nullopt,
                                                const FitOptions &fitOptions = {});

struct NskrrIteration {
    int n = 0;
    SpectralSolution spectral;
    double objective = 0.0; ///< normObjective of the projected coefficients under the new sigmas
};

struct NskrrResult {
    TrainedRegressor regressor;
    std::vector<NskrrIteration> trace;
    SpectralSolution spectral; ///< eigenvalues of the final kernel
};

struct NskrrOptions {
    int iterations = 1;
    std::optional<double> kappa;       ///< defaults to the sample variance of y
    std::optional<Vector> sigma0;      ///< defaults to kappa / R on every index
    std::optional<double> dropFloor;
    FitOptions fit;
};

/// Non-sparse spectral KRR. Starting from sigma0, alternates KRR with the
/// current spectral kernel and the L2 projection c_k = sum_l w_l G(x_l) phi_k(x_l)
/// of the fitted approximant, then rebuilds sigma from c. The rule must be exact
/// to degree 2p; the projection is then exact since the approximant lies in
/// the span of the basis.
[[nodiscard]] NskrrResult nskrrFit(std::shared_ptr<const TensorBasis> basis, const Dataset &data, double lambda,
                                   const QuadratureRule &rule, const NskrrOptions &options = {});

} // namespace kernlearn

#endif // KERNLEARN_SKRR_HPP
