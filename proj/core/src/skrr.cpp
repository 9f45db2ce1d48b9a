#include "kernlearn/skrr.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "kernlearn/errors.hpp"

namespace kernlearn {

SpectralSolution optimalSigmas(const Vector &c, double kappa, std::optional<double> dropFloor) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw InvalidArgument("optimal_sigmas: kappa must be a finite positive number");
    }
    if (!c.allFinite()) {
        throw InvalidArgument("optimal_sigmas: coefficients must be finite");
    }
    const double cmax = c.size() > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
    const double floor = dropFloor.value_or(1e-12 * cmax);
    if (floor < 0.0) {
        throw InvalidArgument("optimal_sigmas: drop floor must be >= 0");
    }

    SpectralSolution out;
    out.kappa = kappa;
    double total = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        const double a = std::abs(c[k]);
        if (a > floor) {
            out.retained.push_back(static_cast<std::size_t>(k));
            out.sourceCoeffs.push_back(a);
            total += a;
        }
    }
    if (out.retained.empty() || !(total > 0.0)) {
        std::ostringstream msg;
        msg << "optimal_sigmas: every coefficient is at or below the drop floor " << floor
            << "; the spectral kernel would be identically zero";
        throw DegenerateError(msg.str());
    }
    out.sigmas.reserve(out.retained.size());
    for (double a : out.sourceCoeffs) {
        out.sigmas.push_back(kappa * (a / total));
    }
    return out;
}

double normObjective(const Vector &c, const Vector &sigma) {
    if (c.size() != sigma.size()) {
        throw InvalidArgument("norm_objective: c and sigma have different lengths");
    }
    double s = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        if (c[k] == 0.0) {
            continue;
        }
        if (!(sigma[k] > 0.0)) {
            throw InvalidArgument("norm_objective: sigma_" + std::to_string(k) + " is not positive where c_" +
                                  std::to_string(k) + " != 0");
        }
        s += c[k] * c[k] / sigma[k];
    }
    return s;
}

KernelSpec spectralKernel(std::shared_ptr<const TensorBasis> basis, const SpectralSolution &solution) {
    return KernelSpec::spectral(std::move(basis), solution.retained, solution.sigmas);
}

double sampleVariance(const Vector &y) {
    if (y.size() < 2) {
        throw InvalidArgument("sample variance needs at least two values");
    }
    const double mean = y.mean();
    return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

namespace {

double resolveKappa(std::optional<double> kappa, const Vector &y) {
    const double k = kappa ? *kappa : sampleVariance(y);
    if (!(k > 0.0) || !std::isfinite(k)) {
        throw DegenerateError("spectral kernel: trace budget kappa must be positive (zero output variance?)");
    }
    return k;
}

} // namespace

SskrrResult sskrrFromCoefficients(std::shared_ptr<const TensorBasis> basis, const Dataset &data, double lambda,
                                  const SparseCoefficients &coefficients, std::optional<double> kappa,
                                  const FitOptions &fitOptions) {
    if (!basis) {
        throw InvalidArgument("sskrr: basis is null");
    }
    if (static_cast<std::size_t>(coefficients.c.size()) != basis->size()) {
        throw InvalidArgument("sskrr: coefficient vector does not match the basis size");
    }
    SpectralSolution spectral = optimalSigmas(coefficients.c, resolveKappa(kappa, data.y));
    KernelSpec kernel = spectralKernel(basis, spectral);
    TrainedRegressor regressor = fit(kernel, lambda, data, fitOptions);
    return SskrrResult{std::move(regressor), std::move(spectral), coefficients};
}

SskrrResult sskrrFit(std::shared_ptr<const TensorBasis> basis, const Dataset &data, double lambda,
                     const BpdnOptions &bpdn, std::optional<double> kappa, const FitOptions &fitOptions) {
    if (!basis) {
        throw InvalidArgument("sskrr: basis is null");
    }
    data.validate();
    const Matrix theta = buildTheta(*basis, data.X);
    const SparseCoefficients coefficients = bpdnSolve(theta, data.y, bpdn);
    return sskrrFromCoefficients(std::move(basis), data, lambda, coefficients, kappa, fitOptions);
}

NskrrResult nskrrFit(std::shared_ptr<const TensorBasis> basis, const Dataset &data, double lambda,
                     const QuadratureRule &rule, const NskrrOptions &options) {
    if (!basis) {
        throw InvalidArgument("nskrr: basis is null");
    }
    data.validate();
    if (options.iterations < 0) {
        throw InvalidArgument("nskrr: iteration count must be >= 0");
    }
    if (rule.nodes.cols() != basis->dim()) {
        throw InvalidArgument("nskrr: quadrature dimension does not match the basis");
    }
    if (options.iterations > 0 && rule.exactness() < 2 * basis->maxDegree()) {
        throw InvalidArgument("nskrr: quadrature exactness " + std::to_string(rule.exactness()) +
                              " is below 2p = " + std::to_string(2 * basis->maxDegree()));
    }

    const auto r = static_cast<Eigen::Index>(basis->size());
    double kappa = 0.0;
    Vector sigma0;
    if (options.sigma0) {
        sigma0 = *options.sigma0;
        if (sigma0.size() != r) {
            throw InvalidArgument("nskrr: sigma0 must have one entry per basis function");
        }
        if (!(sigma0.minCoeff() > 0.0) || !sigma0.allFinite()) {
            throw InvalidArgument("nskrr: sigma0 must be finite and positive");
        }
        kappa = options.kappa ? *options.kappa : sigma0.sum();
        if (std::abs(sigma0.sum() - kappa) > 1e-9 * kappa) {
            throw InvalidArgument("nskrr: sigma0 does not sum to kappa");
        }
    } else {
        kappa = resolveKappa(options.kappa, data.y);
        sigma0 = Vector::Constant(r, kappa / static_cast<double>(r));
    }

    SpectralSolution current;
    current.kappa = kappa;
    current.retained.resize(static_cast<std::size_t>(r));
    std::iota(current.retained.begin(), current.retained.end(), std::size_t{0});
    current.sigmas.assign(sigma0.data(), sigma0.data() + r);

    TrainedRegressor regressor = fit(spectralKernel(basis, current), lambda, data, options.fit);
    std::vector<NskrrIteration> trace;
    if (options.iterations == 0) {
        return NskrrResult{std::move(regressor), std::move(trace), std::move(current)};
    }

    const Matrix phi = basis->evalMatrix(rule.nodes);
    for (int n = 1; n <= options.iterations; ++n) {
        const Vector g = regressor.predictMean(rule.nodes);
        const Vector c = phi.transpose() * rule.weights.cwiseProduct(g);
        try {
            current = optimalSigmas(c, kappa, options.dropFloor);
        } catch (const DegenerateError &e) {
            throw DegenerateError("nskrr iteration " + std::to_string(n) + ": " + e.what());
        }
        Vector sigmaFull = Vector::Zero(r);
        for (std::size_t i = 0; i < current.retained.size(); ++i) {
            sigmaFull[static_cast<Eigen::Index>(current.retained[i])] = current.sigmas[i];
        }
        Vector cKept = Vector::Zero(r);
        for (std::size_t idx : current.retained) {
            cKept[static_cast<Eigen::Index>(idx)] = c[static_cast<Eigen::Index>(idx)];
        }
        trace.push_back(NskrrIteration{n, current, normObjective(cKept, sigmaFull)});
        regressor = fit(spectralKernel(basis, current), lambda, data, options.fit);
    }
    return NskrrResult{std::move(regressor), std::move(trace), std::move(current)};
}

} // namespace kernlearn
