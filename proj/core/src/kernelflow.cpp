#include "kernlearn/kernelflow.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kernlearn/rng.hpp"

namespace kernlearn {

namespace {

constexpr double kRhoSlack = 1e-10;
constexpr int kMaxConsecutiveFailures = 10;

double clampRho(double r) {
    if (!std::isfinite(r) || r < -kRhoSlack || r > 1.0 + kRhoSlack) {
        std::ostringstream msg;
        msg << "rho = " << r << " lies outside [0, 1]; the Gram matrices are too ill-conditioned";
        throw NumericalError(msg.str());
    }
    return std::clamp(r, 0.0, 1.0);
}

void checkCoarse(const Dataset &fine, const Dataset &coarse) {
    fine.validate();
    if (coarse.size() == 0) {
        throw InvalidArgument("rho: coarse set is empty");
    }
    coarse.validate();
    if (coarse.dim() != fine.dim()) {
        throw InvalidArgument("rho: fine and coarse sets have different dimensions");
    }
}

double quadraticForm(const Matrix &a, const Vector &y, Vector *alpha, const char *context) {
    const auto ldlt = factorizeSpd(a, context);
    Vector sol = ldlt.solve(y);
    const double q = y.dot(sol);
    if (alpha) {
        *alpha = std::move(sol);
    }
    return q;
}

double rhoFromForms(double nc, double nf) {
    if (!(nf > 0.0)) {
        throw DegenerateError("rho: fine quadratic form Y_f^T K_f^-1 Y_f is zero (Y_f identically zero?)");
    }
    return 1.0 - nc / nf;
}

} // namespace

// ---------------------------------------------------------------------------
// KernelFamily

KernelFamily KernelFamily::gaussian(bool withNugget, double fixedNugget) {
    return KernelFamily(Kind::Gaussian, 0, withNugget, fixedNugget, std::nullopt);
}

KernelFamily KernelFamily::gaussianArd(int d, bool withNugget, double fixedNugget) {
    if (d < 1) {
        throw InvalidArgument("gaussian_ard family: dimension must be >= 1");
    }
    return KernelFamily(Kind::GaussianArd, d, withNugget, fixedNugget, std::nullopt);
}

KernelFamily KernelFamily::fixed(KernelSpec kernel) {
    return KernelFamily(Kind::Fixed, 0, true, 0.0, std::move(kernel));
}

int KernelFamily::paramCount() const noexcept {
    const int n = with_nugget_ ? 1 : 0;
    switch (kind_) {
    case Kind::Gaussian:
        return 1 + n;
    case Kind::GaussianArd:
        return d_ + n;
    case Kind::Fixed:
        return n;
    }
    return n;
}

std::vector<std::string> KernelFamily::paramNames() const {
    std::vector<std::string> names;
    if (kind_ == Kind::Gaussian) {
        names.emplace_back("gamma");
    } else if (kind_ == Kind::GaussianArd) {
        for (int i = 1; i <= d_; ++i) {
            names.push_back("gamma_" + std::to_string(i));
        }
    }
    if (with_nugget_) {
        names.emplace_back("lambda");
    }
    return names;
}

void KernelFamily::checkTheta(const Vector &theta) const {
    if (theta.size() != paramCount()) {
        throw InvalidArgument("kernel family: expected " + std::to_string(paramCount()) + " parameters, got " +
                              std::to_string(theta.size()));
    }
    if (!theta.allFinite()) {
        throw InvalidArgument("kernel family: parameters must be finite");
    }
    const Eigen::Index scales = with_nugget_ ? theta.size() - 1 : theta.size();
    if ((theta.head(scales).array() <= 0.0).any()) {
        throw InvalidArgument("kernel family: length scales must be > 0");
    }
    if (with_nugget_ && theta[theta.size() - 1] < 0.0) {
        throw InvalidArgument("kernel family: nugget must be >= 0");
    }
}

KernelSpec KernelFamily::kernel(const Vector &theta) const {
    checkTheta(theta);
    switch (kind_) {
    case Kind::Gaussian:
        return KernelSpec::gaussian(theta[0]);
    case Kind::GaussianArd:
        return KernelSpec::gaussianArd(std::vector<double>(theta.data(), theta.data() + d_));
    case Kind::Fixed:
        return *fixed_kernel_;
    }
    return *fixed_kernel_;
}

double KernelFamily::nugget(const Vector &theta) const {
    checkTheta(theta);
    const double lambda = with_nugget_ ? theta[theta.size() - 1] : fixed_nugget_;
    if (!(lambda >= 0.0)) {
        throw InvalidArgument("kernel family: nugget must be >= 0");
    }
    return lambda;
}

Matrix KernelFamily::regularizedGram(const Vector &theta, const PointSet &x) const {
    Matrix k = gram(kernel(theta), x);
    k.diagonal().array() += nugget(theta);
    return k;
}

std::vector<Matrix> KernelFamily::gramDerivatives(const Vector &theta, const PointSet &x) const {
    checkTheta(theta);
    const Eigen::Index n = x.rows();
    std::vector<Matrix> out;
    if (kind_ == Kind::Gaussian || kind_ == Kind::GaussianArd) {
        const Matrix k = gram(kernel(theta), x);
        const int m = kind_ == Kind::Gaussian ? 1 : d_;
        out.assign(static_cast<std::size_t>(m), Matrix::Zero(n, n));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                if (kind_ == Kind::Gaussian) {
                    const double g = theta[0];
                    const double v = k(i, j) * 2.0 * (x.row(i) - x.row(j)).squaredNorm() / (g * g * g);
                    out[0](i, j) = v;
                    out[0](j, i) = v;
                } else {
                    for (int p = 0; p < d_; ++p) {
                        const double g = theta[p];
                        const double dx = x(i, p) - x(j, p);
                        const double v = k(i, j) * 2.0 * dx * dx / (g * g * g);
                        out[static_cast<std::size_t>(p)](i, j) = v;
                        out[static_cast<std::size_t>(p)](j, i) = v;
                    }
                }
            }
        }
    }
    if (with_nugget_) {
        out.push_back(Matrix::Identity(n, n));
    }
    return out;
}

// ---------------------------------------------------------------------------
// rho

double rho(const KernelSpec &kernel, double lambda, const Dataset &fine, const Dataset &coarse) {
    checkCoarse(fine, coarse);
    Matrix kf = gram(kernel, fine.X);
    kf.diagonal().array() += lambda;
    Matrix kc = gram(kernel, coarse.X);
    kc.diagonal().array() += lambda;
    const double nf = quadraticForm(kf, fine.y, nullptr, "rho (fine Gram)");
    const double nc = quadraticForm(kc, coarse.y, nullptr, "rho (coarse Gram)");
    return clampRho(rhoFromForms(nc, nf));
}

double rhoFromInterpolants(const KernelSpec &kernel, double lambda, const Dataset &fine, const Dataset &coarse) {
    checkCoarse(fine, coarse);
    Matrix kf = gram(kernel, fine.X);
    kf.diagonal().array() += lambda;
    Matrix kc = gram(kernel, coarse.X);
    kc.diagonal().array() += lambda;
    Vector af;
    Vector ac;
    quadraticForm(kf, fine.y, &af, "rho (fine Gram)");
    quadraticForm(kc, coarse.y, &ac, "rho (coarse Gram)");

    // Inner products in the RKHS of K + lambda delta.
    Matrix kfc = crossGram(kernel, fine.X, coarse.X);
    if (lambda > 0.0) {
        for (Eigen::Index i = 0; i < fine.size(); ++i) {
            for (Eigen::Index j = 0; j < coarse.size(); ++j) {
                if (fine.X.row(i) == coarse.X.row(j)) {
                    kfc(i, j) += lambda;
                }
            }
        }
    }
    const double ff = af.dot(kf * af);
    const double cc = ac.dot(kc * ac);
    const double fc = af.dot(kfc * ac);
    if (!(ff > 0.0)) {
        throw DegenerateError("rho: fine interpolant has zero norm");
    }
    return clampRho((ff - 2.0 * fc + cc) / ff);
}

RhoGradient rhoGrad(const KernelFamily &family, const Vector &theta, const Dataset &fine, const Dataset &coarse) {
    checkCoarse(fine, coarse);
    const Matrix kf = family.regularizedGram(theta, fine.X);
    const Matrix kc = family.regularizedGram(theta, coarse.X);
    Vector af;
    Vector ac;
    const double nf = quadraticForm(kf, fine.y, &af, "rho (fine Gram)");
    const double nc = quadraticForm(kc, coarse.y, &ac, "rho (coarse Gram)");

    RhoGradient out;
    out.rho = clampRho(rhoFromForms(nc, nf));
    const auto df = family.gramDerivatives(theta, fine.X);
    const auto dc = family.gramDerivatives(theta, coarse.X);
    out.gradient.resize(static_cast<Eigen::Index>(df.size()));
    for (std::size_t p = 0; p < df.size(); ++p) {
        // d(Y^T A^-1 Y) = -alpha^T dA alpha
        const double dnf = -af.dot(df[p] * af);
        const double dnc = -ac.dot(dc[p] * ac);
        out.gradient[static_cast<Eigen::Index>(p)] = -(dnc * nf - nc * dnf) / (nf * nf);
    }
    return out;
}

// ---------------------------------------------------------------------------
// kf_run

void KfConfig::validate(Eigen::Index trainSize, int paramCount) const {
    const Eigen::Index nf = nFine == 0 ? trainSize : nFine;
    if (nf < 2 || nf > trainSize) {
        throw InvalidArgument("kf: n_fine must lie in [2, " + std::to_string(trainSize) + "]");
    }
    if (!(learningRate >= 0.0) || !std::isfinite(learningRate)) {
        throw InvalidArgument("kf: learning rate must be finite and >= 0");
    }
    if (iterations < 0) {
        throw InvalidArgument("kf: iteration count must be >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw InvalidArgument("kf: momentum must lie in [0, 1)");
    }
    if (!bounds.empty()) {
        if (bounds.size() != static_cast<std::size_t>(paramCount)) {
            throw InvalidArgument("kf: bounds must have one entry per parameter");
        }
        for (const auto &[lo, hi] : bounds) {
            if (!(lo <= hi)) {
                throw InvalidArgument("kf: each bound must satisfy lo <= hi");
            }
        }
    }
}

namespace {

double validationRmse(const KernelFamily &family, const Vector &theta, const Dataset &train, const Dataset &val) {
    const TrainedRegressor model = fit(family.kernel(theta), family.nugget(theta), train);
    const Vector pred = model.predictMean(val.X);
    return std::sqrt((pred - val.y).squaredNorm() / static_cast<double>(val.size()));
}

/// Draws `count` distinct indices from [0, n) by a partial Fisher-Yates shuffle.
std::vector<Eigen::Index> drawSubset(Philox4x32 &rng, std::vector<Eigen::Index> pool, Eigen::Index count) {
    const auto n = static_cast<std::uint64_t>(pool.size());
    for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(count); ++i) {
        const std::uint64_t j = i + rng.below(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(count));
    return pool;
}

void finalizeSelection(KfTrace &trace) {
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const double v = trace.records[i].validationRmse;
        if (std::isfinite(v) && v < best) {
            best = v;
            trace.selected = i;
            found = true;
        }
    }
    if (!found) {
        trace.selected = 0;
    }
    trace.thetaStar = trace.records.empty() ? Vector() : trace.records[trace.selected].theta;
}

} // namespace

KfTrace kfRun(const Dataset &train, const Dataset &validation, const KernelFamily &family, const Vector &theta0,
              const KfConfig &config) {
    train.validate();
    validation.validate();
    if (validation.dim() != train.dim()) {
        throw InvalidArgument("kf: training and validation sets have different dimensions");
    }
    family.checkTheta(theta0);
    config.validate(train.size(), family.paramCount());
    if (config.transform == ParamTransform::Log && !(theta0.minCoeff() > 0.0)) {
        throw InvalidArgument("kf: log transform needs strictly positive initial parameters");
    }
    for (std::size_t p = 0; p < config.bounds.size(); ++p) {
        const double v = theta0[static_cast<Eigen::Index>(p)];
        if (v < config.bounds[p].first || v > config.bounds[p].second) {
            throw InvalidArgument("kf: initial parameter " + std::to_string(p) + " lies outside its bounds");
        }
    }

    const Eigen::Index nFine = config.nFine == 0 ? train.size() : config.nFine;
    const Eigen::Index nCoarse = nFine / 2;
    std::vector<Eigen::Index> all(static_cast<std::size_t>(train.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});

    Philox4x32 rng(config.seed, 0x6b66);
    KfTrace trace;
    trace.paramNames = family.paramNames();
    Vector theta = theta0;
    Vector velocity = Vector::Zero(theta.size());
    int failures = 0;

    for (int n = 0; n <= config.iterations; ++n) {
        KfRecord rec;
        rec.n = n;
        rec.theta = theta;

        const auto fineRows = drawSubset(rng, all, nFine);
        const auto coarseRows = drawSubset(rng, fineRows, nCoarse);
        const Dataset fine = train.subset(fineRows);
        const Dataset coarse = train.subset(coarseRows);

        bool ok = true;
        Vector grad;
        try {
            const RhoGradient rg = rhoGrad(family, theta, fine, coarse);
            rec.rho = rg.rho;
            grad = rg.gradient;
        } catch (const SingularMatrixError &) {
            rec.rho = std::numeric_limits<double>::quiet_NaN();
            ok = false;
        } catch (const NumericalError &) {
            rec.rho = std::numeric_limits<double>::quiet_NaN();
            ok = false;
        }
        try {
            rec.validationRmse = validationRmse(family, theta, train, validation);
        } catch (const SingularMatrixError &) {
            rec.validationRmse = std::numeric_limits<double>::quiet_NaN();
        }
        trace.records.push_back(rec);

        failures = ok ? 0 : failures + 1;
        if (failures > kMaxConsecutiveFailures) {
            finalizeSelection(trace);
            throw KfAbort("kf: Gram matrix singular in " + std::to_string(failures) + " consecutive iterations",
                          std::move(trace));
        }
        if (n == config.iterations || !ok) {
            continue;
        }

        if (config.transform == ParamTransform::Log) {
            const Vector gLog = grad.cwiseProduct(theta);
            velocity = config.momentum * velocity - config.learningRate * gLog;
            theta = (theta.array().log() + velocity.array()).exp().matrix();
        } else {
            velocity = config.momentum * velocity - config.learningRate * grad;
            theta += velocity;
        }
        for (std::size_t p = 0; p < config.bounds.size(); ++p) {
            auto &v = theta[static_cast<Eigen::Index>(p)];
            v = std::clamp(v, config.bounds[p].first, config.bounds[p].second);
        }
        if (family.nuggetIncluded()) {
            auto &lambda = theta[theta.size() - 1];
            lambda = std::max(lambda, 0.0);
        }
    }
    finalizeSelection(trace);
    return trace;
}

double meanPairwiseDistance(const PointSet &x) {
    const Eigen::Index n = x.rows();
    if (n < 2) {
        throw InvalidArgument("mean pairwise distance needs at least two points");
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j + 1; k < n; ++k) {
            s += (x.row(j) - x.row(k)).norm();
        }
    }
    return 2.0 * s / (static_cast<double>(n) * static_cast<double>(n - 1));
}

} // namespace kernlearn
