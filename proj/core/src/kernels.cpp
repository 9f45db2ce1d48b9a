#include "kernlearn/kernels.hpp"

#include <cmath>
#include <numeric>

#include "kernlearn/errors.hpp"

namespace kernlearn {

namespace {

template<class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template<class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void requirePositive(double v, const char *what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidArgument(std::string(what) + " must be a finite positive number");
    }
}

double squaredDistance(PointRef x, PointRef y) {
    return (x - y).squaredNorm();
}

double maternProfile(MaternNu nu, double r) {
    switch (nu) {
    case MaternNu::Half:
        return std::exp(-r);
    case MaternNu::ThreeHalves: {
        const double s = std::sqrt(3.0) * r;
        return (1.0 + s) * std::exp(-s);
    }
    case MaternNu::FiveHalves: {
        const double s = std::sqrt(5.0) * r;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    }
    return 0.0;
}

} // namespace

// ---------------------------------------------------------------------------
// SpectralKernel

SpectralKernel::SpectralKernel(std::shared_ptr<const TensorBasis> basis, std::vector<std::size_t> retained,
                               std::vector<double> sigmas)
    : basis_(std::move(basis)), retained_(std::move(retained)), sigmas_(std::move(sigmas)) {
    if (!basis_) {
        throw InvalidArgument("spectral kernel: basis is null");
    }
    if (retained_.size() != sigmas_.size()) {
        throw InvalidArgument("spectral kernel: " + std::to_string(retained_.size()) + " retained indices but " +
                              std::to_string(sigmas_.size()) + " sigmas");
    }
    std::vector<double> active;
    for (std::size_t i = 0; i < retained_.size(); ++i) {
        if (retained_[i] >= basis_->size()) {
            throw InvalidArgument("spectral kernel: retained index out of range");
        }
        if (!(sigmas_[i] >= 0.0) || !std::isfinite(sigmas_[i])) {
            throw InvalidArgument("spectral kernel: sigmas must be finite and non-negative");
        }
        if (sigmas_[i] > 0.0) {
            active_.push_back(retained_[i]);
            active.push_back(sigmas_[i]);
        }
    }
    active_sigmas_ = Eigen::Map<const Vector>(active.data(), static_cast<Eigen::Index>(active.size()));
}

double SpectralKernel::trace() const {
    return std::accumulate(sigmas_.begin(), sigmas_.end(), 0.0);
}

Matrix SpectralKernel::features(const PointSet &points) const {
    Matrix phi = basis_->evalMatrix(points, active_);
    return phi * active_sigmas_.cwiseSqrt().asDiagonal();
}

// ---------------------------------------------------------------------------
// KernelSpec

KernelSpec KernelSpec::gaussian(double lengthScale) {
    requirePositive(lengthScale, "gaussian length scale");
    return KernelSpec(GaussianKernel{lengthScale});
}

KernelSpec KernelSpec::gaussianArd(std::vector<double> lengthScales) {
    if (lengthScales.empty()) {
        throw InvalidArgument("gaussian_ard: need at least one length scale");
    }
    for (double g : lengthScales) {
        requirePositive(g, "gaussian_ard length scale");
    }
    return KernelSpec(GaussianArdKernel{std::move(lengthScales)});
}

KernelSpec KernelSpec::polynomial(double offset, double exponent) {
    if (!(offset >= 0.0)) {
        throw InvalidArgument("polynomial kernel: offset b must be >= 0");
    }
    requirePositive(exponent, "polynomial kernel exponent");
    return KernelSpec(PolynomialKernel{offset, exponent});
}

KernelSpec KernelSpec::matern(double lengthScale, MaternNu nu) {
    requirePositive(lengthScale, "matern length scale");
    return KernelSpec(MaternKernel{lengthScale, nu});
}

KernelSpec KernelSpec::rationalQuadratic(double alpha, double lengthScale) {
    requirePositive(alpha, "rational quadratic alpha");
    requirePositive(lengthScale, "rational quadratic length scale");
    return KernelSpec(RationalQuadraticKernel{alpha, lengthScale});
}

KernelSpec KernelSpec::spectral(std::shared_ptr<const TensorBasis> basis, std::vector<std::size_t> retained,
                                std::vector<double> sigmas) {
    return KernelSpec(SpectralKernel(std::move(basis), std::move(retained), std::move(sigmas)));
}

std::optional<int> KernelSpec::dim() const {
    return std::visit(Overloaded{
                          [](const GaussianArdKernel &k) -> std::optional<int> {
                              return static_cast<int>(k.lengthScales.size());
                          },
                          [](const SpectralKernel &k) -> std::optional<int> { return k.basis().dim(); },
                          [](const auto &) -> std::optional<int> { return std::nullopt; },
                      },
                      v_);
}

std::string KernelSpec::name() const {
    return std::visit(Overloaded{
                          [](const GaussianKernel &) { return std::string("gaussian"); },
                          [](const GaussianArdKernel &) { return std::string("gaussian_ard"); },
                          [](const PolynomialKernel &) { return std::string("polynomial"); },
                          [](const MaternKernel &) { return std::string("matern"); },
                          [](const RationalQuadraticKernel &) { return std::string("rational_quadratic"); },
                          [](const SpectralKernel &) { return std::string("spectral"); },
                      },
                      v_);
}

double KernelSpec::operator()(PointRef x, PointRef y) const {
    if (x.size() != y.size()) {
        throw InvalidArgument("kernel_eval: points have different dimensions");
    }
    if (const auto d = dim(); d && *d != x.size()) {
        throw InvalidArgument("kernel_eval: point dimension " + std::to_string(x.size()) +
                              " does not match kernel dimension " + std::to_string(*d));
    }
    return std::visit(
        Overloaded{
            [&](const GaussianKernel &k) {
                return std::exp(-squaredDistance(x, y) / (k.lengthScale * k.lengthScale));
            },
            [&](const GaussianArdKernel &k) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const double t = (x[i] - y[i]) / k.lengthScales[static_cast<std::size_t>(i)];
                    s += t * t;
                }
                return std::exp(-s);
            },
            [&](const PolynomialKernel &k) {
                const double base = k.offset + x.dot(y);
                return std::pow(base, k.exponent);
            },
            [&](const MaternKernel &k) { return maternProfile(k.nu, std::sqrt(squaredDistance(x, y)) / k.lengthScale); },
            [&](const RationalQuadraticKernel &k) {
                return std::pow(1.0 + squaredDistance(x, y) / (2.0 * k.alpha * k.lengthScale * k.lengthScale),
                                -k.alpha);
            },
            [&](const SpectralKernel &k) {
                double s = 0.0;
                const auto &basis = k.basis();
                const auto &active = k.active();
                for (std::size_t i = 0; i < active.size(); ++i) {
                    s += k.activeSigmas()[static_cast<Eigen::Index>(i)] * basis.eval(active[i], x) *
                         basis.eval(active[i], y);
                }
                return s;
            },
        },
        v_);
}

double kernelEval(const KernelSpec &kernel, PointRef x, PointRef y) {
    return kernel(x, y);
}

Matrix crossGram(const KernelSpec &kernel, const PointSet &a, const PointSet &b) {
    if (a.cols() != b.cols()) {
        throw InvalidArgument("cross gram: point sets have different dimensions");
    }
    if (const auto *spectral = kernel.as<SpectralKernel>()) {
        if (a.cols() != spectral->basis().dim()) {
            throw InvalidArgument("cross gram: point dimension does not match spectral basis");
        }
        if (spectral->active().empty()) {
            return Matrix::Zero(a.rows(), b.rows());
        }
        const Matrix fa = spectral->features(a);
        const Matrix fb = spectral->features(b);
        return fa * fb.transpose();
    }
    if (const auto d = kernel.dim(); d && *d != a.cols()) {
        throw InvalidArgument("cross gram: point dimension does not match kernel dimension");
    }
    Matrix out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            out(i, j) = kernel(a.row(i), b.row(j));
        }
    }
    return out;
}

Matrix gram(const KernelSpec &kernel, const PointSet &points) {
    if (const auto *spectral = kernel.as<SpectralKernel>()) {
        if (points.cols() != spectral->basis().dim()) {
            throw InvalidArgument("gram: point dimension does not match spectral basis");
        }
        if (spectral->active().empty()) {
            return Matrix::Zero(points.rows(), points.rows());
        }
        const Matrix f = spectral->features(points);
        Matrix g = Matrix::Zero(points.rows(), points.rows());
        g.selfadjointView<Eigen::Lower>().rankUpdate(f);
        return g.selfadjointView<Eigen::Lower>();
    }
    if (const auto d = kernel.dim(); d && *d != points.cols()) {
        throw InvalidArgument("gram: point dimension does not match kernel dimension");
    }
    const Eigen::Index n = points.rows();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = kernel(points.row(i), points.row(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = kernel(points.row(i), points.row(j));
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

Vector kernelDiagonal(const KernelSpec &kernel, const PointSet &points) {
    if (const auto *spectral = kernel.as<SpectralKernel>()) {
        if (spectral->active().empty()) {
            return Vector::Zero(points.rows());
        }
        return spectral->features(points).rowwise().squaredNorm();
    }
    Vector out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        out[i] = kernel(points.row(i), points.row(i));
    }
    return out;
}

KernelSpec spectralKernel(std::shared_ptr<const TensorBasis> basis, std::vector<std::size_t> retained,
                          std::vector<double> sigmas) {
    return KernelSpec::spectral(std::move(basis), std::move(retained), std::move(sigmas));
}

} // namespace kernlearn
