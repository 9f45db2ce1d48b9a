#ifndef KERNLEARN_KERNELS_HPP
#define KERNLEARN_KERNELS_HPP

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kernlearn/polybasis.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

/// exp(-|x - y|^2 / gamma^2)
struct GaussianKernel {
    double lengthScale = 1.0;
};

/// exp(-sum_i (x_i - y_i)^2 / gamma_i^2)
struct GaussianArdKernel {
    std::vector<double> lengthScales;
};

/// (b + x^T y)^p
struct PolynomialKernel {
    double offset = 0.0;
    double exponent = 1.0;
};

enum class MaternNu { Half, ThreeHalves, FiveHalves };

/// Half-integer Matern closed forms.
struct MaternKernel {
    double lengthScale = 1.0;
    MaternNu nu = MaternNu::ThreeHalves;
};

/// (1 + r^2 / (2 alpha gamma^2))^(-alpha)
struct RationalQuadraticKernel {
    double alpha = 1.0;
    double lengthScale = 1.0;
};

/// Mercer kernel sum_k sigma_k phi_k(x) phi_k(y) over a subset of a tensor basis.
class SpectralKernel {
public:
    SpectralKernel(std::shared_ptr<const TensorBasis> basis, std::vector<std::size_t> retained,
                   std::vector<double> sigmas);

    [[nodiscard]] const TensorBasis &basis() const noexcept { return *basis_; }
    [[nodiscard]] const std::shared_ptr<const TensorBasis> &basisPtr() const noexcept { return basis_; }
    [[nodiscard]] const std::vector<std::size_t> &retained() const noexcept { return retained_; }
    [[nodiscard]] const std::vector<double> &sigmas() const noexcept { return sigmas_; }

    /// Retained indices with sigma > 0; the only ones visited during evaluation.
    [[nodiscard]] const std::vector<std::size_t> &active() const noexcept { return active_; }
    [[nodiscard]] const Vector &activeSigmas() const noexcept { return active_sigmas_; }

    /// sum_k sigma_k, the trace of the associated integral operator.
    [[nodiscard]] double trace() const;

    /// n x |active| features phi_k(X_i) sqrt(sigma_k); K(X, Y) = F(X) F(Y)^T.
    [[nodiscard]] Matrix features(const PointSet &points) const;

private:
    std::shared_ptr<const TensorBasis> basis_;
    std::vector<std::size_t> retained_;
    std::vector<double> sigmas_;
    std::vector<std::size_t> active_;
    Vector active_sigmas_;
};

class KernelSpec {
public:
    using Variant = std::variant<GaussianKernel, GaussianArdKernel, PolynomialKernel, MaternKernel,
                                 RationalQuadraticKernel, SpectralKernel>;

    static KernelSpec gaussian(double lengthScale);
    static KernelSpec gaussianArd(std::vector<double> lengthScales);
    static KernelSpec polynomial(double offset, double exponent);
    static KernelSpec matern(double lengthScale, MaternNu nu);
    static KernelSpec rationalQuadratic(double alpha, double lengthScale);
    static KernelSpec spectral(std::shared_ptr<const TensorBasis> basis, std::vector<std::size_t> retained,
                               std::vector<double> sigmas);

    [[nodiscard]] const Variant &variant() const noexcept { return v_; }

    template<typename T>
    [[nodiscard]] const T *as() const noexcept { return std::get_if<T>(&v_); }

    /// Input dimension when the variant pins one (ARD, spectral).
    [[nodiscard]] std::optional<int> dim() const;

    /// Variant tag used in JSON and reports.
    [[nodiscard]] std::string name() const;

    [[nodiscard]] double operator()(PointRef x, PointRef y) const;

private:
    explicit KernelSpec(Variant v) : v_(std::move(v)) {}

    Variant v_;
};

/// K(x, y); throws InvalidArgument on dimension mismatch.
[[nodiscard]] double kernelEval(const KernelSpec &kernel, PointRef x, PointRef y);

/// Symmetric n x n Gram matrix K(X, X).
[[nodiscard]] Matrix gram(const KernelSpec &kernel, const PointSet &points);

/// |A| x |B| cross matrix K(A, B).
[[nodiscard]] Matrix crossGram(const KernelSpec &kernel, const PointSet &a, const PointSet &b);

/// K(x_i, x_i) for every row.
[[nodiscard]] Vector kernelDiagonal(const KernelSpec &kernel, const PointSet &points);

/// Builds a spectral kernel from basis indices and non-negative eigenvalues.
[[nodiscard]] KernelSpec spectralKernel(std::shared_ptr<const TensorBasis> basis,
                                        std::vector<std::size_t> retained, std::vector<double> sigmas);

} // namespace kernlearn

#endif // KERNLEARN_KERNELS_HPP
