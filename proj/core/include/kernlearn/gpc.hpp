#ifndef KERNLEARN_GPC_HPP
#define KERNLEARN_GPC_HPP

#include <memory>
#include <string>

#include "kernlearn/polybasis.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

enum class GpcProvenance { Quadrature, Bpdn };

[[nodiscard]] std::string toString(GpcProvenance p);
[[nodiscard]] GpcProvenance provenanceFromString(const std::string &s);

/// Truncated expansion sum_k c_k phi_k(x).
class GpcSurrogate {
public:
    GpcSurrogate(std::shared_ptr<const TensorBasis> basis, Vector coeffs, GpcProvenance provenance);

    [[nodiscard]] const TensorBasis &basis() const noexcept { return *basis_; }
    [[nodiscard]] const std::shared_ptr<const TensorBasis> &basisPtr() const noexcept { return basis_; }
    [[nodiscard]] const Vector &coeffs() const noexcept { return coeffs_; }
    [[nodiscard]] GpcProvenance provenance() const noexcept { return provenance_; }

    [[nodiscard]] double evalAt(PointRef x) const;
    [[nodiscard]] Vector eval(const PointSet &points) const;

    /// The surrogate as a BatchModel; keeps the surrogate's data alive.
    [[nodiscard]] BatchModel model() const;

private:
    std::shared_ptr<const TensorBasis> basis_;
    Vector coeffs_;
    GpcProvenance provenance_;
};

/// F_k = sum_l w_l f(x_l) phi_k(x_l). `f` is called once on the full node set.
[[nodiscard]] GpcSurrogate projectQuadrature(std::shared_ptr<const TensorBasis> basis, const BatchModel &f,
                                             const QuadratureRule &rule);

struct GpcMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean is the coefficient of the zero multi-index; variance the sum of the
/// other squared coefficients.
[[nodiscard]] GpcMoments gpcMoments(const GpcSurrogate &g);

/// First-order Sobol' indices: for each dimension, the variance carried by
/// multi-indices supported on that dimension alone. Throws DegenerateError on
/// zero variance.
[[nodiscard]] Vector gpcSobolMain(const GpcSurrogate &g);

} // namespace kernlearn

#endif // KERNLEARN_GPC_HPP
