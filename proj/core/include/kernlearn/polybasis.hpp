#ifndef KERNLEARN_POLYBASIS_HPP
#define KERNLEARN_POLYBASIS_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "kernlearn/types.hpp"

namespace kernlearn {

enum class FamilyKind { LegendreUniform, JacobiBeta };

/// A univariate polynomial family orthonormal with respect to a probability
/// measure on [lo, hi]: the uniform law (Legendre) or the Beta law of the first
/// kind with density proportional to (x - lo)^(a-1) (hi - x)^(b-1) (Jacobi).
struct UnivariateFamily {
    FamilyKind kind = FamilyKind::LegendreUniform;
    double lo = -1.0;
    double hi = 1.0;
    double a = 1.0; ///< Beta shape on the lower end; only meaningful for JacobiBeta
    double b = 1.0; ///< Beta shape on the upper end; only meaningful for JacobiBeta

    static UnivariateFamily legendre(double lo = -1.0, double hi = 1.0);
    static UnivariateFamily jacobi(double a, double b, double lo = 0.0, double hi = 1.0);

    /// Throws InvalidArgument when lo >= hi or a Beta shape is not positive.
    void validate() const;

    /// Classical Jacobi exponents on [-1, 1]: weight (1 - t)^alpha (1 + t)^beta.
    [[nodiscard]] double jacobiAlpha() const { return kind == FamilyKind::JacobiBeta ? b - 1.0 : 0.0; }
    [[nodiscard]] double jacobiBeta() const { return kind == FamilyKind::JacobiBeta ? a - 1.0 : 0.0; }

    [[nodiscard]] double toReference(double x) const { return (2.0 * x - (lo + hi)) / (hi - lo); }
    [[nodiscard]] double fromReference(double t) const { return lo + 0.5 * (t + 1.0) * (hi - lo); }
    [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }

    bool operator==(const UnivariateFamily &) const = default;
};

/// Monic three-term recurrence on the reference interval [-1, 1] for the
/// probability-normalized weight: pi_{n+1} = (t - alpha_n) pi_n - beta_n pi_{n-1}.
/// beta[0] is the total mass (1).
struct Recurrence {
    std::vector<double> alpha;
    std::vector<double> beta;
};

[[nodiscard]] Recurrence recurrenceCoefficients(const UnivariateFamily &family, int count);

/// Graded multi-index set {i in N^d : |i|_1 <= p}. Ordered by total degree,
/// then descending lexicographic inside each degree, so that for d = 3 the
/// first entries are (0,0,0), (1,0,0), (0,1,0), (0,0,1), (2,0,0), (1,1,0), ...
class MultiIndexSet {
public:
    MultiIndexSet() = default;

    [[nodiscard]] int dim() const noexcept { return d_; }
    [[nodiscard]] int order() const noexcept { return p_; }
    [[nodiscard]] std::size_t size() const noexcept { return d_ == 0 ? 0 : flat_.size() / static_cast<std::size_t>(d_); }

    [[nodiscard]] std::span<const int> operator[](std::size_t k) const;
    [[nodiscard]] int totalDegree(std::size_t k) const;
    [[nodiscard]] std::optional<std::size_t> find(std::span<const int> index) const;

    /// Dimensions on which index k has a nonzero component.
    [[nodiscard]] std::vector<int> support(std::size_t k) const;

    friend MultiIndexSet multiIndices(int d, int p);
    friend MultiIndexSet customIndices(int d, const std::vector<std::vector<int>> &indices);

private:
    int d_ = 0;
    int p_ = 0;
    std::vector<int> flat_;
};

/// Exact binomial(n, k); throws SizeGuardError on 64-bit overflow.
[[nodiscard]] std::size_t binomial(std::size_t n, std::size_t k);

/// Total-order set with cardinality binomial(p + d, d).
[[nodiscard]] MultiIndexSet multiIndices(int d, int p);

/// A user-provided index list (used when deserializing spectral kernels that
/// keep only a subset). Indices are stored in the given order.
[[nodiscard]] MultiIndexSet customIndices(int d, const std::vector<std::vector<int>> &indices);

/// Degree-k orthonormal polynomial at x, by the normalized recurrence on the
/// affinely mapped variable. Points outside the support are extrapolated.
[[nodiscard]] double evalUnivariate(const UnivariateFamily &family, int k, double x);

/// Values of degrees 0..out.size()-1 at x.
void evalUnivariateAll(const UnivariateFamily &family, double x, std::span<double> out);

class TensorBasis {
public:
    TensorBasis() = default;
    TensorBasis(std::vector<UnivariateFamily> families, MultiIndexSet indices);

    /// Same family in every dimension, total order p.
    static TensorBasis totalOrder(const UnivariateFamily &family, int d, int p);
    static TensorBasis totalOrder(std::vector<UnivariateFamily> families, int p);

    [[nodiscard]] std::size_t size() const noexcept { return indices_.size(); }
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(families_.size()); }
    [[nodiscard]] int maxDegree() const noexcept { return max_degree_; }
    [[nodiscard]] const std::vector<UnivariateFamily> &families() const noexcept { return families_; }
    [[nodiscard]] const MultiIndexSet &indices() const noexcept { return indices_; }

    /// phi_k(x) = prod_j phi_{i_j}^{(j)}(x_j).
    [[nodiscard]] double eval(std::size_t k, PointRef x) const;

    /// All basis functions at x (length size()).
    [[nodiscard]] Vector evalAll(PointRef x) const;

    /// n x R matrix of phi_k(X_i).
    [[nodiscard]] Matrix evalMatrix(const PointSet &points) const;

    /// n x |subset| matrix restricted to the listed basis indices.
    [[nodiscard]] Matrix evalMatrix(const PointSet &points, std::span<const std::size_t> subset) const;

    bool operator==(const TensorBasis &other) const;

private:
    struct Factor {
        int dim;
        int degree;
    };

    void build();
    void univariateTable(PointRef x, std::vector<double> &table) const;

    std::vector<UnivariateFamily> families_;
    MultiIndexSet indices_;
    int max_degree_ = 0;
    std::vector<Recurrence> recurrences_;
    std::vector<std::vector<Factor>> factors_;
};

/// Gauss-Lobatto rule for one family: q nodes including both support endpoints,
/// positive weights summing to one, exact for degree <= 2q - 3.
struct UnivariateRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }
    [[nodiscard]] int exactness() const noexcept { return 2 * static_cast<int>(nodes.size()) - 3; }
};

[[nodiscard]] UnivariateRule lobattoRule(const UnivariateFamily &family, int q);

inline constexpr std::size_t kDefaultNodeGuard = 10'000'000;

/// Fully tensorized rule. Node ordering is lexicographic with the last
/// dimension varying fastest.
struct QuadratureRule {
    std::vector<UnivariateRule> perDim;
    PointSet nodes;
    Vector weights;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(weights.size()); }
    /// Smallest per-dimension exactness degree.
    [[nodiscard]] int exactness() const;
};

/// Throws SizeGuardError when the tensor node count exceeds `nodeGuard`; the
/// message carries the requested count.
[[nodiscard]] QuadratureRule tensorRule(const std::vector<UnivariateFamily> &families,
                                        std::span<const int> qPerDim,
                                        std::size_t nodeGuard = kDefaultNodeGuard);
[[nodiscard]] QuadratureRule tensorRule(const TensorBasis &basis, std::span<const int> qPerDim,
                                        std::size_t nodeGuard = kDefaultNodeGuard);
[[nodiscard]] QuadratureRule tensorRule(const TensorBasis &basis, int qEachDim,
                                        std::size_t nodeGuard = kDefaultNodeGuard);

/// Node count a tensor rule would need; saturates at SIZE_MAX instead of overflowing.
[[nodiscard]] std::size_t tensorNodeCount(std::span<const int> qPerDim);

/// Smallest Lobatto node count whose exactness covers polynomial degree `degree`.
[[nodiscard]] int lobattoNodesForDegree(int degree);

/// max_{j,k} |sum_l w_l phi_j(x_l) phi_k(x_l) - delta_jk|.
[[nodiscard]] double orthonormalityDefect(const TensorBasis &basis, const QuadratureRule &rule);

} // namespace kernlearn

#endif // KERNLEARN_POLYBASIS_HPP
