#include "kernlearn/polybasis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "kernlearn/errors.hpp"

namespace kernlearn {

UnivariateFamily UnivariateFamily::legendre(double lo, double hi) {
    UnivariateFamily f{FamilyKind::LegendreUniform, lo, hi, 1.0, 1.0};
    f.validate();
    return f;
}

UnivariateFamily UnivariateFamily::jacobi(double a, double b, double lo, double hi) {
    UnivariateFamily f{FamilyKind::JacobiBeta, lo, hi, a, b};
    f.validate();
    return f;
}

void UnivariateFamily::validate() const {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw InvalidArgument("univariate family: support requires finite lo < hi");
    }
    if (kind == FamilyKind::JacobiBeta && !(a > 0.0 && b > 0.0)) {
        throw InvalidArgument("univariate family: Beta shape parameters must be positive");
    }
}

Recurrence recurrenceCoefficients(const UnivariateFamily &family, int count) {
    Recurrence rec;
    if (count <= 0) {
        return rec;
    }
    rec.alpha.resize(static_cast<std::size_t>(count));
    rec.beta.resize(static_cast<std::size_t>(count));
    const double al = family.jacobiAlpha();
    const double be = family.jacobiBeta();
    const double ab = al + be;

    rec.beta[0] = 1.0;
    rec.alpha[0] = (be - al) / (ab + 2.0);
    for (int n = 1; n < count; ++n) {
        const double nn = static_cast<double>(n);
        const double s = 2.0 * nn + ab;
        rec.alpha[static_cast<std::size_t>(n)] = (be * be - al * al) / (s * (s + 2.0));
        if (n == 1) {
            rec.beta[1] = 4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
        } else {
            rec.beta[static_cast<std::size_t>(n)] =
                4.0 * nn * (nn + al) * (nn + be) * (nn + ab) / (s * s * (s + 1.0) * (s - 1.0));
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Multi-indices

std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    std::size_t result = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i is always an integer at this point.
        const std::size_t num = n - k + i;
        const std::size_t g = std::gcd(result, i);
        const std::size_t r = result / g;
        const std::size_t den = i / g;
        if (num / den > std::numeric_limits<std::size_t>::max() / r) {
            throw SizeGuardError("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                                 ") overflows 64-bit size");
        }
        result = r * (num / den);
    }
    return result;
}

namespace {

void appendCompositions(int remaining, int slots, std::vector<int> &current, std::vector<int> &out) {
    if (slots == 1) {
        current.push_back(remaining);
        out.insert(out.end(), current.begin(), current.end());
        current.pop_back();
        return;
    }
    for (int first = remaining; first >= 0; --first) {
        current.push_back(first);
        appendCompositions(remaining - first, slots - 1, current, out);
        current.pop_back();
    }
}

} // namespace

MultiIndexSet multiIndices(int d, int p) {
    if (d < 1 || p < 0) {
        throw InvalidArgument("multi_indices: need d >= 1 and p >= 0");
    }
    const std::size_t count = binomial(static_cast<std::size_t>(p + d), static_cast<std::size_t>(d));
    if (count > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(d)) {
        throw SizeGuardError("multi_indices: index storage overflows");
    }
    MultiIndexSet set;
    set.d_ = d;
    set.p_ = p;
    set.flat_.reserve(count * static_cast<std::size_t>(d));
    std::vector<int> current;
    current.reserve(static_cast<std::size_t>(d));
    for (int degree = 0; degree <= p; ++degree) {
        appendCompositions(degree, d, current, set.flat_);
    }
    return set;
}

MultiIndexSet customIndices(int d, const std::vector<std::vector<int>> &indices) {
    if (d < 1) {
        throw InvalidArgument("custom multi-index set: d must be >= 1");
    }
    MultiIndexSet set;
    set.d_ = d;
    set.p_ = 0;
    for (const auto &index : indices) {
        if (static_cast<int>(index.size()) != d) {
            throw InvalidArgument("custom multi-index set: tuple length differs from d");
        }
        int degree = 0;
        for (int v : index) {
            if (v < 0) {
                throw InvalidArgument("custom multi-index set: negative component");
            }
            degree += v;
        }
        set.p_ = std::max(set.p_, degree);
        set.flat_.insert(set.flat_.end(), index.begin(), index.end());
    }
    return set;
}

std::span<const int> MultiIndexSet::operator[](std::size_t k) const {
    if (k >= size()) {
        throw InvalidArgument("multi-index " + std::to_string(k) + " out of range (size " +
                              std::to_string(size()) + ")");
    }
    return {flat_.data() + k * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_)};
}

int MultiIndexSet::totalDegree(std::size_t k) const {
    int degree = 0;
    for (int v : (*this)[k]) {
        degree += v;
    }
    return degree;
}

std::optional<std::size_t> MultiIndexSet::find(std::span<const int> index) const {
    if (static_cast<int>(index.size()) != d_) {
        return std::nullopt;
    }
    for (std::size_t k = 0; k < size(); ++k) {
        const auto candidate = (*this)[k];
        if (std::equal(candidate.begin(), candidate.end(), index.begin())) {
            return k;
        }
    }
    return std::nullopt;
}

std::vector<int> MultiIndexSet::support(std::size_t k) const {
    std::vector<int> dims;
    const auto index = (*this)[k];
    for (int j = 0; j < d_; ++j) {
        if (index[static_cast<std::size_t>(j)] != 0) {
            dims.push_back(j);
        }
    }
    return dims;
}

// ---------------------------------------------------------------------------
// Univariate evaluation

namespace {

void evalWithRecurrence(const Recurrence &rec, double t, std::span<double> out) {
    if (out.empty()) {
        return;
    }
    out[0] = 1.0;
    if (out.size() == 1) {
        return;
    }
    out[1] = (t - rec.alpha[0]) / std::sqrt(rec.beta[1]);
    for (std::size_t n = 1; n + 1 < out.size(); ++n) {
        out[n + 1] = ((t - rec.alpha[n]) * out[n] - std::sqrt(rec.beta[n]) * out[n - 1]) /
                     std::sqrt(rec.beta[n + 1]);
    }
}

} // namespace

void evalUnivariateAll(const UnivariateFamily &family, double x, std::span<double> out) {
    const Recurrence rec = recurrenceCoefficients(family, static_cast<int>(out.size()) + 1);
    evalWithRecurrence(rec, family.toReference(x), out);
}

double evalUnivariate(const UnivariateFamily &family, int k, double x) {
    if (k < 0) {
        throw InvalidArgument("eval_univariate: negative degree");
    }
    std::vector<double> values(static_cast<std::size_t>(k) + 1);
    evalUnivariateAll(family, x, values);
    return values.back();
}

// ---------------------------------------------------------------------------
// Tensor basis

TensorBasis::TensorBasis(std::vector<UnivariateFamily> families, MultiIndexSet indices)
    : families_(std::move(families)), indices_(std::move(indices)) {
    if (families_.empty() || static_cast<int>(families_.size()) != indices_.dim()) {
        throw InvalidArgument("tensor basis: number of families must equal the multi-index dimension");
    }
    for (const auto &f : families_) {
        f.validate();
    }
    build();
}

TensorBasis TensorBasis::totalOrder(const UnivariateFamily &family, int d, int p) {
    return TensorBasis(std::vector<UnivariateFamily>(static_cast<std::size_t>(d), family), multiIndices(d, p));
}

TensorBasis TensorBasis::totalOrder(std::vector<UnivariateFamily> families, int p) {
    const int d = static_cast<int>(families.size());
    return TensorBasis(std::move(families), multiIndices(d, p));
}

void TensorBasis::build() {
    max_degree_ = 0;
    factors_.assign(indices_.size(), {});
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        const auto index = indices_[k];
        for (int j = 0; j < dim(); ++j) {
            const int deg = index[static_cast<std::size_t>(j)];
            max_degree_ = std::max(max_degree_, deg);
            if (deg != 0) {
                factors_[k].push_back({j, deg});
            }
        }
    }
    recurrences_.clear();
    for (const auto &f : families_) {
        recurrences_.push_back(recurrenceCoefficients(f, max_degree_ + 2));
    }
}

void TensorBasis::univariateTable(PointRef x, std::vector<double> &table) const {
    const auto stride = static_cast<std::size_t>(max_degree_ + 1);
    table.resize(stride * families_.size());
    for (std::size_t j = 0; j < families_.size(); ++j) {
        const double t = families_[j].toReference(x[static_cast<Eigen::Index>(j)]);
        evalWithRecurrence(recurrences_[j], t, std::span<double>(table.data() + j * stride, stride));
    }
}

double TensorBasis::eval(std::size_t k, PointRef x) const {
    if (k >= size()) {
        throw InvalidArgument("eval_basis: index " + std::to_string(k) + " out of range (R = " +
                              std::to_string(size()) + ")");
    }
    if (x.size() != dim()) {
        throw InvalidArgument("eval_basis: point dimension mismatch");
    }
    double value = 1.0;
    std::vector<double> values;
    for (const auto &factor : factors_[k]) {
        values.resize(static_cast<std::size_t>(factor.degree) + 1);
        const double t = families_[static_cast<std::size_t>(factor.dim)].toReference(x[factor.dim]);
        evalWithRecurrence(recurrences_[static_cast<std::size_t>(factor.dim)], t, values);
        value *= values.back();
    }
    return value;
}

Vector TensorBasis::evalAll(PointRef x) const {
    if (x.size() != dim()) {
        throw InvalidArgument("eval_basis: point dimension mismatch");
    }
    std::vector<double> table;
    univariateTable(x, table);
    const auto stride = static_cast<std::size_t>(max_degree_ + 1);
    Vector out(static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) {
        double value = 1.0;
        for (const auto &factor : factors_[k]) {
            value *= table[static_cast<std::size_t>(factor.dim) * stride + static_cast<std::size_t>(factor.degree)];
        }
        out[static_cast<Eigen::Index>(k)] = value;
    }
    return out;
}

Matrix TensorBasis::evalMatrix(const PointSet &points) const {
    std::vector<std::size_t> all(size());
    for (std::size_t k = 0; k < all.size(); ++k) {
        all[k] = k;
    }
    return evalMatrix(points, all);
}

Matrix TensorBasis::evalMatrix(const PointSet &points, std::span<const std::size_t> subset) const {
    if (points.cols() != dim()) {
        throw InvalidArgument("basis evaluation: points have " + std::to_string(points.cols()) +
                              " columns, basis dimension is " + std::to_string(dim()));
    }
    for (std::size_t k : subset) {
        if (k >= size()) {
            throw InvalidArgument("basis evaluation: index out of range");
        }
    }
    const auto stride = static_cast<std::size_t>(max_degree_ + 1);
    Matrix out(points.rows(), static_cast<Eigen::Index>(subset.size()));
    std::vector<double> table;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        univariateTable(points.row(i), table);
        for (std::size_t c = 0; c < subset.size(); ++c) {
            double value = 1.0;
            for (const auto &factor : factors_[subset[c]]) {
                value *= table[static_cast<std::size_t>(factor.dim) * stride + static_cast<std::size_t>(factor.degree)];
            }
            out(i, static_cast<Eigen::Index>(c)) = value;
        }
    }
    return out;
}

bool TensorBasis::operator==(const TensorBasis &other) const {
    if (families_ != other.families_ || indices_.size() != other.indices_.size()) {
        return false;
    }
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        const auto lhs = indices_[k];
        const auto rhs = other.indices_[k];
        if (!std::equal(lhs.begin(), lhs.end(), rhs.begin())) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Quadrature

UnivariateRule lobattoRule(const UnivariateFamily &family, int q) {
    if (q < 2) {
        throw InvalidArgument("lobatto_rule: need q >= 2 nodes, got " + std::to_string(q));
    }
    family.validate();
    const Recurrence rec = recurrenceCoefficients(family, q);

    // Monic pi_{q-1} and pi_{q-2} at both endpoints of [-1, 1].
    auto monicPair = [&](double t) {
        double prev = 0.0;
        double cur = 1.0;
        for (int n = 0; n < q - 1; ++n) {
            const double next = (t - rec.alpha[static_cast<std::size_t>(n)]) * cur -
                                (n > 0 ? rec.beta[static_cast<std::size_t>(n)] * prev : 0.0);
            prev = cur;
            cur = next;
        }
        return std::pair{cur, prev};
    };
    const auto [pm_lo, pm2_lo] = monicPair(-1.0);
    const auto [pm_hi, pm2_hi] = monicPair(1.0);

    // Choose the last recurrence pair so that pi_q vanishes at -1 and +1.
    const double det = pm_lo * pm2_hi - pm2_lo * pm_hi;
    const double alpha_last = (-pm_lo * pm2_hi - pm2_lo * pm_hi) / det;
    const double beta_last = (pm_lo * pm_hi + pm_lo * pm_hi) / det;

    Eigen::VectorXd diag(q);
    Eigen::VectorXd offdiag(q - 1);
    for (int n = 0; n < q - 1; ++n) {
        diag[n] = rec.alpha[static_cast<std::size_t>(n)];
    }
    diag[q - 1] = alpha_last;
    for (int n = 1; n < q - 1; ++n) {
        offdiag[n - 1] = std::sqrt(rec.beta[static_cast<std::size_t>(n)]);
    }
    offdiag[q - 2] = std::sqrt(beta_last);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, offdiag, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("lobatto_rule: tridiagonal eigen-decomposition failed");
    }

    UnivariateRule rule;
    rule.nodes.resize(static_cast<std::size_t>(q));
    rule.weights.resize(static_cast<std::size_t>(q));
    double total = 0.0;
    for (int l = 0; l < q; ++l) {
        const double v0 = solver.eigenvectors()(0, l);
        rule.weights[static_cast<std::size_t>(l)] = v0 * v0;
        total += v0 * v0;
    }
    for (int l = 0; l < q; ++l) {
        double t = solver.eigenvalues()[l];
        if (l == 0) {
            t = -1.0;
        } else if (l == q - 1) {
            t = 1.0;
        }
        rule.nodes[static_cast<std::size_t>(l)] = family.fromReference(t);
        rule.weights[static_cast<std::size_t>(l)] /= total;
    }
    return rule;
}

int QuadratureRule::exactness() const {
    int ex = std::numeric_limits<int>::max();
    for (const auto &r : perDim) {
        ex = std::min(ex, r.exactness());
    }
    return perDim.empty() ? 0 : ex;
}

std::size_t tensorNodeCount(std::span<const int> qPerDim) {
    std::size_t count = 1;
    for (int q : qPerDim) {
        const auto qq = static_cast<std::size_t>(std::max(q, 0));
        if (qq != 0 && count > std::numeric_limits<std::size_t>::max() / qq) {
            return std::numeric_limits<std::size_t>::max();
        }
        count *= qq;
    }
    return count;
}

int lobattoNodesForDegree(int degree) {
    // 2q - 3 >= degree
    return std::max(2, (degree + 4) / 2);
}

QuadratureRule tensorRule(const std::vector<UnivariateFamily> &families, std::span<const int> qPerDim,
                          std::size_t nodeGuard) {
    if (families.size() != qPerDim.size()) {
        throw InvalidArgument("tensor_rule: one node count per dimension required");
    }
    for (int q : qPerDim) {
        if (q < 2) {
            throw InvalidArgument("tensor_rule: each per-dimension node count must be >= 2");
        }
    }
    const std::size_t total = tensorNodeCount(qPerDim);
    if (total > nodeGuard) {
        std::string counts;
        for (std::size_t j = 0; j < qPerDim.size(); ++j) {
            counts += (j ? "x" : "") + std::to_string(qPerDim[j]);
        }
        throw SizeGuardError("tensor_rule: " + counts + " = " +
                             (total == std::numeric_limits<std::size_t>::max() ? std::string("overflow")
                                                                               : std::to_string(total)) +
                             " nodes exceeds the node guard of " + std::to_string(nodeGuard));
    }

    QuadratureRule rule;
    for (std::size_t j = 0; j < families.size(); ++j) {
        rule.perDim.push_back(lobattoRule(families[j], qPerDim[j]));
    }
    const auto d = static_cast<Eigen::Index>(families.size());
    rule.nodes.resize(static_cast<Eigen::Index>(total), d);
    rule.weights.resize(static_cast<Eigen::Index>(total));
    std::vector<int> digit(families.size(), 0);
    for (std::size_t n = 0; n < total; ++n) {
        double w = 1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto &r = rule.perDim[static_cast<std::size_t>(j)];
            const auto l = static_cast<std::size_t>(digit[static_cast<std::size_t>(j)]);
            rule.nodes(static_cast<Eigen::Index>(n), j) = r.nodes[l];
            w *= r.weights[l];
        }
        rule.weights[static_cast<Eigen::Index>(n)] = w;
        for (auto j = static_cast<std::ptrdiff_t>(families.size()) - 1; j >= 0; --j) {
            auto &dg = digit[static_cast<std::size_t>(j)];
            if (++dg < qPerDim[static_cast<std::size_t>(j)]) {
                break;
            }
            dg = 0;
        }
    }
    return rule;
}

QuadratureRule tensorRule(const TensorBasis &basis, std::span<const int> qPerDim, std::size_t nodeGuard) {
    return tensorRule(basis.families(), qPerDim, nodeGuard);
}

QuadratureRule tensorRule(const TensorBasis &basis, int qEachDim, std::size_t nodeGuard) {
    const std::vector<int> q(static_cast<std::size_t>(basis.dim()), qEachDim);
    return tensorRule(basis.families(), q, nodeGuard);
}

double orthonormalityDefect(const TensorBasis &basis, const QuadratureRule &rule) {
    const Matrix phi = basis.evalMatrix(rule.nodes);
    const Matrix weighted = rule.weights.asDiagonal() * phi;
    Matrix gram = phi.transpose() * weighted;
    gram -= Matrix::Identity(gram.rows(), gram.cols());
    return gram.cwiseAbs().maxCoeff();
}

} // namespace kernlearn
