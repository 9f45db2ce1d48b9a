#include "kernlearn/gpc.hpp"

#include <cmath>

#include "kernlearn/errors.hpp"

namespace kernlearn {

std::string toString(GpcProvenance p) {
    return p == GpcProvenance::Quadrature ? "quadrature" : "bpdn";
}

GpcProvenance provenanceFromString(const std::string &s) {
    if (s == "quadrature") {
        return GpcProvenance::Quadrature;
    }
    if (s == "bpdn") {
        return GpcProvenance::Bpdn;
    }
    throw InvalidArgument("unknown gPC provenance '" + s + "'");
}

GpcSurrogate::GpcSurrogate(std::shared_ptr<const TensorBasis> basis, Vector coeffs, GpcProvenance provenance)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)), provenance_(provenance) {
    if (!basis_) {
        throw InvalidArgument("gpc surrogate: basis is null");
    }
    if (static_cast<std::size_t>(coeffs_.size()) != basis_->size()) {
        throw InvalidArgument("gpc surrogate: " + std::to_string(coeffs_.size()) + " coefficients for a basis of size " +
                              std::to_string(basis_->size()));
    }
    if (!coeffs_.allFinite()) {
        throw InvalidArgument("gpc surrogate: coefficients must be finite");
    }
}

double GpcSurrogate::evalAt(PointRef x) const {
    if (x.size() != basis_->dim()) {
        throw InvalidArgument("gpc_eval: point dimension does not match the basis");
    }
    return basis_->evalAll(x).dot(coeffs_);
}

Vector GpcSurrogate::eval(const PointSet &points) const {
    if (points.cols() != basis_->dim()) {
        throw InvalidArgument("gpc_eval: point dimension does not match the basis");
    }
    constexpr Eigen::Index kBlock = 4096;
    Vector out(points.rows());
    for (Eigen::Index start = 0; start < points.rows(); start += kBlock) {
        const Eigen::Index len = std::min(kBlock, points.rows() - start);
        const PointSet block = points.middleRows(start, len);
        out.segment(start, len) = basis_->evalMatrix(block) * coeffs_;
    }
    return out;
}

BatchModel GpcSurrogate::model() const {
    auto self = std::make_shared<const GpcSurrogate>(*this);
    return [self](const PointSet &points) { return self->eval(points); };
}

GpcSurrogate projectQuadrature(std::shared_ptr<const TensorBasis> basis, const BatchModel &f,
                               const QuadratureRule &rule) {
    if (!basis) {
        throw InvalidArgument("project_quadrature: basis is null");
    }
    if (rule.nodes.cols() != basis->dim() || rule.perDim.size() != static_cast<std::size_t>(basis->dim())) {
        throw InvalidArgument("project_quadrature: rule dimension does not match the basis");
    }
    for (int j = 0; j < basis->dim(); ++j) {
        const auto &fam = basis->families()[static_cast<std::size_t>(j)];
        const auto &nodes = rule.perDim[static_cast<std::size_t>(j)].nodes;
        constexpr double tol = 1e-12;
        const double scale = fam.hi - fam.lo;
        if (nodes.empty() || std::abs(nodes.front() - fam.lo) > tol * scale ||
            std::abs(nodes.back() - fam.hi) > tol * scale) {
            throw InvalidArgument("project_quadrature: rule support differs from the basis measure in dimension " +
                                  std::to_string(j + 1));
        }
    }
    const Vector values = f(rule.nodes);
    if (values.size() != rule.nodes.rows()) {
        throw InvalidArgument("project_quadrature: evaluator returned the wrong number of values");
    }
    if (!values.allFinite()) {
        throw NumericalError("project_quadrature: evaluator returned non-finite values");
    }
    const Vector weighted = rule.weights.cwiseProduct(values);

    constexpr Eigen::Index kBlock = 4096;
    Vector c = Vector::Zero(static_cast<Eigen::Index>(basis->size()));
    for (Eigen::Index start = 0; start < rule.nodes.rows(); start += kBlock) {
        const Eigen::Index len = std::min(kBlock, rule.nodes.rows() - start);
        const PointSet block = rule.nodes.middleRows(start, len);
        c.noalias() += basis->evalMatrix(block).transpose() * weighted.segment(start, len);
    }
    return GpcSurrogate(std::move(basis), std::move(c), GpcProvenance::Quadrature);
}

GpcMoments gpcMoments(const GpcSurrogate &g) {
    const auto &indices = g.basis().indices();
    GpcMoments m;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const double c = g.coeffs()[static_cast<Eigen::Index>(k)];
        if (indices.totalDegree(k) == 0) {
            m.mean += c;
        } else {
            m.variance += c * c;
        }
    }
    return m;
}

Vector gpcSobolMain(const GpcSurrogate &g) {
    const auto &indices = g.basis().indices();
    const double variance = gpcMoments(g).variance;
    if (!(variance > 0.0)) {
        throw DegenerateError("gpc_sobol_main: surrogate variance is zero");
    }
    Vector s = Vector::Zero(g.basis().dim());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto support = indices.support(k);
        if (support.size() == 1) {
            const double c = g.coeffs()[static_cast<Eigen::Index>(k)];
            s[support.front()] += c * c;
        }
    }
    return s / variance;
}

} // namespace kernlearn
