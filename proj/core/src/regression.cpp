#include "kernlearn/regression.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "kernlearn/errors.hpp"

namespace kernlearn {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double clampVariance(double v, double kxx) {
    if (v < -1e-10 * std::max(1.0, kxx)) {
        std::ostringstream msg;
        msg << "predict_variance: negative variance " << v << " (K(x,x) = " << kxx << ")";
        throw NumericalError(msg.str());
    }
    return std::max(v, 0.0);
}

} // namespace

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
    Dataset out;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = rows[i];
        if (r < 0 || r >= size()) {
            throw InvalidArgument("dataset subset: row index out of range");
        }
        out.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
        out.y[static_cast<Eigen::Index>(i)] = y[r];
    }
    return out;
}

void Dataset::validate() const {
    if (y.size() == 0) {
        throw InvalidArgument("dataset is empty");
    }
    if (X.rows() != y.size()) {
        throw InvalidArgument("dataset: " + std::to_string(X.rows()) + " input rows but " +
                              std::to_string(y.size()) + " outputs");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw InvalidArgument("dataset contains non-finite entries");
    }
}

Eigen::LDLT<Matrix> factorizeSpd(const Matrix &a, const char *context) {
    Eigen::LDLT<Matrix> ldlt(a);
    const Vector d = ldlt.vectorD();
    const double dmax = d.size() > 0 ? d.cwiseAbs().maxCoeff() : 0.0;
    const double dmin = d.size() > 0 ? d.minCoeff() : 0.0;
    const double floor = static_cast<double>(a.rows()) * kEps * dmax;
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || !(dmin > floor)) {
        std::ostringstream msg;
        msg << context << ": matrix is numerically singular (smallest pivot " << dmin << ", largest " << dmax
            << ")";
        throw SingularMatrixError(msg.str(), dmin);
    }
    return ldlt;
}

TrainedRegressor fit(const KernelSpec &kernel, double lambda, const Dataset &data, const FitOptions &options) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("fit: nugget must be finite and >= 0");
    }
    data.validate();
    if (const auto d = kernel.dim(); d && *d != data.dim()) {
        throw InvalidArgument("fit: data dimension " + std::to_string(data.dim()) +
                              " does not match kernel dimension " + std::to_string(*d));
    }

    TrainedRegressor model(kernel, lambda, data.X, data.y);
    const Eigen::Index n = data.size();

    const auto *spectral = kernel.as<SpectralKernel>();
    if (spectral && lambda > 0.0 && static_cast<Eigen::Index>(spectral->active().size()) < n) {
        const Matrix f = spectral->features(data.X);
        Matrix m = Matrix::Identity(f.cols(), f.cols()) * lambda;
        m.selfadjointView<Eigen::Lower>().rankUpdate(f.transpose());
        m = m.selfadjointView<Eigen::Lower>();
        auto llt = std::make_shared<Eigen::LLT<Matrix>>(m);
        if (llt->info() != Eigen::Success) {
            throw SingularMatrixError("fit: spectral feature system is not positive definite", lambda);
        }
        model.weights_ = llt->solve(f.transpose() * data.y);
        model.alpha_ = (data.y - f * model.weights_) / lambda;
        model.primal_ = std::move(llt);
        model.mode_ = TrainedRegressor::Mode::Features;
        return model;
    }

    Matrix k = gram(kernel, data.X);
    k.diagonal().array() += lambda;
    try {
        auto ldlt = std::make_shared<Eigen::LDLT<Matrix>>(factorizeSpd(k, "fit"));
        model.alpha_ = ldlt->solve(data.y);
        model.ldlt_ = std::move(ldlt);
        model.mode_ = TrainedRegressor::Mode::Dual;
    } catch (const SingularMatrixError &) {
        if (!options.allowPseudoInverse) {
            throw;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
        const Vector &values = eig.eigenvalues();
        const double cutoff = static_cast<double>(n) * kEps * values.cwiseAbs().maxCoeff();
        model.eig_inverse_ = values.unaryExpr([cutoff](double v) { return v > cutoff ? 1.0 / v : 0.0; });
        model.eig_vectors_ = eig.eigenvectors();
        model.mode_ = TrainedRegressor::Mode::Pseudo;
        model.alpha_ = model.solve(data.y);
    }
    return model;
}

Matrix TrainedRegressor::solve(const Matrix &rhs) const {
    switch (mode_) {
    case Mode::Dual:
        return ldlt_->solve(rhs);
    case Mode::Pseudo:
        return eig_vectors_ * (eig_inverse_.asDiagonal() * (eig_vectors_.transpose() * rhs));
    case Mode::Features: {
        // (F F^T + lambda I)^-1 = (I - F (F^T F + lambda I)^-1 F^T) / lambda
        const Matrix f = kernel_.as<SpectralKernel>()->features(x_);
        return (rhs - f * primal_->solve(f.transpose() * rhs)) / lambda_;
    }
    }
    return {};
}

void TrainedRegressor::checkDim(Eigen::Index cols) const {
    if (cols != x_.cols()) {
        throw InvalidArgument("predict: point dimension " + std::to_string(cols) + " does not match training dimension " +
                              std::to_string(x_.cols()));
    }
}

double TrainedRegressor::predictMeanAt(PointRef x) const {
    checkDim(x.size());
    PointSet p = x;
    return predictMean(p)[0];
}

Vector TrainedRegressor::predictMean(const PointSet &points) const {
    checkDim(points.cols());
    if (mode_ == Mode::Features) {
        return kernel_.as<SpectralKernel>()->features(points) * weights_;
    }
    return crossGram(kernel_, points, x_) * alpha_;
}

double TrainedRegressor::predictVarianceAt(PointRef x) const {
    checkDim(x.size());
    PointSet p = x;
    return predictVariance(p)[0];
}

Vector TrainedRegressor::predictVariance(const PointSet &points) const {
    checkDim(points.cols());
    Vector out(points.rows());
    if (mode_ == Mode::Features) {
        const Matrix f = kernel_.as<SpectralKernel>()->features(points);
        const Matrix v = primal_->solve(f.transpose());
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            const double kxx = f.row(i).squaredNorm();
            out[i] = clampVariance(lambda_ * f.row(i).dot(v.col(i)), kxx);
        }
        return out;
    }
    const Matrix kx = crossGram(kernel_, points, x_);
    const Matrix v = solve(kx.transpose());
    const Vector kdiag = kernelDiagonal(kernel_, points);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        out[i] = clampVariance(kdiag[i] - kx.row(i).dot(v.col(i)), kdiag[i]);
    }
    return out;
}

double rkhsNormSq(const KernelSpec &kernel, const Dataset &data) {
    data.validate();
    const Matrix k = gram(kernel, data.X);
    const auto ldlt = factorizeSpd(k, "rkhs_norm_sq");
    return std::max(0.0, data.y.dot(ldlt.solve(data.y)));
}

} // namespace kernlearn
