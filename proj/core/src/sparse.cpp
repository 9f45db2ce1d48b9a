#include "kernlearn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>

namespace kernlearn {

namespace {

constexpr double kGamma = 1e-4;
constexpr double kStepMin = 1e-16;
constexpr double kStepMax = 1e5;
constexpr int kNonmonotoneWindow = 10;
constexpr int kMaxLineSearch = 30;
constexpr Eigen::Index kHomotopySizeLimit = 1'000'000;

struct Problem {
    const Matrix &a;
    const Vector &b;
    double eta;
    double feasTol; // |r| <= feasTol counts as feasible
};

/// max over y of (b^T y - eta |y|) / max(1, |A^T y|_inf): a valid lower bound on the BPDN optimum.
double dualBound(const Problem &p, const Vector &y) {
    const double scale = std::max(1.0, (p.a.transpose() * y).cwiseAbs().maxCoeff());
    return (p.b.dot(y) - p.eta * y.norm()) / scale;
}

struct Polished {
    Vector x;
    double residual;
    double l1;
    double bound;
};

/// Exact BPDN solution restricted to (a subset of) the support and signs of `x`.
/// Indices whose sign flips are pruned and the restricted problem is re-solved.
std::optional<Polished> polish(const Problem &p, const Vector &x) {
    const double xmax = x.cwiseAbs().maxCoeff();
    if (!(xmax > 0.0)) {
        return std::nullopt;
    }
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (std::abs(x[j]) > 1e-14 * xmax) {
            support.push_back(j);
        }
    }
    if (static_cast<Eigen::Index>(support.size()) > p.a.rows()) {
        // Not a vertex yet; keep the largest entries.
        std::sort(support.begin(), support.end(),
                  [&](Eigen::Index i, Eigen::Index j) { return std::abs(x[i]) > std::abs(x[j]); });
        support.resize(static_cast<std::size_t>(p.a.rows()));
        std::sort(support.begin(), support.end());
    }
    while (!support.empty()) {
        const auto m = static_cast<Eigen::Index>(support.size());
        Matrix as(p.a.rows(), m);
        Vector s(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            as.col(k) = p.a.col(support[static_cast<std::size_t>(k)]);
            s[k] = x[support[static_cast<std::size_t>(k)]] > 0.0 ? 1.0 : -1.0;
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(as);
        if (qr.rank() < m) {
            return std::nullopt;
        }
        const Vector xls = qr.solve(p.b);
        const double rls2 = (p.b - as * xls).squaredNorm();
        if (std::sqrt(rls2) > p.feasTol) {
            return std::nullopt;
        }
        // u = (A_S^T A_S)^-1 s through the triangular factor of A_S P = Q R.
        const auto r = qr.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
        const Vector z = r.transpose().solve(Vector(qr.colsPermutation().transpose() * s));
        const Vector u = qr.colsPermutation() * Vector(r.solve(z));
        const double q = s.dot(u);
        if (!(q > 0.0)) {
            return std::nullopt;
        }
        const double mu = std::sqrt(std::max(0.0, p.eta * p.eta - rls2) / q);
        const Vector xs = xls - mu * u;

        std::vector<Eigen::Index> kept;
        for (Eigen::Index k = 0; k < m; ++k) {
            if (s[k] * xs[k] > 0.0) {
                kept.push_back(support[static_cast<std::size_t>(k)]);
            }
        }
        if (static_cast<Eigen::Index>(kept.size()) < m) {
            support = std::move(kept);
            continue;
        }

        const Vector res = p.b - as * xs;
        const double rn = res.norm();
        if (rn > p.feasTol) {
            return std::nullopt;
        }
        Polished out;
        out.x = Vector::Zero(p.a.cols());
        for (Eigen::Index k = 0; k < m; ++k) {
            out.x[support[static_cast<std::size_t>(k)]] = xs[k];
        }
        out.residual = rn;
        out.l1 = s.dot(xs);
        out.bound = dualBound(p, as * u);
        if (mu > 0.0) {
            out.bound = std::max(out.bound, dualBound(p, res / mu));
        }
        return out;
    }
    return std::nullopt;
}

/// Exact LASSO path from x = 0 (penalty |A^T b|_inf) down to the point where the
/// residual norm reaches eta. Every breakpoint is an exact KKT point, so the end
/// point is the BPDN optimum and r / mu is a tight dual certificate.
std::optional<Polished> homotopy(const Problem &p, int maxSteps) {
    const Matrix &a = p.a;
    const Vector &b = p.b;
    const Eigen::Index n = a.cols();
    Vector c = a.transpose() * b;
    Eigen::Index first = 0;
    double mu = c.cwiseAbs().maxCoeff(&first);
    std::vector<Eigen::Index> active{first};
    std::vector<char> isActive(static_cast<std::size_t>(n), 0);
    isActive[static_cast<std::size_t>(first)] = 1;
    std::vector<double> signs{c[first] >= 0.0 ? 1.0 : -1.0};
    Eigen::Index justDropped = -1;

    for (int step = 0; step < maxSteps && mu > 0.0; ++step) {
        const auto m = static_cast<Eigen::Index>(active.size());
        if (m > a.rows()) {
            return std::nullopt;
        }
        Matrix as(a.rows(), m);
        const Vector s = Eigen::Map<const Vector>(signs.data(), m);
        for (Eigen::Index k = 0; k < m; ++k) {
            as.col(k) = a.col(active[static_cast<std::size_t>(k)]);
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(as);
        if (qr.rank() < m) {
            return std::nullopt;
        }
        // Path point x_S(mu) = xls - mu d with d = (A_S^T A_S)^-1 s.
        const auto r = qr.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
        const Vector z = r.transpose().solve(Vector(qr.colsPermutation().transpose() * s));
        const Vector d = qr.colsPermutation() * Vector(r.solve(z));
        const Vector xls = qr.solve(b);
        const Vector xs = xls - mu * d;
        const Vector v = as * d;
        const Vector res = b - as * xs;
        c = a.transpose() * res;
        const Vector av = a.transpose() * v;

        double gamma = mu;
        int event = 0; // 0: mu reaches zero, 1: add, 2: drop, 3: residual reaches eta
        Eigen::Index which = -1;
        const double r2 = res.squaredNorm();
        const double eta2 = p.eta * p.eta;
        if (r2 <= eta2) {
            gamma = 0.0;
            event = 3;
        } else {
            const double vv = v.squaredNorm();
            const double rv = res.dot(v);
            if (vv > 0.0) {
                const double perp2 = (res - (rv / vv) * v).squaredNorm();
                const double disc = vv * (eta2 - perp2);
                const double den = rv + std::sqrt(std::max(disc, 0.0));
                if (disc >= 0.0 && den > 0.0) {
                    const double g = (r2 - eta2) / den;
                    if (g >= 0.0 && g <= gamma) {
                        gamma = g;
                        event = 3;
                    }
                }
            }
        }
        // With a square active set every inactive column ties with the end of the
        // path; round-off must not turn that tie into an addition.
        const double tie = 1e-10 * mu;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (isActive[static_cast<std::size_t>(j)] || j == justDropped) {
                continue;
            }
            for (const double sign : {1.0, -1.0}) {
                const double denom = 1.0 - sign * av[j];
                if (denom <= 1e-14) {
                    continue;
                }
                const double g = (mu - sign * c[j]) / denom;
                if (g > 1e-14 * mu && g < gamma - tie) {
                    gamma = g;
                    event = 1;
                    which = j;
                }
            }
        }
        for (Eigen::Index k = 0; k < m; ++k) {
            // Only coefficients shrinking towards zero can leave the active set.
            if (d[k] * s[k] >= 0.0) {
                continue;
            }
            const double g = std::abs(xs[k]) / std::abs(d[k]);
            if (g > 1e-14 * mu && g < gamma - tie) {
                gamma = g;
                event = 2;
                which = k;
            }
        }

        mu -= gamma;
        justDropped = -1;
        if (event == 0 || event == 3) {
            const Vector xe = xls - std::max(mu, 0.0) * d;
            Polished out;
            out.x = Vector::Zero(n);
            for (Eigen::Index k = 0; k < m; ++k) {
                out.x[active[static_cast<std::size_t>(k)]] = xe[k];
            }
            const Vector re = b - as * xe;
            out.residual = re.norm();
            out.l1 = out.x.cwiseAbs().sum();
            out.bound = dualBound(p, v);
            if (mu > 0.0) {
                out.bound = std::max(out.bound, dualBound(p, re / mu));
            }
            if (out.residual > p.feasTol) {
                return std::nullopt;
            }
            return out;
        }
        if (event == 1) {
            const double cj = c[which] - gamma * av[which];
            active.push_back(which);
            signs.push_back(cj >= 0.0 ? 1.0 : -1.0);
            isActive[static_cast<std::size_t>(which)] = 1;
        } else {
            const auto j = active[static_cast<std::size_t>(which)];
            active.erase(active.begin() + which);
            signs.erase(signs.begin() + which);
            isActive[static_cast<std::size_t>(j)] = 0;
            justDropped = j;
            if (active.empty()) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

/// Moves x along the minimum-norm correction until the residual is exactly eta.
std::optional<Polished> restore(const Problem &p, const Eigen::CompleteOrthogonalDecomposition<Matrix> &cod,
                                const Vector &x) {
    const Vector r = p.b - p.a * x;
    const double phi = r.norm();
    Polished out;
    out.x = x;
    if (phi > p.feasTol) {
        out.x += cod.solve(Vector(r * (1.0 - p.eta / phi)));
    }
    out.residual = (p.b - p.a * out.x).norm();
    if (out.residual > p.feasTol) {
        return std::nullopt;
    }
    out.l1 = out.x.cwiseAbs().sum();
    out.bound = 0.0;
    return out;
}

} // namespace

Matrix buildTheta(const TensorBasis &basis, const PointSet &points) {
    if (points.cols() != basis.dim()) {
        throw InvalidArgument("build_theta: points have dimension " + std::to_string(points.cols()) +
                              ", basis has " + std::to_string(basis.dim()));
    }
    Matrix theta = basis.evalMatrix(points);
    if (!theta.allFinite()) {
        throw NumericalError("build_theta: non-finite basis evaluation");
    }
    return theta;
}

Vector projectL1Ball(const Vector &v, double tau) {
    if (v.cwiseAbs().sum() <= tau) {
        return v;
    }
    if (!(tau > 0.0)) {
        return Vector::Zero(v.size());
    }
    std::vector<double> u(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        u[static_cast<std::size_t>(i)] = std::abs(v[i]);
    }
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double t = (cumsum - tau) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) {
            theta = t;
        } else {
            break;
        }
    }
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double m = std::max(std::abs(v[i]) - theta, 0.0);
        out[i] = v[i] >= 0.0 ? m : -m;
    }
    return out;
}

SparseCoefficients bpdnSolve(const Matrix &theta, const Vector &y, const BpdnOptions &options) {
    if (theta.rows() != y.size()) {
        throw InvalidArgument("bpdn_solve: measurement matrix has " + std::to_string(theta.rows()) + " rows but y has " +
                              std::to_string(y.size()) + " entries");
    }
    if (!(options.eta >= 0.0) || !std::isfinite(options.eta)) {
        throw InvalidArgument("bpdn_solve: eta must be finite and >= 0");
    }
    if (options.maxOuter < 1 || options.maxInner < 1 || !(options.innerTol > 0.0)) {
        throw InvalidArgument("bpdn_solve: iteration caps and inner tolerance must be positive");
    }
    if (!theta.allFinite() || !y.allFinite()) {
        throw InvalidArgument("bpdn_solve: non-finite input");
    }

    const Eigen::Index n = theta.cols();
    Vector colScale = Vector::Ones(n);
    Matrix scaled;
    if (options.normalizeColumns) {
        colScale = theta.colwise().norm().transpose();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(colScale[j] > 0.0)) {
                colScale[j] = 1.0;
            }
        }
        scaled = theta * colScale.cwiseInverse().asDiagonal();
    }
    const Matrix &a = options.normalizeColumns ? scaled : theta;

    const double eta = options.eta;
    const double feasTol = eta * (1.0 + 1e-6) + 1e-12;
    const Problem prob{a, y, eta, feasTol};
    const double bnorm = y.norm();
    const double outerTol = std::max(1e-10, 1e-6 * bnorm);

    auto finish = [&](Vector x, double residual, int iters, int outer, double bound) {
        SparseCoefficients out;
        out.c = x.cwiseQuotient(colScale);
        out.residualL2 = residual;
        out.l1 = out.c.cwiseAbs().sum();
        out.iterations = iters;
        out.outerIterations = outer;
        out.eta = eta;
        out.l1LowerBound = std::max(0.0, bound);
        return out;
    };

    if (bnorm <= eta) {
        return finish(Vector::Zero(n), bnorm, 0, 0, 0.0);
    }
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    const double floor = (y - a * cod.solve(y)).norm();
    if (floor > feasTol) {
        std::ostringstream msg;
        msg << "bpdn_solve: eta = " << eta << " is below the least-squares residual floor " << floor;
        throw BpdnInfeasible(msg.str(), floor);
    }

    double tau = 0.0;
    Vector x = Vector::Zero(n);
    Vector r = y;
    double f = 0.5 * r.squaredNorm();
    Vector g = -(a.transpose() * r);
    double step = 1.0;
    double lower = 0.0;
    std::deque<double> lastF{f};
    int iters = 0;
    int inner = 0;
    int outer = 0;

    std::optional<Polished> bestFeasible;
    Vector bestX = x;
    double bestRes = r.norm();

    while (true) {
        const double rNorm = r.norm();
        const double gInf = g.cwiseAbs().maxCoeff();
        if (gInf > 0.0) {
            lower = std::max(lower, (y.dot(r) - eta * rNorm) / gInf);
        }
        if (rNorm < bestRes) {
            bestRes = rNorm;
            bestX = x;
        }
        const double gap = r.squaredNorm() - y.dot(r) + tau * gInf;
        const double rGap = std::abs(gap) / std::max(1.0, f);
        const double aErr1 = rNorm - eta;
        const double rErr1 = std::abs(aErr1) / std::max(1.0, rNorm);
        const double rErr2 = std::abs(f - 0.5 * eta * eta) / std::max(1.0, f);

        const bool innerDone = rGap <= std::max(options.innerTol, rErr2) || rErr1 <= options.innerTol;
        if (innerDone || inner >= options.maxInner || gInf == 0.0) {
            ++outer;
            if (auto cand = polish(prob, x)) {
                const double bound = std::max(lower, cand->bound);
                if (cand->l1 <= bound * (1.0 + 1e-9) + 1e-12) {
                    return finish(cand->x, cand->residual, iters, outer, bound);
                }
                if (!bestFeasible || cand->l1 < bestFeasible->l1) {
                    bestFeasible = std::move(cand);
                }
            }
            if (std::abs(aErr1) <= outerTol || outer >= options.maxOuter || gInf == 0.0) {
                break;
            }
            const double tauOld = tau;
            tau = std::max(0.0, tau + rNorm * aErr1 / gInf);
            if (tau < tauOld) {
                x = projectL1Ball(x, tau);
                r = y - a * x;
                f = 0.5 * r.squaredNorm();
                g = -(a.transpose() * r);
            }
            lastF.assign(1, f);
            inner = 0;
            continue;
        }

        // Nonmonotone projected line search along the projection arc.
        const double fMax = *std::max_element(lastF.begin(), lastF.end());
        double alpha = step;
        Vector xNew, rNew;
        double fNew = f;
        bool accepted = false;
        for (int ls = 0; ls < kMaxLineSearch; ++ls) {
            xNew = projectL1Ball(x - alpha * g, tau);
            const Vector s = xNew - x;
            const double gts = g.dot(s);
            if (gts >= 0.0) {
                break;
            }
            rNew = y - a * xNew;
            fNew = 0.5 * rNew.squaredNorm();
            if (fNew <= fMax + kGamma * gts) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        ++iters;
        ++inner;
        if (!accepted) {
            // Stalled at this tau: force the outer update.
            inner = options.maxInner;
            continue;
        }
        const Vector gNew = -(a.transpose() * rNew);
        const Vector s = xNew - x;
        const double sts = s.squaredNorm();
        const double sty = s.dot(gNew - g);
        step = sty <= 0.0 ? kStepMax : std::clamp(sts / sty, kStepMin, kStepMax);
        x = std::move(xNew);
        r = std::move(rNew);
        g = gNew;
        f = fNew;
        lastF.push_back(f);
        if (static_cast<int>(lastF.size()) > kNonmonotoneWindow) {
            lastF.pop_front();
        }
    }

    // The Pareto iteration has converged (or run out of budget) without a certified
    // vertex. Candidates: the exact path solution on small problems and the last
    // iterate pushed onto the residual sphere; keep the smallest feasible l1.
    auto consider = [&](std::optional<Polished> cand) {
        if (cand && (!bestFeasible || cand->l1 < bestFeasible->l1)) {
            bestFeasible = std::move(cand);
        }
    };
    if (a.rows() * a.cols() <= kHomotopySizeLimit) {
        consider(homotopy(prob, 20 * static_cast<int>(a.rows() + a.cols())));
    }
    consider(restore(prob, cod, x));
    consider(restore(prob, cod, bestX));
    if (bestFeasible) {
        return finish(bestFeasible->x, bestFeasible->residual, iters, outer, std::max(lower, bestFeasible->bound));
    }
    SparseCoefficients best = finish(bestX, bestRes, iters, outer, lower);
    std::ostringstream msg;
    msg << "bpdn_solve: no certified solution after " << outer << " outer / " << iters
        << " inner iterations (residual " << best.residualL2 << ", eta " << eta << ")";
    throw BpdnNonConvergence(msg.str(), std::move(best));
}

int sparsity(const Vector &c, double delta) {
    if (!(delta > 0.0)) {
        throw InvalidArgument("sparsity: threshold must be > 0");
    }
    return static_cast<int>((c.array().abs() > delta).count());
}

std::vector<std::size_t> supportOf(const Vector &c, double delta) {
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (std::abs(c[i]) > delta) {
            out.push_back(static_cast<std::size_t>(i));
        }
    }
    return out;
}

} // namespace kernlearn
