#include "kernlearn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernlearn/errors.hpp"
#include "kernlearn/rng.hpp"

namespace kernlearn {

ScoreReport score(const Vector &pred, const Vector &truth) {
    if (pred.size() != truth.size()) {
        throw InvalidArgument("score: prediction and truth lengths differ");
    }
    if (truth.size() < 2) {
        throw InvalidArgument("score: need at least two test points");
    }
    ScoreReport r;
    r.nTest = truth.size();
    const Vector diff = pred - truth;
    const double sse = diff.squaredNorm();
    r.rmse = std::sqrt(sse / static_cast<double>(truth.size()));

    const double sumSq = truth.squaredNorm();
    if (sumSq > 0.0) {
        r.nrmse = std::sqrt(sse / sumSq);
    } else {
        r.issues.emplace_back("nrmse: truth is identically zero");
    }

    const double sst = (truth.array() - truth.mean()).square().sum();
    if (sst > 0.0) {
        r.q2 = 1.0 - sse / sst;
    } else {
        r.issues.emplace_back("q2: truth values are all identical");
    }

    if ((truth.array() != 0.0).all()) {
        r.mre = 100.0 * (diff.array().abs() / truth.array().abs()).maxCoeff();
    } else {
        r.issues.emplace_back("mre: truth contains zero entries");
    }
    return r;
}

double silvermanBandwidth(const Vector &samples) {
    if (samples.size() < 2) {
        throw InvalidArgument("kde: need at least two samples");
    }
    const double n = static_cast<double>(samples.size());
    const double mean = samples.mean();
    const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1.0));
    if (!(sd > 0.0)) {
        throw DegenerateError("kde: samples have zero variance");
    }
    return 1.06 * sd * std::pow(n, -0.2);
}

Vector kde(const Vector &samples, const Vector &grid, std::optional<double> bandwidth) {
    if (samples.size() < 2) {
        throw InvalidArgument("kde: need at least two samples");
    }
    for (Eigen::Index i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw InvalidArgument("kde: grid must be strictly increasing");
        }
    }
    const double h = bandwidth ? *bandwidth : silvermanBandwidth(samples);
    if (!(h > 0.0)) {
        throw InvalidArgument("kde: bandwidth must be positive");
    }

    // Gaussian tails beyond 8 bandwidths are below 1e-14 of the peak.
    const double reach = 8.0 * h;
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    Vector density = Vector::Zero(grid.size());
    const double *g = grid.data();
    for (Eigen::Index s = 0; s < samples.size(); ++s) {
        const double x = samples[s];
        const auto *first = std::lower_bound(g, g + grid.size(), x - reach);
        const auto *last = std::upper_bound(first, g + grid.size(), x + reach);
        for (const auto *it = first; it != last; ++it) {
            const double z = (*it - x) / h;
            density[it - g] += std::exp(-0.5 * z * z);
        }
    }
    return density * norm;
}

double klDivergence(const Vector &p, const Vector &q, const Vector &grid) {
    if (p.size() != grid.size() || q.size() != grid.size()) {
        throw InvalidArgument("kl_divergence: densities and grid have different lengths");
    }
    if (grid.size() < 2) {
        throw InvalidArgument("kl_divergence: grid needs at least two points");
    }
    constexpr double floor = 1e-12;
    auto integrand = [&](Eigen::Index i) {
        const double a = std::max(p[i], floor);
        const double b = std::max(q[i], floor);
        return a * std::log(a / b);
    };
    double s = 0.0;
    for (Eigen::Index i = 1; i < grid.size(); ++i) {
        s += 0.5 * (grid[i] - grid[i - 1]) * (integrand(i) + integrand(i - 1));
    }
    return std::max(s, 0.0);
}

KdeComparison compareDensities(const Vector &truth, const Vector &approx, int points) {
    if (points < 2) {
        throw InvalidArgument("compare_densities: need at least two grid points");
    }
    const double hp = silvermanBandwidth(truth);
    const double hq = silvermanBandwidth(approx);
    const double pad = 4.0 * std::max(hp, hq);
    const double lo = std::min(truth.minCoeff(), approx.minCoeff()) - pad;
    const double hi = std::max(truth.maxCoeff(), approx.maxCoeff()) + pad;
    KdeComparison out;
    out.grid = Vector::LinSpaced(points, lo, hi);
    out.p = kde(truth, out.grid, hp);
    out.q = kde(approx, out.grid, hq);
    out.kl = klDivergence(out.p, out.q, out.grid);
    return out;
}

namespace {

Vector evaluate(const BatchModel &model, const PointSet &x, const std::string &label) {
    Vector y;
    try {
        y = model(x);
    } catch (const std::exception &e) {
        throw Error("pick_freeze: model evaluation failed on " + label + ": " + e.what());
    }
    if (y.size() != x.rows()) {
        throw InvalidArgument("pick_freeze: model returned " + std::to_string(y.size()) + " values for " +
                              std::to_string(x.rows()) + " rows of " + label);
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) {
            throw NumericalError("pick_freeze: non-finite model output on " + label + ", row " + std::to_string(i));
        }
    }
    return y;
}

} // namespace

Vector pickFreezeSobol(const BatchModel &model, const DesignSpec &law, Eigen::Index n, std::uint64_t seed) {
    if (n < 2) {
        throw InvalidArgument("pick_freeze: matrix size must be >= 2");
    }
    DesignSpec spec = law;
    spec.n = n;
    if (spec.law == Law::LhsMaximin) {
        spec.law = Law::Uniform;
    }
    spec.seed = deriveSeed(seed, 1);
    const PointSet a = sample(spec);
    spec.seed = deriveSeed(seed, 2);
    const PointSet b = sample(spec);

    const int d = spec.dim();
    const Vector y = evaluate(model, a, "the base matrix");
    const double shift = y.mean();
    const Vector yc = y.array() - shift;
    Vector s(d);
    for (int i = 0; i < d; ++i) {
        PointSet frozen = b;
        frozen.col(i) = a.col(i);
        const Vector yi = evaluate(model, frozen, "frozen matrix " + std::to_string(i + 1)).array() - shift;
        const double m = 0.5 * (yc.mean() + yi.mean());
        const double num = yc.dot(yi) / static_cast<double>(n) - m * m;
        const double den = 0.5 * (yc.squaredNorm() + yi.squaredNorm()) / static_cast<double>(n) - m * m;
        if (!(den > 1e-300)) {
            throw DegenerateError("pick_freeze: model output has zero variance");
        }
        s[i] = num / den;
    }
    return s;
}

double quantile(const std::vector<double> &sorted, double prob) {
    if (sorted.empty()) {
        throw InvalidArgument("quantile of an empty set");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats boxStats(std::vector<double> values) {
    if (values.empty()) {
        throw InvalidArgument("box_stats: need at least one value");
    }
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.median = quantile(values, 0.5);
    b.q25 = quantile(values, 0.25);
    b.q75 = quantile(values, 0.75);
    const double iqr = b.q75 - b.q25;
    b.lowerFence = b.q25 - 1.5 * iqr;
    b.upperFence = b.q75 + 1.5 * iqr;
    for (double v : values) {
        if (v < b.lowerFence || v > b.upperFence) {
            b.outliers.push_back(v);
        }
    }
    return b;
}

} // namespace kernlearn
