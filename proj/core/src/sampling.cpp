#include "kernlearn/sampling.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "kernlearn/errors.hpp"
#include "kernlearn/rng.hpp"

namespace kernlearn {

namespace {

enum StreamTag : std::uint64_t { kLhsStream = 1, kUniformStream = 2, kBetaStream = 3, kSplitStream = 4 };

void shuffle(Philox4x32 &rng, std::vector<Eigen::Index> &v) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

double minPairwiseDistance(const PointSet &unit) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            best = std::min(best, (unit.row(i) - unit.row(j)).squaredNorm());
        }
    }
    return std::sqrt(best);
}

PointSet lhsUnit(Philox4x32 &rng, Eigen::Index n, int d) {
    PointSet unit(n, d);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        shuffle(rng, perm);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = rng.uniform();
            unit(i, j) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + u) / static_cast<double>(n);
        }
    }
    return unit;
}

} // namespace

std::string toString(Law law) {
    switch (law) {
    case Law::LhsMaximin:
        return "lhs_maximin";
    case Law::Uniform:
        return "uniform";
    case Law::Beta:
        return "beta";
    }
    return "uniform";
}

Law lawFromString(const std::string &s) {
    if (s == "lhs_maximin" || s == "lhs") {
        return Law::LhsMaximin;
    }
    if (s == "uniform") {
        return Law::Uniform;
    }
    if (s == "beta") {
        return Law::Beta;
    }
    throw InvalidArgument("unknown sampling law '" + s + "'");
}

void DesignSpec::validate() const {
    if (n < 1) {
        throw InvalidArgument("design: sample count must be >= 1");
    }
    if (bounds.empty()) {
        throw InvalidArgument("design: need at least one dimension");
    }
    for (const auto &[lo, hi] : bounds) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
            throw InvalidArgument("design: every bound must satisfy lo < hi");
        }
    }
    if (law == Law::LhsMaximin && candidates < 1) {
        throw InvalidArgument("design: maximin LHS needs at least one candidate");
    }
    if (law == Law::Beta) {
        if (betaShapes.size() != bounds.size()) {
            throw InvalidArgument("design: beta law needs one (a, b) pair per dimension");
        }
        for (const auto &[a, b] : betaShapes) {
            if (!(a > 0.0) || !(b > 0.0)) {
                throw InvalidArgument("design: beta shapes must be positive");
            }
        }
    }
}

DesignSpec DesignSpec::cube(Law law, int d, double lo, double hi, Eigen::Index n, std::uint64_t seed) {
    DesignSpec s;
    s.n = n;
    s.bounds.assign(static_cast<std::size_t>(d), {lo, hi});
    s.law = law;
    s.seed = seed;
    return s;
}

double betaQuantile(double a, double b, double u) {
    if (!(a > 0.0) || !(b > 0.0) || !(u >= 0.0 && u <= 1.0)) {
        throw InvalidArgument("beta quantile: need a, b > 0 and u in [0, 1]");
    }
    return boost::math::ibeta_inv(a, b, u);
}

PointSet sample(const DesignSpec &spec, LhsReport *report) {
    spec.validate();
    const Eigen::Index n = spec.n;
    const int d = spec.dim();
    PointSet unit(n, d);

    switch (spec.law) {
    case Law::LhsMaximin: {
        LhsReport local;
        double bestScore = -1.0;
        for (int m = 0; m < spec.candidates; ++m) {
            Philox4x32 rng(deriveSeed(spec.seed, kLhsStream), static_cast<std::uint64_t>(m));
            PointSet cand = lhsUnit(rng, n, d);
            const double score = n > 1 ? minPairwiseDistance(cand) : 0.0;
            local.candidateScores.push_back(score);
            if (score > bestScore) {
                bestScore = score;
                local.chosen = static_cast<std::size_t>(m);
                unit = std::move(cand);
            }
        }
        if (report) {
            *report = std::move(local);
        }
        break;
    }
    case Law::Uniform: {
        Philox4x32 rng(deriveSeed(spec.seed, kUniformStream));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                unit(i, j) = rng.uniform();
            }
        }
        break;
    }
    case Law::Beta: {
        Philox4x32 rng(deriveSeed(spec.seed, kBetaStream));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                const auto &[a, b] = spec.betaShapes[static_cast<std::size_t>(j)];
                unit(i, j) = betaQuantile(a, b, rng.uniformOpen());
            }
        }
        break;
    }
    }

    PointSet out(n, d);
    for (int j = 0; j < d; ++j) {
        const auto &[lo, hi] = spec.bounds[static_cast<std::size_t>(j)];
        out.col(j) = (lo + (hi - lo) * unit.col(j).array()).min(hi).max(lo);
    }
    return out;
}

std::vector<Eigen::Index> permutation(Eigen::Index n, std::uint64_t seed, std::uint64_t stream) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Philox4x32 rng(seed, stream);
    shuffle(rng, perm);
    return perm;
}

Split split(const Dataset &data, std::array<double, 3> fractions, std::uint64_t seed) {
    data.validate();
    double total = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0) || !std::isfinite(f)) {
            throw InvalidArgument("split: fractions must be finite and >= 0");
        }
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw InvalidArgument("split: fractions must sum to 1");
    }
    const Eigen::Index n = data.size();
    const auto nTrain = static_cast<Eigen::Index>(std::llround(fractions[0] * static_cast<double>(n)));
    const auto nTest = static_cast<Eigen::Index>(std::llround(fractions[2] * static_cast<double>(n)));
    const Eigen::Index nVal = n - nTrain - nTest;
    const std::array<Eigen::Index, 3> sizes{nTrain, nVal, nTest};
    const char *names[3] = {"train", "validation", "test"};
    for (int i = 0; i < 3; ++i) {
        if (sizes[static_cast<std::size_t>(i)] < 0 ||
            (fractions[static_cast<std::size_t>(i)] > 0.0 && sizes[static_cast<std::size_t>(i)] == 0)) {
            throw DegenerateError(std::string("split: ") + names[i] + " part would be empty for " +
                                  std::to_string(n) + " rows");
        }
    }

    const auto perm = permutation(n, deriveSeed(seed, kSplitStream));
    const std::span<const Eigen::Index> all(perm);
    Split out;
    out.train = data.subset(all.subspan(0, static_cast<std::size_t>(nTrain)));
    out.validation = data.subset(all.subspan(static_cast<std::size_t>(nTrain), static_cast<std::size_t>(nVal)));
    out.test = data.subset(all.subspan(static_cast<std::size_t>(nTrain + nVal), static_cast<std::size_t>(nTest)));
    return out;
}

} // namespace kernlearn
