#ifndef KERNLEARN_SAMPLING_HPP
#define KERNLEARN_SAMPLING_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kernlearn/regression.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

enum class Law { LhsMaximin, Uniform, Beta };

[[nodiscard]] std::string toString(Law law);
[[nodiscard]] Law lawFromString(const std::string &s);

struct DesignSpec {
    Eigen::Index n = 1;
    std::vector<std::pair<double, double>> bounds; ///< one [lo, hi] per dimension
    Law law = Law::Uniform;
    int candidates = 100;                            ///< LHS designs scored by maximin
    std::vector<std::pair<double, double>> betaShapes; ///< (a, b) per dimension for Law::Beta
    std::uint64_t seed = 0;

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(bounds.size()); }
    void validate() const;

    /// Same law on a hypercube [lo, hi]^d.
    static DesignSpec cube(Law law, int d, double lo, double hi, Eigen::Index n, std::uint64_t seed);
};

/// Minimum pairwise distance of each LHS candidate, computed on the unit cube.
struct LhsReport {
    std::vector<double> candidateScores;
    std::size_t chosen = 0;
};

/// n x d design. For Law::LhsMaximin every dimension has exactly one point per
/// stratum of width (hi - lo) / n, and the returned design maximizes the minimum
/// pairwise distance among `candidates` random LHS designs (first on ties).
[[nodiscard]] PointSet sample(const DesignSpec &spec, LhsReport *report = nullptr);

/// Quantile of the Beta(a, b) law on [0, 1].
[[nodiscard]] double betaQuantile(double a, double b, double u);

struct Split {
    Dataset train;
    Dataset validation;
    Dataset test;
};

/// Random disjoint partition. Train and test sizes are rounded from their
/// fractions; validation takes the remainder.
[[nodiscard]] Split split(const Dataset &data, std::array<double, 3> fractions, std::uint64_t seed);

/// Random permutation of 0..n-1.
[[nodiscard]] std::vector<Eigen::Index> permutation(Eigen::Index n, std::uint64_t seed, std::uint64_t stream = 0);

} // namespace kernlearn

#endif // KERNLEARN_SAMPLING_HPP
