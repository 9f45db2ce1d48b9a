#ifndef KERNLEARN_METRICS_HPP
#define KERNLEARN_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kernlearn/sampling.hpp"
#include "kernlearn/types.hpp"

namespace kernlearn {

/// Test-set errors. A metric whose denominator vanishes is left empty and the
/// reason appended to `issues`; the others are still computed.
struct ScoreReport {
    double rmse = 0.0;
    std::optional<double> nrmse;
    std::optional<double> q2;
    std::optional<double> mre; ///< percent
    Eigen::Index nTest = 0;
    std::vector<std::string> issues;
};

[[nodiscard]] ScoreReport score(const Vector &pred, const Vector &truth);

/// Gaussian KDE; Silverman's bandwidth 1.06 sd n^(-1/5) when none is given.
[[nodiscard]] Vector kde(const Vector &samples, const Vector &grid, std::optional<double> bandwidth = std::nullopt);

[[nodiscard]] double silvermanBandwidth(const Vector &samples);

/// Trapezoid integral of p log(p / q), densities floored at 1e-12, clamped at 0.
[[nodiscard]] double klDivergence(const Vector &p, const Vector &q, const Vector &grid);

struct KdeComparison {
    Vector grid;
    Vector p; ///< density of the first sample set
    Vector q; ///< density of the second sample set
    double kl = 0.0; ///< D_KL(p || q)
};

/// KDEs of both sample sets on a common `points`-node grid spanning the union of
/// their ranges padded by four bandwidths.
[[nodiscard]] KdeComparison compareDensities(const Vector &truth, const Vector &approx, int points = 2048);

/// Pick-freeze first-order Sobol' indices from (d + 1) N evaluations of `model`
/// under the law of `law` (its n is ignored; LHS laws are sampled i.i.d. uniform).
/// Uses the centered estimator, which is invariant to output shifts.
[[nodiscard]] Vector pickFreezeSobol(const BatchModel &model, const DesignSpec &law, Eigen::Index n,
                                     std::uint64_t seed);

struct BoxStats {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double lowerFence = 0.0; ///< q25 - 1.5 IQR
    double upperFence = 0.0; ///< q75 + 1.5 IQR
    std::vector<double> outliers;
};

/// Quartiles by linear interpolation between order statistics (type 7).
[[nodiscard]] BoxStats boxStats(std::vector<double> values);

/// Type-7 quantile of ascending `sorted`.
[[nodiscard]] double quantile(const std::vector<double> &sorted, double prob);

} // namespace kernlearn

#endif // KERNLEARN_METRICS_HPP
