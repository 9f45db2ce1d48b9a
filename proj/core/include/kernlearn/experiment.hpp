#ifndef KERNLEARN_EXPERIMENT_HPP
#define KERNLEARN_EXPERIMENT_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kernlearn/benchfn.hpp"
#include "kernlearn/io.hpp"
#include "kernlearn/kernelflow.hpp"
#include "kernlearn/metrics.hpp"
#include "kernlearn/sampling.hpp"
#include "kernlearn/skrr.hpp"
#include "kernlearn/sparse.hpp"

namespace kernlearn {

[[nodiscard]] const char *libraryVersion() noexcept;

enum class Method { FullGpc, SparseGpc, KrrKf, Sskrr, Nskrr };

[[nodiscard]] std::string toString(Method m);
[[nodiscard]] Method methodFromString(const std::string &s);
/// Comma-separated list; "all" expands to full_gpc, sparse_gpc, krr_kf, sskrr.
[[nodiscard]] std::vector<Method> parseMethods(const std::string &list);

enum class LambdaMode { Fixed, Grid, Kf };

[[nodiscard]] std::string toString(LambdaMode m);
[[nodiscard]] LambdaMode lambdaModeFromString(const std::string &s);

/// Log-spaced nugget grid, inclusive of both ends.
struct LambdaGrid {
    double lo = 1e-12;
    double hi = 1e-1;
    int points = 45;

    [[nodiscard]] std::vector<double> values() const;
};

struct LambdaTuning {
    double lambda = 0.0;
    std::vector<double> grid;
    std::vector<double> rmse; ///< per grid value; +inf where the fit failed
    std::optional<KfTrace> trace;
};

using RegressorFactory = std::function<TrainedRegressor(double lambda)>;

/// lambda* = argmin over the grid of the RMSE on `tuning` (first minimum).
[[nodiscard]] LambdaTuning tuneLambdaGrid(const RegressorFactory &factory, const Dataset &tuning,
                                          const LambdaGrid &grid = {});

/// Kernel Flow on the nugget alone, starting from lambda0.
[[nodiscard]] LambdaTuning tuneLambdaKf(const KernelSpec &kernel, const Dataset &train, const Dataset &tuning,
                                        double lambda0, const KfConfig &config);

[[nodiscard]] inline KfConfig defaultKf() {
    KfConfig kf;
    kf.learningRate = 0.05;
    return kf;
}

struct ExperimentConfig {
    std::string function;    ///< benchmark name; exclusive with datasetPath
    std::string datasetPath; ///< CSV with header x1,...,xd,y
    std::vector<Method> methods;

    int p = 10;
    std::string family = "legendre"; ///< legendre or jacobi
    std::vector<std::pair<double, double>> betaShapes;
    std::vector<std::pair<double, double>> bounds; ///< dataset mode; inferred from the data when empty

    Law law = Law::LhsMaximin;
    int lhsCandidates = 100;
    Eigen::Index nTrain = 100;
    Eigen::Index nValidation = 1000;
    Eigen::Index nTest = 10000;
    std::array<double, 3> splitFractions{0.67, 0.12, 0.21};

    BpdnOptions bpdn{.eta = 1e-6};
    double delta = 1e-3;

    LambdaMode lambdaMode = LambdaMode::Grid;
    double lambda = 1e-6; ///< fixed value, or the Kernel Flow starting point
    LambdaGrid grid;
    bool paperLeakage = false; ///< tune on the test set instead of the validation set
    std::optional<double> kappa;

    KfConfig kf = defaultKf();
    int nskrrIterations = 3;
    Eigen::Index sobolN = 0; ///< pick-freeze matrix size for non-gPC methods; 0 skips
    int kdePoints = 2048;

    std::vector<std::uint64_t> seeds;
    std::string outputDir = "kernlearn-out";
    int jobs = 1;
    std::size_t nodeGuard = kDefaultNodeGuard;

    void validate() const;
    [[nodiscard]] Json toJson() const;
    /// Unknown keys are rejected.
    [[nodiscard]] static ExperimentConfig fromJson(const Json &j);
};

struct MethodResult {
    Method method = Method::SparseGpc;
    bool ok = false;
    std::string error;

    ScoreReport scores;
    Moments moments;
    std::string momentSource; ///< "coefficients" or "monte_carlo"
    std::optional<Vector> sobol;
    std::string sobolSource;
    std::optional<double> kl;
    std::optional<KdeComparison> densities;

    std::optional<int> sparsity;
    std::optional<SparseCoefficients> bpdn;
    std::optional<Vector> coefficients; ///< gPC coefficients
    std::optional<SpectralSolution> spectral;
    std::optional<double> lambda;
    std::optional<double> kappa;
    std::optional<LambdaTuning> tuning;
    std::optional<KfTrace> kfTrace; ///< krr_kf parameters
    std::vector<NskrrIteration> nskrrTrace;
};

struct SeedResult {
    std::uint64_t seed = 0;
    Moments truthMoments; ///< Monte-Carlo over the test outputs
    std::vector<MethodResult> methods;
    std::vector<std::string> errors;

    [[nodiscard]] bool partial() const;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::shared_ptr<const TensorBasis> basis;
    std::optional<Moments> referenceMoments; ///< benchmark mode
    std::optional<Vector> referenceSobol;
    std::vector<SeedResult> runs;
    std::string timestamp;
};

/// For each seed: sample or split, fit every requested method, score on the
/// test set, compute moments, Sobol' indices and KL divergence. Failures are
/// recorded per seed and method; seeds run on up to `jobs` threads.
[[nodiscard]] ExperimentReport runExperiment(const ExperimentConfig &config);

/// Full report document, including aggregates.
[[nodiscard]] Json reportToJson(const ExperimentReport &report);

/// BoxStats per method and metric over the per-seed entries of a report document.
[[nodiscard]] Json aggregateRuns(const Json &runs);

/// Structural check of a report document; throws IoError naming the first problem.
void validateReportJson(const Json &j);

/// Writes report.json, metrics_per_seed.csv and boxstats.csv from a report document.
void renderReportJson(const Json &report, const std::filesystem::path &dir);

/// renderReportJson plus coefficients.csv, spectral.csv, kde_*.csv and kf_trace*.csv.
void reportRender(const ExperimentReport &report, const std::filesystem::path &dir);

} // namespace kernlearn

#endif // KERNLEARN_EXPERIMENT_HPP
