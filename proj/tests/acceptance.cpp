// Acceptance suite: one PASS/FAIL line per criterion.
//
//   kernlearn_acceptance            run every criterion
//   kernlearn_acceptance 2 10       run the listed criteria
//
// Exit status is 0 when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kernlearn/benchfn.hpp"
#include "kernlearn/experiment.hpp"
#include "kernlearn/gpc.hpp"
#include "kernlearn/kernelflow.hpp"
#include "kernlearn/metrics.hpp"
#include "kernlearn/polybasis.hpp"
#include "kernlearn/skrr.hpp"
#include "kernlearn/sparse.hpp"
#include "oracles.hpp"

using namespace kernlearn;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double median(std::vector<double> v) {
    return boxStats(std::move(v)).median;
}

int hardwareJobs() {
    return static_cast<int>(std::max(1u, std::min(10u, std::thread::hardware_concurrency())));
}

std::vector<std::uint64_t> tenSeeds() {
    return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
}

const MethodResult *find(const SeedResult &run, Method m) {
    for (const auto &r : run.methods) {
        if (r.method == m) {
            return &r;
        }
    }
    return nullptr;
}

std::shared_ptr<const TensorBasis> ishigamiBasis() {
    return std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(-kPi, kPi), 3, 10));
}

Outcome orthonormality() {
    const TensorBasis leg = TensorBasis::totalOrder(UnivariateFamily::legendre(), 3, 10);
    const TensorBasis jac = TensorBasis::totalOrder(UnivariateFamily::jacobi(4, 4, 0.0, 1.0), 3, 8);
    const double a = orthonormalityDefect(leg, tensorRule(leg, 12));
    const double b = orthonormalityDefect(jac, tensorRule(jac, 10));
    return {a <= 1e-10 && b <= 1e-10, fmt("legendre defect %.2e, jacobi(4,4) defect %.2e", a, b)};
}

Outcome fullGpcIshigami() {
    auto basis = ishigamiBasis();
    const auto fn = ishigamiFunction();
    const QuadratureRule rule = tensorRule(*basis, 12);
    const GpcSurrogate g = projectQuadrature(basis, fn.model(), rule);
    const GpcMoments m = gpcMoments(g);
    const PointSet x = sample(DesignSpec::cube(Law::Uniform, 3, -kPi, kPi, 10000, 2));
    const double q2 = *score(g.eval(x), fn.evaluate(x)).q2;
    const bool pass = rule.size() == 1728 && std::abs(m.mean - 3.5) <= 1e-3 && std::abs(m.variance - 13.8445) <= 1e-2 &&
                      q2 >= 0.99999;
    return {pass, fmt("nodes %zu, mean %.6f, variance %.6f, Q2 %.7f", rule.size(), m.mean, m.variance, q2)};
}

Outcome sparseIshigami() {
    ExperimentConfig cfg;
    cfg.function = "ishigami";
    cfg.methods = {Method::SparseGpc, Method::Sskrr};
    cfg.p = 10;
    cfg.nTrain = 100;
    cfg.nTest = 10000;
    cfg.bpdn.eta = 1e-6;
    cfg.delta = 1e-3;
    cfg.lambdaMode = LambdaMode::Grid;
    cfg.seeds = tenSeeds();
    cfg.jobs = hardwareJobs();
    const ExperimentReport r = runExperiment(cfg);

    int inBand = 0;
    std::vector<double> q2;
    std::ostringstream sizes;
    std::ostringstream coarse;
    for (const auto &run : r.runs) {
        const MethodResult *sg = find(run, Method::SparseGpc);
        const MethodResult *sk = find(run, Method::Sskrr);
        if (sg && sg->ok && sg->sparsity) {
            inBand += (*sg->sparsity >= 10 && *sg->sparsity <= 25) ? 1 : 0;
            sizes << *sg->sparsity << ' ';
            coarse << sparsity(*sg->coefficients, 1e-2) << ' ';
        }
        if (sk && sk->ok && sk->scores.q2) {
            q2.push_back(*sk->scores.q2);
        }
    }
    const double medQ2 = q2.size() == r.runs.size() ? median(q2) : -1.0;
    std::string s = sizes.str();
    std::string c = coarse.str();
    s.pop_back();
    c.pop_back();
    return {inBand >= 8 && medQ2 >= 0.999,
            fmt("S(1e-3) in [10,25] for %d/10 seeds [%s]; S(1e-2) [%s]; SSKRR median Q2 %.6f", inBand, s.c_str(),
                c.c_str(), medQ2)};
}

Outcome rosenbrockRecovery() {
    ExperimentConfig cfg;
    cfg.function = "rosenbrock";
    cfg.methods = {Method::SparseGpc, Method::Sskrr};
    cfg.p = 4;
    cfg.nTrain = 400;
    cfg.nTest = 10000;
    cfg.bpdn.eta = 1e-6;
    cfg.lambdaMode = LambdaMode::Grid;
    cfg.seeds = tenSeeds();
    cfg.jobs = hardwareJobs();
    const ExperimentReport r = runExperiment(cfg);

    // Support in the Legendre basis of the symbolic monomial expansion.
    const auto monomials = oracle::rosenbrockMonomials(10);
    std::set<std::size_t> expected;
    for (const auto &e : oracle::legendreImage(monomials)) {
        expected.insert(*r.basis->indices().find(e));
    }
    int exact = 0;
    double worstQ2 = 1.0;
    double worstMean = 0.0;
    bool allOk = true;
    for (const auto &run : r.runs) {
        const MethodResult *sg = find(run, Method::SparseGpc);
        const MethodResult *sk = find(run, Method::Sskrr);
        if (!sg || !sg->ok || !sk || !sk->ok || !sk->scores.q2) {
            allOk = false;
            continue;
        }
        const auto support = supportOf(*sg->coefficients, cfg.delta);
        exact += std::set<std::size_t>(support.begin(), support.end()) == expected ? 1 : 0;
        worstQ2 = std::min(worstQ2, *sk->scores.q2);
        worstMean = std::max(worstMean, std::abs(sg->moments.mean - 4101.0));
    }
    const bool pass = allOk && exact >= 8 && worstQ2 >= 1.0 - 1e-6 && worstMean <= 0.5;
    return {pass, fmt("%zu monomials -> %zu Legendre terms; exact support %d/10; min SSKRR Q2 %.9f; "
                      "max |mean - 4101| %.2e",
                      monomials.size(), expected.size(), exact, worstQ2, worstMean)};
}

Outcome bpdnOracle() {
    Philox4x32 rng(5005);
    int matched = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = 4 + static_cast<int>(rng.below(7));
        const int cols = rows + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(12 - rows)));
        const int s = 1 + static_cast<int>(rng.below(3));
        Matrix theta(rows, cols);
        for (int j = 0; j < cols; ++j) {
            theta.col(j) = oracle::gaussianVector(rng, rows);
        }
        Vector c = Vector::Zero(cols);
        for (int k = 0; k < s; ++k) {
            c[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(cols)))] = 2.0 * rng.uniform() - 1.0;
        }
        const Vector y = theta * c;
        BpdnOptions opts;
        opts.eta = trial % 2 == 0 ? 0.0 : 1e-8;
        const double expected = oracle::basisPursuitByEnumeration(theta, y);
        const double got = bpdnSolve(theta, y, opts).l1;
        const double err = std::abs(got - expected);
        worst = std::max(worst, err);
        matched += err <= 1e-6 ? 1 : 0;
    }
    return {matched == 50, fmt("%d/50 within 1e-6, worst |l1 - oracle| %.2e", matched, worst)};
}

Outcome rhoIdentity() {
    Philox4x32 rng(6006);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 2 + static_cast<int>(rng.below(3));
        const Eigen::Index n = 8 + static_cast<Eigen::Index>(rng.below(13));
        Dataset fine{oracle::uniformPoints(rng, n, d, -1, 1), oracle::gaussianVector(rng, n)};
        Dataset coarse{fine.X.topRows(n / 2), fine.y.head(n / 2)};
        const KernelSpec k = KernelSpec::gaussian(0.2 + 0.4 * rng.uniform());
        worst = std::max(worst, std::abs(rho(k, 0.0, fine, coarse) - rhoFromInterpolants(k, 0.0, fine, coarse)));
    }
    return {worst <= 1e-8, fmt("max |rho_quadratic - rho_interpolant| %.2e over 100 datasets", worst)};
}

Outcome kfGradient() {
    Philox4x32 rng(7007);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(4));
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(15));
        Dataset fine{oracle::uniformPoints(rng, n, d, -1, 1), oracle::gaussianVector(rng, n)};
        Dataset coarse{fine.X.topRows(n / 2), fine.y.head(n / 2)};
        const KernelFamily fam = KernelFamily::gaussianArd(d, true);
        Vector theta(d + 1);
        for (int j = 0; j < d; ++j) {
            theta[j] = 0.3 + 1.5 * rng.uniform();
        }
        theta[d] = std::pow(10.0, -4.0 + 3.0 * rng.uniform());
        const Vector g = rhoGrad(fam, theta, fine, coarse).gradient;
        const Vector fd = oracle::rhoFiniteDifference(fam, theta, fine, coarse);
        worst = std::max(worst, (g - fd).norm() / std::max(1e-12, fd.norm()));
    }
    return {worst <= 1e-5, fmt("max relative gradient error %.2e over 50 instances", worst)};
}

Outcome spectralOptimality() {
    Philox4x32 rng(8008);
    int violations = 0;
    int strictFailures = 0;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(30));
        const Vector c = oracle::gaussianVector(rng, n);
        const double kappa = 0.1 + 10.0 * rng.uniform();
        const SpectralSolution s = optimalSigmas(c, kappa);
        Vector star = Vector::Zero(n);
        for (std::size_t k = 0; k < s.retained.size(); ++k) {
            star[static_cast<Eigen::Index>(s.retained[k])] = s.sigmas[k];
        }
        const double best = normObjective(c, star);
        for (int j = 0; j < 100; ++j) {
            Vector sigma(n);
            for (Eigen::Index k = 0; k < n; ++k) {
                sigma[k] = -std::log(rng.uniformOpen());
            }
            // Mix towards the optimum so some pairs are close to it.
            sigma = kappa * sigma / sigma.sum();
            const double t = j % 4 == 0 ? rng.uniform() : 0.0;
            sigma = t * star + (1.0 - t) * sigma;
            const double value = normObjective(c, sigma);
            violations += value < best ? 1 : 0;
            if ((sigma - star).lpNorm<Eigen::Infinity>() > 1e-6 * kappa && !(value > best)) {
                ++strictFailures;
            }
        }
    }
    return {violations == 0 && strictFailures == 0,
            fmt("10000 pairs: %d below the optimum, %d non-strict away from it", violations, strictFailures)};
}

Outcome errorBound() {
    Philox4x32 rng(9009);
    int violations = 0;
    double worstRatio = 0.0;
    for (int target = 0; target < 100; ++target) {
        const int d = 2 + target % 3;
        const KernelSpec k = target % 2 == 0 ? KernelSpec::gaussian(0.3 + 0.5 * rng.uniform())
                                             : KernelSpec::matern(0.3 + rng.uniform(), MaternNu::FiveHalves);
        violations += oracle::errorBoundViolations(rng, k, d, 40, 20, 500, &worstRatio);
    }
    return {violations == 0, fmt("%d violations over 100 x 500 points, worst error/bound %.3f", violations, worstRatio)};
}

Outcome sobolCrossCheck() {
    auto basis = ishigamiBasis();
    const auto fn = ishigamiFunction();
    const GpcSurrogate g = projectQuadrature(basis, fn.model(), tensorRule(*basis, 12));
    const Vector coef = gpcSobolMain(g);
    const Vector pf = pickFreezeSobol(g.model(), fn.law, 100000, 10);
    const double gap = (coef - pf).cwiseAbs().maxCoeff();
    return {gap <= 0.02 && coef[2] <= 1e-6,
            fmt("coefficients (%.4f, %.4f, %.1e), pick-freeze (%.4f, %.4f, %.4f), max gap %.4f", coef[0], coef[1],
                coef[2], pf[0], pf[1], pf[2], gap)};
}

Outcome krrOrdering() {
    ExperimentConfig cfg;
    cfg.function = "ishigami";
    cfg.methods = {Method::KrrKf, Method::Sskrr};
    cfg.p = 10;
    cfg.nTrain = 100;
    cfg.nTest = 10000;
    cfg.seeds = tenSeeds();
    cfg.jobs = hardwareJobs();
    const ExperimentReport r = runExperiment(cfg);
    std::vector<double> krr;
    std::vector<double> sskrr;
    for (const auto &run : r.runs) {
        for (const auto &m : run.methods) {
            if (m.ok && m.scores.q2) {
                (m.method == Method::KrrKf ? krr : sskrr).push_back(*m.scores.q2);
            }
        }
    }
    if (krr.size() != 10 || sskrr.size() != 10) {
        return {false, fmt("only %zu KRR and %zu SSKRR fits succeeded", krr.size(), sskrr.size())};
    }
    const double mk = median(krr);
    const double ms = median(sskrr);
    return {ms > mk && mk >= 0.6 && mk <= 0.97, fmt("median Q2: SSKRR %.6f, KRR-KF %.6f", ms, mk)};
}

Outcome metricProperties() {
    Philox4x32 rng(1212);
    double identity = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(200));
        const Vector truth = oracle::gaussianVector(rng, n);
        const Vector pred = truth + 0.3 * oracle::gaussianVector(rng, n);
        const ScoreReport s = score(pred, truth);
        const double ss = (truth.array() - truth.mean()).square().sum();
        identity = std::max(identity, std::abs(*s.q2 - (1.0 - s.rmse * s.rmse * static_cast<double>(n) / ss)));
    }
    const Vector a = oracle::gaussianVector(rng, 100000);
    const Vector b = (oracle::gaussianVector(rng, 100000).array() + 1.0).matrix();
    const double self = compareDensities(a, a).kl;
    const double shifted = compareDensities(a, b).kl;
    const bool pass = identity <= 1e-12 && self == 0.0 && std::abs(shifted - 0.5) <= 0.025;
    return {pass, fmt("Q2-RMSE identity error %.1e, KL(p,p) %.1e, KL(N(0,1)||N(1,1)) %.4f", identity, self, shifted)};
}

struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char **argv) {
    const std::vector<Criterion> all{
        {1, "orthonormality", orthonormality},
        {2, "full gPC Ishigami", fullGpcIshigami},
        {3, "sparse recovery Ishigami", sparseIshigami},
        {4, "Rosenbrock support", rosenbrockRecovery},
        {5, "BPDN oracle", bpdnOracle},
        {6, "rho identity", rhoIdentity},
        {7, "Kernel Flow gradient", kfGradient},
        {8, "spectral optimality", spectralOptimality},
        {9, "RKHS error bound", errorBound},
        {10, "Sobol cross-check", sobolCrossCheck},
        {11, "KRR vs SSKRR", krrOrdering},
        {12, "metric properties", metricProperties},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    int failed = 0;
    for (const auto &c : all) {
        if (!selected.empty() && !selected.contains(c.id)) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %2d %-26s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
