#include <numbers>

#include <benchmark/benchmark.h>

#include "kernlearn/benchfn.hpp"
#include "kernlearn/gpc.hpp"
#include "kernlearn/kernelflow.hpp"
#include "kernlearn/regression.hpp"
#include "kernlearn/sampling.hpp"
#include "kernlearn/skrr.hpp"
#include "kernlearn/sparse.hpp"

using namespace kernlearn;

namespace {

constexpr double kPi = std::numbers::pi;

Dataset ishigamiData(Eigen::Index n, std::uint64_t seed) {
    const auto fn = ishigamiFunction();
    const PointSet x = sample(DesignSpec::cube(Law::Uniform, 3, -kPi, kPi, n, seed));
    return {x, fn.evaluate(x)};
}

std::shared_ptr<const TensorBasis> ishigamiBasis(int p) {
    return std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(-kPi, kPi), 3, p));
}

void BM_GaussianGram(benchmark::State &state) {
    const Dataset d = ishigamiData(state.range(0), 1);
    const KernelSpec k = KernelSpec::gaussian(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gram(k, d.X));
    }
}
BENCHMARK(BM_GaussianGram)->Arg(100)->Arg(400)->Arg(1000);

void BM_FitAndPredict(benchmark::State &state) {
    const Dataset d = ishigamiData(state.range(0), 2);
    const Dataset q = ishigamiData(1000, 3);
    const KernelSpec k = KernelSpec::gaussianArd({1.0, 1.5, 2.0});
    for (auto _ : state) {
        const TrainedRegressor m = fit(k, 1e-6, d);
        benchmark::DoNotOptimize(m.predictMean(q.X));
    }
}
BENCHMARK(BM_FitAndPredict)->Arg(100)->Arg(400);

void BM_ThetaBuild(benchmark::State &state) {
    auto basis = ishigamiBasis(static_cast<int>(state.range(0)));
    const Dataset d = ishigamiData(1000, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(buildTheta(*basis, d.X));
    }
}
BENCHMARK(BM_ThetaBuild)->Arg(6)->Arg(10);

void BM_Bpdn(benchmark::State &state) {
    auto basis = ishigamiBasis(10);
    const Dataset d = ishigamiData(state.range(0), 5);
    const Matrix theta = buildTheta(*basis, d.X);
    BpdnOptions opts;
    opts.eta = 1e-6;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bpdnSolve(theta, d.y, opts));
    }
}
BENCHMARK(BM_Bpdn)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FullGpcProjection(benchmark::State &state) {
    auto basis = ishigamiBasis(10);
    const auto fn = ishigamiFunction();
    const QuadratureRule rule = tensorRule(*basis, 12);
    for (auto _ : state) {
        benchmark::DoNotOptimize(projectQuadrature(basis, fn.model(), rule));
    }
}
BENCHMARK(BM_FullGpcProjection)->Unit(benchmark::kMillisecond);

void BM_SskrrFit(benchmark::State &state) {
    auto basis = ishigamiBasis(10);
    const Dataset d = ishigamiData(100, 6);
    const SparseCoefficients c = bpdnSolve(buildTheta(*basis, d.X), d.y, {.eta = 1e-6});
    for (auto _ : state) {
        benchmark::DoNotOptimize(sskrrFromCoefficients(basis, d, 1e-8, c));
    }
}
BENCHMARK(BM_SskrrFit)->Unit(benchmark::kMillisecond);

void BM_RhoGrad(benchmark::State &state) {
    const Dataset fine = ishigamiData(state.range(0), 7);
    const Dataset coarse{fine.X.topRows(fine.X.rows() / 2), fine.y.head(fine.y.size() / 2)};
    const KernelFamily fam = KernelFamily::gaussianArd(3, true);
    Vector theta(4);
    theta << 1.0, 1.5, 2.0, 1e-6;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rhoGrad(fam, theta, fine, coarse));
    }
}
BENCHMARK(BM_RhoGrad)->Arg(50)->Arg(100);

} // namespace

BENCHMARK_MAIN();
