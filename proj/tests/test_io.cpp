#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "kernlearn/errors.hpp"
#include "kernlearn/io.hpp"
#include "kernlearn/sparse.hpp"
#include "oracles.hpp"

using namespace kernlearn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / "kernlearn-test-io";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("shortest round-trip formatting") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 13.8445, 0.0}) {
        CHECK(std::stod(formatDouble(v)) == v);
    }
    CHECK(formatDouble(0.5) == "0.5");
    CHECK(formatDouble(3.0) == "3");
}

TEST_CASE("dataset CSV round trip") {
    Philox4x32 rng(1);
    Dataset d{oracle::uniformPoints(rng, 7, 3, -1, 1), oracle::gaussianVector(rng, 7)};
    const fs::path p = scratch("data.csv");
    writeDatasetCsv(p, d);
    const Dataset back = readDatasetCsv(p);
    CHECK(back.X == d.X);
    CHECK(back.y == d.y);
    CHECK(readPointsCsv(p) == d.X);
}

TEST_CASE("CSV errors carry the path") {
    const fs::path p = scratch("bad.csv");
    {
        std::ofstream out(p);
        out << "x1,y\n1,abc\n";
    }
    try {
        (void)readDatasetCsv(p);
        FAIL("expected an error");
    } catch (const IoError &e) {
        CHECK(std::string(e.what()).find("bad.csv") != std::string::npos);
    }
    CHECK_THROWS_AS((void)readCsv(scratch("missing.csv")), IoError);
    {
        std::ofstream out(p);
        out << "a,b\n1,2\n";
    }
    CHECK_THROWS_AS((void)readDatasetCsv(p), IoError);
}

TEST_CASE("basis and kernel JSON round trips") {
    const TensorBasis b({UnivariateFamily::legendre(-2, 3), UnivariateFamily::jacobi(4, 2, 0, 1)}, multiIndices(2, 3));
    CHECK(basisFromJson(toJson(b)) == b);
    const TensorBasis custom({UnivariateFamily::legendre(), UnivariateFamily::legendre()}, customIndices(2, {{0, 0}, {2, 1}}));
    CHECK(basisFromJson(toJson(custom)) == custom);

    auto bp = std::make_shared<const TensorBasis>(b);
    const std::vector<KernelSpec> kernels{
        KernelSpec::gaussian(0.4),         KernelSpec::gaussianArd({0.1, 2.0}),
        KernelSpec::polynomial(1.0, 2.0),  KernelSpec::matern(0.3, MaternNu::FiveHalves),
        KernelSpec::rationalQuadratic(2.0, 0.5), spectralKernel(bp, {0, 3, 7}, {0.5, 0.25, 0.125}),
    };
    Eigen::RowVector2d x(0.3, 0.4);
    Eigen::RowVector2d y(-0.2, 0.9);
    for (const auto &k : kernels) {
        const KernelSpec back = kernelFromJson(toJson(k));
        CHECK(back.name() == k.name());
        CHECK(kernelEval(back, x, y) == kernelEval(k, x, y));
    }
}

TEST_CASE("regressor and gPC JSON round trips") {
    Philox4x32 rng(2);
    Dataset d{oracle::uniformPoints(rng, 12, 2, -1, 1), oracle::gaussianVector(rng, 12)};
    const auto model = fit(KernelSpec::gaussian(0.5), 1e-6, d);
    const fs::path p = scratch("model.json");
    writeJson(p, toJson(model));
    const TrainedRegressor back = regressorFromJson(readJson(p));
    const PointSet q = oracle::uniformPoints(rng, 20, 2, -1, 1);
    CHECK(back.predictMean(q) == model.predictMean(q));

    Json tampered = toJson(model);
    tampered["alpha"][0] = tampered["alpha"][0].get<double>() + 1.0;
    CHECK_THROWS_AS((void)regressorFromJson(tampered), IoError);

    auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(UnivariateFamily::legendre(), 2, 3));
    const GpcSurrogate g(basis, oracle::gaussianVector(rng, static_cast<Eigen::Index>(basis->size())), GpcProvenance::Bpdn);
    const GpcSurrogate gb = gpcFromJson(toJson(g));
    CHECK(gb.coeffs() == g.coeffs());
    CHECK((gb.provenance() == GpcProvenance::Bpdn));
    CHECK(gb.basis() == g.basis());
}

TEST_CASE("coefficient export layout") {
    const TensorBasis b = TensorBasis::totalOrder(UnivariateFamily::legendre(), 2, 1);
    Vector c(3);
    c << 1.5, 0.0, -2.0;
    const fs::path p = scratch("coef.csv");
    writeCoefficientsCsv(p, b, c);
    const CsvTable t = readCsv(p);
    CHECK(t.header == std::vector<std::string>{"index", "i1", "i2", "value"});
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[2][3] == -2.0);
    CHECK_THROWS_AS(writeCoefficientsCsv(p, b, Vector::Zero(2)), InvalidArgument);
}
