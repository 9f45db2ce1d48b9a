// kernlearn command-line tool.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "kernlearn/errors.hpp"
#include "kernlearn/experiment.hpp"
#include "kernlearn/gpc.hpp"
#include "kernlearn/io.hpp"
#include "kernlearn/kernelflow.hpp"
#include "kernlearn/metrics.hpp"
#include "kernlearn/rng.hpp"
#include "kernlearn/sampling.hpp"
#include "kernlearn/skrr.hpp"
#include "kernlearn/sparse.hpp"

namespace fs = std::filesystem;
using namespace kernlearn;

namespace {

constexpr const char *kOutputEnv = "KERNLEARN_OUTPUT_DIR";

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kPartial = 3 };

/// "1,2,5-8" -> {1, 2, 5, 6, 7, 8}
std::vector<std::uint64_t> parseSeedList(const std::string &text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        try {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(item));
                continue;
            }
            const auto lo = std::stoull(item.substr(0, dash));
            const auto hi = std::stoull(item.substr(dash + 1));
            if (hi < lo || hi - lo > 1'000'000) {
                throw InvalidArgument("bad seed range '" + item + "'");
            }
            for (auto s = lo; s <= hi; ++s) {
                out.push_back(s);
            }
        } catch (const std::logic_error &) {
            throw InvalidArgument("bad seed list entry '" + item + "'");
        }
    }
    return out;
}

/// "lo:hi,lo:hi,..."; a single pair applies to every dimension when d > 0.
std::vector<std::pair<double, double>> parsePairs(const std::string &text, const char *what) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw InvalidArgument(std::string(what) + ": expected a:b pairs, got '" + item + "'");
        }
        try {
            out.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
        } catch (const std::logic_error &) {
            throw InvalidArgument(std::string(what) + ": bad number in '" + item + "'");
        }
    }
    return out;
}

fs::path outputDir(const std::string &flag, const std::string &fallback) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char *env = std::getenv(kOutputEnv); env && *env) {
        return env;
    }
    return fallback;
}

void ensureDir(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

std::vector<UnivariateFamily> familiesFor(const std::string &family, const std::vector<std::pair<double, double>> &bounds,
                                          const std::vector<std::pair<double, double>> &shapes) {
    std::vector<UnivariateFamily> fams;
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        if (family == "legendre") {
            fams.push_back(UnivariateFamily::legendre(bounds[j].first, bounds[j].second));
        } else if (family == "jacobi") {
            if (shapes.empty()) {
                throw InvalidArgument("the jacobi family needs --beta-shapes");
            }
            const auto &s = shapes.size() == 1 ? shapes.front() : shapes.at(j);
            fams.push_back(UnivariateFamily::jacobi(s.first, s.second, bounds[j].first, bounds[j].second));
        } else {
            throw InvalidArgument("unknown family '" + family + "' (expected legendre or jacobi)");
        }
    }
    return fams;
}

std::vector<std::pair<double, double>> boundsFor(const PointSet &x, const std::string &flag) {
    if (!flag.empty()) {
        auto b = parsePairs(flag, "--bounds");
        if (b.size() == 1 && x.cols() > 1) {
            b.assign(static_cast<std::size_t>(x.cols()), b.front());
        }
        if (b.size() != static_cast<std::size_t>(x.cols())) {
            throw InvalidArgument("--bounds has " + std::to_string(b.size()) + " pairs for " +
                                  std::to_string(x.cols()) + " input columns");
        }
        return b;
    }
    std::vector<std::pair<double, double>> b;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double lo = x.col(j).minCoeff();
        const double hi = x.col(j).maxCoeff();
        if (!(lo < hi)) {
            throw DegenerateError("input column " + std::to_string(j + 1) + " is constant; pass --bounds");
        }
        b.emplace_back(lo, hi);
    }
    return b;
}

using Model = std::variant<GpcSurrogate, TrainedRegressor>;

Model loadModel(const fs::path &path) {
    const Json j = readJson(path);
    const auto type = j.value("type", std::string());
    if (type == "gpc") {
        return gpcFromJson(j);
    }
    if (type == "regressor") {
        return regressorFromJson(j);
    }
    throw IoError(path.string() + ": unknown model type '" + type + "'");
}

int modelDim(const Model &m) {
    return std::visit(
        [](const auto &x) {
            if constexpr (std::is_same_v<std::decay_t<decltype(x)>, GpcSurrogate>) {
                return x.basis().dim();
            } else {
                return x.dim();
            }
        },
        m);
}

void printScoreLine(std::ostream &os, const std::string &label, const Json &agg) {
    os << label;
    for (const char *metric : {"q2", "rmse", "mean", "variance", "sparsity"}) {
        if (agg.contains(metric)) {
            os << "  " << metric << "=" << formatDouble(agg.at(metric).at("median").get<double>());
        }
    }
    os << '\n';
}

// --------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string config;
    std::string function;
    std::string dataset;
    std::string methods;
    std::string seeds;
    std::uint64_t seed = 0;
    std::string output;
    std::string lambdaMode;
    std::string bounds;
    std::string betaShapes;
    std::string family;
    std::string law;
    int p = 0;
    Eigen::Index nTrain = 0;
    Eigen::Index nValidation = 0;
    Eigen::Index nTest = 0;
    double eta = 0.0;
    double delta = 0.0;
    double lambda = 0.0;
    double kappa = 0.0;
    int kfIterations = 0;
    double kfRate = 0.0;
    Eigen::Index sobolN = 0;
    int jobs = 1;
    bool paperLeakage = false;
    bool quiet = false;
};

void addBench(CLI::App &app, BenchArgs &a, std::function<int()> &run) {
    auto *cmd = app.add_subcommand("bench", "Run a benchmark experiment over several seeds");
    cmd->add_option("-c,--config", a.config, "JSON experiment config; flags override its keys")->check(CLI::ExistingFile);
    cmd->add_option("-f,--function", a.function, "Benchmark function (ishigami, rosenbrock)");
    cmd->add_option("--dataset", a.dataset, "CSV dataset (x1..xd,y) instead of a benchmark function")
        ->check(CLI::ExistingFile);
    cmd->add_option("-m,--method", a.methods, "Comma-separated methods, or all");
    cmd->add_option("--seeds", a.seeds, "Seed list, e.g. 1-10 or 3,7,11");
    cmd->add_option("--seed", a.seed, "Single seed");
    cmd->add_option("-j,--jobs", a.jobs, "Parallel seeds")->check(CLI::PositiveNumber);
    cmd->add_option("-o,--output", a.output, std::string("Output directory (else $") + kOutputEnv + ")");
    cmd->add_option("-p,--degree", a.p, "Total polynomial degree")->check(CLI::NonNegativeNumber);
    cmd->add_option("--family", a.family, "Basis family (legendre, jacobi)");
    cmd->add_option("--beta-shapes", a.betaShapes, "Beta shapes a:b per dimension (jacobi)");
    cmd->add_option("--bounds", a.bounds, "Input bounds lo:hi per dimension (dataset mode)");
    cmd->add_option("--law", a.law, "Training design law (lhs_maximin, uniform)");
    cmd->add_option("--n-train", a.nTrain, "Training points")->check(CLI::PositiveNumber);
    cmd->add_option("--n-validation", a.nValidation, "Validation points")->check(CLI::NonNegativeNumber);
    cmd->add_option("--n-test", a.nTest, "Test points")->check(CLI::PositiveNumber);
    cmd->add_option("--eta", a.eta, "BPDN residual bound")->check(CLI::NonNegativeNumber);
    cmd->add_option("--delta", a.delta, "Sparsity threshold")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda-mode", a.lambdaMode, "Nugget selection (fixed, grid, kf)");
    cmd->add_option("--lambda", a.lambda, "Nugget, or the Kernel Flow starting value")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kappa", a.kappa, "Spectral trace budget (default: sample variance of y)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--kf-iterations", a.kfIterations, "Kernel Flow iterations")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kf-rate", a.kfRate, "Kernel Flow learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--sobol-n", a.sobolN, "Pick-freeze sample size for kernel methods (0 skips)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--paper-leakage", a.paperLeakage, "Tune the nugget on the test set");
    cmd->add_flag("-q,--quiet", a.quiet, "No summary on stdout");

    run = [cmd, &a]() {
        ExperimentConfig cfg;
        if (!a.config.empty()) {
            cfg = ExperimentConfig::fromJson(readJson(a.config));
        }
        auto given = [cmd](const char *name) { return cmd->count(name) > 0; };
        if (given("--function")) {
            cfg.function = a.function;
            cfg.datasetPath.clear();
        }
        if (given("--dataset")) {
            cfg.datasetPath = a.dataset;
            cfg.function.clear();
        }
        if (given("--method")) {
            cfg.methods = parseMethods(a.methods);
        }
        if (cfg.methods.empty()) {
            cfg.methods = parseMethods("all");
        }
        if (given("--seeds")) {
            cfg.seeds = parseSeedList(a.seeds);
        }
        if (given("--seed")) {
            cfg.seeds = {a.seed};
        }
        if (cfg.seeds.empty() && a.config.empty()) {
            cfg.seeds = parseSeedList("1-10");
        }
        if (given("--jobs")) {
            cfg.jobs = a.jobs;
        }
        if (given("--degree")) {
            cfg.p = a.p;
        }
        if (given("--family")) {
            cfg.family = a.family;
        }
        if (given("--beta-shapes")) {
            cfg.betaShapes = parsePairs(a.betaShapes, "--beta-shapes");
        }
        if (given("--bounds")) {
            cfg.bounds = parsePairs(a.bounds, "--bounds");
        }
        if (given("--law")) {
            cfg.law = lawFromString(a.law);
        }
        if (given("--n-train")) {
            cfg.nTrain = a.nTrain;
        }
        if (given("--n-validation")) {
            cfg.nValidation = a.nValidation;
        }
        if (given("--n-test")) {
            cfg.nTest = a.nTest;
        }
        if (given("--eta")) {
            cfg.bpdn.eta = a.eta;
        }
        if (given("--delta")) {
            cfg.delta = a.delta;
        }
        if (given("--lambda-mode")) {
            cfg.lambdaMode = lambdaModeFromString(a.lambdaMode);
        }
        if (given("--lambda")) {
            cfg.lambda = a.lambda;
        }
        if (given("--kappa")) {
            cfg.kappa = a.kappa;
        }
        if (given("--kf-iterations")) {
            cfg.kf.iterations = a.kfIterations;
        }
        if (given("--kf-rate")) {
            cfg.kf.learningRate = a.kfRate;
        }
        if (given("--sobol-n")) {
            cfg.sobolN = a.sobolN;
        }
        if (a.paperLeakage) {
            cfg.paperLeakage = true;
        }
        const fs::path dir = outputDir(a.output, cfg.outputDir);
        cfg.outputDir = dir.string();

        const ExperimentReport report = runExperiment(cfg);
        reportRender(report, dir);
        const Json doc = readJson(dir / "report.json");
        if (!a.quiet) {
            for (const auto &[method, agg] : doc.at("aggregate").items()) {
                printScoreLine(std::cout, method, agg);
            }
            std::cout << "wrote " << (dir / "report.json").string() << '\n';
        }
        if (doc.at("partial").get<bool>()) {
            for (const auto &run : doc.at("runs")) {
                for (const auto &m : run.at("methods")) {
                    if (m.at("status") == "failed") {
                        std::cerr << "seed " << run.at("seed").get<std::uint64_t>() << " "
                                  << m.at("method").get<std::string>() << ": " << m.at("error").get<std::string>()
                                  << '\n';
                    }
                }
                if (run.contains("errors")) {
                    for (const auto &e : run.at("errors")) {
                        std::cerr << "seed " << run.at("seed").get<std::uint64_t>() << ": " << e.get<std::string>()
                                  << '\n';
                    }
                }
            }
            return kPartial;
        }
        return kOk;
    };
}

// --------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string data;
    std::string validation;
    std::string method = "sskrr";
    std::string out;
    std::string output;
    std::string family = "legendre";
    std::string bounds;
    std::string betaShapes;
    std::string lambdaMode = "fixed";
    int p = 4;
    double eta = 1e-6;
    double lambda = 1e-6;
    double kappa = 0.0;
    int nskrrIterations = 3;
    int kfIterations = 100;
    double kfRate = 0.05;
    std::uint64_t seed = 1;
};

Dataset requireValidation(const FitArgs &a) {
    if (a.validation.empty()) {
        throw InvalidArgument("nugget tuning needs --validation");
    }
    return readDatasetCsv(a.validation);
}

KfConfig kfConfigFor(const FitArgs &a, std::uint64_t tag) {
    KfConfig kf = defaultKf();
    kf.iterations = a.kfIterations;
    kf.learningRate = a.kfRate;
    kf.seed = deriveSeed(a.seed, tag);
    return kf;
}

void addFit(CLI::App &app, FitArgs &a, std::function<int()> &run) {
    auto *cmd = app.add_subcommand("fit", "Fit a surrogate to a CSV dataset and write the model as JSON");
    cmd->add_option("-d,--data", a.data, "Training CSV (x1..xd,y)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--validation", a.validation, "Validation CSV for nugget tuning")->check(CLI::ExistingFile);
    cmd->add_option("-m,--method", a.method, "sparse_gpc, sskrr, nskrr or krr_kf")
        ->check(CLI::IsMember({"sparse_gpc", "sskrr", "nskrr", "krr_kf"}));
    cmd->add_option("--out", a.out, "Model JSON path (default <output>/model.json)");
    cmd->add_option("-o,--output", a.output, std::string("Directory for side files (else $") + kOutputEnv + ")");
    cmd->add_option("-p,--degree", a.p, "Total polynomial degree")->check(CLI::NonNegativeNumber);
    cmd->add_option("--family", a.family, "Basis family")->check(CLI::IsMember({"legendre", "jacobi"}));
    cmd->add_option("--bounds", a.bounds, "Input bounds lo:hi per dimension (default: data range)");
    cmd->add_option("--beta-shapes", a.betaShapes, "Beta shapes a:b per dimension (jacobi)");
    cmd->add_option("--eta", a.eta, "BPDN residual bound")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda-mode", a.lambdaMode, "fixed, grid or kf")->check(CLI::IsMember({"fixed", "grid", "kf"}));
    cmd->add_option("--lambda", a.lambda, "Nugget, or the Kernel Flow starting value")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kappa", a.kappa, "Spectral trace budget")->check(CLI::PositiveNumber);
    cmd->add_option("--nskrr-iterations", a.nskrrIterations, "NSKRR projection rounds")->check(CLI::PositiveNumber);
    cmd->add_option("--kf-iterations", a.kfIterations, "Kernel Flow iterations")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kf-rate", a.kfRate, "Kernel Flow learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "Seed for Kernel Flow subsampling");

    run = [cmd, &a]() {
        const Dataset train = readDatasetCsv(a.data);
        const fs::path dir = outputDir(a.output, ".");
        const fs::path out = a.out.empty() ? dir / "model.json" : fs::path(a.out);
        if (out.has_parent_path()) {
            ensureDir(out.parent_path());
        }
        ensureDir(dir);
        const std::optional<double> kappa = cmd->count("--kappa") ? std::optional<double>(a.kappa) : std::nullopt;
        const LambdaMode mode = lambdaModeFromString(a.lambdaMode);

        if (a.method == "krr_kf") {
            const int d = train.dim();
            const KernelFamily family = KernelFamily::gaussianArd(d, true);
            Vector theta0(d + 1);
            theta0.head(d).setConstant(meanPairwiseDistance(train.X));
            theta0[d] = a.lambda;
            const Dataset val = a.validation.empty() ? Dataset{} : readDatasetCsv(a.validation);
            const KfTrace trace = kfRun(train, val, family, theta0, kfConfigFor(a, 20));
            const TrainedRegressor model = fit(family.kernel(trace.thetaStar), family.nugget(trace.thetaStar), train);
            writeJson(out, toJson(model));
            writeKfTraceCsv(dir / "kf_trace.csv", trace);
            std::cout << "wrote " << out.string() << '\n';
            return kOk;
        }

        auto basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(
            familiesFor(a.family, boundsFor(train.X, a.bounds), parsePairs(a.betaShapes.empty() ? "" : a.betaShapes,
                                                                            "--beta-shapes")),
            a.p));
        BpdnOptions bpdn;
        bpdn.eta = a.eta;

        if (a.method == "sparse_gpc") {
            const SparseCoefficients c = bpdnSolve(buildTheta(*basis, train.X), train.y, bpdn);
            const GpcSurrogate g(basis, c.c, GpcProvenance::Bpdn);
            writeJson(out, toJson(g));
            writeCoefficientsCsv(dir / "coefficients.csv", *basis, c.c);
            std::cout << "wrote " << out.string() << " (sparsity " << sparsity(c.c) << " of " << basis->size()
                      << ")\n";
            return kOk;
        }

        std::optional<QuadratureRule> rule;
        std::optional<SparseCoefficients> coeffs;
        NskrrOptions nopts;
        nopts.iterations = a.nskrrIterations;
        nopts.kappa = kappa;
        if (a.method == "nskrr") {
            rule = tensorRule(*basis, lobattoNodesForDegree(2 * a.p));
        } else {
            coeffs = bpdnSolve(buildTheta(*basis, train.X), train.y, bpdn);
        }
        auto build = [&](double lambda) {
            if (rule) {
                NskrrResult r = nskrrFit(basis, train, lambda, *rule, nopts);
                return std::make_pair(std::move(r.regressor), std::move(r.spectral));
            }
            SskrrResult r = sskrrFromCoefficients(basis, train, lambda, *coeffs, kappa);
            return std::make_pair(std::move(r.regressor), std::move(r.spectral));
        };

        double lambda = a.lambda;
        if (mode == LambdaMode::Grid) {
            const Dataset val = requireValidation(a);
            lambda = tuneLambdaGrid([&](double l) { return build(l).first; }, val).lambda;
        } else if (mode == LambdaMode::Kf) {
            const Dataset val = requireValidation(a);
            const LambdaTuning t = tuneLambdaKf(build(a.lambda).first.kernel(), train, val, a.lambda, kfConfigFor(a, 7));
            writeKfTraceCsv(dir / "kf_trace.csv", *t.trace);
            lambda = t.lambda;
        }
        const auto [model, spectral] = build(lambda);
        writeJson(out, toJson(model));
        writeSpectralCsv(dir / "spectral.csv", *basis, spectral);
        if (coeffs) {
            writeCoefficientsCsv(dir / "coefficients.csv", *basis, coeffs->c);
        }
        std::cout << "wrote " << out.string() << " (lambda " << formatDouble(lambda) << ", "
                  << spectral.retained.size() << " spectral terms)\n";
        return kOk;
    };
}

// --------------------------------------------------------------------------
// predict

struct PredictArgs {
    std::string model;
    std::string input;
    std::string out;
};

void addPredict(CLI::App &app, PredictArgs &a, std::function<int()> &run) {
    auto *cmd = app.add_subcommand("predict", "Evaluate a model JSON on CSV inputs");
    cmd->add_option("--model", a.model, "Model JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("-i,--input", a.input, "CSV inputs (x1..xd[,y])")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Output CSV (default stdout)");

    run = [&a]() {
        const Model model = loadModel(a.model);
        const PointSet x = readPointsCsv(a.input);
        if (x.cols() != modelDim(model)) {
            throw InvalidArgument(a.input + ": " + std::to_string(x.cols()) + " input columns, model expects " +
                                  std::to_string(modelDim(model)));
        }
        Vector mean;
        Vector var;
        if (const auto *g = std::get_if<GpcSurrogate>(&model)) {
            mean = g->eval(x);
            var = Vector::Zero(x.rows());
        } else {
            const auto &r = std::get<TrainedRegressor>(model);
            mean = r.predictMean(x);
            var = r.predictVariance(x);
        }
        CsvTable t;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            t.header.push_back("x" + std::to_string(j + 1));
        }
        t.header.emplace_back("mean");
        t.header.emplace_back("variance");
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            std::vector<double> row;
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                row.push_back(x(i, j));
            }
            row.push_back(mean[i]);
            row.push_back(var[i]);
            t.rows.push_back(std::move(row));
        }
        if (!a.out.empty()) {
            writeCsv(a.out, t);
            return kOk;
        }
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            std::cout << (c ? "," : "") << t.header[c];
        }
        std::cout << '\n';
        for (const auto &row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::cout << (c ? "," : "") << formatDouble(row[c]);
            }
            std::cout << '\n';
        }
        return kOk;
    };
}

// --------------------------------------------------------------------------
// sobol

struct SobolArgs {
    std::string model;
    std::string bounds;
    std::string out;
    Eigen::Index n = 0;
    std::uint64_t seed = 1;
};

void addSobol(CLI::App &app, SobolArgs &a, std::function<int()> &run) {
    auto *cmd = app.add_subcommand("sobol", "First-order Sobol' indices of a model JSON");
    cmd->add_option("--model", a.model, "Model JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("-n,--samples", a.n,
                    "Pick-freeze sample size; gPC models use their coefficients unless this is set")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--bounds", a.bounds, "Uniform input box lo:hi per dimension (default: training range)");
    cmd->add_option("--seed", a.seed, "Pick-freeze seed");
    cmd->add_option("--out", a.out, "Write the result JSON here as well");

    run = [&a]() {
        const Model model = loadModel(a.model);
        Json j;
        Vector s;
        if (const auto *g = std::get_if<GpcSurrogate>(&model); g && a.n == 0) {
            s = gpcSobolMain(*g);
            j["source"] = "coefficients";
        } else {
            DesignSpec law;
            law.law = Law::Uniform;
            if (!a.bounds.empty() || g) {
                if (g && a.bounds.empty()) {
                    for (const auto &f : g->basis().families()) {
                        law.bounds.emplace_back(f.lo, f.hi);
                    }
                } else {
                    law.bounds = parsePairs(a.bounds, "--bounds");
                }
            } else {
                law.bounds = boundsFor(std::get<TrainedRegressor>(model).trainInputs(), "");
            }
            if (law.bounds.size() == 1 && modelDim(model) > 1) {
                law.bounds.assign(static_cast<std::size_t>(modelDim(model)), law.bounds.front());
            }
            const BatchModel f = std::visit(
                [](const auto &m) -> BatchModel {
                    auto shared = std::make_shared<const std::decay_t<decltype(m)>>(m);
                    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, GpcSurrogate>) {
                        return [shared](const PointSet &x) { return shared->eval(x); };
                    } else {
                        return [shared](const PointSet &x) { return shared->predictMean(x); };
                    }
                },
                model);
            const Eigen::Index n = a.n == 0 ? 10'000 : a.n;
            s = pickFreezeSobol(f, law, n, a.seed);
            j["source"] = "pick_freeze";
            j["n"] = n;
            j["seed"] = a.seed;
        }
        j["first_order"] = std::vector<double>(s.data(), s.data() + s.size());
        const std::string text = j.dump(2);
        std::cout << text << '\n';
        if (!a.out.empty()) {
            writeJson(a.out, j);
        }
        return kOk;
    };
}

// --------------------------------------------------------------------------
// tune

struct TuneArgs {
    std::string data;
    std::string validation;
    std::string mode = "grid";
    std::string kernel = "sskrr";
    std::string output;
    std::string bounds;
    int p = 4;
    double eta = 1e-6;
    double lambda0 = 1e-6;
    double lengthScale = 0.0;
    double gridMin = 1e-12;
    double gridMax = 1e-1;
    int gridPoints = 45;
    int kfIterations = 100;
    double kfRate = 0.05;
    std::uint64_t seed = 1;
};

void addTune(CLI::App &app, TuneArgs &a, std::function<int()> &run) {
    auto *cmd = app.add_subcommand("tune", "Select the nugget by grid search or Kernel Flow");
    cmd->add_option("-d,--data", a.data, "Training CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--validation", a.validation, "Tuning CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mode", a.mode, "grid or kf")->check(CLI::IsMember({"grid", "kf"}));
    cmd->add_option("--kernel", a.kernel, "sskrr (BPDN spectral kernel) or gaussian")
        ->check(CLI::IsMember({"sskrr", "gaussian"}));
    cmd->add_option("-p,--degree", a.p, "Total degree for sskrr")->check(CLI::NonNegativeNumber);
    cmd->add_option("--bounds", a.bounds, "Input bounds lo:hi per dimension (default: data range)");
    cmd->add_option("--eta", a.eta, "BPDN residual bound")->check(CLI::NonNegativeNumber);
    cmd->add_option("--length-scale", a.lengthScale, "Gaussian length scale (default: mean pairwise distance)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lambda0", a.lambda0, "Kernel Flow starting nugget")->check(CLI::PositiveNumber);
    cmd->add_option("--grid-min", a.gridMin, "Smallest grid value")->check(CLI::PositiveNumber);
    cmd->add_option("--grid-max", a.gridMax, "Largest grid value")->check(CLI::PositiveNumber);
    cmd->add_option("--grid-points", a.gridPoints, "Grid size")->check(CLI::PositiveNumber);
    cmd->add_option("--kf-iterations", a.kfIterations, "Kernel Flow iterations")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kf-rate", a.kfRate, "Kernel Flow learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "Kernel Flow seed");
    cmd->add_option("-o,--output", a.output, std::string("Output directory (else $") + kOutputEnv + ")");

    run = [&a]() {
        const Dataset train = readDatasetCsv(a.data);
        const Dataset val = readDatasetCsv(a.validation);
        const fs::path dir = outputDir(a.output, ".");
        ensureDir(dir);

        std::function<TrainedRegressor(double)> factory;
        std::optional<KernelSpec> kernel;
        if (a.kernel == "gaussian") {
            kernel = KernelSpec::gaussian(a.lengthScale > 0.0 ? a.lengthScale : meanPairwiseDistance(train.X));
            factory = [&](double l) { return fit(*kernel, l, train); };
        } else {
            auto basis = std::make_shared<const TensorBasis>(
                TensorBasis::totalOrder(familiesFor("legendre", boundsFor(train.X, a.bounds), {}), a.p));
            BpdnOptions bpdn;
            bpdn.eta = a.eta;
            auto coeffs = std::make_shared<const SparseCoefficients>(bpdnSolve(buildTheta(*basis, train.X), train.y, bpdn));
            kernel = sskrrFromCoefficients(basis, train, a.lambda0, *coeffs).regressor.kernel();
            factory = [basis, coeffs, &train](double l) {
                return sskrrFromCoefficients(basis, train, l, *coeffs).regressor;
            };
        }

        Json j;
        j["mode"] = a.mode;
        j["kernel"] = a.kernel;
        if (a.mode == "grid") {
            const LambdaTuning t = tuneLambdaGrid(factory, val, LambdaGrid{a.gridMin, a.gridMax, a.gridPoints});
            j["lambda"] = t.lambda;
            j["grid"] = t.grid;
            Json rm = Json::array();
            for (double v : t.rmse) {
                rm.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
            }
            j["rmse"] = rm;
        } else {
            KfConfig kf = defaultKf();
            kf.iterations = a.kfIterations;
            kf.learningRate = a.kfRate;
            kf.seed = deriveSeed(a.seed, 7);
            const LambdaTuning t = tuneLambdaKf(*kernel, train, val, a.lambda0, kf);
            j["lambda"] = t.lambda;
            j["kf"] = toJson(*t.trace);
            writeKfTraceCsv(dir / "kf_trace.csv", *t.trace);
        }
        writeJson(dir / "tuning.json", j);
        std::cout << "lambda* = " << formatDouble(j.at("lambda").get<double>()) << '\n';
        return kOk;
    };
}

// --------------------------------------------------------------------------
// report

struct ReportArgs {
    std::string input;
    std::string output;
};

void addReport(CLI::App &app, ReportArgs &a, std::function<int()> &run) {
    auto *cmd = app.add_subcommand("report", "Recompute aggregates of a report.json and rewrite its tables");
    cmd->add_option("-i,--input", a.input, "report.json, or a directory containing one")->required()
        ->check(CLI::ExistingPath);
    cmd->add_option("-o,--output", a.output, std::string("Output directory (else $") + kOutputEnv +
                                                 ", else next to the input)");

    run = [&a]() {
        fs::path in = a.input;
        if (fs::is_directory(in)) {
            in /= "report.json";
        }
        Json doc = readJson(in);
        if (!doc.contains("runs")) {
            throw IoError(in.string() + ": not a report (no 'runs')");
        }
        doc["aggregate"] = aggregateRuns(doc.at("runs"));
        bool partial = false;
        for (const auto &r : doc.at("runs")) {
            partial = partial || r.value("status", std::string()) == "partial";
        }
        doc["partial"] = partial;
        const fs::path dir = outputDir(a.output, in.parent_path().empty() ? fs::path(".") : in.parent_path());
        renderReportJson(doc, dir);
        for (const auto &[method, agg] : doc.at("aggregate").items()) {
            printScoreLine(std::cout, method, agg);
        }
        return partial ? kPartial : kOk;
    };
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"kernlearn: kernel and polynomial-chaos surrogate models"};
    app.set_version_flag("--version", std::string(libraryVersion()));
    app.require_subcommand(1);

    BenchArgs bench;
    FitArgs fitArgs;
    PredictArgs predict;
    SobolArgs sobol;
    TuneArgs tune;
    ReportArgs report;
    std::function<int()> runBench, runFit, runPredict, runSobol, runTune, runReport;
    addBench(app, bench, runBench);
    addFit(app, fitArgs, runFit);
    addPredict(app, predict, runPredict);
    addSobol(app, sobol, runSobol);
    addTune(app, tune, runTune);
    addReport(app, report, runReport);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    const std::vector<std::pair<const char *, std::function<int()> *>> table{
        {"bench", &runBench}, {"fit", &runFit},   {"predict", &runPredict},
        {"sobol", &runSobol}, {"tune", &runTune}, {"report", &runReport}};
    try {
        for (const auto &[name, fn] : table) {
            if (app.got_subcommand(name)) {
                return (*fn)();
            }
        }
    } catch (const InvalidArgument &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
