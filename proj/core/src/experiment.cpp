#include "kernlearn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "kernlearn/errors.hpp"
#include "kernlearn/gpc.hpp"
#include "kernlearn/rng.hpp"

#ifndef KERNLEARN_VERSION
#define KERNLEARN_VERSION "0.0.0"
#endif

namespace kernlearn {

namespace fs = std::filesystem;

const char *libraryVersion() noexcept {
    return KERNLEARN_VERSION;
}

// ---------------------------------------------------------------------------
// Enumerations

std::string toString(Method m) {
    switch (m) {
    case Method::FullGpc:
        return "full_gpc";
    case Method::SparseGpc:
        return "sparse_gpc";
    case Method::KrrKf:
        return "krr_kf";
    case Method::Sskrr:
        return "sskrr";
    case Method::Nskrr:
        return "nskrr";
    }
    return "sskrr";
}

Method methodFromString(const std::string &s) {
    for (Method m : {Method::FullGpc, Method::SparseGpc, Method::KrrKf, Method::Sskrr, Method::Nskrr}) {
        if (toString(m) == s) {
            return m;
        }
    }
    throw InvalidArgument("unknown method '" + s + "' (expected full_gpc, sparse_gpc, krr_kf, sskrr, nskrr or all)");
}

std::vector<Method> parseMethods(const std::string &list) {
    std::vector<Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) {
            continue;
        }
        if (item == "all") {
            for (Method m : {Method::FullGpc, Method::SparseGpc, Method::KrrKf, Method::Sskrr}) {
                if (std::find(out.begin(), out.end(), m) == out.end()) {
                    out.push_back(m);
                }
            }
            continue;
        }
        const Method m = methodFromString(item);
        if (std::find(out.begin(), out.end(), m) == out.end()) {
            out.push_back(m);
        }
    }
    return out;
}

std::string toString(LambdaMode m) {
    switch (m) {
    case LambdaMode::Fixed:
        return "fixed";
    case LambdaMode::Grid:
        return "grid";
    case LambdaMode::Kf:
        return "kf";
    }
    return "grid";
}

LambdaMode lambdaModeFromString(const std::string &s) {
    if (s == "fixed") {
        return LambdaMode::Fixed;
    }
    if (s == "grid") {
        return LambdaMode::Grid;
    }
    if (s == "kf") {
        return LambdaMode::Kf;
    }
    throw InvalidArgument("unknown lambda mode '" + s + "' (expected fixed, grid or kf)");
}

// ---------------------------------------------------------------------------
// Lambda tuning

std::vector<double> LambdaGrid::values() const {
    if (!(lo > 0.0) || !(hi >= lo) || points < 1) {
        throw InvalidArgument("lambda grid: need 0 < lo <= hi and at least one point");
    }
    std::vector<double> v(static_cast<std::size_t>(points));
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
        v[static_cast<std::size_t>(i)] = std::pow(10.0, a + t * (b - a));
    }
    return v;
}

namespace {

double rmseOf(const Vector &pred, const Vector &truth) {
    return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(truth.size()));
}

} // namespace

LambdaTuning tuneLambdaGrid(const RegressorFactory &factory, const Dataset &tuning, const LambdaGrid &grid) {
    if (tuning.size() == 0) {
        throw InvalidArgument("tune_lambda: tuning set is empty");
    }
    tuning.validate();
    LambdaTuning out;
    out.grid = grid.values();
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double lambda : out.grid) {
        double r = std::numeric_limits<double>::infinity();
        try {
            r = rmseOf(factory(lambda).predictMean(tuning.X), tuning.y);
        } catch (const SingularMatrixError &) {
        } catch (const NumericalError &) {
        }
        if (!std::isfinite(r)) {
            r = std::numeric_limits<double>::infinity();
        }
        out.rmse.push_back(r);
        if (r < best) {
            best = r;
            out.lambda = lambda;
            found = true;
        }
    }
    if (!found) {
        throw NumericalError("tune_lambda: every grid value produced a singular fit");
    }
    return out;
}

LambdaTuning tuneLambdaKf(const KernelSpec &kernel, const Dataset &train, const Dataset &tuning, double lambda0,
                          const KfConfig &config) {
    if (tuning.size() == 0) {
        throw InvalidArgument("tune_lambda: tuning set is empty");
    }
    const KernelFamily family = KernelFamily::fixed(kernel);
    Vector theta0(1);
    theta0[0] = lambda0;
    KfTrace trace = kfRun(train, tuning, family, theta0, config);
    LambdaTuning out;
    out.lambda = trace.thetaStar[0];
    out.trace = std::move(trace);
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    if (function.empty() == datasetPath.empty()) {
        throw InvalidArgument("config: exactly one of 'function' and 'dataset' must be given");
    }
    if (methods.empty()) {
        throw InvalidArgument("config: no methods selected");
    }
    if (seeds.empty()) {
        throw InvalidArgument("config: seed list is empty");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw InvalidArgument("config: seeds must be distinct");
    }
    if (p < 0) {
        throw InvalidArgument("config: p must be >= 0");
    }
    if (family != "legendre" && family != "jacobi") {
        throw InvalidArgument("config: family must be legendre or jacobi");
    }
    if (family == "jacobi" && betaShapes.empty()) {
        throw InvalidArgument("config: the jacobi family needs beta_shapes");
    }
    if (!function.empty()) {
        if (nTrain < 1 || nTest < 2) {
            throw InvalidArgument("config: n_train must be >= 1 and n_test >= 2");
        }
        if (nValidation < 0) {
            throw InvalidArgument("config: n_validation must be >= 0");
        }
    }
    if (!(bpdn.eta >= 0.0)) {
        throw InvalidArgument("config: eta must be >= 0");
    }
    if (!(delta > 0.0)) {
        throw InvalidArgument("config: delta must be > 0");
    }
    if (!(lambda >= 0.0)) {
        throw InvalidArgument("config: lambda must be >= 0");
    }
    if (lambdaMode == LambdaMode::Kf && !(lambda > 0.0)) {
        throw InvalidArgument("config: kf lambda tuning needs a positive starting lambda");
    }
    if (jobs < 1) {
        throw InvalidArgument("config: jobs must be >= 1");
    }
    if (kdePoints < 2) {
        throw InvalidArgument("config: kde_points must be >= 2");
    }
    if (sobolN != 0 && sobolN < 2) {
        throw InvalidArgument("config: sobol_n must be 0 or >= 2");
    }
    if (kappa && !(*kappa > 0.0)) {
        throw InvalidArgument("config: kappa must be > 0");
    }
    const bool needsTuningSet = lambdaMode != LambdaMode::Fixed ||
                                std::find(methods.begin(), methods.end(), Method::KrrKf) != methods.end();
    if (!function.empty() && needsTuningSet && nValidation < 1 && !paperLeakage) {
        throw InvalidArgument("config: lambda tuning and krr_kf need n_validation >= 1 (or paper_leakage)");
    }
    (void)grid.values();
}

namespace {

Json pairsToJson(const std::vector<std::pair<double, double>> &v) {
    Json a = Json::array();
    for (const auto &[x, y] : v) {
        a.push_back({x, y});
    }
    return a;
}

std::vector<std::pair<double, double>> pairsFromJson(const Json &j, const char *key) {
    std::vector<std::pair<double, double>> out;
    if (!j.is_array()) {
        throw InvalidArgument(std::string("config: '") + key + "' must be an array of pairs");
    }
    for (const auto &e : j) {
        if (!e.is_array() || e.size() != 2) {
            throw InvalidArgument(std::string("config: '") + key + "' entries must be [a, b] pairs");
        }
        out.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return out;
}

} // namespace

Json ExperimentConfig::toJson() const {
    Json j;
    if (!function.empty()) {
        j["function"] = function;
    } else {
        j["dataset"] = datasetPath;
    }
    Json m = Json::array();
    for (Method x : methods) {
        m.push_back(kernlearn::toString(x));
    }
    j["methods"] = m;
    j["p"] = p;
    j["family"] = family;
    if (!betaShapes.empty()) {
        j["beta_shapes"] = pairsToJson(betaShapes);
    }
    if (!bounds.empty()) {
        j["bounds"] = pairsToJson(bounds);
    }
    j["law"] = kernlearn::toString(law);
    j["lhs_candidates"] = lhsCandidates;
    j["n_train"] = nTrain;
    j["n_validation"] = nValidation;
    j["n_test"] = nTest;
    j["split"] = splitFractions;
    j["eta"] = bpdn.eta;
    j["max_outer"] = bpdn.maxOuter;
    j["max_inner"] = bpdn.maxInner;
    j["inner_tol"] = bpdn.innerTol;
    j["normalize_columns"] = bpdn.normalizeColumns;
    j["delta"] = delta;
    j["lambda_mode"] = kernlearn::toString(lambdaMode);
    j["lambda"] = lambda;
    j["lambda_grid"] = {{"min", grid.lo}, {"max", grid.hi}, {"points", grid.points}};
    j["paper_leakage"] = paperLeakage;
    if (kappa) {
        j["kappa"] = *kappa;
    }
    j["kf"] = {{"iterations", kf.iterations},
               {"learning_rate", kf.learningRate},
               {"n_fine", kf.nFine},
               {"momentum", kf.momentum},
               {"transform", kf.transform == ParamTransform::Log ? "log" : "identity"}};
    j["nskrr_iterations"] = nskrrIterations;
    j["sobol_n"] = sobolN;
    j["kde_points"] = kdePoints;
    j["seeds"] = seeds;
    j["output_dir"] = outputDir;
    j["jobs"] = jobs;
    j["node_guard"] = nodeGuard;
    return j;
}

ExperimentConfig ExperimentConfig::fromJson(const Json &j) {
    if (!j.is_object()) {
        throw InvalidArgument("config: top level must be an object");
    }
    static const std::set<std::string> known{
        "function",      "dataset",   "methods",     "p",           "family",       "beta_shapes",
        "bounds",        "law",       "lhs_candidates", "n_train",  "n_validation", "n_test",
        "split",         "eta",       "max_outer",   "max_inner",   "inner_tol",    "normalize_columns",
        "delta",         "lambda_mode", "lambda",    "lambda_grid", "paper_leakage", "kappa",
        "kf",            "nskrr_iterations", "sobol_n", "kde_points", "seeds",      "output_dir",
        "jobs",          "node_guard", "$schema"};
    for (const auto &[key, _] : j.items()) {
        if (!known.count(key)) {
            throw InvalidArgument("config: unknown key '" + key + "'");
        }
    }
    ExperimentConfig c;
    try {
        c.function = j.value("function", std::string());
        c.datasetPath = j.value("dataset", std::string());
        if (j.contains("methods")) {
            const auto &m = j.at("methods");
            if (m.is_string()) {
                c.methods = parseMethods(m.get<std::string>());
            } else {
                std::string joined;
                for (const auto &e : m) {
                    joined += e.get<std::string>() + ",";
                }
                c.methods = parseMethods(joined);
            }
        }
        c.p = j.value("p", c.p);
        c.family = j.value("family", c.family);
        if (j.contains("beta_shapes")) {
            c.betaShapes = pairsFromJson(j.at("beta_shapes"), "beta_shapes");
        }
        if (j.contains("bounds")) {
            c.bounds = pairsFromJson(j.at("bounds"), "bounds");
        }
        if (j.contains("law")) {
            c.law = lawFromString(j.at("law").get<std::string>());
        }
        c.lhsCandidates = j.value("lhs_candidates", c.lhsCandidates);
        c.nTrain = j.value("n_train", c.nTrain);
        c.nValidation = j.value("n_validation", c.nValidation);
        c.nTest = j.value("n_test", c.nTest);
        if (j.contains("split")) {
            c.splitFractions = j.at("split").get<std::array<double, 3>>();
        }
        c.bpdn.eta = j.value("eta", c.bpdn.eta);
        c.bpdn.maxOuter = j.value("max_outer", c.bpdn.maxOuter);
        c.bpdn.maxInner = j.value("max_inner", c.bpdn.maxInner);
        c.bpdn.innerTol = j.value("inner_tol", c.bpdn.innerTol);
        c.bpdn.normalizeColumns = j.value("normalize_columns", c.bpdn.normalizeColumns);
        c.delta = j.value("delta", c.delta);
        if (j.contains("lambda_mode")) {
            c.lambdaMode = lambdaModeFromString(j.at("lambda_mode").get<std::string>());
        }
        c.lambda = j.value("lambda", c.lambda);
        if (j.contains("lambda_grid")) {
            const auto &g = j.at("lambda_grid");
            c.grid.lo = g.value("min", c.grid.lo);
            c.grid.hi = g.value("max", c.grid.hi);
            c.grid.points = g.value("points", c.grid.points);
        }
        c.paperLeakage = j.value("paper_leakage", c.paperLeakage);
        if (j.contains("kappa") && !j.at("kappa").is_null()) {
            c.kappa = j.at("kappa").get<double>();
        }
        if (j.contains("kf")) {
            const auto &k = j.at("kf");
            c.kf.iterations = k.value("iterations", c.kf.iterations);
            c.kf.learningRate = k.value("learning_rate", c.kf.learningRate);
            c.kf.nFine = k.value("n_fine", c.kf.nFine);
            c.kf.momentum = k.value("momentum", c.kf.momentum);
            const auto t = k.value("transform", std::string("log"));
            if (t != "log" && t != "identity") {
                throw InvalidArgument("config: kf.transform must be log or identity");
            }
            c.kf.transform = t == "log" ? ParamTransform::Log : ParamTransform::Identity;
        }
        c.nskrrIterations = j.value("nskrr_iterations", c.nskrrIterations);
        c.sobolN = j.value("sobol_n", c.sobolN);
        c.kdePoints = j.value("kde_points", c.kdePoints);
        if (j.contains("seeds")) {
            c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        }
        c.outputDir = j.value("output_dir", c.outputDir);
        c.jobs = j.value("jobs", c.jobs);
        c.nodeGuard = j.value("node_guard", c.nodeGuard);
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Running

bool SeedResult::partial() const {
    if (!errors.empty()) {
        return true;
    }
    return std::any_of(methods.begin(), methods.end(), [](const MethodResult &m) { return !m.ok; });
}

namespace {

enum SeedStream : std::uint64_t {
    kTrainStream = 1,
    kValidationStream = 2,
    kTestStream = 3,
    kSobolStream = 4,
    kKfStream = 5,
    kSplitStream = 6,
    kTuneKfStream = 7,
};

struct Problem {
    const ExperimentConfig *cfg = nullptr;
    std::optional<BenchmarkFunction> function;
    std::optional<Dataset> data;
    std::shared_ptr<const TensorBasis> basis;
    std::vector<std::pair<double, double>> bounds;
    DesignSpec inputLaw; ///< law of the test inputs, reused for pick-freeze
};

struct SeedData {
    Dataset train;
    Dataset validation;
    Dataset test;
};

std::vector<UnivariateFamily> makeFamilies(const ExperimentConfig &cfg,
                                           const std::vector<std::pair<double, double>> &bounds) {
    std::vector<UnivariateFamily> fams;
    for (std::size_t j = 0; j < bounds.size(); ++j) {
        const auto &[lo, hi] = bounds[j];
        if (cfg.family == "legendre") {
            fams.push_back(UnivariateFamily::legendre(lo, hi));
        } else {
            const auto &shape = cfg.betaShapes.size() == 1 ? cfg.betaShapes.front() : cfg.betaShapes.at(j);
            fams.push_back(UnivariateFamily::jacobi(shape.first, shape.second, lo, hi));
        }
    }
    return fams;
}

Problem buildProblem(const ExperimentConfig &cfg) {
    Problem pb;
    pb.cfg = &cfg;
    if (!cfg.function.empty()) {
        pb.function = benchmarkByName(cfg.function);
        pb.bounds = pb.function->law.bounds;
    } else {
        pb.data = readDatasetCsv(cfg.datasetPath);
        if (!cfg.bounds.empty()) {
            pb.bounds = cfg.bounds;
        } else {
            for (Eigen::Index j = 0; j < pb.data->X.cols(); ++j) {
                const double lo = pb.data->X.col(j).minCoeff();
                const double hi = pb.data->X.col(j).maxCoeff();
                if (!(lo < hi)) {
                    throw DegenerateError("dataset: input column " + std::to_string(j + 1) + " is constant");
                }
                pb.bounds.emplace_back(lo, hi);
            }
        }
        if (pb.bounds.size() != static_cast<std::size_t>(pb.data->dim())) {
            throw InvalidArgument("config: bounds do not match the dataset dimension");
        }
    }
    const auto d = pb.bounds.size();
    if (cfg.family == "jacobi" && cfg.betaShapes.size() != 1 && cfg.betaShapes.size() != d) {
        throw InvalidArgument("config: beta_shapes must have one pair or one per dimension");
    }
    pb.basis = std::make_shared<const TensorBasis>(TensorBasis::totalOrder(makeFamilies(cfg, pb.bounds), cfg.p));

    pb.inputLaw.bounds = pb.bounds;
    if (cfg.family == "jacobi") {
        pb.inputLaw.law = Law::Beta;
        for (std::size_t j = 0; j < d; ++j) {
            pb.inputLaw.betaShapes.push_back(cfg.betaShapes.size() == 1 ? cfg.betaShapes.front()
                                                                         : cfg.betaShapes[j]);
        }
    } else {
        pb.inputLaw.law = Law::Uniform;
    }
    return pb;
}

SeedData makeSeedData(const Problem &pb, std::uint64_t seed) {
    const ExperimentConfig &cfg = *pb.cfg;
    SeedData sd;
    if (pb.function) {
        DesignSpec train = pb.inputLaw;
        train.n = cfg.nTrain;
        train.seed = deriveSeed(seed, kTrainStream);
        if (pb.inputLaw.law == Law::Uniform) {
            train.law = cfg.law;
            train.candidates = cfg.lhsCandidates;
        }
        sd.train.X = sample(train);
        sd.train.y = pb.function->evaluate(sd.train.X);

        if (cfg.nValidation > 0) {
            DesignSpec val = pb.inputLaw;
            val.n = cfg.nValidation;
            val.seed = deriveSeed(seed, kValidationStream);
            sd.validation.X = sample(val);
            sd.validation.y = pb.function->evaluate(sd.validation.X);
        }
        DesignSpec test = pb.inputLaw;
        test.n = cfg.nTest;
        test.seed = deriveSeed(seed, kTestStream);
        sd.test.X = sample(test);
        sd.test.y = pb.function->evaluate(sd.test.X);
    } else {
        Split s = split(*pb.data, cfg.splitFractions, deriveSeed(seed, kSplitStream));
        sd.train = std::move(s.train);
        sd.validation = std::move(s.validation);
        sd.test = std::move(s.test);
    }
    if (sd.test.size() < 2) {
        throw DegenerateError("test set needs at least two rows");
    }
    return sd;
}

const Dataset &tuningSet(const ExperimentConfig &cfg, const SeedData &sd) {
    if (cfg.paperLeakage) {
        return sd.test;
    }
    if (sd.validation.size() == 0) {
        throw InvalidArgument("lambda tuning needs a non-empty validation set");
    }
    return sd.validation;
}

Moments monteCarloMoments(const Vector &v) {
    Moments m;
    m.mean = v.mean();
    m.variance = v.size() > 1 ? (v.array() - m.mean).square().sum() / static_cast<double>(v.size() - 1) : 0.0;
    return m;
}

void finishScores(const Problem &pb, MethodResult &r, const Vector &pred, const SeedData &sd) {
    r.scores = score(pred, sd.test.y);
    try {
        r.densities = compareDensities(sd.test.y, pred, pb.cfg->kdePoints);
        r.kl = r.densities->kl;
    } catch (const DegenerateError &e) {
        r.scores.issues.emplace_back(std::string("kl: ") + e.what());
    }
}

void regressorSobol(const Problem &pb, MethodResult &r, const TrainedRegressor &model, std::uint64_t seed) {
    if (pb.cfg->sobolN == 0) {
        return;
    }
    auto shared = std::make_shared<const TrainedRegressor>(model);
    const BatchModel m = [shared](const PointSet &x) { return shared->predictMean(x); };
    r.sobol = pickFreezeSobol(m, pb.inputLaw, pb.cfg->sobolN, deriveSeed(seed, kSobolStream));
    r.sobolSource = "pick_freeze";
}

void gpcFinish(const Problem &pb, MethodResult &r, const GpcSurrogate &g, const SeedData &sd) {
    finishScores(pb, r, g.eval(sd.test.X), sd);
    const GpcMoments m = gpcMoments(g);
    r.moments = Moments{m.mean, m.variance};
    r.momentSource = "coefficients";
    try {
        r.sobol = gpcSobolMain(g);
        r.sobolSource = "coefficients";
    } catch (const DegenerateError &e) {
        r.scores.issues.emplace_back(std::string("sobol: ") + e.what());
    }
    r.coefficients = g.coeffs();
}

void regressorFinish(const Problem &pb, MethodResult &r, const TrainedRegressor &model, const SeedData &sd,
                     std::uint64_t seed) {
    const Vector pred = model.predictMean(sd.test.X);
    finishScores(pb, r, pred, sd);
    r.moments = monteCarloMoments(pred);
    r.momentSource = "monte_carlo";
    regressorSobol(pb, r, model, seed);
}

class SeedRunner {
public:
    SeedRunner(const Problem &pb, std::uint64_t seed, SeedData sd) : pb_(pb), cfg_(*pb.cfg), seed_(seed), sd_(std::move(sd)) {}

    MethodResult run(Method m) {
        MethodResult r;
        r.method = m;
        try {
            switch (m) {
            case Method::FullGpc:
                fullGpc(r);
                break;
            case Method::SparseGpc:
                sparseGpc(r);
                break;
            case Method::KrrKf:
                krrKf(r);
                break;
            case Method::Sskrr:
                sskrr(r);
                break;
            case Method::Nskrr:
                nskrr(r);
                break;
            }
            r.ok = true;
        } catch (const std::exception &e) {
            r.ok = false;
            r.error = e.what();
        }
        return r;
    }

    [[nodiscard]] const SeedData &data() const { return sd_; }

private:
    const SparseCoefficients &coefficients() {
        if (!bpdn_) {
            const Matrix theta = buildTheta(*pb_.basis, sd_.train.X);
            bpdn_ = bpdnSolve(theta, sd_.train.y, cfg_.bpdn);
        }
        return *bpdn_;
    }

    void fullGpc(MethodResult &r) {
        if (!pb_.function) {
            throw InvalidArgument("full_gpc needs a benchmark function to evaluate at quadrature nodes");
        }
        const int q = lobattoNodesForDegree(2 * cfg_.p);
        const QuadratureRule rule = tensorRule(*pb_.basis, q, cfg_.nodeGuard);
        const GpcSurrogate g = projectQuadrature(pb_.basis, pb_.function->model(), rule);
        gpcFinish(pb_, r, g, sd_);
    }

    void sparseGpc(MethodResult &r) {
        const SparseCoefficients &c = coefficients();
        r.bpdn = c;
        r.sparsity = sparsity(c.c, cfg_.delta);
        gpcFinish(pb_, r, GpcSurrogate(pb_.basis, c.c, GpcProvenance::Bpdn), sd_);
    }

    void krrKf(MethodResult &r) {
        const int d = pb_.basis->dim();
        const KernelFamily family = KernelFamily::gaussianArd(d, true);
        Vector theta0(d + 1);
        theta0.head(d).setConstant(meanPairwiseDistance(sd_.train.X));
        theta0[d] = cfg_.lambda > 0.0 ? cfg_.lambda : 1e-6;
        KfConfig kf = cfg_.kf;
        kf.seed = deriveSeed(seed_, kKfStream);
        KfTrace trace = kfRun(sd_.train, tuningSet(cfg_, sd_), family, theta0, kf);
        const TrainedRegressor model = fit(family.kernel(trace.thetaStar), family.nugget(trace.thetaStar), sd_.train);
        r.lambda = model.nugget();
        r.kfTrace = std::move(trace);
        regressorFinish(pb_, r, model, sd_, seed_);
    }

    double kappa() const { return cfg_.kappa ? *cfg_.kappa : sampleVariance(sd_.train.y); }

    void sskrr(MethodResult &r) {
        const SparseCoefficients &c = coefficients();
        r.bpdn = c;
        r.sparsity = sparsity(c.c, cfg_.delta);
        const double kap = kappa();
        double lambda = cfg_.lambda;
        if (cfg_.lambdaMode == LambdaMode::Grid) {
            r.tuning = tuneLambdaGrid(
                [&](double l) { return sskrrFromCoefficients(pb_.basis, sd_.train, l, c, kap).regressor; },
                tuningSet(cfg_, sd_), cfg_.grid);
            lambda = r.tuning->lambda;
        } else if (cfg_.lambdaMode == LambdaMode::Kf) {
            const SskrrResult base = sskrrFromCoefficients(pb_.basis, sd_.train, cfg_.lambda, c, kap);
            KfConfig kf = cfg_.kf;
            kf.seed = deriveSeed(seed_, kTuneKfStream);
            r.tuning = tuneLambdaKf(base.regressor.kernel(), sd_.train, tuningSet(cfg_, sd_), cfg_.lambda, kf);
            lambda = r.tuning->lambda;
        }
        SskrrResult res = sskrrFromCoefficients(pb_.basis, sd_.train, lambda, c, kap);
        r.lambda = lambda;
        r.kappa = kap;
        r.spectral = res.spectral;
        regressorFinish(pb_, r, res.regressor, sd_, seed_);
    }

    void nskrr(MethodResult &r) {
        const int q = lobattoNodesForDegree(2 * cfg_.p);
        const QuadratureRule rule = tensorRule(*pb_.basis, q, cfg_.nodeGuard);
        NskrrOptions opts;
        opts.iterations = cfg_.nskrrIterations;
        opts.kappa = kappa();
        double lambda = cfg_.lambda;
        if (cfg_.lambdaMode == LambdaMode::Grid) {
            r.tuning = tuneLambdaGrid(
                [&](double l) { return nskrrFit(pb_.basis, sd_.train, l, rule, opts).regressor; },
                tuningSet(cfg_, sd_), cfg_.grid);
            lambda = r.tuning->lambda;
        } else if (cfg_.lambdaMode == LambdaMode::Kf) {
            const NskrrResult base = nskrrFit(pb_.basis, sd_.train, cfg_.lambda, rule, opts);
            KfConfig kf = cfg_.kf;
            kf.seed = deriveSeed(seed_, kTuneKfStream);
            r.tuning = tuneLambdaKf(base.regressor.kernel(), sd_.train, tuningSet(cfg_, sd_), cfg_.lambda, kf);
            lambda = r.tuning->lambda;
        }
        NskrrResult res = nskrrFit(pb_.basis, sd_.train, lambda, rule, opts);
        r.lambda = lambda;
        r.kappa = *opts.kappa;
        r.spectral = res.spectral;
        r.nskrrTrace = std::move(res.trace);
        regressorFinish(pb_, r, res.regressor, sd_, seed_);
    }

    const Problem &pb_;
    const ExperimentConfig &cfg_;
    std::uint64_t seed_;
    SeedData sd_;
    std::optional<SparseCoefficients> bpdn_;
};

SeedResult runSeed(const Problem &pb, std::uint64_t seed) {
    SeedResult out;
    out.seed = seed;
    std::optional<SeedRunner> runner;
    try {
        runner.emplace(pb, seed, makeSeedData(pb, seed));
    } catch (const std::exception &e) {
        out.errors.emplace_back(std::string("data: ") + e.what());
        return out;
    }
    out.truthMoments = monteCarloMoments(runner->data().test.y);
    for (Method m : pb.cfg->methods) {
        out.methods.push_back(runner->run(m));
    }
    return out;
}

std::string utcTimestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

} // namespace

ExperimentReport runExperiment(const ExperimentConfig &config) {
    config.validate();
    ExperimentReport report;
    report.config = config;
    report.timestamp = utcTimestamp();
    const Problem pb = buildProblem(report.config);
    report.basis = pb.basis;
    if (pb.function) {
        if (pb.function->mean && pb.function->variance) {
            report.referenceMoments = Moments{*pb.function->mean, *pb.function->variance};
        } else {
            report.referenceMoments = momentOracle(*pb.function);
        }
        report.referenceSobol = pb.function->sobol;
    }

    const auto &seeds = report.config.seeds;
    report.runs.resize(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            report.runs[i] = runSeed(pb, seeds[i]);
        }
    };
    const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(report.config.jobs), seeds.size());
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report document

namespace {

Json optionalNumber(const std::optional<double> &v) {
    return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

Json vectorJson(const Vector &v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Json methodJson(const MethodResult &r) {
    Json j;
    j["method"] = toString(r.method);
    j["status"] = r.ok ? "ok" : "failed";
    if (!r.ok) {
        j["error"] = r.error;
        return j;
    }
    j["scores"] = {{"rmse", r.scores.rmse},
                   {"nrmse", optionalNumber(r.scores.nrmse)},
                   {"q2", optionalNumber(r.scores.q2)},
                   {"mre", optionalNumber(r.scores.mre)},
                   {"n_test", r.scores.nTest}};
    if (!r.scores.issues.empty()) {
        j["issues"] = r.scores.issues;
    }
    j["moments"] = {{"mean", r.moments.mean}, {"variance", r.moments.variance}, {"source", r.momentSource}};
    j["kl"] = optionalNumber(r.kl);
    if (r.sobol) {
        j["sobol"] = {{"first_order", vectorJson(*r.sobol)}, {"source", r.sobolSource}};
    }
    if (r.sparsity) {
        j["sparsity"] = *r.sparsity;
    }
    if (r.bpdn) {
        j["bpdn"] = {{"residual_l2", r.bpdn->residualL2},
                     {"l1", r.bpdn->l1},
                     {"l1_lower_bound", r.bpdn->l1LowerBound},
                     {"iterations", r.bpdn->iterations},
                     {"outer_iterations", r.bpdn->outerIterations},
                     {"eta", r.bpdn->eta}};
    }
    if (r.lambda) {
        j["lambda"] = *r.lambda;
    }
    if (r.kappa) {
        j["kappa"] = *r.kappa;
    }
    if (r.tuning) {
        Json t;
        t["lambda"] = r.tuning->lambda;
        if (!r.tuning->grid.empty()) {
            Json rm = Json::array();
            for (double v : r.tuning->rmse) {
                rm.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
            }
            t["grid"] = r.tuning->grid;
            t["rmse"] = rm;
        }
        if (r.tuning->trace) {
            t["kf"] = toJson(*r.tuning->trace);
        }
        j["tuning"] = t;
    }
    if (r.kfTrace) {
        j["theta_star"] = vectorJson(r.kfTrace->thetaStar);
        j["theta_names"] = r.kfTrace->paramNames;
        j["kf_selected"] = r.kfTrace->selected;
    }
    if (r.spectral) {
        j["retained"] = r.spectral->retained.size();
    }
    if (!r.nskrrTrace.empty()) {
        Json t = Json::array();
        for (const auto &it : r.nskrrTrace) {
            const auto [mn, mx] = std::minmax_element(it.spectral.sigmas.begin(), it.spectral.sigmas.end());
            t.push_back({{"n", it.n},
                         {"objective", it.objective},
                         {"sigmas_summary",
                          {{"retained", it.spectral.retained.size()}, {"min", *mn}, {"max", *mx}, {"sum", it.spectral.kappa}}}});
        }
        j["nskrr_trace"] = t;
    }
    if (r.coefficients && r.method == Method::SparseGpc) {
        Json nz = Json::array();
        for (Eigen::Index k = 0; k < r.coefficients->size(); ++k) {
            if ((*r.coefficients)[k] != 0.0) {
                nz.push_back({k, (*r.coefficients)[k]});
            }
        }
        j["nonzero_coefficients"] = nz;
    }
    return j;
}

/// Per-seed scalar metrics used for aggregation, by name.
std::vector<std::pair<std::string, std::optional<double>>> scalarMetrics(const Json &m) {
    auto num = [](const Json &v) -> std::optional<double> {
        if (v.is_number()) {
            return v.get<double>();
        }
        return std::nullopt;
    };
    std::vector<std::pair<std::string, std::optional<double>>> out;
    const Json empty = Json::object();
    const Json &s = m.contains("scores") ? m.at("scores") : empty;
    for (const char *k : {"rmse", "nrmse", "q2", "mre"}) {
        out.emplace_back(k, s.contains(k) ? num(s.at(k)) : std::nullopt);
    }
    const Json &mo = m.contains("moments") ? m.at("moments") : empty;
    out.emplace_back("mean", mo.contains("mean") ? num(mo.at("mean")) : std::nullopt);
    out.emplace_back("variance", mo.contains("variance") ? num(mo.at("variance")) : std::nullopt);
    out.emplace_back("kl", m.contains("kl") ? num(m.at("kl")) : std::nullopt);
    out.emplace_back("sparsity", m.contains("sparsity") ? num(m.at("sparsity")) : std::nullopt);
    out.emplace_back("lambda", m.contains("lambda") ? num(m.at("lambda")) : std::nullopt);
    return out;
}

Json boxJson(const BoxStats &b, std::size_t n) {
    return {{"n", n},
            {"median", b.median},
            {"q25", b.q25},
            {"q75", b.q75},
            {"lower_fence", b.lowerFence},
            {"upper_fence", b.upperFence},
            {"outliers", b.outliers}};
}

} // namespace

Json aggregateRuns(const Json &runs) {
    // method -> metric -> values, in first-seen order
    std::vector<std::string> methodOrder;
    std::map<std::string, std::vector<std::string>> metricOrder;
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    for (const auto &run : runs) {
        if (!run.contains("methods")) {
            continue;
        }
        for (const auto &m : run.at("methods")) {
            const auto name = m.at("method").get<std::string>();
            if (!values.count(name)) {
                methodOrder.push_back(name);
                values[name];
            }
            if (m.value("status", std::string()) != "ok") {
                continue;
            }
            for (const auto &[metric, v] : scalarMetrics(m)) {
                if (!v) {
                    continue;
                }
                auto &vec = values[name][metric];
                if (vec.empty()) {
                    metricOrder[name].push_back(metric);
                }
                vec.push_back(*v);
            }
        }
    }
    Json out = Json::object();
    for (const auto &name : methodOrder) {
        Json per = Json::object();
        for (const auto &metric : metricOrder[name]) {
            const auto &vec = values[name][metric];
            per[metric] = boxJson(boxStats(vec), vec.size());
        }
        out[name] = per;
    }
    return out;
}

Json reportToJson(const ExperimentReport &report) {
    Json j;
    j["schema"] = "kernlearn.experiment/1";
    j["version"] = libraryVersion();
    j["rng"] = std::string(Philox4x32::kName);
    j["timestamp"] = report.timestamp;
    j["config"] = report.config.toJson();
    if (report.basis) {
        j["basis"] = {{"d", report.basis->dim()}, {"p", report.basis->indices().order()}, {"size", report.basis->size()}};
    }
    if (report.referenceMoments) {
        Json ref = {{"mean", report.referenceMoments->mean}, {"variance", report.referenceMoments->variance}};
        if (report.referenceSobol) {
            ref["sobol"] = vectorJson(*report.referenceSobol);
        }
        j["reference"] = ref;
    }
    Json runs = Json::array();
    bool partial = false;
    for (const auto &run : report.runs) {
        Json r;
        r["seed"] = run.seed;
        r["status"] = run.partial() ? "partial" : "ok";
        partial = partial || run.partial();
        if (!run.errors.empty()) {
            r["errors"] = run.errors;
        }
        r["truth_moments"] = {{"mean", run.truthMoments.mean}, {"variance", run.truthMoments.variance}};
        Json ms = Json::array();
        for (const auto &m : run.methods) {
            ms.push_back(methodJson(m));
        }
        r["methods"] = ms;
        runs.push_back(r);
    }
    j["partial"] = partial;
    j["aggregate"] = aggregateRuns(runs);
    j["runs"] = runs;
    return j;
}

void validateReportJson(const Json &j) {
    auto need = [](const Json &obj, const char *key, const std::string &where) -> const Json & {
        if (!obj.is_object() || !obj.contains(key)) {
            throw IoError("report: missing '" + std::string(key) + "' in " + where);
        }
        return obj.at(key);
    };
    if (need(j, "schema", "document") != "kernlearn.experiment/1") {
        throw IoError("report: unsupported schema tag");
    }
    need(j, "version", "document");
    need(j, "rng", "document");
    need(j, "config", "document");
    need(j, "aggregate", "document");
    need(j, "partial", "document");
    const Json &runs = need(j, "runs", "document");
    if (!runs.is_array() || runs.empty()) {
        throw IoError("report: 'runs' must be a non-empty array");
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::string where = "runs[" + std::to_string(i) + "]";
        need(runs[i], "seed", where);
        const auto status = need(runs[i], "status", where).get<std::string>();
        if (status != "ok" && status != "partial") {
            throw IoError("report: bad status in " + where);
        }
        const Json &methods = need(runs[i], "methods", where);
        for (std::size_t k = 0; k < methods.size(); ++k) {
            const std::string mw = where + ".methods[" + std::to_string(k) + "]";
            (void)methodFromString(need(methods[k], "method", mw).get<std::string>());
            const auto ms = need(methods[k], "status", mw).get<std::string>();
            if (ms == "ok") {
                const Json &s = need(methods[k], "scores", mw);
                if (!need(s, "rmse", mw + ".scores").is_number()) {
                    throw IoError("report: rmse is not a number in " + mw);
                }
            } else if (ms == "failed") {
                need(methods[k], "error", mw);
            } else {
                throw IoError("report: bad method status in " + mw);
            }
        }
    }
    if (aggregateRuns(runs) != j.at("aggregate")) {
        throw IoError("report: 'aggregate' does not match the per-seed entries");
    }
}

void renderReportJson(const Json &report, const fs::path &dir) {
    validateReportJson(report);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    writeJson(dir / "report.json", report);

    {
        std::ofstream out(dir / "metrics_per_seed.csv");
        if (!out) {
            throw IoError("cannot write " + (dir / "metrics_per_seed.csv").string());
        }
        out << "seed,method,status,rmse,nrmse,q2,mre,mean,variance,kl,sparsity,lambda\n";
        for (const auto &run : report.at("runs")) {
            for (const auto &m : run.at("methods")) {
                out << run.at("seed").get<std::uint64_t>() << ',' << m.at("method").get<std::string>() << ','
                    << m.at("status").get<std::string>();
                for (const auto &[name, v] : scalarMetrics(m)) {
                    out << ',' << (v ? formatDouble(*v) : std::string());
                }
                out << '\n';
            }
        }
    }
    {
        std::ofstream out(dir / "boxstats.csv");
        if (!out) {
            throw IoError("cannot write " + (dir / "boxstats.csv").string());
        }
        out << "method,metric,n,median,q25,q75,lower_fence,upper_fence,outliers\n";
        for (const auto &[method, metrics] : report.at("aggregate").items()) {
            for (const auto &[metric, b] : metrics.items()) {
                out << method << ',' << metric << ',' << b.at("n").get<std::size_t>() << ','
                    << formatDouble(b.at("median").get<double>()) << ',' << formatDouble(b.at("q25").get<double>())
                    << ',' << formatDouble(b.at("q75").get<double>()) << ','
                    << formatDouble(b.at("lower_fence").get<double>()) << ','
                    << formatDouble(b.at("upper_fence").get<double>()) << ',';
                bool first = true;
                for (const auto &o : b.at("outliers")) {
                    out << (first ? "" : ";") << formatDouble(o.get<double>());
                    first = false;
                }
                out << '\n';
            }
        }
    }
}

void reportRender(const ExperimentReport &report, const fs::path &dir) {
    renderReportJson(reportToJson(report), dir);

    const SeedResult *first = nullptr;
    for (const auto &run : report.runs) {
        if (!run.methods.empty()) {
            first = &run;
            break;
        }
    }

    // Coefficients of every gPC fit, one block per seed.
    if (report.basis) {
        std::ofstream out(dir / "coefficients.csv");
        if (!out) {
            throw IoError("cannot write " + (dir / "coefficients.csv").string());
        }
        out << "seed,method,index";
        for (int j = 1; j <= report.basis->dim(); ++j) {
            out << ",i" << j;
        }
        out << ",value\n";
        for (const auto &run : report.runs) {
            for (const auto &m : run.methods) {
                if (!m.ok || !m.coefficients) {
                    continue;
                }
                for (std::size_t k = 0; k < report.basis->size(); ++k) {
                    out << run.seed << ',' << toString(m.method) << ',' << k;
                    for (int v : report.basis->indices()[k]) {
                        out << ',' << v;
                    }
                    out << ',' << formatDouble((*m.coefficients)[static_cast<Eigen::Index>(k)]) << '\n';
                }
            }
        }
    }

    if (first) {
        for (const auto &m : first->methods) {
            if (!m.ok) {
                continue;
            }
            const std::string tag = toString(m.method);
            if (m.densities) {
                writeKdeCsv(dir / ("kde_" + tag + ".csv"), m.densities->grid, m.densities->q);
                writeKdeCsv(dir / ("kde_" + tag + "_truth.csv"), m.densities->grid, m.densities->p);
            }
            if (m.spectral && report.basis) {
                writeSpectralCsv(dir / ("spectral_" + tag + ".csv"), *report.basis, *m.spectral);
            }
        }
    }

    // Kernel Flow traces for all seeds, long format with a seed column.
    auto writeTraces = [&](const fs::path &path, auto select) {
        bool any = false;
        std::ofstream out;
        for (const auto &run : report.runs) {
            for (const auto &m : run.methods) {
                const KfTrace *t = select(m);
                if (!m.ok || !t) {
                    continue;
                }
                if (!any) {
                    out.open(path);
                    if (!out) {
                        throw IoError("cannot write " + path.string());
                    }
                    out << "seed,method,iteration";
                    for (const auto &n : t->paramNames) {
                        out << ',' << n;
                    }
                    out << ",rho,validation_rmse,selected\n";
                    any = true;
                }
                for (std::size_t i = 0; i < t->records.size(); ++i) {
                    const auto &r = t->records[i];
                    out << run.seed << ',' << toString(m.method) << ',' << r.n;
                    for (Eigen::Index p = 0; p < r.theta.size(); ++p) {
                        out << ',' << formatDouble(r.theta[p]);
                    }
                    out << ',' << formatDouble(r.rho) << ',' << formatDouble(r.validationRmse) << ','
                        << (i == t->selected ? 1 : 0) << '\n';
                }
            }
        }
    };
    writeTraces(dir / "kf_trace.csv",
                [](const MethodResult &m) -> const KfTrace * { return m.kfTrace ? &*m.kfTrace : nullptr; });
    writeTraces(dir / "kf_trace_lambda.csv", [](const MethodResult &m) -> const KfTrace * {
        return m.tuning && m.tuning->trace ? &*m.tuning->trace : nullptr;
    });
}

} // namespace kernlearn
