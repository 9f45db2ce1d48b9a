#include "kernlearn/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kernlearn/errors.hpp"

namespace kernlearn {

namespace fs = std::filesystem;

std::string formatDouble(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> splitLine(const std::string &line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos
                                                                                        : pos - start)));
        if (pos == std::string::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

double parseNumber(const std::string &s, const fs::path &path, std::size_t line) {
    if (s == "nan" || s == "NaN") {
        return std::nan("");
    }
    if (s == "inf") {
        return HUGE_VAL;
    }
    if (s == "-inf") {
        return -HUGE_VAL;
    }
    double v = 0.0;
    const char *first = s.data();
    const char *last = s.data() + s.size();
    if (!s.empty() && *first == '+') {
        ++first;
    }
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": '" + s + "' is not a number");
    }
    return v;
}

std::ofstream openOut(const fs::path &path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

void finish(std::ofstream &out, const fs::path &path) {
    out.flush();
    if (!out) {
        throw IoError("write to " + path.string() + " failed");
    }
}

template<class T>
T required(const Json &j, const char *key, const char *what) {
    if (!j.is_object() || !j.contains(key)) {
        throw IoError(std::string(what) + ": missing key '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string(what) + ": bad value for '" + key + "': " + e.what());
    }
}

std::vector<std::string> indexHeader(const TensorBasis &basis) {
    std::vector<std::string> h{"index"};
    for (int j = 1; j <= basis.dim(); ++j) {
        h.push_back("i" + std::to_string(j));
    }
    return h;
}

void writeIndexColumns(std::ostream &out, const TensorBasis &basis, std::size_t k) {
    out << k;
    for (int v : basis.indices()[k]) {
        out << ',' << v;
    }
}

void writeHeader(std::ostream &out, const std::vector<std::string> &names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << (i ? "," : "") << names[i];
    }
    out << '\n';
}

} // namespace

// ---------------------------------------------------------------------------
// CSV

CsvTable readCsv(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    CsvTable t;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = splitLine(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw IoError(path.string() + ":" + std::to_string(lineNo) + ": expected " +
                          std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto &f : fields) {
            row.push_back(parseNumber(f, path, lineNo));
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) {
        throw IoError(path.string() + ": empty file");
    }
    return t;
}

void writeCsv(const fs::path &path, const CsvTable &table) {
    auto out = openOut(path);
    writeHeader(out, table.header);
    for (const auto &row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << formatDouble(row[i]);
        }
        out << '\n';
    }
    finish(out, path);
}

Dataset readDatasetCsv(const fs::path &path) {
    const CsvTable t = readCsv(path);
    if (t.header.size() < 2 || t.header.back() != "y") {
        throw IoError(path.string() + ": dataset header must be x1,...,xd,y");
    }
    const auto d = static_cast<Eigen::Index>(t.header.size() - 1);
    Dataset data;
    data.X.resize(static_cast<Eigen::Index>(t.rows.size()), d);
    data.y.resize(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < d; ++j) {
            data.X(r, j) = t.rows[i][static_cast<std::size_t>(j)];
        }
        data.y[r] = t.rows[i].back();
    }
    try {
        data.validate();
    } catch (const InvalidArgument &e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return data;
}

void writeDatasetCsv(const fs::path &path, const Dataset &data) {
    auto out = openOut(path);
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
        out << 'x' << j + 1 << ',';
    }
    out << "y\n";
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
            out << formatDouble(data.X(i, j)) << ',';
        }
        out << formatDouble(data.y[i]) << '\n';
    }
    finish(out, path);
}

PointSet readPointsCsv(const fs::path &path) {
    const CsvTable t = readCsv(path);
    std::size_t d = t.header.size();
    if (d > 1 && t.header.back() == "y") {
        --d;
    }
    PointSet x(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.rows[i][j];
        }
    }
    if (!x.allFinite()) {
        throw IoError(path.string() + ": non-finite input values");
    }
    return x;
}

void writePointsCsv(const fs::path &path, const PointSet &points) {
    auto out = openOut(path);
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        out << (j ? "," : "") << 'x' << j + 1;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (Eigen::Index j = 0; j < points.cols(); ++j) {
            out << (j ? "," : "") << formatDouble(points(i, j));
        }
        out << '\n';
    }
    finish(out, path);
}

void writeQuadratureCsv(const fs::path &path, const QuadratureRule &rule) {
    auto out = openOut(path);
    for (Eigen::Index j = 0; j < rule.nodes.cols(); ++j) {
        out << 'x' << j + 1 << ',';
    }
    out << "weight\n";
    for (Eigen::Index i = 0; i < rule.nodes.rows(); ++i) {
        for (Eigen::Index j = 0; j < rule.nodes.cols(); ++j) {
            out << formatDouble(rule.nodes(i, j)) << ',';
        }
        out << formatDouble(rule.weights[i]) << '\n';
    }
    finish(out, path);
}

void writeCoefficientsCsv(const fs::path &path, const TensorBasis &basis, const Vector &c) {
    if (static_cast<std::size_t>(c.size()) != basis.size()) {
        throw InvalidArgument("coefficient export: vector length does not match the basis");
    }
    auto out = openOut(path);
    auto header = indexHeader(basis);
    header.emplace_back("value");
    writeHeader(out, header);
    for (std::size_t k = 0; k < basis.size(); ++k) {
        writeIndexColumns(out, basis, k);
        out << ',' << formatDouble(c[static_cast<Eigen::Index>(k)]) << '\n';
    }
    finish(out, path);
}

void writeSpectralCsv(const fs::path &path, const TensorBasis &basis, const SpectralSolution &s) {
    auto out = openOut(path);
    auto header = indexHeader(basis);
    header.emplace_back("abs_c");
    header.emplace_back("sigma");
    writeHeader(out, header);
    for (std::size_t i = 0; i < s.retained.size(); ++i) {
        writeIndexColumns(out, basis, s.retained[i]);
        const double c = i < s.sourceCoeffs.size() ? s.sourceCoeffs[i] : std::nan("");
        out << ',' << formatDouble(c) << ',' << formatDouble(s.sigmas[i]) << '\n';
    }
    finish(out, path);
}

void writeKdeCsv(const fs::path &path, const Vector &grid, const Vector &density) {
    if (grid.size() != density.size()) {
        throw InvalidArgument("kde export: grid and density lengths differ");
    }
    auto out = openOut(path);
    out << "grid,density\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        out << formatDouble(grid[i]) << ',' << formatDouble(density[i]) << '\n';
    }
    finish(out, path);
}

void writeKfTraceCsv(const fs::path &path, const KfTrace &trace) {
    auto out = openOut(path);
    std::vector<std::string> header{"iteration"};
    header.insert(header.end(), trace.paramNames.begin(), trace.paramNames.end());
    header.emplace_back("rho");
    header.emplace_back("validation_rmse");
    writeHeader(out, header);
    for (const auto &r : trace.records) {
        out << r.n;
        for (Eigen::Index p = 0; p < r.theta.size(); ++p) {
            out << ',' << formatDouble(r.theta[p]);
        }
        out << ',' << formatDouble(r.rho) << ',' << formatDouble(r.validationRmse) << '\n';
    }
    finish(out, path);
}

// ---------------------------------------------------------------------------
// JSON

Json readJson(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void writeJson(const fs::path &path, const Json &j) {
    auto out = openOut(path);
    out << j.dump(2) << '\n';
    finish(out, path);
}

Json toJson(const UnivariateFamily &f) {
    Json j;
    j["kind"] = f.kind == FamilyKind::LegendreUniform ? "legendre" : "jacobi";
    j["support"] = {f.lo, f.hi};
    if (f.kind == FamilyKind::JacobiBeta) {
        j["beta"] = {f.a, f.b};
    }
    return j;
}

UnivariateFamily familyFromJson(const Json &j) {
    const auto kind = required<std::string>(j, "kind", "family");
    const auto support = required<std::vector<double>>(j, "support", "family");
    if (support.size() != 2) {
        throw IoError("family: support must be [lo, hi]");
    }
    if (kind == "legendre") {
        return UnivariateFamily::legendre(support[0], support[1]);
    }
    if (kind == "jacobi") {
        const auto beta = required<std::vector<double>>(j, "beta", "family");
        if (beta.size() != 2) {
            throw IoError("family: beta must be [a, b]");
        }
        return UnivariateFamily::jacobi(beta[0], beta[1], support[0], support[1]);
    }
    throw IoError("family: unknown kind '" + kind + "'");
}

namespace {

bool isTotalOrder(const MultiIndexSet &set) {
    const MultiIndexSet full = multiIndices(set.dim(), set.order());
    if (full.size() != set.size()) {
        return false;
    }
    for (std::size_t k = 0; k < set.size(); ++k) {
        const auto a = set[k];
        const auto b = full[k];
        if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
            return false;
        }
    }
    return true;
}

std::vector<int> toVector(std::span<const int> s) {
    return {s.begin(), s.end()};
}

} // namespace

Json toJson(const TensorBasis &basis) {
    Json j;
    j["d"] = basis.dim();
    j["p"] = basis.indices().order();
    Json fams = Json::array();
    for (const auto &f : basis.families()) {
        fams.push_back(toJson(f));
    }
    j["families"] = fams;
    if (!isTotalOrder(basis.indices())) {
        Json idx = Json::array();
        for (std::size_t k = 0; k < basis.size(); ++k) {
            idx.push_back(toVector(basis.indices()[k]));
        }
        j["indices"] = idx;
    }
    return j;
}

TensorBasis basisFromJson(const Json &j) {
    const int d = required<int>(j, "d", "basis");
    const int p = required<int>(j, "p", "basis");
    if (!j.contains("families") || !j.at("families").is_array()) {
        throw IoError("basis: missing 'families' array");
    }
    std::vector<UnivariateFamily> fams;
    for (const auto &f : j.at("families")) {
        fams.push_back(familyFromJson(f));
    }
    if (fams.size() != static_cast<std::size_t>(d)) {
        throw IoError("basis: 'families' length does not match d");
    }
    if (j.contains("indices")) {
        return TensorBasis(std::move(fams), customIndices(d, j.at("indices").get<std::vector<std::vector<int>>>()));
    }
    return TensorBasis::totalOrder(std::move(fams), p);
}

namespace {

const char *maternTag(MaternNu nu) {
    switch (nu) {
    case MaternNu::Half:
        return "1/2";
    case MaternNu::ThreeHalves:
        return "3/2";
    case MaternNu::FiveHalves:
        return "5/2";
    }
    return "3/2";
}

MaternNu maternFromTag(const std::string &s) {
    if (s == "1/2") {
        return MaternNu::Half;
    }
    if (s == "3/2") {
        return MaternNu::ThreeHalves;
    }
    if (s == "5/2") {
        return MaternNu::FiveHalves;
    }
    throw IoError("matern: nu must be one of 1/2, 3/2, 5/2");
}

} // namespace

Json toJson(const KernelSpec &kernel) {
    Json j;
    j["type"] = kernel.name();
    if (const auto *k = kernel.as<GaussianKernel>()) {
        j["length_scale"] = k->lengthScale;
    } else if (const auto *k = kernel.as<GaussianArdKernel>()) {
        j["length_scales"] = k->lengthScales;
    } else if (const auto *k = kernel.as<PolynomialKernel>()) {
        j["offset"] = k->offset;
        j["exponent"] = k->exponent;
    } else if (const auto *k = kernel.as<MaternKernel>()) {
        j["length_scale"] = k->lengthScale;
        j["nu"] = maternTag(k->nu);
    } else if (const auto *k = kernel.as<RationalQuadraticKernel>()) {
        j["alpha"] = k->alpha;
        j["length_scale"] = k->lengthScale;
    } else if (const auto *k = kernel.as<SpectralKernel>()) {
        j["basis"] = toJson(k->basis());
        Json retained = Json::array();
        for (std::size_t idx : k->retained()) {
            retained.push_back(toVector(k->basis().indices()[idx]));
        }
        j["retained"] = retained;
        j["sigmas"] = k->sigmas();
    }
    return j;
}

KernelSpec kernelFromJson(const Json &j) {
    const auto type = required<std::string>(j, "type", "kernel");
    try {
        if (type == "gaussian") {
            return KernelSpec::gaussian(required<double>(j, "length_scale", "kernel"));
        }
        if (type == "gaussian_ard") {
            return KernelSpec::gaussianArd(required<std::vector<double>>(j, "length_scales", "kernel"));
        }
        if (type == "polynomial") {
            return KernelSpec::polynomial(required<double>(j, "offset", "kernel"),
                                          required<double>(j, "exponent", "kernel"));
        }
        if (type == "matern") {
            return KernelSpec::matern(required<double>(j, "length_scale", "kernel"),
                                      maternFromTag(required<std::string>(j, "nu", "kernel")));
        }
        if (type == "rational_quadratic") {
            return KernelSpec::rationalQuadratic(required<double>(j, "alpha", "kernel"),
                                                 required<double>(j, "length_scale", "kernel"));
        }
        if (type == "spectral") {
            if (!j.contains("basis")) {
                throw IoError("kernel: spectral kernel without a basis");
            }
            auto basis = std::make_shared<const TensorBasis>(basisFromJson(j.at("basis")));
            const auto multi = required<std::vector<std::vector<int>>>(j, "retained", "kernel");
            std::vector<std::size_t> retained;
            for (const auto &m : multi) {
                const auto k = basis->indices().find(m);
                if (!k) {
                    throw IoError("kernel: retained multi-index is not part of the basis");
                }
                retained.push_back(*k);
            }
            return KernelSpec::spectral(basis, std::move(retained), required<std::vector<double>>(j, "sigmas", "kernel"));
        }
    } catch (const InvalidArgument &e) {
        throw IoError(std::string("kernel: ") + e.what());
    }
    throw IoError("kernel: unknown type '" + type + "'");
}

Json toJson(const TrainedRegressor &model) {
    Json j;
    j["type"] = "regressor";
    j["kernel"] = toJson(model.kernel());
    j["nugget"] = model.nugget();
    j["pseudo_inverse"] = model.pseudoInverse();
    Json x = Json::array();
    for (Eigen::Index i = 0; i < model.trainInputs().rows(); ++i) {
        const auto row = model.trainInputs().row(i);
        x.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    j["x_train"] = x;
    j["y_train"] = std::vector<double>(model.trainTargets().data(),
                                       model.trainTargets().data() + model.trainTargets().size());
    j["alpha"] = std::vector<double>(model.alpha().data(), model.alpha().data() + model.alpha().size());
    return j;
}

TrainedRegressor regressorFromJson(const Json &j) {
    if (required<std::string>(j, "type", "regressor") != "regressor") {
        throw IoError("regressor: 'type' must be 'regressor'");
    }
    const KernelSpec kernel = kernelFromJson(j.at("kernel"));
    const auto nugget = required<double>(j, "nugget", "regressor");
    const auto rows = required<std::vector<std::vector<double>>>(j, "x_train", "regressor");
    const auto y = required<std::vector<double>>(j, "y_train", "regressor");
    const auto alpha = required<std::vector<double>>(j, "alpha", "regressor");
    if (rows.empty() || rows.size() != y.size() || alpha.size() != y.size()) {
        throw IoError("regressor: x_train, y_train and alpha lengths disagree");
    }
    Dataset data;
    data.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) {
            throw IoError("regressor: ragged x_train");
        }
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            data.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
    }
    data.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
    FitOptions opts;
    opts.allowPseudoInverse = j.value("pseudo_inverse", false);
    TrainedRegressor model = fit(kernel, nugget, data, opts);
    const Eigen::Map<const Vector> stored(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    if ((model.alpha() - stored).norm() > 1e-6 * std::max(1.0, stored.norm())) {
        throw IoError("regressor: refitted dual coefficients disagree with the stored alpha");
    }
    return model;
}

Json toJson(const GpcSurrogate &g) {
    Json j;
    j["type"] = "gpc";
    j["basis"] = toJson(g.basis());
    j["coefficients"] = std::vector<double>(g.coeffs().data(), g.coeffs().data() + g.coeffs().size());
    j["provenance"] = toString(g.provenance());
    return j;
}

GpcSurrogate gpcFromJson(const Json &j) {
    if (required<std::string>(j, "type", "gpc") != "gpc") {
        throw IoError("gpc: 'type' must be 'gpc'");
    }
    if (!j.contains("basis")) {
        throw IoError("gpc: missing basis");
    }
    auto basis = std::make_shared<const TensorBasis>(basisFromJson(j.at("basis")));
    const auto c = required<std::vector<double>>(j, "coefficients", "gpc");
    try {
        return GpcSurrogate(basis, Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())),
                            provenanceFromString(required<std::string>(j, "provenance", "gpc")));
    } catch (const InvalidArgument &e) {
        throw IoError(std::string("gpc: ") + e.what());
    }
}

Json toJson(const KfTrace &trace) {
    Json j;
    j["parameters"] = trace.paramNames;
    j["selected"] = trace.selected;
    j["theta_star"] = std::vector<double>(trace.thetaStar.data(), trace.thetaStar.data() + trace.thetaStar.size());
    Json recs = Json::array();
    for (const auto &r : trace.records) {
        Json rec;
        rec["n"] = r.n;
        rec["theta"] = std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size());
        rec["rho"] = std::isfinite(r.rho) ? Json(r.rho) : Json(nullptr);
        rec["validation_rmse"] = std::isfinite(r.validationRmse) ? Json(r.validationRmse) : Json(nullptr);
        recs.push_back(rec);
    }
    j["records"] = recs;
    return j;
}

} // namespace kernlearn
