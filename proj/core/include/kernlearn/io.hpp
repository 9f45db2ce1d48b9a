#ifndef KERNLEARN_IO_HPP
#define KERNLEARN_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kernlearn/gpc.hpp"
#include "kernlearn/kernelflow.hpp"
#include "kernlearn/kernels.hpp"
#include "kernlearn/polybasis.hpp"
#include "kernlearn/regression.hpp"
#include "kernlearn/skrr.hpp"

namespace kernlearn {

using Json = nlohmann::json;

/// Shortest decimal representation that round-trips.
[[nodiscard]] std::string formatDouble(double v);

/// A parsed CSV file: header names and numeric rows.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

[[nodiscard]] CsvTable readCsv(const std::filesystem::path &path);
void writeCsv(const std::filesystem::path &path, const CsvTable &table);

/// Header x1,...,xd,y. The last column must be named y.
[[nodiscard]] Dataset readDatasetCsv(const std::filesystem::path &path);
void writeDatasetCsv(const std::filesystem::path &path, const Dataset &data);

/// Input points; a trailing y column, if present, is ignored.
[[nodiscard]] PointSet readPointsCsv(const std::filesystem::path &path);
void writePointsCsv(const std::filesystem::path &path, const PointSet &points);

/// One row per node: x1,...,xd,weight.
void writeQuadratureCsv(const std::filesystem::path &path, const QuadratureRule &rule);

/// index,i1,...,id,value
void writeCoefficientsCsv(const std::filesystem::path &path, const TensorBasis &basis, const Vector &c);

/// index,i1,...,id,abs_c,sigma
void writeSpectralCsv(const std::filesystem::path &path, const TensorBasis &basis, const SpectralSolution &s);

/// grid,density
void writeKdeCsv(const std::filesystem::path &path, const Vector &grid, const Vector &density);

/// iteration,<parameter names>,rho,validation_rmse
void writeKfTraceCsv(const std::filesystem::path &path, const KfTrace &trace);

[[nodiscard]] Json readJson(const std::filesystem::path &path);
void writeJson(const std::filesystem::path &path, const Json &j);

[[nodiscard]] Json toJson(const UnivariateFamily &f);
[[nodiscard]] UnivariateFamily familyFromJson(const Json &j);

/// {d, p, families: [...]} plus an explicit index list when the set is not total order.
[[nodiscard]] Json toJson(const TensorBasis &basis);
[[nodiscard]] TensorBasis basisFromJson(const Json &j);

/// {type, ...parameters}; spectral kernels store their basis, retained multi-indices and sigmas.
[[nodiscard]] Json toJson(const KernelSpec &kernel);
[[nodiscard]] KernelSpec kernelFromJson(const Json &j);

/// {type: "regressor", kernel, nugget, x_train, y_train, alpha}
[[nodiscard]] Json toJson(const TrainedRegressor &model);
/// Refits from the stored training data and checks the result against the stored alpha.
[[nodiscard]] TrainedRegressor regressorFromJson(const Json &j);

/// {type: "gpc", basis, coefficients, provenance}
[[nodiscard]] Json toJson(const GpcSurrogate &g);
[[nodiscard]] GpcSurrogate gpcFromJson(const Json &j);

[[nodiscard]] Json toJson(const KfTrace &trace);

} // namespace kernlearn

#endif // KERNLEARN_IO_HPP
