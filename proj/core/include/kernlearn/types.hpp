#ifndef KERNLEARN_TYPES_HPP
#define KERNLEARN_TYPES_HPP

#include <functional>

#include <Eigen/Dense>

namespace kernlearn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// n x d matrix, one point per row. Row-major so each point is contiguous.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Read-only view of a single point (a row of a PointSet or a RowVectorXd).
using PointRef = Eigen::Ref<const Eigen::RowVectorXd>;

/// Vectorized model: one output per input row. Must be reentrant; callers
/// may invoke it concurrently on disjoint point sets.
using BatchModel = std::function<Vector(const PointSet &)>;

} // namespace kernlearn

#endif // KERNLEARN_TYPES_HPP
