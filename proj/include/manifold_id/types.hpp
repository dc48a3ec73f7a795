#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace manifold_id {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixXd = RowMatrix<double>;
using RowMatrixXf = RowMatrix<float>;
using IndexMatrix = RowMatrix<Index>;

// Error hierarchy. The CLI maps each class onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be estimated on: zero variance, duplicate rows,
/// degenerate neighborhoods, fully separable point clouds (exit code 3).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// File and format errors (exit code 4).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace manifold_id
