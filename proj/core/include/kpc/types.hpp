#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace kpc {

using Index = Eigen::Index;

// Row-major is the storage convention for all weight matrices; vectors are
// plain column vectors.  Column-major maps are used locally where an
// algorithm's reshape semantics require column stacking.
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;
using Matf = Mat<float>;
using Vecf = Vec<float>;

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline Matd uniform_matrix(Index rows, Index cols, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline Vecd uniform_vector(Index size, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Vecd v(size);
  for (Index i = 0; i < size; ++i) v(i) = dist(rng);
  return v;
}

inline Matd gaussian_matrix(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline Vecd gaussian_vector(Index size, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Vecd v(size);
  for (Index i = 0; i < size; ++i) v(i) = dist(rng);
  return v;
}

// Checked product of two nonnegative extents.
inline Index checked_dim_product(Index a, Index b, const char* what) {
  Index out = 0;
  if (a < 0 || b < 0 || __builtin_mul_overflow(a, b, &out))
    throw SizeError(std::string(what) + ": dimension product overflows index type");
  return out;
}

}  // namespace kpc
