#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedsfr {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a gradient check lands on a quantizer decision boundary.
struct NonDifferentiablePoint : Error {
  using Error::Error;
};

/// Dense real tensor: an explicit shape over a flat row-major buffer.
/// Rank is 0 (scalar), 1, or 2; that is all the graph needs.
struct Tensor {
  std::vector<int> shape;
  Vector data;

  Tensor() = default;
  Tensor(std::vector<int> s, Vector d) : shape(std::move(s)), data(std::move(d)) {
    if (flat_size(shape) != data.size())
      throw Error("tensor shape/data size mismatch");
  }

  static Eigen::Index flat_size(const std::vector<int>& s) {
    Eigen::Index n = 1;
    for (int d : s) {
      if (d <= 0) throw Error("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  static Tensor scalar(double v) {
    Vector d(1);
    d[0] = v;
    return Tensor({1}, std::move(d));
  }

  static Tensor zeros(std::vector<int> s) {
    Vector d = Vector::Zero(flat_size(s));
    return Tensor(std::move(s), std::move(d));
  }

  static Tensor from_vector(Vector v) {
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
  }

  static Tensor from_matrix(const RowMatrix& m) {
    Tensor t;
    t.shape = {static_cast<int>(m.rows()), static_cast<int>(m.cols())};
    t.data = Eigen::Map<const Vector>(m.data(), m.size());
    return t;
  }

  int size() const { return static_cast<int>(data.size()); }
  bool is_scalar() const { return size() == 1; }

  int rows() const {
    if (shape.size() != 2) throw Error("tensor is not 2-d");
    return shape[0];
  }
  int cols() const {
    if (shape.size() != 2) throw Error("tensor is not 2-d");
    return shape[1];
  }

  Eigen::Map<const RowMatrix> mat() const {
    return Eigen::Map<const RowMatrix>(data.data(), rows(), cols());
  }
  Eigen::Map<RowMatrix> mat() {
    return Eigen::Map<RowMatrix>(data.data(), rows(), cols());
  }

  bool all_finite() const { return data.allFinite(); }
};

/// Mean squared error over all entries of two same-sized Eigen expressions.
template <typename A, typename B>
double mse(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size()) throw Error("mse: operand sizes differ");
  return (a.derived().reshaped() - b.derived().reshaped()).squaredNorm() /
         static_cast<double>(a.size());
}

}  // namespace fedsfr
