#ifndef SARL_TENSOR_HPP_
#define SARL_TENSOR_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace sarl {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Thrown when operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a caller violates an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<Index>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

/// Splits a shape around `axis` into (outer, length, inner) so that the flat
/// index of element (o, l, i) is (o * length + l) * inner + i.
struct AxisSplit {
  Index outer;
  Index length;
  Index inner;
};

inline AxisSplit split_axis(const Shape& shape, Index axis) {
  if (axis < 0 || axis >= static_cast<Index>(shape.size())) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (Index i = 0; i < axis; ++i) s.outer *= shape[i];
  for (Index i = axis + 1; i < static_cast<Index>(shape.size()); ++i) s.inner *= shape[i];
  return s;
}

/**
 * Dense row-major tensor of arbitrary rank. A plain value type: copying copies
 * the payload, and nothing here knows about gradients (see Tape / Var).
 */
template <typename Scalar>
class Tensor {
  static_assert(std::is_floating_point_v<Scalar>, "non floating-point scalar type");

 public:
  using MatrixMap = Eigen::Map<Matrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const Matrix<Scalar>>;

  Tensor() : shape_{0} {}

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(Vector<Scalar>::Constant(shape_size(shape_), fill)) {
    check_shape();
  }

  Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("payload of " + std::to_string(data_.size()) + " values does not fill shape " +
                           shape_string(shape_));
    }
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Vector<Scalar>(Eigen::Map<const Vector<Scalar>>(
                                     values.begin(), static_cast<Index>(values.size())))) {}

  static Tensor scalar(Scalar value) { return Tensor(Shape{}, value); }

  static Tensor vector(std::initializer_list<Scalar> values) {
    return Tensor(Shape{static_cast<Index>(values.size())}, values);
  }

  template <typename Derived>
  static Tensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    Matrix<Scalar> rm = m.template cast<Scalar>();
    return Tensor(Shape{rm.rows(), rm.cols()}, Eigen::Map<const Vector<Scalar>>(rm.data(), rm.size()));
  }

  template <typename Derived>
  static Tensor from_vector(const Eigen::MatrixBase<Derived>& v) {
    Vector<Scalar> data = v.template cast<Scalar>();
    return Tensor(Shape{data.size()}, std::move(data));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index axis) const {
    if (axis < 0 || axis >= rank()) throw DimensionError("axis out of range for " + shape_string(shape_));
    return shape_[axis];
  }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }

  Scalar& operator[](Index flat) { return data_[flat]; }
  Scalar operator[](Index flat) const { return data_[flat]; }

  Scalar& operator()(Index row, Index col) { return data_[row * shape_.back() + col]; }
  Scalar operator()(Index row, Index col) const { return data_[row * shape_.back() + col]; }

  Scalar item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  // Rank 2 maps as-is, rank 1 as a single row, rank 0 as 1x1.
  MatrixMap matrix() {
    auto [r, c] = matrix_dims();
    return MatrixMap(data_.data(), r, c);
  }
  ConstMatrixMap matrix() const {
    auto [r, c] = matrix_dims();
    return ConstMatrixMap(data_.data(), r, c);
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  void check_shape() const {
    for (Index d : shape_) {
      if (d < 0) throw DimensionError("negative dimension in shape " + shape_string(shape_));
    }
  }

  std::pair<Index, Index> matrix_dims() const {
    switch (rank()) {
      case 0: return {1, 1};
      case 1: return {1, shape_[0]};
      case 2: return {shape_[0], shape_[1]};
      default: throw DimensionError("matrix view needs rank <= 2, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  Vector<Scalar> data_;
};

/// Indices of the k largest values, descending; ties go to the lower index.
template <typename Scalar>
std::vector<Index> topk_indices(const Vector<Scalar>& values, Index k) {
  if (k < 0 || k > values.size()) throw ContractError("top-k with k=" + std::to_string(k) + " out of range");
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] > values[b]; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

}  // namespace sarl

#endif  // SARL_TENSOR_HPP_
