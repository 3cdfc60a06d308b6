#ifndef SARL_OPS_HPP_
#define SARL_OPS_HPP_

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sarl/tape.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

namespace detail {

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

template <typename Scalar>
void require_rank(const Var<Scalar>& a, Index rank, const char* op) {
  if (a.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
  }
}

// Elementwise map; `deriv` gives the pointwise derivative as a function of the input.
template <typename Scalar, typename Fwd, typename Deriv>
Var<Scalar> unary(const Var<Scalar>& x, Fwd fwd, Deriv deriv) {
  Tensor<Scalar> out(x.shape(), fwd(x.value().data().array()).matrix().eval());
  const NodeId xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, deriv](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto xv = t.value(xi).data().array();
    t.accumulate(xi, (g.data().array() * deriv(xv)).matrix());
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (identical shapes).

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "add");
  const NodeId ai = a.id(), bi = b.id();
  return a.tape().record(Tensor<Scalar>(a.shape(), (a.value().data() + b.value().data()).eval()), {a, b},
                         [ai, bi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           t.accumulate(ai, g);
                           t.accumulate(bi, g);
                         });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "sub");
  const NodeId ai = a.id(), bi = b.id();
  return a.tape().record(Tensor<Scalar>(a.shape(), (a.value().data() - b.value().data()).eval()), {a, b},
                         [ai, bi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           t.accumulate(ai, g);
                           t.accumulate(bi, (-g.data()).eval());
                         });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "mul");
  const NodeId ai = a.id(), bi = b.id();
  Vector<Scalar> out = a.value().data().cwiseProduct(b.value().data());
  return a.tape().record(Tensor<Scalar>(a.shape(), std::move(out)), {a, b},
                         [ai, bi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           t.accumulate(ai, g.data().cwiseProduct(t.value(bi).data()));
                           t.accumulate(bi, g.data().cwiseProduct(t.value(ai).data()));
                         });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const NodeId ai = a.id();
  return a.tape().record(Tensor<Scalar>(a.shape(), (a.value().data() * s).eval()), {a},
                         [ai, s](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(ai, g.data() * s); });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  const NodeId ai = a.id();
  Vector<Scalar> out = (a.value().data().array() + s).matrix();
  return a.tape().record(Tensor<Scalar>(a.shape(), std::move(out)), {a},
                         [ai](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(ai, g); });
}

template <typename Scalar>
Var<Scalar> neg(const Var<Scalar>& a) {
  return scale(a, Scalar(-1));
}

// ---------------------------------------------------------------------------
// Elementwise unary ops.

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.exp(); }, [](const auto& v) { return v.exp(); });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.log(); }, [](const auto& v) { return v.inverse(); });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.tanh(); }, [](const auto& v) { return Scalar(1) - v.tanh().square(); });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  auto sig = [](const auto& v) { return Scalar(1) / (Scalar(1) + (-v).exp()); };
  return detail::unary(x, sig, [sig](const auto& v) {
    auto s = sig(v).eval();
    return (s * (Scalar(1) - s)).eval();
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.max(Scalar(0)); },
      [](const auto& v) { return (v > Scalar(0)).template cast<Scalar>(); });
}

/// Square root; the derivative at exactly 0 is taken as 0 rather than +inf.
template <typename Scalar>
Var<Scalar> sqrt(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.sqrt(); },
      [](const auto& v) {
        return (v > Scalar(0)).select(Scalar(0.5) / v.sqrt(), Scalar(0));
      });
}

template <typename Scalar>
Var<Scalar> reciprocal(const Var<Scalar>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.inverse(); }, [](const auto& v) { return -v.square().inverse(); });
}

/// x^e for a constant exponent. e == 0 gives ones with zero gradient; where x
/// is 0 the derivative is taken as 0 (covers e < 1, where it is unbounded).
template <typename Scalar>
Var<Scalar> pow(const Var<Scalar>& x, Scalar e) {
  if (e == Scalar(0)) return x.tape().constant(Tensor<Scalar>(x.shape(), Scalar(1)));
  return detail::unary(
      x, [e](const auto& v) { return v.pow(e); },
      [e](const auto& v) { return (v != Scalar(0)).select(e * v.pow(e - Scalar(1)), Scalar(0)); });
}

/// Clamps to [lo, hi]; gradient passes only where lo < x < hi.
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& x, Scalar lo, Scalar hi) {
  return detail::unary(
      x, [lo, hi](const auto& v) { return v.max(lo).min(hi); },
      [lo, hi](const auto& v) { return ((v > lo) && (v < hi)).template cast<Scalar>(); });
}

// ---------------------------------------------------------------------------
// Linear algebra.

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  if (a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: inner dimensions of " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " disagree");
  }
  const NodeId ai = a.id(), bi = b.id();
  Matrix<Scalar> out = a.value().matrix() * b.value().matrix();
  return a.tape().record(Tensor<Scalar>::from_matrix(out), {a, b},
                         [ai, bi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           const auto gm = g.matrix();
                           if (t.requires_grad(ai)) {
                             Matrix<Scalar> ga = gm * t.value(bi).matrix().transpose();
                             t.accumulate(ai, Eigen::Map<const Vector<Scalar>>(ga.data(), ga.size()));
                           }
                           if (t.requires_grad(bi)) {
                             Matrix<Scalar> gb = t.value(ai).matrix().transpose() * gm;
                             t.accumulate(bi, Eigen::Map<const Vector<Scalar>>(gb.data(), gb.size()));
                           }
                         });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  detail::require_rank(a, 2, "transpose");
  const NodeId ai = a.id();
  Matrix<Scalar> out = a.value().matrix().transpose();
  return a.tape().record(Tensor<Scalar>::from_matrix(out), {a}, [ai](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Matrix<Scalar> gt = g.matrix().transpose();
    t.accumulate(ai, Eigen::Map<const Vector<Scalar>>(gt.data(), gt.size()));
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Shape shape) {
  const NodeId ai = a.id();
  return a.tape().record(a.value().reshaped(std::move(shape)), {a},
                         [ai](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(ai, g.data()); });
}

// ---------------------------------------------------------------------------
// Row / column broadcasting for rank-2 x.

/// x[m x n] + v[n] broadcast over rows.
template <typename Scalar>
Var<Scalar> add_rowwise(const Var<Scalar>& x, const Var<Scalar>& v) {
  detail::require_rank(x, 2, "add_rowwise");
  if (v.size() != x.shape()[1]) throw DimensionError("add_rowwise: vector length must equal column count");
  const NodeId xi = x.id(), vi = v.id();
  Matrix<Scalar> out = x.value().matrix().rowwise() + v.value().data().transpose();
  return x.tape().record(Tensor<Scalar>::from_matrix(out), {x, v},
                         [xi, vi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           t.accumulate(xi, g);
                           t.accumulate(vi, g.matrix().colwise().sum().transpose());
                         });
}

/// x[m x n] scaled per column by v[n].
template <typename Scalar>
Var<Scalar> mul_rowwise(const Var<Scalar>& x, const Var<Scalar>& v) {
  detail::require_rank(x, 2, "mul_rowwise");
  if (v.size() != x.shape()[1]) throw DimensionError("mul_rowwise: vector length must equal column count");
  const NodeId xi = x.id(), vi = v.id();
  Matrix<Scalar> out = x.value().matrix() * v.value().data().asDiagonal();
  return x.tape().record(Tensor<Scalar>::from_matrix(out), {x, v},
                         [xi, vi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           const auto gm = g.matrix();
                           if (t.requires_grad(xi)) {
                             Matrix<Scalar> gx = gm * t.value(vi).data().asDiagonal();
                             t.accumulate(xi, Eigen::Map<const Vector<Scalar>>(gx.data(), gx.size()));
                           }
                           t.accumulate(vi, gm.cwiseProduct(t.value(xi).matrix()).colwise().sum().transpose());
                         });
}

/// x[m x n] scaled per row by v[m].
template <typename Scalar>
Var<Scalar> mul_colwise(const Var<Scalar>& x, const Var<Scalar>& v) {
  detail::require_rank(x, 2, "mul_colwise");
  if (v.size() != x.shape()[0]) throw DimensionError("mul_colwise: vector length must equal row count");
  const NodeId xi = x.id(), vi = v.id();
  Matrix<Scalar> out = v.value().data().asDiagonal() * x.value().matrix();
  return x.tape().record(Tensor<Scalar>::from_matrix(out), {x, v},
                         [xi, vi](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           const auto gm = g.matrix();
                           if (t.requires_grad(xi)) {
                             Matrix<Scalar> gx = t.value(vi).data().asDiagonal() * gm;
                             t.accumulate(xi, Eigen::Map<const Vector<Scalar>>(gx.data(), gx.size()));
                           }
                           t.accumulate(vi, gm.cwiseProduct(t.value(xi).matrix()).rowwise().sum());
                         });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const NodeId ai = a.id();
  return a.tape().record(Tensor<Scalar>::scalar(a.value().data().sum()), {a},
                         [ai](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           t.accumulate(ai, Vector<Scalar>::Constant(t.value(ai).size(), g.item()));
                         });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  if (a.size() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.size()));
}

namespace detail {

inline Shape drop_axis(const Shape& shape, Index axis) {
  Shape out;
  for (Index i = 0; i < static_cast<Index>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

}  // namespace detail

/// Sum along `axis`; the axis is removed from the result shape.
template <typename Scalar>
Var<Scalar> sum_axis(const Var<Scalar>& a, Index axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  const auto& x = a.value();
  Tensor<Scalar> out(detail::drop_axis(a.shape(), axis));
  for (Index o = 0; o < s.outer; ++o)
    for (Index l = 0; l < s.length; ++l)
      for (Index i = 0; i < s.inner; ++i) out[o * s.inner + i] += x[(o * s.length + l) * s.inner + i];
  const NodeId ai = a.id();
  return a.tape().record(std::move(out), {a}, [ai, s](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Vector<Scalar> gx(s.outer * s.length * s.inner);
    for (Index o = 0; o < s.outer; ++o)
      for (Index l = 0; l < s.length; ++l)
        for (Index i = 0; i < s.inner; ++i) gx[(o * s.length + l) * s.inner + i] = g[o * s.inner + i];
    t.accumulate(ai, gx);
  });
}

template <typename Scalar>
Var<Scalar> mean_axis(const Var<Scalar>& a, Index axis) {
  const Index n = split_axis(a.shape(), axis).length;
  if (n == 0) throw ContractError("mean over empty axis");
  return scale(sum_axis(a, axis), Scalar(1) / static_cast<Scalar>(n));
}

/// Max along `axis`; gradient goes to the first maximal element of each slice.
template <typename Scalar>
Var<Scalar> max_axis(const Var<Scalar>& a, Index axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  if (s.length == 0) throw ContractError("max over empty axis");
  const auto& x = a.value();
  Tensor<Scalar> out(detail::drop_axis(a.shape(), axis));
  std::vector<Index> argmax(static_cast<std::size_t>(s.outer * s.inner));
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      Index best = o * s.length * s.inner + i;
      for (Index l = 1; l < s.length; ++l) {
        const Index k = (o * s.length + l) * s.inner + i;
        if (x[k] > x[best]) best = k;
      }
      out[o * s.inner + i] = x[best];
      argmax[static_cast<std::size_t>(o * s.inner + i)] = best;
    }
  }
  const NodeId ai = a.id();
  const Index n = x.size();
  return a.tape().record(std::move(out), {a},
                         [ai, n, argmax = std::move(argmax)](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           Vector<Scalar> gx = Vector<Scalar>::Zero(n);
                           for (std::size_t j = 0; j < argmax.size(); ++j) gx[argmax[j]] += g[static_cast<Index>(j)];
                           t.accumulate(ai, gx);
                         });
}

// ---------------------------------------------------------------------------
// Softmax.

/// Softmax along `axis`, computed with the per-slice maximum subtracted.
template <typename Scalar>
Tensor<Scalar> softmax_values(const Tensor<Scalar>& x, Index axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor<Scalar> y(x.shape());
  for (Index o = 0; o < s.outer; ++o) {
    for (Index i = 0; i < s.inner; ++i) {
      const Index base = o * s.length * s.inner + i;
      Scalar m = -std::numeric_limits<Scalar>::infinity();
      for (Index l = 0; l < s.length; ++l) m = std::max(m, x[base + l * s.inner]);
      Scalar z = 0;
      for (Index l = 0; l < s.length; ++l) {
        const Scalar e = std::exp(x[base + l * s.inner] - m);
        y[base + l * s.inner] = e;
        z += e;
      }
      for (Index l = 0; l < s.length; ++l) y[base + l * s.inner] /= z;
    }
  }
  return y;
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& x, Index axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  const NodeId xi = x.id();
  Tensor<Scalar> y = softmax_values(x.value(), axis);
  // dx = y * (g - sum_axis(g * y))
  return x.tape().record(y, {x}, [xi, s, yv = y](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Vector<Scalar> gx(yv.size());
    for (Index o = 0; o < s.outer; ++o) {
      for (Index i = 0; i < s.inner; ++i) {
        const Index base = o * s.length * s.inner + i;
        Scalar dot = 0;
        for (Index l = 0; l < s.length; ++l) dot += g[base + l * s.inner] * yv[base + l * s.inner];
        for (Index l = 0; l < s.length; ++l) {
          const Index k = base + l * s.inner;
          gx[k] = yv[k] * (g[k] - dot);
        }
      }
    }
    t.accumulate(xi, gx);
  });
}

// ---------------------------------------------------------------------------
// Structural ops.

/// Concatenates along `axis`; all other dimensions must agree.
template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, Index axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  Shape shape = parts.front().shape();
  split_axis(shape, axis);
  Index total = 0;
  std::vector<Index> lengths;
  for (const auto& p : parts) {
    Shape ps = p.shape();
    if (ps.size() != shape.size()) throw DimensionError("concat: rank mismatch");
    lengths.push_back(ps[axis]);
    total += ps[axis];
    ps[axis] = shape[axis];
    if (ps != shape) throw DimensionError("concat: shapes disagree off the concatenation axis");
  }
  shape[axis] = total;
  Tensor<Scalar> out(shape);
  const AxisSplit s = split_axis(shape, axis);
  Index offset = 0;
  std::vector<NodeId> ids;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const auto& v = parts[j].value();
    const Index len = lengths[j];
    for (Index o = 0; o < s.outer; ++o)
      for (Index l = 0; l < len; ++l)
        for (Index i = 0; i < s.inner; ++i)
          out[(o * total + offset + l) * s.inner + i] = v[(o * len + l) * s.inner + i];
    offset += len;
    ids.push_back(parts[j].id());
  }
  return parts.front().tape().record(
      std::move(out), parts, [ids, lengths, s, total](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        Index off = 0;
        for (std::size_t j = 0; j < ids.size(); ++j) {
          const Index len = lengths[j];
          if (t.requires_grad(ids[j])) {
            Vector<Scalar> gp(s.outer * len * s.inner);
            for (Index o = 0; o < s.outer; ++o)
              for (Index l = 0; l < len; ++l)
                for (Index i = 0; i < s.inner; ++i)
                  gp[(o * len + l) * s.inner + i] = g[(o * total + off + l) * s.inner + i];
            t.accumulate(ids[j], gp);
          }
          off += len;
        }
      });
}

/// Elements [start, start + length) along `axis`.
template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, Index axis, Index start, Index length) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (start < 0 || length < 0 || start + length > s.length) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range for " + shape_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  Tensor<Scalar> out(shape);
  const auto& v = x.value();
  for (Index o = 0; o < s.outer; ++o)
    for (Index l = 0; l < length; ++l)
      for (Index i = 0; i < s.inner; ++i)
        out[(o * length + l) * s.inner + i] = v[(o * s.length + start + l) * s.inner + i];
  const NodeId xi = x.id();
  return x.tape().record(std::move(out), {x}, [xi, s, start, length](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    Vector<Scalar> gx = Vector<Scalar>::Zero(s.outer * s.length * s.inner);
    for (Index o = 0; o < s.outer; ++o)
      for (Index l = 0; l < length; ++l)
        for (Index i = 0; i < s.inner; ++i)
          gx[(o * s.length + start + l) * s.inner + i] = g[(o * length + l) * s.inner + i];
    t.accumulate(xi, gx);
  });
}

/// Selects slices along axis 0 (repeats allowed). Indices carry no gradient;
/// the backward pass scatter-adds into the selected rows.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& x, std::vector<Index> rows) {
  if (x.value().rank() < 1) throw DimensionError("gather_rows on a scalar");
  const Index n = x.shape()[0];
  const Index width = n == 0 ? 0 : x.size() / n;
  Shape shape = x.shape();
  shape[0] = static_cast<Index>(rows.size());
  Tensor<Scalar> out(shape);
  const auto& v = x.value().data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n) throw DimensionError("gather_rows: index out of range");
    out.data().segment(static_cast<Index>(r) * width, width) = v.segment(rows[r] * width, width);
  }
  const NodeId xi = x.id();
  const Index size = x.size();
  return x.tape().record(std::move(out), {x},
                         [xi, width, size, rows = std::move(rows)](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           Vector<Scalar> gx = Vector<Scalar>::Zero(size);
                           for (std::size_t r = 0; r < rows.size(); ++r)
                             gx.segment(rows[r] * width, width) += g.data().segment(static_cast<Index>(r) * width, width);
                           t.accumulate(xi, gx);
                         });
}

/// Unfolds an H x W x C image into patches: one row per output position,
/// (kernel * kernel * C) columns ordered (ky, kx, c). Zero padding.
template <typename Scalar>
Var<Scalar> im2col(const Var<Scalar>& image, Index kernel, Index stride, Index pad) {
  detail::require_rank(image, 3, "im2col");
  const Index h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  if (kernel < 1 || stride < 1 || pad < 0) throw ContractError("im2col: invalid kernel geometry");
  if (h + 2 * pad < kernel || w + 2 * pad < kernel) throw DimensionError("im2col: kernel larger than padded input");
  const Index ho = (h + 2 * pad - kernel) / stride + 1;
  const Index wo = (w + 2 * pad - kernel) / stride + 1;
  const Index cols = kernel * kernel * c;
  // Source flat index per output element; -1 marks padding.
  std::vector<Index> source(static_cast<std::size_t>(ho * wo * cols), -1);
  for (Index oy = 0; oy < ho; ++oy)
    for (Index ox = 0; ox < wo; ++ox)
      for (Index ky = 0; ky < kernel; ++ky)
        for (Index kx = 0; kx < kernel; ++kx) {
          const Index iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
          if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
          for (Index ch = 0; ch < c; ++ch)
            source[static_cast<std::size_t>((oy * wo + ox) * cols + (ky * kernel + kx) * c + ch)] = (iy * w + ix) * c + ch;
        }
  Tensor<Scalar> out(Shape{ho * wo, cols});
  const auto& v = image.value();
  for (std::size_t k = 0; k < source.size(); ++k)
    if (source[k] >= 0) out[static_cast<Index>(k)] = v[source[k]];
  const NodeId xi = image.id();
  const Index size = image.size();
  return image.tape().record(std::move(out), {image},
                             [xi, size, source = std::move(source)](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                               Vector<Scalar> gx = Vector<Scalar>::Zero(size);
                               for (std::size_t k = 0; k < source.size(); ++k)
                                 if (source[k] >= 0) gx[source[k]] += g[static_cast<Index>(k)];
                               t.accumulate(xi, gx);
                             });
}

}  // namespace sarl

#endif  // SARL_OPS_HPP_
