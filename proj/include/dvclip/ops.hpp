// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dvclip/tensor.hpp"

namespace dvclip {

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
  }
}

// Layout of `t` as (outer, length, stride) runs along `axis`.
struct AxisRuns {
  std::size_t outer;
  std::size_t length;
  std::size_t stride;
  std::size_t base(std::size_t o) const { return stride == 1 ? o * length : o; }
};

inline AxisRuns axis_runs(const Tensor& t, int axis, const char* op) {
  if (t.rank() == 1 && axis == 0) return {1, t.numel(), 1};
  if (t.rank() == 2 && axis == 1) return {t.dim(0), t.dim(1), 1};
  if (t.rank() == 2 && axis == 0) return {t.dim(1), t.dim(0), t.dim(1)};
  throw ShapeError(std::string(op) + ": invalid axis " + std::to_string(axis) + " for shape " +
                   shape_str(t.shape()));
}

// Row broadcast: `b` is either the same shape as `a` or a single row
// matching a's column count.
inline bool row_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return false;
  bool row_like = (b.rank() == 1 && b.numel() == a.cols()) ||
                  (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == a.cols());
  if (a.rank() == 2 && row_like) return true;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

inline std::vector<double> copy_values(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = fwd(v[i]);
  return make_result(x.shape(), std::move(out), {&x}, op, [deriv](Node& self) {
    auto& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * deriv(in.values[i], self.values[i]);
    }
  });
}

}  // namespace detail

/// Matrix product of [m,k] and [k,n].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  detail::MutMap(out.data(), m, n).noalias() =
      detail::ConstMap(a.values().data(), m, k) * detail::ConstMap(b.values().data(), k, n);
  return detail::make_result({m, n}, std::move(out), {&a, &b}, "matmul",
                             [m, k, n](detail::Node& self) {
                               auto& an = *self.inputs[0];
                               auto& bn = *self.inputs[1];
                               detail::ConstMap go(self.grad.data(), m, n);
                               if (an.requires_grad) {
                                 detail::MutMap(an.grad_buffer().data(), m, k).noalias() +=
                                     go * detail::ConstMap(bn.values.data(), k, n).transpose();
                               }
                               if (bn.requires_grad) {
                                 detail::MutMap(bn.grad_buffer().data(), k, n).noalias() +=
                                     detail::ConstMap(an.values.data(), m, k).transpose() * go;
                               }
                             });
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank2(a, "transpose");
  const auto r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return detail::make_result({c, r}, std::move(out), {&a}, "transpose", [r, c](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

namespace detail {

template <typename Combine, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Combine combine, DA da, DB db) {
  const bool bcast = row_broadcast(a, b, op);
  const auto cols = a.cols();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = combine(av[i], bv[bcast ? i % cols : i]);
  return make_result(a.shape(), std::move(out), {&a, &b}, op, [=](Node& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    const auto n = self.values.size();
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        g[i] += self.grad[i] * da(an.values[i], bn.values[bcast ? i % cols : i]);
      }
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = bcast ? i % cols : i;
        g[j] += self.grad[i] * db(an.values[i], bn.values[j]);
      }
    }
  });
}

}  // namespace detail

/// Elementwise sum; `b` may also be a single row broadcast over a's rows.
inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

/// Elementwise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(
      a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary(
      a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& a) {
  return detail::unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw DomainError("log: argument must be positive, got " + std::to_string(x));
  }
  return detail::unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

/// log(sigmoid(x)) without cancellation for large |x|.
inline Tensor log_sigmoid(const Tensor& a) {
  return detail::unary(
      a, "log_sigmoid",
      [](double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      [](double x, double) {
        // d/dx log sigmoid(x) = sigmoid(-x)
        if (x >= 0.0) {
          const double e = std::exp(-x);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(x));
      });
}

/// Elementwise x^p for x >= 0.
inline Tensor pow_scalar(const Tensor& a, double p) {
  for (double x : a.values()) {
    if (x < 0.0) throw DomainError("pow_scalar: negative base " + std::to_string(x));
  }
  return detail::unary(
      a, "pow", [p](double x) { return p == 0.0 ? 1.0 : std::pow(x, p); },
      [p](double x, double) {
        if (p == 0.0) return 0.0;
        if (x == 0.0) return p == 1.0 ? 1.0 : (p > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
        return p * std::pow(x, p - 1.0);
      });
}

/// Concatenates along `axis`. Rank-1 inputs only support axis 0.
inline Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const auto rank = parts[0].rank();
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: mixed ranks");
  }
  if (rank == 1) {
    if (axis != 0) throw ShapeError("concat: invalid axis for vectors");
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    const auto n = out.size();
    return detail::make_result({n}, std::move(out), parts, "concat", [](detail::Node& self) {
      std::size_t off = 0;
      for (auto& in : self.inputs) {
        if (in->requires_grad) {
          auto& g = in->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
        }
        off += in->values.size();
      }
    });
  }
  if (rank != 2 || (axis != 0 && axis != 1)) {
    throw ShapeError("concat: invalid axis " + std::to_string(axis));
  }
  if (axis == 0) {
    const auto c = parts[0].dim(1);
    std::size_t r = 0;
    for (const auto& p : parts) {
      if (p.dim(1) != c) {
        throw ShapeError("concat(axis=0): column mismatch " + shape_str(parts[0].shape()) + " vs " +
                         shape_str(p.shape()));
      }
      r += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(r * c);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return detail::make_result({r, c}, std::move(out), parts, "concat", [](detail::Node& self) {
      std::size_t off = 0;
      for (auto& in : self.inputs) {
        if (in->requires_grad) {
          auto& g = in->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off + i];
        }
        off += in->values.size();
      }
    });
  }
  const auto r = parts[0].dim(0);
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != r) {
      throw ShapeError("concat(axis=1): row mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    c += p.dim(1);
  }
  std::vector<double> out(r * c);
  std::size_t col0 = 0;
  for (const auto& p : parts) {
    const auto pc = p.dim(1);
    auto v = p.values();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(v.begin() + i * pc, pc, out.begin() + i * c + col0);
    col0 += pc;
  }
  return detail::make_result({r, c}, std::move(out), parts, "concat", [r, c](detail::Node& self) {
    std::size_t col0 = 0;
    for (auto& in : self.inputs) {
      const auto pc = in->shape[1];
      if (in->requires_grad) {
        auto& g = in->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) g[i * pc + j] += self.grad[i * c + col0 + j];
      }
      col0 += pc;
    }
  });
}

inline Tensor concat(std::initializer_list<Tensor> parts, int axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

/// Stacks equal-length vectors as the rows of a matrix.
inline Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  std::vector<Tensor> as_rows;
  as_rows.reserve(rows.size());
  for (const auto& r : rows) as_rows.push_back(r.reshaped({1, r.numel()}));
  return concat(as_rows, 0);
}

inline Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  detail::require_rank2(a, "slice_rows");
  if (begin >= end || end > a.dim(0)) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + shape_str(a.shape()));
  }
  const auto c = a.dim(1);
  std::vector<double> out(a.values().begin() + begin * c, a.values().begin() + end * c);
  return detail::make_result({end - begin, c}, std::move(out), {&a}, "slice_rows",
                             [off = begin * c](detail::Node& self) {
                               auto& g = self.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
                             });
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  detail::require_rank2(a, "slice_cols");
  if (begin >= end || end > a.dim(1)) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") outside " + shape_str(a.shape()));
  }
  const auto r = a.dim(0), c = a.dim(1), w = end - begin;
  std::vector<double> out(r * w);
  auto v = a.values();
  for (std::size_t i = 0; i < r; ++i) std::copy_n(v.begin() + i * c + begin, w, out.begin() + i * w);
  return detail::make_result({r, w}, std::move(out), {&a}, "slice_cols",
                             [r, c, w, begin](detail::Node& self) {
                               auto& g = self.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < r; ++i)
                                 for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
                             });
}

/// Rows of `table` selected by `indices` (embedding lookup).
inline Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  detail::require_rank2(table, "gather_rows");
  if (indices.empty()) throw ShapeError("gather_rows: no indices");
  const auto c = table.dim(1);
  std::vector<double> out;
  out.reserve(indices.size() * c);
  for (auto idx : indices) {
    if (idx >= table.dim(0)) {
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " outside " + shape_str(table.shape()));
    }
    out.insert(out.end(), table.values().begin() + idx * c, table.values().begin() + (idx + 1) * c);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return detail::make_result({idx.size(), c}, std::move(out), {&table}, "gather_rows",
                             [idx, c](detail::Node& self) {
                               auto& g = self.inputs[0]->grad_buffer();
                               for (std::size_t r = 0; r < idx.size(); ++r)
                                 for (std::size_t j = 0; j < c; ++j) g[idx[r] * c + j] += self.grad[r * c + j];
                             });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return detail::make_result({1}, {s}, {&a}, "sum", [](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (auto& x : g) x += self.grad[0];
  });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

/// Reduces a matrix along `axis`: axis 1 gives one value per row.
inline Tensor sum_axis(const Tensor& a, int axis) {
  detail::require_rank2(a, "sum_axis");
  const auto runs = detail::axis_runs(a, axis, "sum_axis");
  std::vector<double> out(runs.outer, 0.0);
  auto v = a.values();
  for (std::size_t o = 0; o < runs.outer; ++o) {
    const auto base = runs.base(o);
    double s = 0.0;
    for (std::size_t i = 0; i < runs.length; ++i) s += v[base + i * runs.stride];
    out[o] = s;
  }
  return detail::make_result({runs.outer}, std::move(out), {&a}, "sum_axis", [runs](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < runs.outer; ++o) {
      const auto base = runs.base(o);
      for (std::size_t i = 0; i < runs.length; ++i) g[base + i * runs.stride] += self.grad[o];
    }
  });
}

/// Softmax along `axis` (max-shifted).
inline Tensor softmax(const Tensor& a, int axis) {
  const auto runs = detail::axis_runs(a, axis, "softmax");
  auto v = a.values();
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < runs.outer; ++o) {
    const auto base = runs.base(o);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < runs.length; ++i) mx = std::max(mx, v[base + i * runs.stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < runs.length; ++i) {
      const auto k = base + i * runs.stride;
      out[k] = std::exp(v[k] - mx);
      z += out[k];
    }
    for (std::size_t i = 0; i < runs.length; ++i) out[base + i * runs.stride] /= z;
  }
  return detail::make_result(a.shape(), std::move(out), {&a}, "softmax", [runs](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < runs.outer; ++o) {
      const auto base = runs.base(o);
      double dot = 0.0;
      for (std::size_t i = 0; i < runs.length; ++i) {
        const auto k = base + i * runs.stride;
        dot += self.grad[k] * self.values[k];
      }
      for (std::size_t i = 0; i < runs.length; ++i) {
        const auto k = base + i * runs.stride;
        g[k] += self.values[k] * (self.grad[k] - dot);
      }
    }
  });
}

/// log(softmax(x)) along `axis`, computed without forming the softmax.
inline Tensor log_softmax(const Tensor& a, int axis) {
  const auto runs = detail::axis_runs(a, axis, "log_softmax");
  auto v = a.values();
  std::vector<double> out(v.size());
  for (std::size_t o = 0; o < runs.outer; ++o) {
    const auto base = runs.base(o);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < runs.length; ++i) mx = std::max(mx, v[base + i * runs.stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < runs.length; ++i) z += std::exp(v[base + i * runs.stride] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < runs.length; ++i) out[base + i * runs.stride] = v[base + i * runs.stride] - lse;
  }
  return detail::make_result(a.shape(), std::move(out), {&a}, "log_softmax", [runs](detail::Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < runs.outer; ++o) {
      const auto base = runs.base(o);
      double total = 0.0;
      for (std::size_t i = 0; i < runs.length; ++i) total += self.grad[base + i * runs.stride];
      for (std::size_t i = 0; i < runs.length; ++i) {
        const auto k = base + i * runs.stride;
        g[k] += self.grad[k] - std::exp(self.values[k]) * total;
      }
    }
  });
}

/// Scales each run along `axis` to unit Euclidean norm.
inline Tensor l2_normalize(const Tensor& a, int axis) {
  const auto runs = detail::axis_runs(a, axis, "l2_normalize");
  auto v = a.values();
  std::vector<double> out(v.size());
  std::vector<double> norms(runs.outer);
  for (std::size_t o = 0; o < runs.outer; ++o) {
    const auto base = runs.base(o);
    double ss = 0.0;
    for (std::size_t i = 0; i < runs.length; ++i) ss += v[base + i * runs.stride] * v[base + i * runs.stride];
    if (!(ss > 0.0)) throw DomainError("l2_normalize: zero vector");
    norms[o] = std::sqrt(ss);
    for (std::size_t i = 0; i < runs.length; ++i) {
      const auto k = base + i * runs.stride;
      out[k] = v[k] / norms[o];
    }
  }
  return detail::make_result(a.shape(), std::move(out), {&a}, "l2_normalize",
                             [runs, norms = std::move(norms)](detail::Node& self) {
                               auto& g = self.inputs[0]->grad_buffer();
                               for (std::size_t o = 0; o < runs.outer; ++o) {
                                 const auto base = runs.base(o);
                                 double dot = 0.0;
                                 for (std::size_t i = 0; i < runs.length; ++i) {
                                   const auto k = base + i * runs.stride;
                                   dot += self.grad[k] * self.values[k];
                                 }
                                 for (std::size_t i = 0; i < runs.length; ++i) {
                                   const auto k = base + i * runs.stride;
                                   g[k] += (self.grad[k] - self.values[k] * dot) / norms[o];
                                 }
                               }
                             });
}

/// Row-wise layer normalization with affine gain and bias of length cols.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  detail::require_rank2(x, "layer_norm");
  const auto r = x.dim(0), c = x.dim(1);
  if (gain.numel() != c || bias.numel() != c) {
    throw ShapeError("layer_norm: affine parameters must have " + std::to_string(c) + " entries");
  }
  auto v = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<double> out(r * c), xhat(r * c), inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += v[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (v[i * c + j] - mu) * (v[i * c + j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (v[i * c + j] - mu) * inv_std[i];
      out[i * c + j] = xhat[i * c + j] * gv[j] + bv[j];
    }
  }
  return detail::make_result(
      {r, c}, std::move(out), {&x, &gain, &bias}, "layer_norm",
      [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const auto& gout = self.grad;
        if (gn.requires_grad) {
          auto& g = gn.grad_buffer();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += gout[i * c + j] * xhat[i * c + j];
        }
        if (bn.requires_grad) {
          auto& g = bn.grad_buffer();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[j] += gout[i * c + j];
        }
        if (xn.requires_grad) {
          auto& g = xn.grad_buffer();
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = gout[i * c + j] * gn.values[j];
              m1 += dxh;
              m2 += dxh * xhat[i * c + j];
            }
            m1 *= inv_c;
            m2 *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = gout[i * c + j] * gn.values[j];
              g[i * c + j] += inv_std[i] * (dxh - m1 - xhat[i * c + j] * m2);
            }
          }
        }
      });
}

/// Layer normalization without affine parameters.
inline Tensor layer_norm(const Tensor& x, double eps = 1e-5) {
  detail::require_rank2(x, "layer_norm");
  return layer_norm(x, Tensor::full({x.dim(1)}, 1.0), Tensor::zeros({x.dim(1)}), eps);
}

/// Pairwise cosine similarity between the rows of a [n,d] and b [m,d],
/// giving [n,m]. Vectors are treated as single rows.
inline Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  const auto ar = a.rank() == 1 ? a.reshaped({1, a.numel()}) : a;
  const auto br = b.rank() == 1 ? b.reshaped({1, b.numel()}) : b;
  if (ar.rank() != 2 || br.rank() != 2 || ar.dim(1) != br.dim(1)) {
    throw ShapeError("cosine_similarity: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  return matmul(l2_normalize(ar, 1), transpose(l2_normalize(br, 1)));
}

}  // namespace dvclip
