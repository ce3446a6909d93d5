#include "antq/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace antq::ad {

namespace {

using Impl = detail::TensorImpl;
using ImplPtr = std::shared_ptr<Impl>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <class Fn>
Tensor finish(Tensor out, std::initializer_list<const Tensor*> inputs, Fn&& make_backward) {
  if (tracking(inputs)) {
    out.set_requires_grad(true);
    active_tape()->record(out.handle(), make_backward(&out.impl()));
  }
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

std::size_t resolve_axis(const Tensor& x, int axis) {
  int r = static_cast<int>(x.rank());
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(x.shape()));
  }
  return static_cast<std::size_t>(a);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class F, class D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xd[i]);
  return finish(Tensor(x.shape(), std::move(out)), {&x}, [X = x.handle(), dfdx](Impl* O) {
    return [X, O, dfdx] {
      auto g = X->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += O->grad[i] * dfdx(X->data[i], O->data[i]);
    };
  });
}

// Same-shape binary op; da/db give partial derivatives at (a, b).
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  require_same_shape(a, b, name);
  std::vector<double> out(a.size());
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(ad[i], bd[i]);
  return finish(Tensor(a.shape(), std::move(out)), {&a, &b},
                [A = a.handle(), B = b.handle(), da, db](Impl* O) {
                  return [A, B, O, da, db] {
                    if (A->requires_grad) {
                      auto g = A->grad_buffer();
                      for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] += O->grad[i] * da(A->data[i], B->data[i]);
                    }
                    if (B->requires_grad) {
                      auto g = B->grad_buffer();
                      for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] += O->grad[i] * db(A->data[i], B->data[i]);
                    }
                  };
                });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 operands, got " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner dimensions disagree: " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  Map(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  return finish(Tensor({m, n}, std::move(out)), {&a, &b},
                [A = a.handle(), B = b.handle(), m, k, n](Impl* O) {
                  return [A, B, O, m, k, n] {
                    MapC dout(O->grad.data(), m, n);
                    if (A->requires_grad) {
                      Map(A->grad_buffer().data(), m, k).noalias() +=
                          dout * MapC(B->data.data(), k, n).transpose();
                    }
                    if (B->requires_grad) {
                      Map(B->grad_buffer().data(), k, n).noalias() +=
                          MapC(A->data.data(), m, k).transpose() * dout;
                    }
                  };
                });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose expects rank 2, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  Map(out.data(), n, m) = MapC(a.data().data(), m, n).transpose();
  return finish(Tensor({n, m}, std::move(out)), {&a}, [A = a.handle(), m, n](Impl* O) {
    return [A, O, m, n] {
      Map(A->grad_buffer().data(), m, n) += MapC(O->grad.data(), n, m).transpose();
    };
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

// Ties route the gradient to the first operand.
Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "minimum", [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "maximum", [](double x, double y) { return std::max(x, y); },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.cols();
  if (bias.size() != n) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " vs input " +
                         to_string(x.shape()));
  }
  const std::size_t rows = x.rows();
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bd[c];
  return finish(Tensor(x.shape(), std::move(out)), {&x, &bias},
                [X = x.handle(), B = bias.handle(), rows, n](Impl* O) {
                  return [X, B, O, rows, n] {
                    if (X->requires_grad) {
                      auto g = X->grad_buffer();
                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += O->grad[i];
                    }
                    if (B->requires_grad) {
                      auto g = B->grad_buffer();
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < n; ++c) g[c] += O->grad[r * n + c];
                    }
                  };
                });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericalError("log of non-positive value");
  }
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto s = split_at(x.shape(), resolve_axis(x, axis));
  if (s.n == 0) throw DimensionError("softmax over empty axis");
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xd[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        double e = std::exp(xd[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= z;
    }
  }
  return finish(Tensor(x.shape(), std::move(out)), {&x}, [X = x.handle(), s](Impl* O) {
    return [X, O, s] {
      auto g = X->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.n * s.inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < s.n; ++j) {
            auto idx = base + j * s.inner;
            dot += O->grad[idx] * O->data[idx];
          }
          for (std::size_t j = 0; j < s.n; ++j) {
            auto idx = base + j * s.inner;
            g[idx] += O->data[idx] * (O->grad[idx] - dot);
          }
        }
      }
    };
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  const auto s = split_at(x.shape(), resolve_axis(x, axis));
  if (s.n == 0) throw DimensionError("log_softmax over empty axis");
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xd[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) z += std::exp(xd[base + j * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] = xd[base + j * s.inner] - lse;
    }
  }
  return finish(Tensor(x.shape(), std::move(out)), {&x}, [X = x.handle(), s](Impl* O) {
    return [X, O, s] {
      auto g = X->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.n * s.inner + in;
          double total = 0.0;
          for (std::size_t j = 0; j < s.n; ++j) total += O->grad[base + j * s.inner];
          for (std::size_t j = 0; j < s.n; ++j) {
            auto idx = base + j * s.inner;
            g[idx] += O->grad[idx] - std::exp(O->data[idx]) * total;
          }
        }
      }
    };
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.cols();
  if (d == 0) throw DimensionError("layernorm over empty feature axis");
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layernorm: gain/bias must have " + std::to_string(d) + " elements");
  }
  if (!(eps > 0.0)) throw UsageError("layernorm eps must be positive");
  const std::size_t rows = x.rows();
  std::vector<double> out(x.size());
  // normalized values and reciprocal std are kept for the backward pass
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  auto xd = x.data(), gd = gain.data(), bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < d; ++c) {
      double h = (row[c] - mu) * rs;
      (*xhat)[r * d + c] = h;
      out[r * d + c] = gd[c] * h + bd[c];
    }
  }
  return finish(Tensor(x.shape(), std::move(out)), {&x, &gain, &bias},
                [X = x.handle(), G = gain.handle(), B = bias.handle(), xhat, rstd, rows,
                 d](Impl* O) {
                  return [X, G, B, O, xhat, rstd, rows, d] {
                    const auto& dy = O->grad;
                    if (G->requires_grad) {
                      auto g = G->grad_buffer();
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < d; ++c) g[c] += dy[r * d + c] * (*xhat)[r * d + c];
                    }
                    if (B->requires_grad) {
                      auto g = B->grad_buffer();
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < d; ++c) g[c] += dy[r * d + c];
                    }
                    if (X->requires_grad) {
                      auto g = X->grad_buffer();
                      const double inv_d = 1.0 / static_cast<double>(d);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double m1 = 0.0, m2 = 0.0;
                        for (std::size_t c = 0; c < d; ++c) {
                          double dh = dy[r * d + c] * G->data[c];
                          m1 += dh;
                          m2 += dh * (*xhat)[r * d + c];
                        }
                        m1 *= inv_d;
                        m2 *= inv_d;
                        for (std::size_t c = 0; c < d; ++c) {
                          double dh = dy[r * d + c] * G->data[c];
                          g[r * d + c] += (*rstd)[r] * (dh - m1 - (*xhat)[r * d + c] * m2);
                        }
                      }
                    }
                  };
                });
}

Tensor mean(const Tensor& x, int axis, bool keepdim) {
  const std::size_t ax = resolve_axis(x, axis);
  const auto s = split_at(x.shape(), ax);
  if (s.n == 0) throw DimensionError("mean over empty axis");
  Shape shape = x.shape();
  if (keepdim) {
    shape[ax] = 1;
  } else {
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto xd = x.data();
  const double inv = 1.0 / static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.n; ++j)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += xd[(o * s.n + j) * s.inner + in] * inv;
  return finish(Tensor(std::move(shape), std::move(out)), {&x}, [X = x.handle(), s, inv](Impl* O) {
    return [X, O, s, inv] {
      auto g = X->grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t j = 0; j < s.n; ++j)
          for (std::size_t in = 0; in < s.inner; ++in)
            g[(o * s.n + j) * s.inner + in] += O->grad[o * s.inner + in] * inv;
    };
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return finish(Tensor::scalar(total), {&x}, [X = x.handle()](Impl* O) {
    return [X, O] {
      auto g = X->grad_buffer();
      const double go = O->grad[0];
      for (auto& v : g) v += go;
    };
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw UsageError("concat of zero tensors");
  const std::size_t ax = resolve_axis(parts[0], axis);
  Shape shape = parts[0].shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i != ax && p.shape()[i] != shape[i]) {
        throw DimensionError("concat: shape mismatch " + to_string(p.shape()) + " vs " +
                             to_string(shape));
      }
    }
    total += p.shape()[ax];
  }
  shape[ax] = total;
  const auto s = split_at(shape, ax);
  std::vector<double> out(numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t pn = p.shape()[ax];
    auto pd = p.data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(pd.data() + o * pn * s.inner, pn * s.inner,
                  out.data() + (o * s.n + off) * s.inner);
    off += pn;
  }
  bool any = false;
  for (const auto& p : parts) any = any || p.requires_grad();
  Tensor result(std::move(shape), std::move(out));
  if (any && active_tape()) {
    result.set_requires_grad(true);
    std::vector<ImplPtr> handles;
    for (const auto& p : parts) handles.push_back(p.handle());
    Impl* O = &result.impl();
    active_tape()->record(result.handle(), [handles, offsets, s, ax, O] {
      for (std::size_t k = 0; k < handles.size(); ++k) {
        auto& P = handles[k];
        if (!P->requires_grad) continue;
        const std::size_t pn = P->shape[ax];
        auto g = P->grad_buffer();
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < pn * s.inner; ++i)
            g[o * pn * s.inner + i] += O->grad[(o * s.n + offsets[k]) * s.inner + i];
      }
    });
  }
  return result;
}

Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = resolve_axis(x, axis);
  const auto s = split_at(x.shape(), ax);
  if (begin > end || end > s.n) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for axis of size " + std::to_string(s.n));
  }
  const std::size_t len = end - begin;
  Shape shape = x.shape();
  shape[ax] = len;
  std::vector<double> out(s.outer * len * s.inner);
  auto xd = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xd.data() + (o * s.n + begin) * s.inner, len * s.inner,
                out.data() + o * len * s.inner);
  return finish(Tensor(std::move(shape), std::move(out)), {&x},
                [X = x.handle(), s, begin, len](Impl* O) {
                  return [X, O, s, begin, len] {
                    auto g = X->grad_buffer();
                    for (std::size_t o = 0; o < s.outer; ++o)
                      for (std::size_t i = 0; i < len * s.inner; ++i)
                        g[(o * s.n + begin) * s.inner + i] += O->grad[o * len * s.inner + i];
                  };
                });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> flat_indices) {
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  std::vector<double> out(idx.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.size()) throw UsageError("gather index out of range");
    out[i] = xd[idx[i]];
  }
  return finish(Tensor({idx.size()}, std::move(out)), {&x}, [X = x.handle(), idx](Impl* O) {
    return [X, O, idx] {
      auto g = X->grad_buffer();
      for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += O->grad[i];
    };
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return finish(Tensor(std::move(shape), std::move(out)), {&x}, [X = x.handle()](Impl* O) {
    return [X, O] {
      auto g = X->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += O->grad[i];
    };
  });
}

Tensor interval_iou(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "interval_iou");
  if (a.rank() != 2 || a.dim(1) != 2) {
    throw DimensionError("interval_iou expects [n x 2] intervals, got " + to_string(a.shape()));
  }
  const std::size_t n = a.dim(0);
  std::vector<double> out(n);
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double as = ad[2 * i], ae = ad[2 * i + 1], bs = bd[2 * i], be = bd[2 * i + 1];
    if (ae < as || be < bs) throw UsageError("interval_iou: interval with end < start");
    const double inter = std::max(0.0, std::min(ae, be) - std::max(as, bs));
    const double uni = (ae - as) + (be - bs) - inter;
    if (uni > 0.0) {
      out[i] = inter / uni;
    } else {
      out[i] = (as == bs && ae == be) ? 1.0 : 0.0;
    }
  }
  return finish(Tensor({n}, std::move(out)), {&a, &b}, [A = a.handle(), B = b.handle(), n](Impl* O) {
    return [A, B, O, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const double as = A->data[2 * i], ae = A->data[2 * i + 1];
        const double bs = B->data[2 * i], be = B->data[2 * i + 1];
        const double lo = std::max(as, bs), hi = std::min(ae, be);
        const double inter = std::max(0.0, hi - lo);
        const double la = ae - as, lb = be - bs;
        const double uni = la + lb - inter;
        if (!(uni > 0.0)) continue;
        const double go = O->grad[i];
        // r = I / (La + Lb - I)
        const double dr_di = (la + lb) / (uni * uni);
        const double dr_dl = -inter / (uni * uni);
        double ga_s = -dr_dl, ga_e = dr_dl, gb_s = -dr_dl, gb_e = dr_dl;
        if (hi - lo > 0.0) {
          if (ae <= be) ga_e += dr_di; else gb_e += dr_di;
          if (as >= bs) ga_s -= dr_di; else gb_s -= dr_di;
        }
        if (A->requires_grad) {
          auto g = A->grad_buffer();
          g[2 * i] += go * ga_s;
          g[2 * i + 1] += go * ga_e;
        }
        if (B->requires_grad) {
          auto g = B->grad_buffer();
          g[2 * i] += go * gb_s;
          g[2 * i + 1] += go * gb_e;
        }
      }
    };
  });
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw UsageError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? inv : 0.0;
    out[i] = xd[i] * (*mask)[i];
  }
  return finish(Tensor(x.shape(), std::move(out)), {&x}, [X = x.handle(), mask](Impl* O) {
    return [X, O, mask] {
      auto g = X->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += O->grad[i] * (*mask)[i];
    };
  });
}

}  // namespace antq::ad
