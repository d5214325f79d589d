// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nakul/ops.hpp"
#include "ops_internal.hpp"

namespace nakul::ops {

using namespace detail;

namespace {

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return tape.record(std::move(y), {a}, [&tape, a, deriv](const Tensor& g) {
    const Tensor& x = a.value();
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * deriv(x[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Var add(const Var& a, const Var& b) {
  expect_same(a, b, "add");
  Tape& tape = tape_of(a);
  Tensor y = a.value();
  y += b.value();
  return tape.record(std::move(y), {a, b}, [&tape, a, b](const Tensor& g) {
    if (a.requires_grad()) tape.grad(a) += g;
    if (b.requires_grad()) tape.grad(b) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  expect_same(a, b, "sub");
  Tape& tape = tape_of(a);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return tape.record(std::move(y), {a, b}, [&tape, a, b](const Tensor& g) {
    if (a.requires_grad()) tape.grad(a) += g;
    if (b.requires_grad()) {
      Tensor& gb = tape.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  expect_same(a, b, "mul");
  Tape& tape = tape_of(a);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return tape.record(std::move(y), {a, b}, [&tape, a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = tape.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = tape.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tape& tape = tape_of(a);
  Tensor y = a.value();
  y *= s;
  return tape.record(std::move(y), {a}, [&tape, a, s](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var mul_const(const Var& a, const Tensor& m) {
  if (a.shape() != m.shape()) {
    throw ShapeError("mul_const: " + to_string(a.shape()) + " vs " + to_string(m.shape()));
  }
  Tape& tape = tape_of(a);
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];
  return tape.record(std::move(y), {a}, [&tape, a, m](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
  });
}

Var add_trailing(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) {
    throw ShapeError("add_trailing: " + to_string(sb) + " is not a suffix of " + to_string(sa));
  }
  Tape& tape = tape_of(a);
  const std::size_t inner = b.value().size();
  const std::size_t outer = a.value().size() / inner;
  Tensor y = a.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] += b.value()[i];
  }
  return tape.record(std::move(y), {a, b}, [&tape, a, b, inner, outer](const Tensor& g) {
    if (a.requires_grad()) tape.grad(a) += g;
    if (b.requires_grad()) {
      Tensor& gb = tape.grad(b);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) gb[i] += g[o * inner + i];
      }
    }
  });
}

Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [](double x) {
        return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
      });
}

Var sigmoid(const Var& a) {
  return unary(a, sigmoid_scalar, [](double x) {
    const double s = sigmoid_scalar(x);
    return s * (1.0 - s);
  });
}

Var softplus(const Var& a) { return unary(a, softplus_scalar, sigmoid_scalar); }

Var positive(const Var& a, double floor) {
  return unary(
      a, [floor](double x) { return softplus_scalar(x) + floor; }, sigmoid_scalar);
}

Var softmax(const Var& a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.ptr() + r * n;
    double* yr = y.ptr() + r * n;
    const double m = *std::max_element(xr, xr + n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (yr[i] = std::exp(xr[i] - m));
    for (std::size_t i = 0; i < n; ++i) yr[i] /= s;
  }
  Tensor saved = y;
  return tape.record(std::move(y), {a}, [&tape, a, saved = std::move(saved), n, rows](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = saved.ptr() + r * n;
      const double* gr = g.ptr() + r * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += gr[i] * yr[i];
      for (std::size_t i = 0; i < n; ++i) ga[r * n + i] += yr[i] * (gr[i] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: affine parameters must be [" + std::to_string(d) + "]");
  }
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t rows = xv.size() / d;
  Tensor xhat(xv.shape());
  std::vector<double> rstd(rows);
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.ptr() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += xr[i];
    mu /= double(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= double(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (xr[i] - mu) * rstd[r];
      xhat[r * d + i] = h;
      y[r * d + i] = h * gamma.value()[i] + beta.value()[i];
    }
  }
  return tape.record(
      std::move(y), {x, gamma, beta},
      [&tape, x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd), d, rows](const Tensor& g) {
        const Tensor& gm = gamma.value();
        if (gamma.requires_grad() || beta.requires_grad()) {
          Tensor& gg = tape.grad(gamma);
          Tensor& gb = tape.grad(beta);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < d; ++i) {
              gg[i] += g[r * d + i] * xhat[r * d + i];
              gb[i] += g[r * d + i];
            }
          }
        }
        if (!x.requires_grad()) return;
        Tensor& gx = tape.grad(x);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_g = 0.0, mean_gh = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            const double gh = g[r * d + i] * gm[i];
            mean_g += gh;
            mean_gh += gh * xhat[r * d + i];
          }
          mean_g /= double(d);
          mean_gh /= double(d);
          for (std::size_t i = 0; i < d; ++i) {
            const double gh = g[r * d + i] * gm[i];
            gx[r * d + i] += rstd[r] * (gh - mean_g - xhat[r * d + i] * mean_gh);
          }
        }
      });
}

Var sum(const Var& a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return tape.record(Tensor::scalar(s), {a}, [&tape, a](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / double(a.value().size())); }

Var mean_groups(const Var& x, std::size_t outer, std::size_t inner) {
  const std::size_t total = x.value().size();
  if (outer == 0 || inner == 0 || total % (outer * inner) != 0) {
    throw ShapeError("mean_groups: cannot view " + to_string(x.shape()) + " as [" +
                     std::to_string(outer) + ", ?, " + std::to_string(inner) + "]");
  }
  const std::size_t groups = total / (outer * inner);
  Tape& tape = tape_of(x);
  Tensor y({outer, inner});
  const double inv = 1.0 / double(groups);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t m = 0; m < groups; ++m) {
      const double* src = x.value().ptr() + (o * groups + m) * inner;
      for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] += src[i] * inv;
    }
  }
  return tape.record(std::move(y), {x}, [&tape, x, outer, inner, groups, inv](const Tensor& g) {
    Tensor& gx = tape.grad(x);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t m = 0; m < groups; ++m) {
        double* dst = gx.ptr() + (o * groups + m) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += g[o * inner + i] * inv;
      }
    }
  });
}

Var weighted_sum(const Var& w, const std::vector<Var>& ys) {
  if (ys.empty()) throw ShapeError("weighted_sum: no terms");
  if (w.shape() != Shape{ys.size()}) {
    throw ShapeError("weighted_sum: weights " + to_string(w.shape()) + " for " +
                     std::to_string(ys.size()) + " terms");
  }
  for (const Var& y : ys) expect_same(y, ys.front(), "weighted_sum");
  Tape& tape = tape_of(w);
  Tensor out(ys.front().shape());
  for (std::size_t m = 0; m < ys.size(); ++m) {
    const double wm = w.value()[m];
    const Tensor& ym = ys[m].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wm * ym[i];
  }
  std::vector<Var> inputs = ys;
  inputs.push_back(w);
  return tape.record(std::move(out), inputs, [&tape, w, ys](const Tensor& g) {
    for (std::size_t m = 0; m < ys.size(); ++m) {
      const Tensor& ym = ys[m].value();
      if (w.requires_grad()) {
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * ym[i];
        tape.grad(w)[m] += dot;
      }
      if (ys[m].requires_grad()) {
        Tensor& gy = tape.grad(ys[m]);
        const double wm = w.value()[m];
        for (std::size_t i = 0; i < g.size(); ++i) gy[i] += wm * g[i];
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.value().size()) {
    throw ShapeError("reshape " + to_string(a.shape()) + " to " + to_string(shape));
  }
  Tape& tape = tape_of(a);
  return tape.record(a.value().reshaped(std::move(shape)), {a}, [&tape, a](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var swap_axes12(const Var& a) {
  expect_rank(a, 4, "swap_axes12");
  const Shape& s = a.shape();
  const std::size_t A = s[0], B = s[1], C = s[2], D = s[3];
  Tape& tape = tape_of(a);
  Tensor y({A, C, B, D});
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        std::copy_n(x.ptr() + ((i * B + b) * C + c) * D, D, y.ptr() + ((i * C + c) * B + b) * D);
  return tape.record(std::move(y), {a}, [&tape, a, A, B, C, D](const Tensor& g) {
    Tensor& ga = tape.grad(a);
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
          const double* src = g.ptr() + ((i * C + c) * B + b) * D;
          double* dst = ga.ptr() + ((i * B + b) * C + c) * D;
          for (std::size_t d = 0; d < D; ++d) dst[d] += src[d];
        }
  });
}

Var matmul(const Var& a, const Var& b) {
  expect_rank(a, 2, "matmul");
  expect_rank(b, 2, "matmul");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tape& tape = tape_of(a);
  Tensor y({n, m});
  MapMat(y.ptr(), n, m).noalias() = CMapMat(a.value().ptr(), n, k) * CMapMat(b.value().ptr(), k, m);
  mac_counter() += n * k * m;
  return tape.record(std::move(y), {a, b}, [&tape, a, b, n, k, m](const Tensor& g) {
    CMapMat G(g.ptr(), n, m);
    if (a.requires_grad()) {
      MapMat(tape.grad(a).ptr(), n, k).noalias() += G * CMapMat(b.value().ptr(), k, m).transpose();
    }
    if (b.requires_grad()) {
      MapMat(tape.grad(b).ptr(), k, m).noalias() += CMapMat(a.value().ptr(), n, k).transpose() * G;
    }
  });
}

Var linear(const Var& x, const Var& w) {
  expect_rank(w, 2, "linear");
  const std::size_t out = w.shape()[0], in = w.shape()[1];
  if (x.shape().back() != in) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " vs weight " + to_string(w.shape()));
  }
  Tape& tape = tape_of(x);
  const std::size_t rows = x.value().size() / in;
  Shape ys = x.shape();
  ys.back() = out;
  Tensor y(ys);
  MapMat(y.ptr(), rows, out).noalias() =
      CMapMat(x.value().ptr(), rows, in) * CMapMat(w.value().ptr(), out, in).transpose();
  mac_counter() += rows * in * out;
  return tape.record(std::move(y), {x, w}, [&tape, x, w, rows, in, out](const Tensor& g) {
    CMapMat G(g.ptr(), rows, out);
    if (x.requires_grad()) {
      MapMat(tape.grad(x).ptr(), rows, in).noalias() += G * CMapMat(w.value().ptr(), out, in);
    }
    if (w.requires_grad()) {
      MapMat(tape.grad(w).ptr(), out, in).noalias() +=
          G.transpose() * CMapMat(x.value().ptr(), rows, in);
    }
  });
}

Var smoothed_cross_entropy(const Var& logits, std::span<const int> labels, double eps) {
  expect_rank(logits, 2, "smoothed_cross_entropy");
  const std::size_t B = logits.shape()[0], n = logits.shape()[1];
  if (labels.size() != B) throw ShapeError("smoothed_cross_entropy: label count != batch");
  if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("label smoothing must be in [0, 1)");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n) {
      throw std::out_of_range("label " + std::to_string(l) + " outside [0, " +
                              std::to_string(n) + ")");
    }
  }
  Tape& tape = tape_of(logits);
  const Tensor& z = logits.value();
  Tensor probs({B, n});
  Tensor target({B, n}, eps / double(n));
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* zr = z.ptr() + b * n;
    const double m = *std::max_element(zr, zr + n);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += std::exp(zr[c] - m);
    const double lse = m + std::log(s);
    target[b * n + labels[b]] += 1.0 - eps;
    for (std::size_t c = 0; c < n; ++c) {
      const double logp = zr[c] - lse;
      probs[b * n + c] = std::exp(logp);
      loss -= target[b * n + c] * logp;
    }
  }
  loss /= double(B);
  return tape.record(Tensor::scalar(loss), {logits},
                     [&tape, logits, probs = std::move(probs), target = std::move(target), B](const Tensor& g) {
                       Tensor& gl = tape.grad(logits);
                       const double s = g[0] / double(B);
                       for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += s * (probs[i] - target[i]);
                     });
}

}  // namespace nakul::ops
