// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nakul::test {

NaiveSpectrum naive_dft(const std::vector<double>& x) {
  const std::size_t T = x.size(), F = T / 2 + 1;
  NaiveSpectrum s{std::vector<double>(F), std::vector<double>(F)};
  for (std::size_t f = 0; f < F; ++f) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < T; ++t) {
      const long double a = 2.0L * std::numbers::pi_v<long double> * ((f * t) % T) / T;
      re += x[t] * std::cos(a);
      im -= x[t] * std::sin(a);
    }
    s.re[f] = double(re);
    s.im[f] = double(im);
  }
  return s;
}

std::vector<double> naive_idft(const NaiveSpectrum& s, std::size_t T) {
  std::vector<double> x(T);
  const std::size_t F = T / 2 + 1;
  for (std::size_t t = 0; t < T; ++t) {
    long double acc = 0;
    for (std::size_t f = 0; f < F; ++f) {
      const bool edge = f == 0 || 2 * f == T;
      const long double a = 2.0L * std::numbers::pi_v<long double> * ((f * t) % T) / T;
      const long double term = s.re[f] * std::cos(a) - (edge ? 0.0L : s.im[f] * std::sin(a));
      acc += edge ? term : 2 * term;
    }
    x[t] = double(acc / T);
  }
  return x;
}

std::vector<double> direct_causal_conv(const std::vector<double>& K, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t j = 0; j < K.size() && j <= t; ++j) y[t] += K[j] * x[t - j];
  return y;
}

double central_difference(Parameter& p, std::size_t i, double h, const std::function<double()>& f) {
  const double saved = p.value[i];
  p.value[i] = saved + h;
  const double up = f();
  p.value[i] = saved - h;
  const double down = f();
  p.value[i] = saved;
  return (up - down) / (2 * h);
}

namespace {

double rel(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Spreads at most `count` probes over [0, size).
std::vector<std::size_t> probe_indices(std::size_t size, std::size_t count) {
  std::vector<std::size_t> idx;
  if (size <= count) {
    for (std::size_t i = 0; i < size; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t k = 0; k < count; ++k) idx.push_back(k * size / count + (k * 7919) % (size / count));
  return idx;
}

}  // namespace

double max_fd_error(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss, double h,
                    double floor, std::size_t max_entries) {
  for (auto* p : params) p->grad = Tensor(p->value.shape());
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    Tape tape(false);
    return loss(tape).value().item();
  };
  double worst = 0.0;
  for (auto* p : params) {
    for (std::size_t i : probe_indices(p->value.size(), max_entries)) {
      const double n = central_difference(*p, i, h, eval);
      worst = std::max(worst, rel(p->grad[i], n, floor));
    }
  }
  return worst;
}

double max_fd_error_input(Tensor& x, const std::function<Var(Tape&, const Var&)>& loss, double h, double floor,
                          std::size_t max_entries) {
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.leaf(x);
    tape.backward(loss(tape, xv));
    analytic = tape.leaf_grad(xv);
  }
  auto eval = [&] {
    Tape tape(false);
    return loss(tape, tape.constant(x)).value().item();
  };
  double worst = 0.0;
  for (std::size_t i : probe_indices(x.size(), max_entries)) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = eval();
    x[i] = saved - h;
    const double down = eval();
    x[i] = saved;
    worst = std::max(worst, rel(analytic[i], (up - down) / (2 * h), floor));
  }
  return worst;
}

Tensor random_tensor(Shape shape, Rng& rng, double scale) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

Parameter random_parameter(const char* name, Shape shape, Rng& rng, double scale) {
  return Parameter(name, random_tensor(std::move(shape), rng, scale));
}

std::vector<double> jacobi_eigenvalues(const Tensor& symmetric, int sweeps) {
  const std::size_t n = symmetric.dim(0);
  std::vector<double> a(symmetric.ptr(), symmetric.ptr() + n * n);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - sn * akq;
          at(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - sn * aqk;
          at(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i);
  return ev;
}

}  // namespace nakul::test
