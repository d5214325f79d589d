// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/ssm.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "nakul/errors.hpp"

namespace nakul::ssm {

SsmParams default_params(std::size_t state_dim) {
  const auto n = static_cast<Eigen::Index>(state_dim);
  SsmParams p;
  p.A = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p.A(i, i) = -(1.0 + double(i));
  p.B = Eigen::VectorXd::Ones(n);
  p.C = Eigen::RowVectorXd::Ones(n);
  return p;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& m) {
  constexpr int order = 6;
  const Eigen::Index n = m.rows();
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, int(std::ceil(std::log2(norm / 0.5))));
  const Eigen::MatrixXd x = m / std::ldexp(1.0, squarings);

  // c_k = c_{k-1} (p - k + 1) / (k (2p - k + 1))
  Eigen::MatrixXd num = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd den = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  double c = 1.0;
  for (int k = 1; k <= order; ++k) {
    c *= double(order - k + 1) / double(k * (2 * order - k + 1));
    power = power * x;
    num += c * power;
    den += ((k % 2) ? -c : c) * power;
  }
  Eigen::MatrixXd r = den.partialPivLu().solve(num);
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}

ZohFactors zoh_factors(const Eigen::MatrixXd& A, double delta) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd dA = delta * A;
  ZohFactors out;
  out.transition = matrix_exp(dA);
  const double norm = dA.cwiseAbs().rowwise().sum().maxCoeff();
  if (norm <= 1.0) {
    // phi1(dA) = sum_k dA^k / (k+1)!, stopped once the next term is negligible.
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd series = term;
    for (int k = 1; k < 64; ++k) {
      term = term * dA / double(k + 1);
      if (term.cwiseAbs().rowwise().sum().maxCoeff() < 1e-14) break;
      series += term;
    }
    out.input_gain = delta * series;
  } else {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = dA;
    block.topRightCorner(n, n) = delta * Eigen::MatrixXd::Identity(n, n);
    out.input_gain = matrix_exp(block).topRightCorner(n, n);
  }
  return out;
}

DiscreteSsm discretize(const SsmParams& p, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("discretize: step size must be positive");
  if (p.A.rows() != p.A.cols() || p.B.size() != p.A.rows() || p.C.size() != p.A.rows()) {
    throw ShapeError("discretize: inconsistent SSM dimensions");
  }
  const ZohFactors z = zoh_factors(p.A, delta);
  DiscreteSsm d;
  d.A_bar = z.transition;
  d.B_bar = z.input_gain * p.B;
  d.C = p.C;
  d.D_skip = p.D_skip;
  d.delta = delta;
  if (!d.A_bar.allFinite() || !d.B_bar.allFinite()) {
    throw std::runtime_error("discretize: non-finite result");
  }
  return d;
}

Tensor materialize_kernel(const DiscreteSsm& d, std::size_t L) {
  if (L == 0) throw ShapeError("materialize_kernel: L must be positive");
  Tensor k({L});
  Eigen::VectorXd state = d.B_bar;
  for (std::size_t i = 0; i < L; ++i) {
    k[i] = d.C.dot(state);
    state = d.A_bar * state;
  }
  return k;
}

Tensor recurrent_scan(const DiscreteSsm& d, const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("recurrent_scan: x must be [L]");
  Tensor y(x.shape());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(d.A_bar.rows());
  for (std::size_t t = 0; t < x.size(); ++t) {
    h = d.A_bar * h + d.B_bar * x[t];
    y[t] = d.C.dot(h) + d.D_skip * x[t];
  }
  return y;
}

Tensor causal_convolve(const Tensor& kernel, const Tensor& x) {
  if (kernel.rank() != 1 || x.rank() != 1) throw ShapeError("causal_convolve: expects 1-D inputs");
  const std::size_t k = kernel.size(), L = x.size();
  Tensor y({L});
  for (std::size_t t = 0; t < L; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < k && j <= t; ++j) s += kernel[j] * x[t - j];
    y[t] = s;
  }
  return y;
}

SelectiveParams SelectiveParams::zeros(std::size_t state_dim, std::size_t width) {
  return {Parameter("w_delta", Tensor({1, width})), Parameter("w_b", Tensor({state_dim, width})),
          Parameter("w_c", Tensor({state_dim, width}))};
}

SelectiveParams SelectiveParams::random(std::size_t state_dim, std::size_t width, Rng& rng) {
  SelectiveParams sp = zeros(state_dim, width);
  const double bound = 1.0 / std::sqrt(double(width));
  for (Parameter* p : {&sp.w_delta, &sp.w_b, &sp.w_c}) {
    for (auto& v : p->value.data()) v = rng.uniform(-bound, bound);
  }
  return sp;
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var selective_scan(SelectiveParams& sp, const SsmParams& base, const Var& x) {
  if (x.shape().size() != 2) throw ShapeError("selective_scan: x must be [L, D]");
  const std::size_t L = x.shape()[0], D = x.shape()[1];
  const auto N = static_cast<Eigen::Index>(base.state_dim());
  if (sp.w_delta.value.shape() != Shape{1, D} ||
      sp.w_b.value.shape() != Shape{std::size_t(N), D} || sp.w_c.value.shape() != sp.w_b.value.shape()) {
    throw ShapeError("selective_scan: projection shapes do not match [L, D] input and state size");
  }
  Tape& tape = *x.tape();
  Var wd = tape.param(sp.w_delta), wb = tape.param(sp.w_b), wc = tape.param(sp.w_c);

  using RowMapC = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  const Tensor& xv = x.value();
  RowMapC X(xv.ptr(), Eigen::Index(L), Eigen::Index(D));
  RowMapC Wd(wd.value().ptr(), 1, Eigen::Index(D));
  RowMapC Wb(wb.value().ptr(), N, Eigen::Index(D));
  RowMapC Wc(wc.value().ptr(), N, Eigen::Index(D));

  struct Step {
    double pre, delta, u;
    Eigen::VectorXd b, c, h_prev, h;
    Eigen::MatrixXd E, G;
  };
  auto steps = std::make_shared<std::vector<Step>>(L);
  Tensor y({L});
  Eigen::VectorXd h = Eigen::VectorXd::Zero(N);
  for (std::size_t t = 0; t < L; ++t) {
    Step& s = (*steps)[t];
    const Eigen::VectorXd xt = X.row(Eigen::Index(t)).transpose();
    s.pre = (Wd * xt)(0);
    s.delta = softplus(s.pre);
    s.u = xt.mean();
    s.b = Wb * xt;
    s.c = Wc * xt;
    const ZohFactors z = zoh_factors(base.A, s.delta);
    s.E = z.transition;
    s.G = z.input_gain;
    s.h_prev = h;
    h = s.E * h + s.G * s.b * s.u;
    s.h = h;
    y[t] = s.c.dot(h) + base.D_skip * s.u;
  }

  const Eigen::MatrixXd A = base.A;
  const double d_skip = base.D_skip;
  return tape.record(std::move(y), {x, wd, wb, wc}, [&tape, x, wd, wb, wc, steps, A, d_skip, L, D, N](const Tensor& g) {
    using RowMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    const Tensor& xv = x.value();
    RowMapC X(xv.ptr(), Eigen::Index(L), Eigen::Index(D));
    RowMapC Wd(wd.value().ptr(), 1, Eigen::Index(D));
    RowMapC Wb(wb.value().ptr(), N, Eigen::Index(D));
    RowMapC Wc(wc.value().ptr(), N, Eigen::Index(D));
    Eigen::VectorXd gh = Eigen::VectorXd::Zero(N);
    for (std::size_t ti = L; ti-- > 0;) {
      const Step& s = (*steps)[ti];
      const double gy = g[ti];
      const Eigen::VectorXd gc = gy * s.h;
      gh += gy * s.c;
      double gu = gy * d_skip;

      const Eigen::MatrixXd gE = gh * s.h_prev.transpose();
      const Eigen::MatrixXd gG = gh * (s.b * s.u).transpose();
      const Eigen::VectorXd Gt_gh = s.G.transpose() * gh;
      const Eigen::VectorXd gb = s.u * Gt_gh;
      gu += s.b.dot(Gt_gh);
      // d exp(dA)/dd = A exp(dA); d (d phi1(dA))/dd = exp(dA).
      const double gdelta = (gE.cwiseProduct(A * s.E)).sum() + (gG.cwiseProduct(s.E)).sum();
      const double gpre = gdelta * sigmoid(s.pre);
      gh = s.E.transpose() * gh;

      const Eigen::RowVectorXd xt = X.row(Eigen::Index(ti));
      if (wd.requires_grad()) RowMap(tape.grad(wd).ptr(), 1, Eigen::Index(D)) += gpre * xt;
      if (wb.requires_grad()) RowMap(tape.grad(wb).ptr(), N, Eigen::Index(D)) += gb * xt;
      if (wc.requires_grad()) RowMap(tape.grad(wc).ptr(), N, Eigen::Index(D)) += gc * xt;
      if (x.requires_grad()) {
        Eigen::RowVectorXd gx = gpre * Wd.row(0);
        gx += gb.transpose() * Wb;
        gx += gc.transpose() * Wc;
        gx.array() += gu / double(D);
        RowMap(tape.grad(x).ptr() + ti * D, 1, Eigen::Index(D)) += gx;
      }
    }
  });
}

Tensor selective_scan(SelectiveParams& sp, const SsmParams& base, const Tensor& x) {
  Tape tape;
  return selective_scan(sp, base, tape.constant(x)).value();
}

}  // namespace nakul::ssm
