// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nakul/ops.hpp"
#include "ops_internal.hpp"

namespace nakul::ops {

using namespace detail;

namespace {
thread_local TopkSupportPin* active_pin = nullptr;
}  // namespace

TopkSupportPin::TopkSupportPin(std::vector<std::vector<unsigned char>>& m, Mode md) : masks(&m), mode(md) {
  if (active_pin) throw std::logic_error("TopkSupportPin: already active on this thread");
  active_pin = this;
}

TopkSupportPin::~TopkSupportPin() { active_pin = nullptr; }

Var graph_aggregate(const Tensor& adjacency, const Var& h) {
  expect_rank(h, 3, "graph_aggregate");
  const std::size_t N = h.shape()[0], C = h.shape()[1], D = h.shape()[2];
  if (adjacency.shape() != Shape{C, C}) {
    throw ShapeError("graph_aggregate: adjacency " + to_string(adjacency.shape()) + " for " +
                     std::to_string(C) + " nodes");
  }
  Tape& tape = tape_of(h);
  Tensor y({N, C, D});
  CMapMat A(adjacency.ptr(), C, C);
  for (std::size_t n = 0; n < N; ++n) {
    MapMat(y.ptr() + n * C * D, C, D).noalias() = A * CMapMat(h.value().ptr() + n * C * D, C, D);
  }
  mac_counter() += N * C * C * D;
  return tape.record(std::move(y), {h}, [&tape, h, adjacency, N, C, D](const Tensor& g) {
    CMapMat A(adjacency.ptr(), C, C);
    Tensor& gh = tape.grad(h);
    for (std::size_t n = 0; n < N; ++n) {
      MapMat(gh.ptr() + n * C * D, C, D).noalias() += A.transpose() * CMapMat(g.ptr() + n * C * D, C, D);
    }
  });
}

Var topk_attention(const Var& q, const Var& k, const Var& v, const Var& bias, const Var& beta,
                   std::size_t heads, std::size_t k_top, AttentionProbe probe) {
  expect_rank(q, 3, "topk_attention");
  expect_same(q, k, "topk_attention");
  expect_same(q, v, "topk_attention");
  const std::size_t N = q.shape()[0], C = q.shape()[1], D = q.shape()[2];
  if (heads == 0 || D % heads != 0) {
    throw ShapeError("topk_attention: " + std::to_string(heads) + " heads do not divide width " +
                     std::to_string(D));
  }
  if (bias.shape() != Shape{N, C, heads * C}) {
    throw ShapeError("topk_attention: bias " + to_string(bias.shape()) + ", expected " +
                     to_string(Shape{N, C, heads * C}));
  }
  if (beta.value().size() != 1) throw ShapeError("topk_attention: beta must be a scalar");
  if (k_top == 0) throw std::invalid_argument("topk_attention: k must be positive");
  const std::size_t H = heads, dk = D / H;
  const std::size_t kk = std::min(k_top, C);
  const double inv_sqrt = 1.0 / std::sqrt(double(dk));
  const double b = beta.value()[0];
  Tape& tape = tape_of(q);
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  const Tensor& Bs = bias.value();

  // probs holds zeros outside the kept set; keep marks the kept set.
  Tensor probs({N, H, C, C});
  std::vector<unsigned char> keep(N * H * C * C, 0);
  Tensor out({N, C, D});
  std::vector<double> row(C);
  std::vector<std::size_t> order(C);
  const std::vector<unsigned char>* pinned = nullptr;
  if (active_pin && active_pin->mode == TopkSupportPin::Mode::kReplay) {
    if (active_pin->cursor >= active_pin->masks->size()) throw std::logic_error("topk_attention: no pinned support left");
    pinned = &(*active_pin->masks)[active_pin->cursor++];
    if (pinned->size() != keep.size()) throw ShapeError("topk_attention: pinned support has the wrong size");
  }
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < C; ++i) {
        const double* qi = Q.ptr() + (n * C + i) * D + h * dk;
        for (std::size_t j = 0; j < C; ++j) {
          const double* kj = K.ptr() + (n * C + j) * D + h * dk;
          double s = 0.0;
          for (std::size_t e = 0; e < dk; ++e) s += qi[e] * kj[e];
          row[j] = s * inv_sqrt + b * Bs[(n * C + i) * H * C + h * C + j];
        }
        if (probe.scores) {
          if (probe.scores->shape() != probs.shape()) *probe.scores = Tensor(probs.shape());
          std::copy(row.begin(), row.end(), probe.scores->ptr() + ((n * H + h) * C + i) * C);
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (pinned) {
          const unsigned char* pm = pinned->data() + ((n * H + h) * C + i) * C;
          std::stable_partition(order.begin(), order.end(), [&](std::size_t j) { return pm[j] != 0; });
        } else if (kk < C) {
          std::partial_sort(order.begin(), order.begin() + kk, order.end(),
                            [&](std::size_t a, std::size_t c) {
                              return row[a] > row[c] || (row[a] == row[c] && a < c);
                            });
        }
        const std::size_t base = ((n * H + h) * C + i) * C;
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < kk; ++r) m = std::max(m, row[order[r]]);
        double z = 0.0;
        for (std::size_t r = 0; r < kk; ++r) {
          const std::size_t j = order[r];
          keep[base + j] = 1;
          z += (probs[base + j] = std::exp(row[j] - m));
        }
        double* oi = out.ptr() + (n * C + i) * D + h * dk;
        for (std::size_t r = 0; r < kk; ++r) {
          const std::size_t j = order[r];
          probs[base + j] /= z;
          const double p = probs[base + j];
          const double* vj = V.ptr() + (n * C + j) * D + h * dk;
          for (std::size_t e = 0; e < dk; ++e) oi[e] += p * vj[e];
        }
      }
    }
  }
  mac_counter() += N * H * C * C * dk + N * H * C * kk * dk;
  if (probe.probabilities) *probe.probabilities = probs;
  if (active_pin && active_pin->mode == TopkSupportPin::Mode::kRecord) active_pin->masks->push_back(keep);

  return tape.record(
      std::move(out), {q, k, v, bias, beta},
      [&tape, q, k, v, bias, beta, probs = std::move(probs), keep = std::move(keep), N, C, D, H, dk,
       inv_sqrt](const Tensor& g) {
        const Tensor& Q = q.value();
        const Tensor& K = k.value();
        const Tensor& V = v.value();
        const Tensor& Bs = bias.value();
        const double b = beta.value()[0];
        double* gQ = q.requires_grad() ? tape.grad(q).ptr() : nullptr;
        double* gK = k.requires_grad() ? tape.grad(k).ptr() : nullptr;
        double* gV = v.requires_grad() ? tape.grad(v).ptr() : nullptr;
        double* gB = bias.requires_grad() ? tape.grad(bias).ptr() : nullptr;
        std::vector<double> gp(C);
        double gbeta = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t i = 0; i < C; ++i) {
              const std::size_t base = ((n * H + h) * C + i) * C;
              const double* gi = g.ptr() + (n * C + i) * D + h * dk;
              double dot = 0.0;
              for (std::size_t j = 0; j < C; ++j) {
                gp[j] = 0.0;
                if (!keep[base + j]) continue;
                const double* vj = V.ptr() + (n * C + j) * D + h * dk;
                double s = 0.0;
                for (std::size_t e = 0; e < dk; ++e) s += gi[e] * vj[e];
                gp[j] = s;
                dot += probs[base + j] * s;
                if (gV) {
                  double* gv = gV + (n * C + j) * D + h * dk;
                  for (std::size_t e = 0; e < dk; ++e) gv[e] += probs[base + j] * gi[e];
                }
              }
              const double* qi = Q.ptr() + (n * C + i) * D + h * dk;
              for (std::size_t j = 0; j < C; ++j) {
                if (!keep[base + j]) continue;
                const double gs = probs[base + j] * (gp[j] - dot);
                if (gs == 0.0) continue;
                const double* kj = K.ptr() + (n * C + j) * D + h * dk;
                if (gQ) {
                  double* gq = gQ + (n * C + i) * D + h * dk;
                  for (std::size_t e = 0; e < dk; ++e) gq[e] += gs * inv_sqrt * kj[e];
                }
                if (gK) {
                  double* gk = gK + (n * C + j) * D + h * dk;
                  for (std::size_t e = 0; e < dk; ++e) gk[e] += gs * inv_sqrt * qi[e];
                }
                const std::size_t bi = (n * C + i) * H * C + h * C + j;
                if (gB) gB[bi] += b * gs;
                gbeta += gs * Bs[bi];
              }
            }
          }
        }
        if (beta.requires_grad()) tape.grad(beta)[0] += gbeta;
      });
}

}  // namespace nakul::ops
