// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/graph.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nakul/errors.hpp"
#include "nakul/spectral.hpp"

namespace nakul::graph {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(double(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Tensor normalize_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) throw ShapeError("adjacency must be square");
  const std::size_t C = a.dim(0);
  std::vector<double> inv_sqrt(C);
  for (std::size_t i = 0; i < C; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < C; ++j) deg += a[i * C + j];
    if (!(deg > 0.0)) throw std::invalid_argument("adjacency row " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Tensor out({C, C});
  for (std::size_t i = 0; i < C; ++i)
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] = inv_sqrt[i] * a[i * C + j] * inv_sqrt[j];
  return out;
}

ElectrodeGraph build_graph(const Tensor& positions, double radius) {
  if (positions.rank() != 2 || positions.dim(1) != 3) {
    throw ShapeError("positions must be [C, 3], got " + to_string(positions.shape()));
  }
  if (!positions.all_finite()) throw std::invalid_argument("positions must be finite");
  const std::size_t C = positions.dim(0);
  ElectrodeGraph g;
  g.positions = positions;
  g.adjacency = Tensor({C, C});
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      double d2 = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        const double d = positions[i * 3 + a] - positions[j * 3 + a];
        d2 += d * d;
      }
      if (i == j || std::sqrt(d2) <= radius) g.adjacency[i * C + j] = 1.0;
    }
  }
  g.norm_adjacency = normalize_adjacency(g.adjacency);
  return g;
}

ElectrodeGraph drop_edges(const ElectrodeGraph& g, double p, Rng& rng) {
  ElectrodeGraph out = g;
  const std::size_t C = g.channels();
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = i + 1; j < C; ++j) {
      if (g.adjacency[i * C + j] != 0.0 && rng.bernoulli(p)) {
        out.adjacency[i * C + j] = 0.0;
        out.adjacency[j * C + i] = 0.0;
      }
    }
  }
  out.norm_adjacency = normalize_adjacency(out.adjacency);
  return out;
}

Tensor circle_layout(std::size_t channels, double radius) {
  if (channels == 0) throw ShapeError("circle_layout needs at least one channel");
  Tensor p({channels, 3});
  for (std::size_t c = 0; c < channels; ++c) {
    const double theta = 2.0 * std::numbers::pi * double(c) / double(channels);
    p[c * 3] = radius * std::cos(theta);
    p[c * 3 + 1] = radius * std::sin(theta);
  }
  return p;
}

Positions parse_positions(std::istream& in) {
  Positions out;
  std::vector<double> coords;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string name;
    double x, y, z;
    if (!(ls >> name >> x >> y >> z)) {
      throw LoadError("positions line " + std::to_string(line_no) + ": expected `name x y z`");
    }
    std::string extra;
    if (ls >> extra) throw LoadError("positions line " + std::to_string(line_no) + ": trailing field");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw LoadError("positions line " + std::to_string(line_no) + ": non-finite coordinate");
    }
    out.names.push_back(std::move(name));
    coords.insert(coords.end(), {x, y, z});
  }
  if (out.names.empty()) throw LoadError("positions file has no channels");
  out.coords = Tensor({out.names.size(), 3}, std::move(coords));
  return out;
}

Positions load_positions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open positions file " + path);
  return parse_positions(in);
}

SpatialAttention::SpatialAttention(std::size_t width, std::size_t channels, std::size_t heads,
                                   std::size_t k_top, Rng& rng)
    : width_(width), channels_(channels), heads_(heads), k_top_(k_top) {
  if (heads == 0 || width % heads != 0) {
    throw ConfigError("model.heads", std::to_string(heads) + " heads do not divide width " + std::to_string(width));
  }
  if (k_top == 0) throw ConfigError("model.k_top", "k must be positive");
  const std::size_t D = width;
  w_q = Parameter("w_q", uniform_init({D, D}, D, rng));
  w_k = Parameter("w_k", uniform_init({D, D}, D, rng));
  w_v = Parameter("w_v", uniform_init({D, D}, D, rng));
  w_o = Parameter("w_o", uniform_init({D, D}, D, rng));
  w_graph = Parameter("w_graph", uniform_init({D, D}, D, rng));
  w_bias = Parameter("w_bias", uniform_init({heads * channels, D}, D, rng));
  beta_raw = Parameter("beta_raw", Tensor::scalar(spectral::inverse_softplus(1.0)));
}

Var SpatialAttention::graph_conv(Tape& tape, const ElectrodeGraph& g, const Var& h) {
  return ops::gelu(ops::graph_aggregate(g.norm_adjacency, ops::linear(h, tape.param(w_graph))));
}

Var SpatialAttention::spatial_biases(Tape& tape, const Var& h_tilde) {
  return ops::linear(h_tilde, tape.param(w_bias));
}

Var SpatialAttention::forward(Tape& tape, const ElectrodeGraph& g, const Var& x, const AttentionOptions& opts) {
  if (x.shape().size() != 3 || x.shape()[1] != channels_ || x.shape()[2] != width_) {
    throw ShapeError("spatial attention expects [N, " + std::to_string(channels_) + ", " +
                     std::to_string(width_) + "], got " + to_string(x.shape()));
  }
  if (g.channels() != channels_) {
    throw ShapeError("graph has " + std::to_string(g.channels()) + " channels, attention expects " +
                     std::to_string(channels_));
  }
  Var bias = spatial_biases(tape, graph_conv(tape, g, x));
  if (opts.biases) *opts.biases = biases_by_head(bias.value(), heads_);
  Var q = ops::linear(x, tape.param(w_q));
  Var k = ops::linear(x, tape.param(w_k));
  Var v = ops::linear(x, tape.param(w_v));
  Var beta = ops::softplus(tape.param(beta_raw));
  Var heads = ops::topk_attention(q, k, v, bias, beta, heads_, k_top_, opts.probe);
  return ops::linear(heads, tape.param(w_o));
}

std::vector<Parameter*> SpatialAttention::parameters() {
  return {&w_q, &w_k, &w_v, &w_o, &w_graph, &w_bias, &beta_raw};
}

Tensor biases_by_head(const Tensor& b, std::size_t heads) {
  const std::size_t N = b.dim(0), C = b.dim(1);
  if (b.dim(2) != heads * C) throw ShapeError("bias tensor does not match head count");
  Tensor out({N, heads, C, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = 0; j < C; ++j)
          out[((n * heads + h) * C + i) * C + j] = b[(n * C + i) * heads * C + h * C + j];
  return out;
}

}  // namespace nakul::graph
