// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include "nakul/csv.hpp"
#include "nakul/errors.hpp"

namespace nakul {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(std::string_view(s).substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

double as_number(const std::string& key, const std::string& v) {
  try {
    return parse_number(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

std::size_t as_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::size_t> as_counts(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split(v, ',')) out.push_back(as_count(key, part));
  return out;
}

std::string join_counts(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fusion_text(const ModelConfig& m) {
  if (!m.forced_fusion) return "learned";
  const auto& f = *m.forced_fusion;
  if (f == std::array<double, 3>{1, 0, 0}) return "spectral";
  if (f == std::array<double, 3>{0, 1, 0}) return "dynamic";
  if (f == std::array<double, 3>{0, 0, 1}) return "graph";
  return format_number(f[0]) + "," + format_number(f[1]) + "," + format_number(f[2]);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto count = [&](const char* key, auto member) {
      t[key] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = as_count(k, v); };
    };
    auto number = [&](const char* key, auto member) {
      t[key] = [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = as_number(k, v); };
    };
    count("data.classes", [](RunConfig& c) -> std::size_t& { return c.data.classes; });
    count("data.channels", [](RunConfig& c) -> std::size_t& { return c.data.channels; });
    count("data.length", [](RunConfig& c) -> std::size_t& { return c.data.length; });
    number("data.rate", [](RunConfig& c) -> double& { return c.data.rate; });
    number("data.noise_sigma", [](RunConfig& c) -> double& { return c.data.noise_sigma; });
    count("data.trials_per_class", [](RunConfig& c) -> std::size_t& { return c.data.trials_per_class; });
    t["data.bands"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.data.class_bands.clear();
      for (const auto& cls : split(v, ';')) {
        std::vector<double> f;
        for (const auto& part : split(cls, ',')) f.push_back(as_number(k, part));
        c.data.class_bands.push_back(std::move(f));
      }
    };
    t["data.active_channels"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.data.active_channels.clear();
      for (const auto& cls : split(v, ';')) c.data.active_channels.push_back(as_counts(k, cls));
    };

    count("model.dim", [](RunConfig& c) -> std::size_t& { return c.model.dim; });
    count("model.blocks", [](RunConfig& c) -> std::size_t& { return c.model.blocks; });
    count("model.heads", [](RunConfig& c) -> std::size_t& { return c.model.heads; });
    count("model.bands", [](RunConfig& c) -> std::size_t& { return c.model.bands; });
    count("model.k_top", [](RunConfig& c) -> std::size_t& { return c.model.k_top; });
    count("model.state_dim", [](RunConfig& c) -> std::size_t& { return c.model.state_dim; });
    count("model.ffn_hidden", [](RunConfig& c) -> std::size_t& { return c.model.ffn_hidden; });
    count("model.head_hidden", [](RunConfig& c) -> std::size_t& { return c.model.head_hidden; });
    count("model.patch", [](RunConfig& c) -> std::size_t& { return c.model.patch; });
    t["model.kernel_sizes"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.model.kernel_sizes = as_counts(k, v);
    };
    number("model.fusion_scale", [](RunConfig& c) -> double& { return c.model.fusion_scale; });
    number("model.dropout", [](RunConfig& c) -> double& { return c.model.dropout; });
    number("model.drop_path", [](RunConfig& c) -> double& { return c.model.drop_path; });
    number("model.drop_edge", [](RunConfig& c) -> double& { return c.model.drop_edge; });
    t["model.fusion"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "learned") c.model.forced_fusion.reset();
      else if (v == "spectral") c.model.forced_fusion = std::array<double, 3>{1, 0, 0};
      else if (v == "dynamic") c.model.forced_fusion = std::array<double, 3>{0, 1, 0};
      else if (v == "graph") c.model.forced_fusion = std::array<double, 3>{0, 0, 1};
      else {
        const auto parts = split(v, ',');
        if (parts.size() != 3) throw ConfigError(k, "expected learned, spectral, dynamic, graph or three weights");
        c.model.forced_fusion = std::array<double, 3>{as_number(k, parts[0]), as_number(k, parts[1]),
                                                      as_number(k, parts[2])};
      }
    };

    number("train.lr", [](RunConfig& c) -> double& { return c.train.lr; });
    number("train.weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; });
    number("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; });
    number("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; });
    number("train.eps", [](RunConfig& c) -> double& { return c.train.eps; });
    count("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; });
    count("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    number("train.warmup_fraction", [](RunConfig& c) -> double& { return c.train.warmup_fraction; });
    number("train.start_divisor", [](RunConfig& c) -> double& { return c.train.start_divisor; });
    number("train.final_lr", [](RunConfig& c) -> double& { return c.train.final_lr; });
    number("train.label_smoothing", [](RunConfig& c) -> double& { return c.train.label_smoothing; });
    count("train.patience", [](RunConfig& c) -> std::size_t& { return c.train.patience; });
    t["train.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = as_count(k, v); };
    number("train.grad_clip", [](RunConfig& c) -> double& { return c.train.grad_clip; });
    number("train.val_fraction", [](RunConfig& c) -> double& { return c.train.val_fraction; });
    t["train.augment"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.train.augment = as_bool(k, v); };

    number("graph.radius", [](RunConfig& c) -> double& { return c.graph_radius; });
    number("graph.layout_radius", [](RunConfig& c) -> double& { return c.layout_radius; });
    t["paths.positions"] = [](RunConfig& c, const std::string&, const std::string& v) { c.positions_path = v; };
    t["paths.data_dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; };
    t["paths.checkpoint"] = [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint_path = v; };
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::finalize() {
  // One channel group applies to every class.
  if (data.active_channels.size() == 1 && data.classes > 1) {
    data.active_channels.assign(data.classes, data.active_channels.front());
  }
  data.validate();
  model.channels = data.channels;
  model.length = data.length;
  model.classes = data.classes;
  model.rate = data.rate;
  model.validate();
  train.validate();
  if (!(graph_radius >= 0.0)) throw ConfigError("graph.radius", "must be nonnegative");
  if (!(layout_radius > 0.0)) throw ConfigError("graph.layout_radius", "must be positive");
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
    it->second(cfg, key, value);
  }
  cfg.finalize();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  return parse_config(in);
}

std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  auto num = [](double v) { return format_number(v); };
  std::string bands, active;
  for (std::size_t i = 0; i < c.data.class_bands.size(); ++i) {
    if (i) bands += ';';
    for (std::size_t j = 0; j < c.data.class_bands[i].size(); ++j) bands += (j ? "," : "") + num(c.data.class_bands[i][j]);
  }
  for (std::size_t i = 0; i < c.data.active_channels.size(); ++i) {
    active += (i ? ";" : "") + join_counts(c.data.active_channels[i]);
  }
  o << "data.classes = " << c.data.classes << '\n'
    << "data.channels = " << c.data.channels << '\n'
    << "data.length = " << c.data.length << '\n'
    << "data.rate = " << num(c.data.rate) << '\n'
    << "data.noise_sigma = " << num(c.data.noise_sigma) << '\n'
    << "data.trials_per_class = " << c.data.trials_per_class << '\n'
    << "data.bands = " << bands << '\n'
    << "data.active_channels = " << active << '\n'
    << "model.dim = " << c.model.dim << '\n'
    << "model.blocks = " << c.model.blocks << '\n'
    << "model.heads = " << c.model.heads << '\n'
    << "model.bands = " << c.model.bands << '\n'
    << "model.k_top = " << c.model.k_top << '\n'
    << "model.state_dim = " << c.model.state_dim << '\n'
    << "model.ffn_hidden = " << c.model.ffn_hidden << '\n'
    << "model.head_hidden = " << c.model.head_hidden << '\n'
    << "model.patch = " << c.model.patch << '\n'
    << "model.kernel_sizes = " << join_counts(c.model.kernel_sizes) << '\n'
    << "model.fusion_scale = " << num(c.model.fusion_scale) << '\n'
    << "model.dropout = " << num(c.model.dropout) << '\n'
    << "model.drop_path = " << num(c.model.drop_path) << '\n'
    << "model.drop_edge = " << num(c.model.drop_edge) << '\n'
    << "model.fusion = " << fusion_text(c.model) << '\n'
    << "train.lr = " << num(c.train.lr) << '\n'
    << "train.weight_decay = " << num(c.train.weight_decay) << '\n'
    << "train.beta1 = " << num(c.train.beta1) << '\n'
    << "train.beta2 = " << num(c.train.beta2) << '\n'
    << "train.eps = " << num(c.train.eps) << '\n'
    << "train.epochs = " << c.train.epochs << '\n'
    << "train.batch_size = " << c.train.batch_size << '\n'
    << "train.warmup_fraction = " << num(c.train.warmup_fraction) << '\n'
    << "train.start_divisor = " << num(c.train.start_divisor) << '\n'
    << "train.final_lr = " << num(c.train.final_lr) << '\n'
    << "train.label_smoothing = " << num(c.train.label_smoothing) << '\n'
    << "train.patience = " << c.train.patience << '\n'
    << "train.seed = " << c.train.seed << '\n'
    << "train.grad_clip = " << num(c.train.grad_clip) << '\n'
    << "train.val_fraction = " << num(c.train.val_fraction) << '\n'
    << "train.augment = " << (c.train.augment ? "true" : "false") << '\n'
    << "graph.radius = " << num(c.graph_radius) << '\n'
    << "graph.layout_radius = " << num(c.layout_radius) << '\n';
  if (!c.positions_path.empty()) o << "paths.positions = " << c.positions_path << '\n';
  if (!c.data_dir.empty()) o << "paths.data_dir = " << c.data_dir << '\n';
  if (!c.checkpoint_path.empty()) o << "paths.checkpoint = " << c.checkpoint_path << '\n';
  return o.str();
}

graph::ElectrodeGraph make_graph(const RunConfig& cfg) {
  if (cfg.positions_path.empty()) {
    return graph::build_graph(graph::circle_layout(cfg.data.channels, cfg.layout_radius), cfg.graph_radius);
  }
  const auto pos = graph::load_positions(cfg.positions_path);
  if (pos.names.size() != cfg.data.channels) {
    throw ConfigError("paths.positions", "file lists " + std::to_string(pos.names.size()) + " channels, config has " +
                                             std::to_string(cfg.data.channels));
  }
  return graph::build_graph(pos.coords, cfg.graph_radius);
}

}  // namespace nakul
