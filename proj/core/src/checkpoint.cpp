// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "nakul/errors.hpp"

namespace nakul {

namespace {

constexpr char kMagic[4] = {'N', 'A', 'K', 'L'};

template <typename U>
void put(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw LoadError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(buf[i]) << (8 * i);
  return v;
}

Tensor hparam(double v) { return Tensor::scalar(v); }

}  // namespace

void write_tensors(std::ostream& out, const NamedTensors& tensors) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("tensor name too long");
    if (t.rank() > 255) throw std::invalid_argument("tensor rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

NamedTensors read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw LoadError("not a NAKL checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw LoadError("checkpoint truncated");
    const auto rank = get<std::uint8_t>(in);
    Shape shape(rank);
    for (auto& d : shape) {
      d = get<std::uint32_t>(in);
      if (d == 0) throw LoadError("tensor " + name + " has a zero dimension");
    }
    std::vector<double> data(numel(shape));
    for (auto& v : data) {
      v = std::bit_cast<float>(get<std::uint32_t>(in));
      if (!std::isfinite(v)) throw LoadError("tensor " + name + " holds a non-finite value");
    }
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError("trailing bytes after checkpoint");
  return out;
}

NamedTensors model_state(NakulModel& model) {
  const ModelConfig& c = model.config();
  NamedTensors out{
      {"hparam.channels", hparam(double(c.channels))},   {"hparam.length", hparam(double(c.length))},
      {"hparam.classes", hparam(double(c.classes))},     {"hparam.rate", hparam(c.rate)},
      {"hparam.patch", hparam(double(c.patch))},         {"hparam.dim", hparam(double(c.dim))},
      {"hparam.blocks", hparam(double(c.blocks))},       {"hparam.heads", hparam(double(c.heads))},
      {"hparam.bands", hparam(double(c.bands))},         {"hparam.k_top", hparam(double(c.k_top))},
      {"hparam.state_dim", hparam(double(c.state_dim))}, {"hparam.ffn_hidden", hparam(double(c.ffn_hidden))},
      {"hparam.head_hidden", hparam(double(c.head_hidden))},
      {"hparam.fusion_scale", hparam(c.fusion_scale)},
  };
  Tensor ks({c.kernel_sizes.size()});
  for (std::size_t i = 0; i < c.kernel_sizes.size(); ++i) ks[i] = double(c.kernel_sizes[i]);
  out.emplace_back("hparam.kernel_sizes", std::move(ks));
  if (c.forced_fusion) {
    out.emplace_back("hparam.forced_fusion",
                     Tensor({3}, std::vector<double>(c.forced_fusion->begin(), c.forced_fusion->end())));
  }
  for (auto& [name, p] : model.named_parameters()) out.emplace_back(name, p->value);
  return out;
}

void save_checkpoint(const std::string& path, NakulModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  write_tensors(out, model_state(model));
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path);
  return read_tensors(in);
}

ModelConfig config_from_state(const NamedTensors& tensors) {
  std::map<std::string, const Tensor*> h;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("hparam.", 0) == 0) h[name.substr(7)] = &t;
  }
  auto scalar = [&](const char* key) -> double {
    auto it = h.find(key);
    if (it == h.end()) throw LoadError(std::string("checkpoint lacks hparam.") + key);
    return it->second->item();
  };
  auto count = [&](const char* key) -> std::size_t {
    const double v = scalar(key);
    if (v < 0 || v != std::floor(v)) throw LoadError(std::string("hparam.") + key + " is not a count");
    return static_cast<std::size_t>(v);
  };
  ModelConfig c;
  c.channels = count("channels");
  c.length = count("length");
  c.classes = count("classes");
  c.rate = scalar("rate");
  c.patch = count("patch");
  c.dim = count("dim");
  c.blocks = count("blocks");
  c.heads = count("heads");
  c.bands = count("bands");
  c.k_top = count("k_top");
  c.state_dim = count("state_dim");
  c.ffn_hidden = count("ffn_hidden");
  c.head_hidden = count("head_hidden");
  c.fusion_scale = scalar("fusion_scale");
  auto ks = h.find("kernel_sizes");
  if (ks == h.end()) throw LoadError("checkpoint lacks hparam.kernel_sizes");
  c.kernel_sizes.clear();
  for (double v : ks->second->data()) c.kernel_sizes.push_back(static_cast<std::size_t>(v));
  if (auto ff = h.find("forced_fusion"); ff != h.end()) {
    if (ff->second->size() != 3) throw LoadError("hparam.forced_fusion must have 3 entries");
    c.forced_fusion = std::array<double, 3>{(*ff->second)[0], (*ff->second)[1], (*ff->second)[2]};
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint architecture invalid: ") + e.what());
  }
  return c;
}

void load_state(NakulModel& model, const NamedTensors& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) {
    if (name.rfind("hparam.", 0) != 0) by_name[name] = &t;
  }
  auto named = model.named_parameters();
  for (auto& [name, p] : named) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError("checkpoint lacks parameter " + name);
    if (it->second->shape() != p->value.shape()) {
      throw ShapeError("parameter " + name + " has shape " + to_string(it->second->shape()) + ", model expects " +
                       to_string(p->value.shape()));
    }
  }
  if (by_name.size() != named.size()) throw ShapeError("checkpoint holds parameters the model does not have");
  for (auto& [name, p] : named) p->value = *by_name[name];
}

}  // namespace nakul
