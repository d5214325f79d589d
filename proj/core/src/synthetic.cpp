// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "nakul/data.hpp"
#include "nakul/errors.hpp"
#include "nakul/rng.hpp"

namespace nakul {

Tensor Dataset::batch(const std::vector<std::size_t>& indices) const {
  Tensor out({indices.size(), channels, length});
  const std::size_t per = channels * length;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& s = samples.at(indices[i]).signal;
    if (s.size() != per) throw ShapeError("trial " + samples[indices[i]].name + " has the wrong shape");
    std::copy_n(s.ptr(), per, out.ptr() + i * per);
  }
  return out;
}

std::vector<int> Dataset::labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(samples.at(i).label);
  return out;
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("data.classes", "need at least two classes");
  if (channels < 1) throw ConfigError("data.channels", "need at least one channel");
  if (length < 2) throw ConfigError("data.length", "need at least two samples");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ConfigError("data.rate", "must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("data.noise_sigma", "must be nonnegative");
  if (trials_per_class < 1) throw ConfigError("data.trials_per_class", "must be at least 1");
  if (class_bands.size() != classes) {
    throw ConfigError("data.bands", "lists " + std::to_string(class_bands.size()) + " classes, expected " +
                                        std::to_string(classes));
  }
  if (active_channels.size() != classes) {
    throw ConfigError("data.active_channels", "lists " + std::to_string(active_channels.size()) +
                                                  " classes, expected " + std::to_string(classes));
  }
  const double nyquist = rate / 2.0;
  for (const auto& bands : class_bands) {
    if (bands.empty()) throw ConfigError("data.bands", "every class needs at least one frequency");
    for (double f : bands) {
      if (!(f > 0.0) || !(f < nyquist)) {
        throw ConfigError("data.bands", "frequency " + std::to_string(f) + " Hz is outside (0, " +
                                            std::to_string(nyquist) + ") Hz");
      }
    }
  }
  for (const auto& set : active_channels) {
    if (set.empty()) throw ConfigError("data.active_channels", "every class needs an active channel");
    for (auto c : set) {
      if (c >= channels) throw ConfigError("data.active_channels", "channel " + std::to_string(c) + " out of range");
    }
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng::stream(seed, "data");
  Dataset d;
  d.channels = spec.channels;
  d.length = spec.length;
  d.classes = spec.classes;
  d.rate = spec.rate;
  const std::size_t C = spec.channels, T = spec.length;
  char name[32];
  for (std::size_t trial = 0; trial < spec.trials_per_class; ++trial) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      Tensor x({C, T});
      for (double f : spec.class_bands[c]) {
        const double w = 2.0 * std::numbers::pi * f / spec.rate;
        for (auto ch : spec.active_channels[c]) {
          const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
          for (std::size_t t = 0; t < T; ++t) x[ch * T + t] += std::sin(w * double(t) + phase);
        }
      }
      if (spec.noise_sigma > 0.0) {
        for (auto& v : x.data()) v += rng.normal(0.0, spec.noise_sigma);
      }
      std::snprintf(name, sizeof(name), "trial_%05zu.csv", d.samples.size());
      d.samples.push_back({name, std::move(x), int(c)});
    }
  }
  return d;
}

Split stratified_split(const Dataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("train.val_fraction", "must be in [0, 1)");
  Rng rng = Rng::stream(seed, "split");
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data.samples[i].label;
    if (y < 0 || std::size_t(y) >= data.classes) throw std::out_of_range("label out of range in trial " + data.samples[i].name);
    by_class[std::size_t(y)].push_back(i);
  }
  Split s;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * double(idx.size())));
    s.val.insert(s.val.end(), idx.begin(), idx.begin() + n_val);
    s.train.insert(s.train.end(), idx.begin() + n_val, idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

}  // namespace nakul
