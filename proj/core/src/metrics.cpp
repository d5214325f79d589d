// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#include "nakul/metrics.hpp"

#include <stdexcept>
#include <string>

namespace nakul {

namespace {

void check(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and label counts differ");
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth, std::size_t classes) {
  check(predicted, truth);
  ConfusionMatrix cm(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || std::size_t(t) >= classes || p < 0 || std::size_t(p) >= classes) {
      throw std::out_of_range("class index out of range at position " + std::to_string(i));
    }
    ++cm[std::size_t(t)][std::size_t(p)];
  }
  return cm;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  check(predicted, truth);
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return double(hit) / double(truth.size());
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
  const std::size_t n = cm.size();
  std::vector<double> f1(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = cm[c][c], fn = 0, fp = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == c) continue;
      fn += cm[c][j];
      fp += cm[j][c];
    }
    const std::size_t denom = 2 * tp + fp + fn;
    f1[c] = denom ? 2.0 * double(tp) / double(denom) : 0.0;
  }
  return f1;
}

double macro_f1(const ConfusionMatrix& cm) {
  const auto f = per_class_f1(cm);
  if (f.empty()) return 0.0;
  double s = 0.0;
  for (double v : f) s += v;
  return s / double(f.size());
}

}  // namespace nakul
