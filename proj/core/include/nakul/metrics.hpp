// Copyright 2026 The NAKUL Authors. Apache 2.0 License.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nakul {

/// Rows are true classes, columns predictions.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix confusion_matrix(std::span<const int> predicted, std::span<const int> truth, std::size_t classes);
double accuracy(std::span<const int> predicted, std::span<const int> truth);
/// F1 of each class; 0 for a class that is neither present nor predicted.
std::vector<double> per_class_f1(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

}  // namespace nakul
