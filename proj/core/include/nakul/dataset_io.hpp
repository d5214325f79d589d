// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// On-disk datasets: one text file per trial plus labels.csv.
//
// Trial file: a header line `# channels=C samples=T rate=Hz label=int`
// followed by C lines of T comma-separated numbers.

#pragma once

#include <iosfwd>
#include <string>

#include "nakul/data.hpp"

namespace nakul {

void write_signal(std::ostream& out, const Tensor& signal, double rate, int label);

struct SignalFile {
  Tensor signal;  // [C, T]
  double rate = 0.0;
  int label = 0;
};

/// Throws LoadError on a malformed file.
SignalFile read_signal(std::istream& in);

/// Writes every trial, labels.csv (`filename,label`) and `manifest` verbatim
/// to manifest.txt. Creates `dir` if needed.
void write_dataset(const std::string& dir, const Dataset& data, const std::string& manifest);

/// Reads labels.csv and the trials it lists. All trials must agree on shape
/// and rate, and each header label must match labels.csv.
Dataset read_dataset(const std::string& dir);

}  // namespace nakul
