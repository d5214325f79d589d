// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Central finite-difference checks of reverse-mode gradients, grouped by
// library module.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nakul/autograd.hpp"

namespace nakul {

struct RunConfig;

struct GradCheckOptions {
  std::size_t samples = 50;  // parameter entries per module
  double step = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 0;
  /// Module whose objective gets an op with a deliberately wrong backward
  /// (negative control). Empty for none.
  std::string corrupt;
};

struct GradCheckResult {
  std::string module;
  std::size_t samples = 0;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// A scalar objective over a set of parameters. `build` must be
/// deterministic and record the loss on the given tape.
struct GradCheckCase {
  std::string module;
  std::vector<Parameter*> params;
  std::function<Var(Tape&)> build;
};

GradCheckResult check_gradients(const GradCheckCase& c, const GradCheckOptions& opts);

/// Checks every library module; the "cli" entry trains-objective of the model
/// described by `cfg` on a batch drawn from its synthetic spec.
std::vector<GradCheckResult> check_all_modules(const RunConfig& cfg, const GradCheckOptions& opts);

double relative_error(double analytic, double numeric, double floor);

}  // namespace nakul
