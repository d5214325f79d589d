// Copyright 2026 The NAKUL Authors. Apache 2.0 License.
//
// Flat `key = value` run configuration. Keys are dotted (data.*, model.*,
// train.*, graph.*, paths.*); '#' starts a comment line. Unknown or repeated
// keys and invalid values throw ConfigError naming the key.

#pragma once

#include <iosfwd>
#include <string>

#include "nakul/data.hpp"
#include "nakul/graph.hpp"
#include "nakul/model.hpp"
#include "nakul/train.hpp"

namespace nakul {

struct RunConfig {
  SyntheticSpec data;
  ModelConfig model;  // channels, length, classes and rate follow `data`
  TrainConfig train;
  double graph_radius = graph::kDefaultRadius;
  double layout_radius = graph::kDefaultLayoutRadius;
  std::string positions_path;
  std::string data_dir;
  std::string checkpoint_path;

  /// Copies the data dimensions into `model` and validates everything.
  void finalize();
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
/// Every key with its current value, in a form parse_config accepts.
std::string to_text(const RunConfig& cfg);

/// Electrode graph for the run: the positions file when given (its channel
/// count must match), otherwise the default circle layout.
graph::ElectrodeGraph make_graph(const RunConfig& cfg);

}  // namespace nakul
