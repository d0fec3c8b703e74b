#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "stackseq/model.h"
#include "stackseq/training.h"

namespace stackseq {

// Usage-class failure (bad flags, bad config keys/values); the CLI maps it
// to exit code 1 as opposed to 2 for runtime failures.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::string path;
  std::string target_path;       // tf runs
  double split_ratio = 0.8;
  uint64_t split_seed = 7;
  std::vector<double> fractions; // cl snapshots; defaults to {1.0}
  int64_t overlap = 0;           // sub-sequence window overlap on load
};

// Textual key=value experiment description with [model], [train],
// [schedule] and [data] sections. Unknown sections or keys are rejected;
// a run logs the fully resolved document verbatim.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  Schedule schedule;
  DataConfig data;

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);

  // Complete effective configuration, parseable by parse().
  std::string resolved() const;
};

}  // namespace stackseq
