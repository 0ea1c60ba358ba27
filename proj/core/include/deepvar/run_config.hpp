#pragma once

#include <cstdint>
#include <string>

#include "deepvar/network.hpp"
#include "deepvar/optimizer.hpp"
#include "deepvar/tokenizer.hpp"
#include "deepvar/training.hpp"

namespace deepvar {

struct DataConfig {
  std::string train_path;
  std::string validation_path;  // empty: carve holdout_fraction out of train
  std::string test_path;
  double holdout_fraction = 0.2;
  std::uint64_t holdout_seed = 1;
};

struct EmbeddingsConfig {
  std::string path;                  // text vector file
  std::size_t random_dimension = 0;  // random-init table when no path given
  std::uint64_t random_seed = 1;
  bool fallback_to_random = false;   // missing file falls back only when set
};

// One declarative config per run; unknown keys are rejected and the
// effective config is echoed into the run report.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "run";
  ModelConfig model;
  TrainConfig train;
  OptimizerConfig optimizer;
  DataConfig data;
  EmbeddingsConfig embeddings;
  TokenizerConfig tokenizer;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& context);
std::string run_config_to_json_string(const RunConfig& config);

}  // namespace deepvar
