#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepvar/evaluation.hpp"
#include "deepvar/run_config.hpp"
#include "deepvar/training.hpp"

namespace deepvar {

// Command implementations behind the CLI. All throw ConfigError / DataError /
// NumericError; the binary maps those to exit codes 1 / 2 / 3.

struct PrepareResult {
  std::size_t sentences = 0;
  std::size_t aligned = 0;
  std::size_t misaligned = 0;
  std::string bio_path;
  std::string report_path;
};

// Offset annotations + raw text -> BIO file + alignment report.
PrepareResult cmd_prepare(const std::string& config_path,
                          const std::string& out_dir_override = "");

struct TrainResult {
  TrainReport report;
  RunConfig config;  // effective config after overrides
  std::string checkpoint_path;
  std::string report_path;
  std::string log_path;
};

TrainResult cmd_train(const std::string& config_path,
                      std::optional<std::uint64_t> seed_override = std::nullopt,
                      const std::string& out_dir_override = "");

// Already-parsed variant; the grid driver uses it per trial.
TrainResult run_training(const RunConfig& config);

// Reads a report.json back into a TrainReport (wall clock lives in the log
// and reloads as zero).
TrainReport load_train_report(const std::string& path);

struct TagResult {
  std::size_t sentences = 0;
  std::size_t entities = 0;
};

// input_format: "text" (one sentence per line, tokenized with the
// checkpoint's tokenizer) or "bio" (tokens given; any tags ignored).
TagResult cmd_tag(const std::string& checkpoint_path, const std::string& input_path,
                  const std::string& output_path, const std::string& input_format = "text");

EvalReport cmd_evaluate(const std::string& gold_path, const std::string& predicted_path,
                        const std::string& out_dir = "");

struct TrialOutcome {
  std::size_t trial_index = 0;
  double validation_f1 = 0.0;
  bool reused = false;  // true when --resume found a finished report
  std::string directory;
};

struct GridResult {
  std::vector<TrialOutcome> ranking;  // best first; ties by enumeration order
  std::size_t grid_size = 0;
};

GridResult cmd_grid(const std::string& config_path, std::size_t jobs = 1,
                    bool resume = false,
                    std::optional<std::uint64_t> seed_override = std::nullopt,
                    const std::string& out_dir_override = "");

}  // namespace deepvar
