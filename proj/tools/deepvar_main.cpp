// deepvar: genomic-variant NER pipeline driver.
//
// Subcommands: prepare, train, tag, evaluate, grid. Each run is driven by a
// declarative JSON config; flags only override paths and seeds.
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "deepvar/commands.hpp"
#include "deepvar/errors.hpp"

namespace {

int dispatch(const std::function<int()>& body) {
  try {
    return body();
  } catch (const deepvar::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const deepvar::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const deepvar::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepVar: BiLSTM-CRF tagger for genomic variant mentions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool resume = false;
  std::string checkpoint_path, input_path, output_path, input_format = "text";
  std::string gold_path, predicted_path;

  CLI::App* prepare = app.add_subcommand("prepare", "convert offset annotations to BIO files");
  prepare->add_option("--config", config_path, "prepare config (JSON)")->required();
  prepare->add_option("--out-dir", out_dir, "output directory override");

  CLI::App* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", config_path, "run config (JSON)")->required();
  train->add_option("--seed", seed, "master seed override");
  train->add_option("--out-dir", out_dir, "output directory override");

  CLI::App* tag = app.add_subcommand("tag", "tag sentences with a trained checkpoint");
  tag->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  tag->add_option("--input", input_path, "input file")->required();
  tag->add_option("--output", output_path, "output file")->required();
  tag->add_option("--format", input_format, "input format: text|bio");

  CLI::App* evaluate = app.add_subcommand("evaluate", "exact-match scores for two BIO files");
  evaluate->add_option("--gold", gold_path, "gold BIO file")->required();
  evaluate->add_option("--pred", predicted_path, "predicted BIO file")->required();
  evaluate->add_option("--out-dir", out_dir, "where to write eval.txt / eval.json");

  CLI::App* grid = app.add_subcommand("grid", "hyperparameter grid search");
  grid->add_option("--config", config_path, "grid config (JSON)")->required();
  grid->add_option("--jobs", jobs, "concurrent trials");
  grid->add_flag("--resume", resume, "skip trials with a finished report");
  grid->add_option("--seed", seed, "base seed override");
  grid->add_option("--out-dir", out_dir, "output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (prepare->parsed()) {
    return dispatch([&] {
      const deepvar::PrepareResult r = deepvar::cmd_prepare(config_path, out_dir);
      std::printf("sentences: %zu\naligned: %zu\nmisaligned: %zu\nwrote %s\n", r.sentences,
                  r.aligned, r.misaligned, r.bio_path.c_str());
      return 0;
    });
  }
  if (train->parsed()) {
    return dispatch([&] {
      const deepvar::TrainResult r = deepvar::cmd_train(config_path, seed, out_dir);
      std::printf("status: %s\nbest epoch: %zu\nbest validation F1: %.4f\ncheckpoint: %s\n",
                  r.report.status.c_str(), r.report.best_epoch,
                  r.report.best_validation_f1, r.checkpoint_path.c_str());
      if (r.report.test_report) {
        std::printf("test macro F1: %.4f\n", r.report.test_report->macro_f1);
      }
      return r.report.status == "completed" ? 0 : 3;
    });
  }
  if (tag->parsed()) {
    return dispatch([&] {
      const deepvar::TagResult r =
          deepvar::cmd_tag(checkpoint_path, input_path, output_path, input_format);
      std::printf("sentences: %zu\nentities: %zu\n", r.sentences, r.entities);
      return 0;
    });
  }
  if (evaluate->parsed()) {
    return dispatch([&] {
      const deepvar::EvalReport r =
          deepvar::cmd_evaluate(gold_path, predicted_path, out_dir.empty() ? "." : out_dir);
      std::printf("%s", r.to_text().c_str());
      return 0;
    });
  }
  if (grid->parsed()) {
    return dispatch([&] {
      const deepvar::GridResult r =
          deepvar::cmd_grid(config_path, jobs, resume, seed, out_dir);
      std::printf("grid size: %zu, trials run: %zu\n", r.grid_size, r.ranking.size());
      for (const deepvar::TrialOutcome& o : r.ranking) {
        std::printf("trial-%04zu  f1=%.4f%s\n", o.trial_index, o.validation_f1,
                    o.reused ? "  (resumed)" : "");
      }
      return 0;
    });
  }
  return 1;
}
