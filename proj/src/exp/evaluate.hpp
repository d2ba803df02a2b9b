#pragma once

#include <optional>
#include <string>
#include <vector>

#include "classifier/metrics.hpp"
#include "data/dataset.hpp"
#include "exp/config.hpp"
#include "invert/inverse_mapper.hpp"

namespace audioinv::exp {

// one aggregated row of the results tables
struct MethodRow {
  std::string name;
  std::optional<clf::InceptionScore> inception;
  std::optional<double> mse_raw;
  std::optional<double> ssim;
  std::optional<double> accuracy;
  int64_t failures = 0;
};

struct ResultsTable {
  std::string kind;  // "fake" or "real"
  std::vector<MethodRow> rows;
  bool has_accuracy_column = false;
};

std::string table_to_csv(const ResultsTable& t);

struct EvalOutcome {
  ResultsTable fake_table;
  ResultsTable real_table;
  std::string out_dir;
  std::vector<std::string> diagnostics;  // ordering violations, failures
};

// training entrypoints; each writes a checkpoint directory plus a training
// log and returns the checkpoint path
std::string cmd_train_gan(const ExperimentConfig& cfg);
std::string cmd_train_classifier(const ExperimentConfig& cfg);
std::string cmd_train_inverter(const ExperimentConfig& cfg);

// real dataset per config: SC09 tree when a root is set, synthetic digits
// otherwise
data::LabeledDataset load_real_dataset(const ExperimentConfig& cfg);

// Full evaluation: N fake and N real targets, all three methods each,
// tables + sidecars + figures under cfg.out_dir.
EvalOutcome run_evaluate(const ExperimentConfig& cfg);

// single-file inversion used by the `invert` subcommand
void run_single_inversion(const ExperimentConfig& cfg, const std::string& wav_path,
                          const std::string& method, const std::string& out_dir);

}  // namespace audioinv::exp
