#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tasks.hpp"
#include "train.hpp"

namespace csnet {

inline constexpr const char* kVersion = "0.1.0";

// Flat key=value experiment description. Unset strings keep their defaults.
struct ExperimentConfig {
  std::string task;               // classify | nir2d | digitsum
  std::string algebra = "dense";  // diagonal | dense | block | circulant | group
  int d = 5;
  std::vector<int> block_sizes;   // algebra=block only; must sum to d
  int hidden = 32;
  int layers = 3;                 // number of affine layers
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double offdiag_scale = 0.1;
  double offdiag_weight = 0.5;
  std::string out_dir = "run_out";
  std::string data_dir;           // overrides CSNET_DATA_DIR
  // classify
  int samples_per_class = 100;
  int eval_per_class_per_submodel = 10;
  // nir2d
  int iterations = 500;
  int log_every = 100;
  int nir_batch = 512;
  double fourier_sigma = 10.0;
  // digitsum
  int train_tuples = 1000;
  int eval_tuples = 10000;
  std::string baseline;           // "deepset" selects the set-pooling baseline
};

// Parses `key=value` lines ('#' comments, blank lines allowed).
ExperimentConfig parse_config_file(const std::string& path);
// Applies one key=value pair; throws std::invalid_argument on unknown keys or
// unparsable values.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Throws std::invalid_argument when the combination is unusable.
void validate_config(const ExperimentConfig& cfg);

// Canonical serialization (sorted keys); hashed into checkpoint digests and
// copied into each run directory.
std::string config_canonical(const ExperimentConfig& cfg);

AlgebraDescriptor descriptor_from_config(const ExperimentConfig& cfg);

// Runs one experiment; writes metrics.csv, config.txt, run_info.txt,
// summary.csv, checkpoint.bin and task artifacts into cfg.out_dir.
void run_experiment(const ExperimentConfig& cfg);

// Final metric of a finished run, read back from summary.csv.
struct RunSummary {
  std::string task, algebra;
  std::uint64_t seed = 0;
  std::string metric_name;
  double metric_value = 0.0;
};
RunSummary read_summary(const std::string& run_dir);

// Side-by-side mean +- std per algebra label; throws on <2 runs or mixed
// tasks. Returns the formatted table.
std::string compare_report(const std::vector<std::string>& run_dirs);

// Fast self-contained property checks; returns the number of failures and
// appends one line per check to `lines`.
int selftest(std::vector<std::string>& lines);

}  // namespace csnet
