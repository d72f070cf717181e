#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "net.hpp"

namespace csnet {

struct LossSpec {
  enum class Kind : std::uint32_t { MSEDiagonal = 0, CrossEntropyDiagonal = 1, HuberDiagonal = 2 };
  Kind kind = Kind::MSEDiagonal;
  double offdiag_weight = 0.5;
  double huber_delta = 1.0;
};

// One training sample in the realization layout. `input` stacks, per input
// element, one column of its realization matrix:
//   Diagonal/Dense/BlockDiagonal : column `submodel` (diagonal-embedded data
//                                  occupies coordinate p = submodel)
//   Circulant                    : column 0, i.e. the first-column storage
//   Group                        : the full function on G
// `target` holds the diagonal-slice regression targets, or a one-hot class
// vector for the cross-entropy loss.
struct Sample {
  int submodel = 0;
  std::vector<double> input;
  std::vector<double> target;
};

// Column index of the sample inside each element's realization.
int sample_column(const AlgebraDescriptor& desc, int submodel);

// Diagonal-embed a real feature vector for sub-model j.
Sample make_matrix_sample(const AlgebraDescriptor& desc, int j,
                          const std::vector<double>& features, std::vector<double> target);

// Cached realization matrices of all layers; rebuild after parameter updates.
struct FastNet {
  int D = 0;
  std::vector<Eigen::MatrixXd> M;                  // (N_out*D) x (N_in*D)
  std::vector<std::vector<int>> bias_col_slot;     // per layer: D*D -> storage slot or -1 (realization idx)
  void refresh(const Network& net);
};

// Per-layer pre-activations and activations of one batch (the autodiff tape).
// For Diagonal/Dense/BlockDiagonal batches the first-layer input is kept in
// compressed per-column groups instead of the (mostly zero) full matrix.
struct ForwardCache {
  Eigen::MatrixXd input_matrix;            // circulant/group batches only
  std::vector<int> group_cols;             // realization column of each group
  std::vector<std::vector<int>> col_groups;  // batch positions per group
  std::vector<Eigen::MatrixXd> x_groups;   // n0 x B_g feature blocks per group
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

// Forward a batch of samples; columns of the result are the output vectors.
// `cache`, when given, records everything backprop needs.
Eigen::MatrixXd forward_batch(const Network& net, const FastNet& fast,
                              const std::vector<Sample>& batch,
                              const std::vector<int>& idx, ForwardCache* cache);

// Per-sample loss and output gradient on the final batch columns.
double batch_loss_and_output_grad(const Network& net, const Eigen::MatrixXd& out,
                                  const std::vector<Sample>& batch, const std::vector<int>& idx,
                                  const LossSpec& spec, Eigen::MatrixXd* dOut);

// Mean loss of a batch (no gradients).
double batch_loss(const Network& net, const std::vector<Sample>& batch, const LossSpec& spec);

struct ParamGrads {
  std::vector<std::vector<double>> weights;  // aligned to layer weight storage
  std::vector<std::vector<double>> bias;     // empty vector when the layer has no bias
  static ParamGrads zeros_like(const Network& net);
};

// Exact reverse-mode gradient of the mean batch loss with respect to every
// stored parameter scalar. Returns the mean loss. Throws on non-finite loss.
double grad(const Network& net, const std::vector<Sample>& batch, const LossSpec& spec,
            ParamGrads& out);
double grad_with(const Network& net, const FastNet& fast, const std::vector<Sample>& batch,
                 const std::vector<int>& idx, const LossSpec& spec, ParamGrads& out);

// Spec'd loss on full algebra tensors: base loss on the j-th diagonal slices
// of the realizations plus offdiag_weight * sum over row/column j off-diagonal
// squares of every output element. Group kind: base loss on the G-mean of the
// output functions, no off-diagonal term.
double loss_eval(const AlgebraTensor& y, const AlgebraTensor& t, const LossSpec& spec,
                 int active_submodel);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

  static AdamState create(const Network& net, double lr);
};

void adam_step(Network& net, const ParamGrads& g, AdamState& s);

struct MetricRow {
  int epoch = 0;
  long long step = 0;
  double loss = 0.0;
  std::string name;
  double value = 0.0;
  int submodel = -1;  // -1: aggregate
};

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& log);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // empty: no checkpoints
  std::uint64_t config_digest = 0;
  int log_every_steps = 0;  // 0: per-epoch only
};

using EvalFn = std::function<std::vector<MetricRow>(const Network&, int epoch, long long step)>;

struct TrainResult {
  std::vector<MetricRow> log;
  long long steps = 0;
};

// Deterministic training loop: shuffled mini-batches, Adam updates, per-epoch
// metric rows and checkpoints. Aborts with a diagnostic on non-finite loss.
TrainResult train_loop(Network& net, const std::vector<Sample>& data, const LossSpec& spec,
                       const TrainConfig& cfg, const EvalFn& eval = {});

// Checkpoint file: "CSNET1" magic, config digest, layer tensors, optimizer
// buffers (optional).
void save_checkpoint(const std::string& path, const Network& net, const AdamState* opt,
                     std::uint64_t config_digest);
struct Checkpoint {
  Network net;
  AdamState opt;
  bool has_opt = false;
  std::uint64_t digest = 0;
};
Checkpoint load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace csnet
