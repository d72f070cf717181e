#include "train.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "rng.hpp"

namespace csnet {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

int class_of(const std::vector<double>& one_hot) {
  int best = 0;
  for (std::size_t i = 1; i < one_hot.size(); ++i)
    if (one_hot[i] > one_hot[best]) best = static_cast<int>(i);
  return best;
}

double huber(double e, double delta) {
  double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

double huber_grad(double e, double delta) {
  if (e > delta) return delta;
  if (e < -delta) return -delta;
  return e;
}

}  // namespace

int sample_column(const AlgebraDescriptor& desc, int submodel) {
  if (desc.kind == AlgebraKind::Circulant || desc.kind == AlgebraKind::Group) return 0;
  return submodel;
}

Sample make_matrix_sample(const AlgebraDescriptor& desc, int j,
                          const std::vector<double>& features, std::vector<double> target) {
  if (desc.kind == AlgebraKind::Group) fail("make_matrix_sample: matrix kinds only");
  if (j < 0 || j >= desc.submodel_count()) fail("sub-model index out of range");
  int D = desc.rep_dim();
  Sample s;
  s.submodel = j;
  s.input.assign(features.size() * static_cast<std::size_t>(D), 0.0);
  if (desc.kind == AlgebraKind::Circulant) {
    for (std::size_t l = 0; l < features.size(); ++l) {
      AlgebraElement e = embed_submodel(desc, j, features[l]);
      std::copy(e.data.begin(), e.data.end(), s.input.begin() + l * D);
    }
    s.submodel = 0;  // circulant samples live in the first-column layout
  } else {
    for (std::size_t l = 0; l < features.size(); ++l) s.input[l * D + j] = features[l];
  }
  s.target = std::move(target);
  return s;
}

void FastNet::refresh(const Network& net) {
  const Realization& r = realization_for(net.desc);
  D = r.dim;
  int S = net.desc.elem_size();
  M.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const AlgebraTensor& W = net.layers[i].weights;
    int rows = W.rows(), cols = W.cols();
    Eigen::MatrixXd& Mi = M[i];
    if (Mi.rows() != rows * D || Mi.cols() != cols * D) Mi.setZero(rows * D, cols * D);
    for (int k = 0; k < rows; ++k)
      for (int l = 0; l < cols; ++l) {
        const double* w = W.data.data() + (static_cast<std::size_t>(k) * cols + l) * S;
        for (int p = 0; p < D; ++p)
          for (int q = 0; q < D; ++q) {
            int s = r.idx[p * D + q];
            Mi(k * D + p, l * D + q) = s >= 0 ? w[s] : 0.0;
          }
      }
  }
}

// Diagonal-embedded inputs occupy exactly one realization column; grouping a
// batch by that column turns the first layer into small per-column products.
static bool column_embedded(const AlgebraDescriptor& desc) {
  return desc.kind == AlgebraKind::Diagonal || desc.kind == AlgebraKind::Dense ||
         desc.kind == AlgebraKind::BlockDiagonal;
}

static void group_by_column(const AlgebraDescriptor& desc, const std::vector<Sample>& batch,
                            const std::vector<int>& idx, std::vector<int>& group_cols,
                            std::vector<std::vector<int>>& col_groups) {
  group_cols.clear();
  col_groups.clear();
  for (int c = 0; c < static_cast<int>(idx.size()); ++c) {
    int j = sample_column(desc, batch[idx[c]].submodel);
    std::size_t g = 0;
    while (g < group_cols.size() && group_cols[g] != j) ++g;
    if (g == group_cols.size()) {
      group_cols.push_back(j);
      col_groups.emplace_back();
    }
    col_groups[g].push_back(c);
  }
}

Eigen::MatrixXd forward_batch(const Network& net, const FastNet& fast,
                              const std::vector<Sample>& batch,
                              const std::vector<int>& idx, ForwardCache* cache) {
  const Realization& r = realization_for(net.desc);
  int D = fast.D;
  int B = static_cast<int>(idx.size());
  int n0 = net.in_width();
  bool col_fast = column_embedded(net.desc);

  for (int c = 0; c < B; ++c)
    if (static_cast<int>(batch[idx[c]].input.size()) != n0 * D)
      fail("sample width does not match the network");

  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->group_cols.clear();
    cache->col_groups.clear();
    cache->x_groups.clear();
    cache->input_matrix.resize(0, 0);
    cache->pre.reserve(net.layers.size());
    cache->post.reserve(net.layers.size());
  }

  Eigen::MatrixXd H;
  if (col_fast) {
    std::vector<int> group_cols;
    std::vector<std::vector<int>> col_groups;
    group_by_column(net.desc, batch, idx, group_cols, col_groups);
    const Eigen::MatrixXd& M0 = fast.M[0];
    H.resize(M0.rows(), B);
    std::vector<Eigen::MatrixXd> x_groups(group_cols.size());
    for (std::size_t g = 0; g < group_cols.size(); ++g) {
      int j = group_cols[g];
      const auto& cols = col_groups[g];
      Eigen::MatrixXd& X = x_groups[g];
      X.resize(n0, cols.size());
      for (std::size_t t = 0; t < cols.size(); ++t) {
        const Sample& s = batch[idx[cols[t]]];
        for (int l = 0; l < n0; ++l) X(l, t) = s.input[static_cast<std::size_t>(l) * D + j];
      }
      // columns l*D+j of M0, stride D apart in a column-major matrix
      Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>> Mj(
          M0.data() + static_cast<std::ptrdiff_t>(j) * M0.rows(), M0.rows(), n0,
          Eigen::OuterStride<>(static_cast<std::ptrdiff_t>(D) * M0.rows()));
      Eigen::MatrixXd Pg = Mj * X;
      for (std::size_t t = 0; t < cols.size(); ++t) H.col(cols[t]) = Pg.col(t);
    }
    if (cache) {
      cache->group_cols = std::move(group_cols);
      cache->col_groups = std::move(col_groups);
      cache->x_groups = std::move(x_groups);
    }
  } else {
    Eigen::MatrixXd X(n0 * D, B);
    for (int c = 0; c < B; ++c)
      X.col(c) = Eigen::Map<const Eigen::VectorXd>(batch[idx[c]].input.data(), n0 * D);
    if (cache) cache->input_matrix = X;
    H = fast.M[0] * X;
  }

  int S = net.desc.elem_size();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    Eigen::MatrixXd P = i == 0 ? std::move(H) : Eigen::MatrixXd(fast.M[i] * H);
    int n_out = layer.weights.rows();
    if (layer.bias) {
      const double* b = layer.bias->data.data();
      for (int c = 0; c < B; ++c) {
        int j = sample_column(net.desc, batch[idx[c]].submodel);
        for (int k = 0; k < n_out; ++k)
          for (int p = 0; p < D; ++p) {
            int slot = r.idx[p * D + j];
            if (slot >= 0) P(k * D + p, c) += b[k * S + slot];
          }
      }
    }
    if (cache) cache->pre.push_back(P);
    // nonlinearity on the diagonal coordinate of each sample's column
    if (layer.activation != Activation::Identity) {
      if (r.activate_all) {
        for (int c = 0; c < B; ++c)
          for (int q = 0; q < P.rows(); ++q) P(q, c) = scalar_activate(layer.activation, P(q, c));
      } else {
        for (int c = 0; c < B; ++c) {
          int j = sample_column(net.desc, batch[idx[c]].submodel);
          for (int k = 0; k < n_out; ++k) {
            double& v = P(k * D + j, c);
            v = scalar_activate(layer.activation, v);
          }
        }
      }
    }
    if (cache) cache->post.push_back(P);
    H = std::move(P);
  }
  if (cache) cache->post.back() = H;
  return H;
}

double batch_loss_and_output_grad(const Network& net, const Eigen::MatrixXd& out,
                                  const std::vector<Sample>& batch, const std::vector<int>& idx,
                                  const LossSpec& spec, Eigen::MatrixXd* dOut) {
  const AlgebraDescriptor& desc = net.desc;
  int D = desc.rep_dim();
  int B = static_cast<int>(idx.size());
  int n_out = net.out_width();
  bool group = desc.kind == AlgebraKind::Group;
  // circulant row and column terms coincide in the first-column layout
  double w_pen = spec.offdiag_weight * (desc.kind == AlgebraKind::Circulant ? 2.0 : 1.0);

  if (dOut) dOut->setZero(out.rows(), out.cols());
  double total = 0.0;
  for (int c = 0; c < B; ++c) {
    const Sample& s = batch[idx[c]];
    int j = sample_column(desc, s.submodel);
    double loss = 0.0;
    switch (spec.kind) {
      case LossSpec::Kind::MSEDiagonal:
      case LossSpec::Kind::HuberDiagonal: {
        bool is_huber = spec.kind == LossSpec::Kind::HuberDiagonal;
        if (static_cast<int>(s.target.size()) != n_out) fail("target width mismatch");
        for (int k = 0; k < n_out; ++k) {
          double pred = group ? out.block(k * D, c, D, 1).mean() : out(k * D + j, c);
          double e = pred - s.target[k];
          loss += (is_huber ? huber(e, spec.huber_delta) : e * e) / n_out;
          if (dOut) {
            double g = (is_huber ? huber_grad(e, spec.huber_delta) : 2.0 * e) / (n_out * B);
            if (group) {
              for (int p = 0; p < D; ++p) (*dOut)(k * D + p, c) += g / D;
            } else {
              (*dOut)(k * D + j, c) += g;
            }
          }
        }
        break;
      }
      case LossSpec::Kind::CrossEntropyDiagonal: {
        if (static_cast<int>(s.target.size()) != n_out) fail("target width mismatch");
        std::vector<double> logits(n_out);
        for (int k = 0; k < n_out; ++k)
          logits[k] = group ? out.block(k * D, c, D, 1).mean() : out(k * D + j, c);
        double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double& v : logits) {
          v = std::exp(v - mx);
          z += v;
        }
        int cls = class_of(s.target);
        loss += -std::log(logits[cls] / z);
        if (dOut) {
          for (int k = 0; k < n_out; ++k) {
            double g = (logits[k] / z - (k == cls ? 1.0 : 0.0)) / B;
            if (group) {
              for (int p = 0; p < D; ++p) (*dOut)(k * D + p, c) += g / D;
            } else {
              (*dOut)(k * D + j, c) += g;
            }
          }
        }
        break;
      }
    }
    if (!group) {
      for (int k = 0; k < n_out; ++k)
        for (int p = 0; p < D; ++p) {
          if (p == j) continue;
          double v = out(k * D + p, c);
          loss += w_pen * v * v;
          if (dOut) (*dOut)(k * D + p, c) += 2.0 * w_pen * v / B;
        }
    }
    total += loss;
  }
  return total / B;
}

double batch_loss(const Network& net, const std::vector<Sample>& batch, const LossSpec& spec) {
  FastNet fast;
  fast.refresh(net);
  std::vector<int> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  Eigen::MatrixXd out = forward_batch(net, fast, batch, idx, nullptr);
  return batch_loss_and_output_grad(net, out, batch, idx, spec, nullptr);
}

ParamGrads ParamGrads::zeros_like(const Network& net) {
  ParamGrads g;
  for (const Layer& l : net.layers) {
    g.weights.emplace_back(l.weights.data.size(), 0.0);
    g.bias.emplace_back(l.bias ? l.bias->data.size() : 0, 0.0);
  }
  return g;
}

double grad_with(const Network& net, const FastNet& fast, const std::vector<Sample>& batch,
                 const std::vector<int>& idx, const LossSpec& spec, ParamGrads& out) {
  if (idx.empty()) fail("grad: empty batch");
  const Realization& r = realization_for(net.desc);
  int D = fast.D;
  int S = net.desc.elem_size();
  int B = static_cast<int>(idx.size());

  ForwardCache cache;
  Eigen::MatrixXd y = forward_batch(net, fast, batch, idx, &cache);
  Eigen::MatrixXd dH;
  double loss = batch_loss_and_output_grad(net, y, batch, idx, spec, &dH);
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss");

  for (int i = static_cast<int>(net.layers.size()) - 1; i >= 0; --i) {
    const Layer& layer = net.layers[i];
    int n_out = layer.weights.rows();
    int n_in = layer.weights.cols();
    // through the activation: identity on passthrough coordinates
    Eigen::MatrixXd dP = dH;
    if (layer.activation != Activation::Identity) {
      const Eigen::MatrixXd& P = cache.pre[i];
      if (r.activate_all) {
        for (int c = 0; c < B; ++c)
          for (int q = 0; q < dP.rows(); ++q)
            dP(q, c) *= scalar_activate_grad(layer.activation, P(q, c));
      } else {
        for (int c = 0; c < B; ++c) {
          int j = sample_column(net.desc, batch[idx[c]].submodel);
          for (int k = 0; k < n_out; ++k)
            dP(k * D + j, c) *= scalar_activate_grad(layer.activation, P(k * D + j, c));
        }
      }
    }
    if (layer.bias) {
      std::vector<double>& gb = out.bias[i];
      for (int c = 0; c < B; ++c) {
        int j = sample_column(net.desc, batch[idx[c]].submodel);
        for (int k = 0; k < n_out; ++k)
          for (int p = 0; p < D; ++p) {
            int slot = r.idx[p * D + j];
            if (slot >= 0) gb[k * S + slot] += dP(k * D + p, c);
          }
      }
    }
    std::vector<double>& gw = out.weights[i];
    if (i == 0 && !cache.x_groups.empty()) {
      // per-column groups: dM columns l*D+j only
      for (std::size_t g = 0; g < cache.x_groups.size(); ++g) {
        int j = cache.group_cols[g];
        const auto& cols = cache.col_groups[g];
        Eigen::MatrixXd dPg(dP.rows(), cols.size());
        for (std::size_t t = 0; t < cols.size(); ++t) dPg.col(t) = dP.col(cols[t]);
        Eigen::MatrixXd dMg = dPg * cache.x_groups[g].transpose();  // (n_out*D) x n_in
        for (int k = 0; k < n_out; ++k)
          for (int l = 0; l < n_in; ++l) {
            double* gp = gw.data() + (static_cast<std::size_t>(k) * n_in + l) * S;
            for (int p = 0; p < D; ++p) {
              int s = r.idx[p * D + j];
              if (s >= 0) gp[s] += dMg(k * D + p, l);
            }
          }
      }
    } else {
      const Eigen::MatrixXd& Hprev = i == 0 ? cache.input_matrix : cache.post[i - 1];
      Eigen::MatrixXd dM = dP * Hprev.transpose();
      for (int k = 0; k < n_out; ++k)
        for (int l = 0; l < n_in; ++l) {
          double* g = gw.data() + (static_cast<std::size_t>(k) * n_in + l) * S;
          for (int p = 0; p < D; ++p)
            for (int q = 0; q < D; ++q) {
              int s = r.idx[p * D + q];
              if (s >= 0) g[s] += dM(k * D + p, l * D + q);
            }
        }
    }
    if (i > 0) dH = fast.M[i].transpose() * dP;
  }
  return loss;
}

double grad(const Network& net, const std::vector<Sample>& batch, const LossSpec& spec,
            ParamGrads& out) {
  FastNet fast;
  fast.refresh(net);
  std::vector<int> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  return grad_with(net, fast, batch, idx, spec, out);
}

double loss_eval(const AlgebraTensor& y, const AlgebraTensor& t, const LossSpec& spec,
                 int active_submodel) {
  if (!(y.desc == t.desc) || y.shape != t.shape) fail("loss_eval: shape mismatch");
  int n = y.entries();
  bool group = y.desc.kind == AlgebraKind::Group;
  std::vector<double> yp(n), tp(n);
  if (group) {
    int D = y.desc.elem_size();
    for (int e = 0; e < n; ++e) {
      double sy = 0.0, st = 0.0;
      for (int g = 0; g < D; ++g) {
        sy += y.data[static_cast<std::size_t>(e) * D + g];
        st += t.data[static_cast<std::size_t>(e) * D + g];
      }
      yp[e] = sy / D;
      tp[e] = st / D;
    }
  } else {
    int j = active_submodel;
    if (j < 0 || j >= y.desc.submodel_count()) fail("loss_eval: sub-model index out of range");
    const Realization& r = realization_for(y.desc);
    int D = r.dim;
    for (int e = 0; e < n; ++e) {
      auto ry = realize(y.get(e));
      auto rt = realize(t.get(e));
      yp[e] = ry[j * D + j];
      tp[e] = rt[j * D + j];
    }
  }

  double base = 0.0;
  switch (spec.kind) {
    case LossSpec::Kind::MSEDiagonal:
      for (int e = 0; e < n; ++e) base += (yp[e] - tp[e]) * (yp[e] - tp[e]) / n;
      break;
    case LossSpec::Kind::HuberDiagonal:
      for (int e = 0; e < n; ++e) base += huber(yp[e] - tp[e], spec.huber_delta) / n;
      break;
    case LossSpec::Kind::CrossEntropyDiagonal: {
      double mx = *std::max_element(yp.begin(), yp.end());
      double z = 0.0;
      for (double v : yp) z += std::exp(v - mx);
      int cls = class_of(tp);
      base = -(yp[cls] - mx - std::log(z));
      break;
    }
  }
  if (group) return base;

  const Realization& r = realization_for(y.desc);
  int D = r.dim, j = active_submodel;
  double pen = 0.0;
  for (int e = 0; e < n; ++e) {
    auto ry = realize(y.get(e));
    for (int l = 0; l < D; ++l) {
      if (l == j) continue;
      pen += spec.offdiag_weight * (ry[j * D + l] * ry[j * D + l] + ry[l * D + j] * ry[l * D + j]);
    }
  }
  return base + pen;
}

AdamState AdamState::create(const Network& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Layer& l : net.layers) {
    s.m_w.emplace_back(l.weights.data.size(), 0.0);
    s.v_w.emplace_back(l.weights.data.size(), 0.0);
    s.m_b.emplace_back(l.bias ? l.bias->data.size() : 0, 0.0);
    s.v_b.emplace_back(l.bias ? l.bias->data.size() : 0, 0.0);
  }
  return s;
}

namespace {

void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    double mh = m[i] / bc1;
    double vh = v[i] / bc2;
    p[i] -= s.lr * mh / (std::sqrt(vh) + s.eps);
  }
}

}  // namespace

void adam_step(Network& net, const ParamGrads& g, AdamState& s) {
  s.step += 1;
  double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    adam_update(net.layers[i].weights.data, g.weights[i], s.m_w[i], s.v_w[i], s, bc1, bc2);
    if (net.layers[i].bias)
      adam_update(net.layers[i].bias->data, g.bias[i], s.m_b[i], s.v_b[i], s, bc1, bc2);
  }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& log) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open metrics file: " + path);
  std::fprintf(f, "epoch,step,loss,metric_name,metric_value,submodel\n");
  for (const MetricRow& row : log)
    std::fprintf(f, "%d,%lld,%.17g,%s,%.17g,%d\n", row.epoch, row.step, row.loss,
                 row.name.c_str(), row.value, row.submodel);
  std::fclose(f);
}

TrainResult train_loop(Network& net, const std::vector<Sample>& data, const LossSpec& spec,
                       const TrainConfig& cfg, const EvalFn& eval) {
  if (data.empty()) fail("train_loop: empty dataset");
  if (cfg.batch_size <= 0 || cfg.epochs < 0) fail("train_loop: bad config");

  FastNet fast;
  fast.refresh(net);
  AdamState opt = AdamState::create(net, cfg.lr);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult res;
  if (eval) {
    auto rows = eval(net, 0, 0);
    res.log.insert(res.log.end(), rows.begin(), rows.end());
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      ParamGrads g = ParamGrads::zeros_like(net);
      double loss;
      try {
        loss = grad_with(net, fast, data, idx, spec, g);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training aborted at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(res.steps + 1) + ": " + e.what());
      }
      adam_step(net, g, opt);
      fast.refresh(net);
      loss_sum += loss;
      ++n_batches;
      ++res.steps;
      if (cfg.log_every_steps > 0 && res.steps % cfg.log_every_steps == 0)
        res.log.push_back({epoch, res.steps, loss, "train_loss", loss, -1});
    }
    double mean_loss = loss_sum / n_batches;
    if (cfg.log_every_steps == 0)
      res.log.push_back({epoch, res.steps, mean_loss, "train_loss", mean_loss, -1});
    if (eval) {
      auto rows = eval(net, epoch, res.steps);
      res.log.insert(res.log.end(), rows.begin(), rows.end());
    }
    if (!cfg.checkpoint_path.empty())
      save_checkpoint(cfg.checkpoint_path, net, &opt, cfg.config_digest);
  }
  return res;
}

namespace {

constexpr char kMagic[6] = {'C', 'S', 'N', 'E', 'T', '1'};

void put_u64(std::uint64_t v, std::vector<std::uint8_t>& out) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* buf, std::size_t len, std::size_t& off) {
  if (off + 8 > len) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[off + i]) << (8 * i);
  off += 8;
  return v;
}

void put_doubles(const std::vector<double>& v, std::vector<std::uint8_t>& out) {
  put_u64(v.size(), out);
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(bits, out);
  }
}

std::vector<double> get_doubles(const std::uint8_t* buf, std::size_t len, std::size_t& off) {
  std::uint64_t n = get_u64(buf, len, off);
  std::vector<double> v(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t bits = get_u64(buf, len, off);
    std::memcpy(&v[i], &bits, 8);
  }
  return v;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void save_checkpoint(const std::string& path, const Network& net, const AdamState* opt,
                     std::uint64_t config_digest) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 6);
  put_u64(config_digest, buf);
  buf.push_back(opt ? 1 : 0);
  put_u64(net.layers.size(), buf);
  for (const Layer& l : net.layers) {
    serialize_tensor(l.weights, buf);
    buf.push_back(l.bias ? 1 : 0);
    if (l.bias) serialize_tensor(*l.bias, buf);
    put_u64(static_cast<std::uint64_t>(l.activation), buf);
  }
  if (opt) {
    put_u64(static_cast<std::uint64_t>(opt->step), buf);
    std::uint64_t lr_bits;
    std::memcpy(&lr_bits, &opt->lr, 8);
    put_u64(lr_bits, buf);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      put_doubles(opt->m_w[i], buf);
      put_doubles(opt->v_w[i], buf);
      put_doubles(opt->m_b[i], buf);
      put_doubles(opt->v_b[i], buf);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint file: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 6 || std::memcmp(buf.data(), kMagic, 6) != 0)
    throw std::runtime_error("bad checkpoint magic");
  std::size_t off = 6;
  Checkpoint ck;
  ck.digest = get_u64(buf.data(), buf.size(), off);
  if (off >= buf.size()) throw std::runtime_error("truncated checkpoint");
  ck.has_opt = buf[off++] != 0;
  std::uint64_t n_layers = get_u64(buf.data(), buf.size(), off);
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    Layer l;
    l.weights = deserialize_tensor(buf.data(), buf.size(), off);
    if (off >= buf.size()) throw std::runtime_error("truncated checkpoint");
    bool has_bias = buf[off++] != 0;
    if (has_bias) l.bias = deserialize_tensor(buf.data(), buf.size(), off);
    l.activation = static_cast<Activation>(get_u64(buf.data(), buf.size(), off));
    ck.net.layers.push_back(std::move(l));
  }
  if (n_layers > 0) ck.net.desc = ck.net.layers[0].weights.desc;
  if (ck.has_opt) {
    ck.opt.step = static_cast<long long>(get_u64(buf.data(), buf.size(), off));
    std::uint64_t lr_bits = get_u64(buf.data(), buf.size(), off);
    std::memcpy(&ck.opt.lr, &lr_bits, 8);
    for (std::uint64_t i = 0; i < n_layers; ++i) {
      ck.opt.m_w.push_back(get_doubles(buf.data(), buf.size(), off));
      ck.opt.v_w.push_back(get_doubles(buf.data(), buf.size(), off));
      ck.opt.m_b.push_back(get_doubles(buf.data(), buf.size(), off));
      ck.opt.v_b.push_back(get_doubles(buf.data(), buf.size(), off));
    }
  }
  return ck;
}

}  // namespace csnet
