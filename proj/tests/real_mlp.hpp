#pragma once

// Plain real-valued MLP with leaky-ReLU hidden layers and Adam, written from
// scratch as a reference for the diagonal-slice equivalences. Deliberately
// shares no code with the library's forward or backward paths.

#include <cmath>
#include <vector>

namespace oracles {

struct RealMlp {
  // weights[i] is out x in, row-major; biases per layer
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<int> widths;
  double leaky_slope = 0.01;

  static double act(double x, double slope) { return x >= 0 ? x : slope * x; }
  static double dact(double x, double slope) { return x >= 0 ? 1.0 : slope; }

  std::vector<double> forward(const std::vector<double>& x,
                              std::vector<std::vector<double>>* pre = nullptr) const {
    std::vector<double> h = x;
    if (pre) pre->clear();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      int n_out = widths[i + 1], n_in = widths[i];
      std::vector<double> y(n_out, 0.0);
      for (int k = 0; k < n_out; ++k) {
        double acc = biases[i].empty() ? 0.0 : biases[i][k];
        for (int l = 0; l < n_in; ++l) acc += weights[i][k * n_in + l] * h[l];
        y[k] = acc;
      }
      if (pre) pre->push_back(y);
      if (i + 1 < weights.size())
        for (double& v : y) v = act(v, leaky_slope);
      h = std::move(y);
    }
    return h;
  }
};

struct RealAdam {
  double lr = 1e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<std::vector<double>> mw, vw, mb, vb;

  void init(const RealMlp& net) {
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
      mw.emplace_back(net.weights[i].size(), 0.0);
      vw.emplace_back(net.weights[i].size(), 0.0);
      mb.emplace_back(net.biases[i].size(), 0.0);
      vb.emplace_back(net.biases[i].size(), 0.0);
    }
  }

  static void upd(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                  std::vector<double>& v, double lr, double b1, double b2, double eps, double bc1,
                  double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }

  void step(RealMlp& net, const std::vector<std::vector<double>>& gw,
            const std::vector<std::vector<double>>& gb) {
    ++t;
    double bc1 = 1 - std::pow(b1, static_cast<double>(t));
    double bc2 = 1 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
      upd(net.weights[i], gw[i], mw[i], vw[i], lr, b1, b2, eps, bc1, bc2);
      upd(net.biases[i], gb[i], mb[i], vb[i], lr, b1, b2, eps, bc1, bc2);
    }
  }
};

// Backprop of mean-squared-error (mean over output coords) for one sample,
// scaled by `weight` (used to mimic mini-batch averaging). Accumulates into
// gw/gb.
inline double mlp_mse_backprop(const RealMlp& net, const std::vector<double>& x,
                               const std::vector<double>& target, double weight,
                               std::vector<std::vector<double>>& gw,
                               std::vector<std::vector<double>>& gb) {
  std::vector<std::vector<double>> pre;
  std::vector<double> y = net.forward(x, &pre);
  int n_out = static_cast<int>(y.size());
  double loss = 0.0;
  std::vector<double> d(n_out);
  for (int k = 0; k < n_out; ++k) {
    double e = y[k] - target[k];
    loss += e * e / n_out;
    d[k] = 2.0 * e / n_out * weight;
  }
  // hidden activations
  std::vector<std::vector<double>> post(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    post[i] = pre[i];
    if (i + 1 < pre.size())
      for (double& v : post[i]) v = RealMlp::act(v, net.leaky_slope);
  }
  for (int i = static_cast<int>(net.weights.size()) - 1; i >= 0; --i) {
    int n_o = net.widths[i + 1], n_i = net.widths[i];
    if (static_cast<std::size_t>(i) + 1 < net.weights.size())
      ;  // d already includes activation grad from the step below
    const std::vector<double>& hin = i == 0 ? x : post[i - 1];
    for (int k = 0; k < n_o; ++k) {
      if (!gb[i].empty()) gb[i][k] += d[k];
      for (int l = 0; l < n_i; ++l) gw[i][k * n_i + l] += d[k] * hin[l];
    }
    if (i > 0) {
      std::vector<double> dprev(n_i, 0.0);
      for (int l = 0; l < n_i; ++l) {
        for (int k = 0; k < n_o; ++k) dprev[l] += net.weights[i][k * n_i + l] * d[k];
        dprev[l] *= RealMlp::dact(pre[i - 1][l], net.leaky_slope);
      }
      d = std::move(dprev);
    }
  }
  return loss * weight;
}

}  // namespace oracles
