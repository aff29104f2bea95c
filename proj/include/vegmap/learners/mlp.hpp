#pragma once

// One-hidden-layer ReLU network with softmax output, trained with Adam on
// mini-batches of cross-entropy plus an L2 weight penalty.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/learners/dataset.hpp"
#include "vegmap/rng.hpp"

namespace vegmap {

struct MlpOptions {
  int hidden = 100;
  double l2 = 1e-4;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 200;
};

/// Flat parameter vector: W1 (H x D), b1 (H), W2 (K x H), b2 (K).
struct MlpShape {
  std::size_t in = 0, hidden = 0, out = 0;

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return hidden * in; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + out * hidden; }
  std::size_t total() const { return b2() + out; }
};

/// Forward pass for a single input; fills hidden activations if requested.
inline std::vector<double> mlp_forward(const MlpShape& s, std::span<const double> params,
                                       std::span<const double> x,
                                       std::vector<double>* hidden_out = nullptr) {
  std::vector<double> h(s.hidden);
  for (std::size_t j = 0; j < s.hidden; ++j) {
    const double a = dot(params.subspan(s.w1() + j * s.in, s.in), x) + params[s.b1() + j];
    h[j] = a > 0.0 ? a : 0.0;
  }
  std::vector<double> z(s.out);
  for (std::size_t k = 0; k < s.out; ++k) {
    z[k] = dot(params.subspan(s.w2() + k * s.hidden, s.hidden), h) + params[s.b2() + k];
  }
  softmax_inplace(z);
  if (hidden_out) *hidden_out = std::move(h);
  return z;
}

/// Mean cross-entropy over `rows` plus (l2 / 2) * |W|^2 / n_total, where
/// n_total scales the penalty to the full training set. Gradient into `grad`.
inline double mlp_loss_and_gradient(const MlpShape& s, std::span<const double> params,
                                    const Matrix& x, std::span<const int> y,
                                    std::span<const std::size_t> rows, double l2,
                                    std::size_t n_total, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  std::vector<double> h, delta_out(s.out), delta_hidden(s.hidden);
  for (auto r : rows) {
    const auto xr = x.row(r);
    const auto p = mlp_forward(s, params, xr, &h);
    const auto target = static_cast<std::size_t>(y[r]);
    loss -= std::log(std::max(p[target], 1e-300));
    for (std::size_t k = 0; k < s.out; ++k) delta_out[k] = (p[k] - (k == target ? 1.0 : 0.0)) * inv_b;
    std::fill(delta_hidden.begin(), delta_hidden.end(), 0.0);
    for (std::size_t k = 0; k < s.out; ++k) {
      const double dk = delta_out[k];
      double* gw2 = grad.data() + s.w2() + k * s.hidden;
      const double* w2 = params.data() + s.w2() + k * s.hidden;
      for (std::size_t j = 0; j < s.hidden; ++j) {
        gw2[j] += dk * h[j];
        delta_hidden[j] += dk * w2[j];
      }
      grad[s.b2() + k] += dk;
    }
    for (std::size_t j = 0; j < s.hidden; ++j) {
      if (h[j] <= 0.0) continue;
      const double dj = delta_hidden[j];
      double* gw1 = grad.data() + s.w1() + j * s.in;
      for (std::size_t i = 0; i < s.in; ++i) gw1[i] += dj * xr[i];
      grad[s.b1() + j] += dj;
    }
  }
  loss *= inv_b;
  const double reg = l2 / static_cast<double>(n_total);
  auto penalize = [&](std::size_t begin, std::size_t count) {
    for (std::size_t i = begin; i < begin + count; ++i) {
      loss += 0.5 * reg * params[i] * params[i];
      grad[i] += reg * params[i];
    }
  };
  penalize(s.w1(), s.hidden * s.in);
  penalize(s.w2(), s.out * s.hidden);
  return loss;
}

/// He-style initialization: weights ~ N(0, 2 / fan_in), zero biases.
inline std::vector<double> mlp_init(const MlpShape& s, Rng& rng) {
  std::vector<double> p(s.total(), 0.0);
  const double sd1 = std::sqrt(2.0 / static_cast<double>(s.in));
  const double sd2 = std::sqrt(2.0 / static_cast<double>(s.hidden));
  for (std::size_t i = 0; i < s.hidden * s.in; ++i) p[s.w1() + i] = rng.normal() * sd1;
  for (std::size_t i = 0; i < s.out * s.hidden; ++i) p[s.w2() + i] = rng.normal() * sd2;
  return p;
}

struct MlpModel {
  MlpShape shape;
  std::vector<double> params;
  double final_loss = 0.0;

  static MlpModel fit(const MlpOptions& opt, const Matrix& x, std::span<const int> y,
                      std::size_t classes, std::uint64_t seed) {
    require(opt.hidden >= 1, ErrorCode::invalid_argument, "hidden layer needs >= 1 unit");
    require(opt.epochs >= 1 && opt.batch_size >= 1, ErrorCode::invalid_argument,
            "epochs and batch size must be >= 1");
    require(opt.learning_rate > 0.0 && opt.l2 >= 0.0, ErrorCode::invalid_argument,
            "learning rate must be > 0 and l2 >= 0");
    MlpModel m;
    m.shape = {x.cols, static_cast<std::size_t>(opt.hidden), classes};
    Rng rng(seed);
    m.params = mlp_init(m.shape, rng);

    const std::size_t n = x.rows;
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size), n);
    std::vector<double> grad(m.params.size()), m1(m.params.size(), 0.0), m2(m.params.size(), 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t end = std::min(n, start + batch);
        const std::span<const std::size_t> rows(order.data() + start, end - start);
        const double loss =
            mlp_loss_and_gradient(m.shape, m.params, x, y, rows, opt.l2, n, grad);
        epoch_loss += loss * static_cast<double>(rows.size());
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < m.params.size(); ++i) {
          m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
          m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
          m.params[i] -= opt.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
        }
      }
      m.final_loss = epoch_loss / static_cast<double>(n);
    }
    return m;
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    return mlp_forward(shape, params, x);
  }

  nlohmann::ordered_json to_json() const {
    return {{"inputs", shape.in}, {"hidden", shape.hidden}, {"outputs", shape.out},
            {"params", params}, {"final_loss", final_loss}};
  }

  static MlpModel from_json(const nlohmann::json& j, std::size_t classes) {
    MlpModel m;
    m.shape = {j.at("inputs").get<std::size_t>(), j.at("hidden").get<std::size_t>(),
               j.at("outputs").get<std::size_t>()};
    m.params = j.at("params").get<std::vector<double>>();
    m.final_loss = j.value("final_loss", 0.0);
    require(m.shape.out == classes && m.params.size() == m.shape.total(), ErrorCode::parse_error,
            "network parameter size mismatch");
    return m;
  }
};

}  // namespace vegmap
