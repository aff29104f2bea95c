#pragma once

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/learners/dataset.hpp"
#include "vegmap/learners/optim.hpp"

namespace vegmap {

struct LogisticOptions {
  double l2 = 1.0;                 ///< penalty on weights (not intercepts)
  double gradient_tolerance = 1e-6;
  int max_iterations = 1000;
};

/// Multinomial softmax regression. Parameters are packed as K rows of
/// (D weights, intercept).
struct LogisticModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<double> theta;

  // Diagnostics from fitting.
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::vector<double> loss_history;

  /// Sum of cross-entropies plus 0.5 * l2 * |W|^2.
  static double objective(std::span<const double> theta, std::span<double> grad, const Matrix& x,
                          std::span<const int> y, std::size_t classes, double l2) {
    const std::size_t d = x.cols, stride = d + 1;
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    std::vector<double> z(classes);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto row = x.row(r);
      for (std::size_t c = 0; c < classes; ++c) {
        z[c] = dot(theta.subspan(c * stride, d), row) + theta[c * stride + d];
      }
      double mx = z[0];
      for (double v : z) mx = std::max(mx, v);
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - mx);
      const double lse = mx + std::log(sum);
      loss += lse - z[static_cast<std::size_t>(y[r])];
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(z[c] - lse);
        const double err = p - (static_cast<int>(c) == y[r] ? 1.0 : 0.0);
        auto gw = grad.subspan(c * stride, d);
        for (std::size_t j = 0; j < d; ++j) gw[j] += err * row[j];
        grad[c * stride + d] += err;
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t j = 0; j < d; ++j) {
        const double w = theta[c * stride + j];
        loss += 0.5 * l2 * w * w;
        grad[c * stride + j] += l2 * w;
      }
    }
    return loss;
  }

  static LogisticModel fit(const LogisticOptions& opt, const Matrix& x, std::span<const int> y,
                           std::size_t classes) {
    require(opt.l2 >= 0.0, ErrorCode::invalid_argument, "L2 strength must be >= 0");
    require(opt.max_iterations >= 1, ErrorCode::invalid_argument, "max_iterations must be >= 1");
    LogisticModel m;
    m.classes = classes;
    m.dim = x.cols;
    LbfgsOptions lopt;
    lopt.max_iterations = opt.max_iterations;
    lopt.gradient_tolerance = opt.gradient_tolerance;
    auto f = [&](std::span<const double> th, std::span<double> g) {
      return objective(th, g, x, y, classes, opt.l2);
    };
    auto res = minimize_lbfgs(f, std::vector<double>(classes * (x.cols + 1), 0.0), lopt);
    m.theta = std::move(res.x);
    m.iterations = res.iterations;
    m.converged = res.converged;
    m.gradient_norm = res.gradient_norm;
    m.loss_history = std::move(res.loss_history);
    return m;
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    const std::size_t stride = dim + 1;
    std::vector<double> z(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] = dot(std::span<const double>(theta).subspan(c * stride, dim), x) +
             theta[c * stride + dim];
    }
    softmax_inplace(z);
    return z;
  }

  nlohmann::ordered_json to_json() const {
    return {{"dim", dim}, {"theta", theta}, {"iterations", iterations},
            {"converged", converged}, {"gradient_norm", gradient_norm}};
  }

  static LogisticModel from_json(const nlohmann::json& j, std::size_t classes) {
    LogisticModel m;
    m.classes = classes;
    m.dim = j.at("dim").get<std::size_t>();
    m.theta = j.at("theta").get<std::vector<double>>();
    m.iterations = j.value("iterations", 0);
    m.converged = j.value("converged", false);
    m.gradient_norm = j.value("gradient_norm", 0.0);
    require(m.theta.size() == classes * (m.dim + 1), ErrorCode::parse_error,
            "logistic parameter size mismatch");
    return m;
  }
};

}  // namespace vegmap
