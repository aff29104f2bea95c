#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "vegmap/learners/matrix.hpp"

namespace vegmap {

struct LbfgsOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-6;  ///< on the gradient infinity norm
  int memory = 10;
};

struct LbfgsResult {
  std::vector<double> x;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::vector<double> loss_history;  ///< objective after each accepted step, starting value first
};

/// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Limited-memory BFGS with Armijo backtracking; every accepted step strictly
/// decreases the objective.
inline LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double> x0,
                                  const LbfgsOptions& opt = {}) {
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  double fx = f(res.x, g);
  res.loss_history.push_back(fx);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.gradient_norm = inf_norm(g);
    if (res.gradient_norm < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * y_hist[k][i];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : dir) v *= gamma;
    } else {
      const double scale = 1.0 / std::max(1.0, std::sqrt(dot(g, g)));
      for (auto& v : dir) v *= scale;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += s_hist[k][i] * (alpha[k] - beta);
    }
    double slope = dot(g, dir);
    if (slope >= 0.0) {
      // Not a descent direction; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = dot(g, dir);
    }

    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * dir[i];
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope && f_new < fx) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search stalled; reported through `converged`

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    res.x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.loss_history.push_back(fx);
    res.iterations = it + 1;
  }
  res.gradient_norm = inf_norm(g);
  if (res.gradient_norm < opt.gradient_tolerance) res.converged = true;
  return res;
}

}  // namespace vegmap
