#pragma once

// One-vs-rest RBF support vector machine. Each binary problem is solved with
// an SMO dual solver using second-order working-set selection; per-class
// decision values are mapped to probabilities with Platt sigmoids fitted on an
// internal 80/20 split and then normalized across classes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/learners/dataset.hpp"
#include "vegmap/rng.hpp"

namespace vegmap {

struct SvmOptions {
  double c = 1.0;
  double gamma = 0.0;  ///< 0 means 1 / D
  double tolerance = 1e-3;
  long max_iterations = 1000000;
  double calibration_fraction = 0.2;
};

struct SmoResult {
  std::vector<double> alpha;
  double rho = 0.0;  ///< decision = sum_i alpha_i y_i K(x_i, x) - rho
  long iterations = 0;
  bool converged = false;
};

/// Solves min 0.5 a'Qa - e'a s.t. 0 <= a <= C, y'a = 0 over the rows in
/// `subset`, with Q_ij = y_i y_j K_ij taken from the precomputed kernel.
inline SmoResult solve_smo(const Matrix& kernel, std::span<const std::size_t> subset,
                           std::span<const double> y, double c, double eps, long max_iter) {
  const std::size_t n = subset.size();
  SmoResult res;
  res.alpha.assign(n, 0.0);
  std::vector<double> g(n, -1.0);
  auto& a = res.alpha;
  auto K = [&](std::size_t i, std::size_t j) { return kernel(subset[i], subset[j]); };
  auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K(i, j); };
  auto upper = [&](std::size_t t) { return a[t] >= c; };
  auto lower = [&](std::size_t t) { return a[t] <= 0.0; };
  constexpr double tau = 1e-12;
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (; res.iterations < max_iter; ++res.iterations) {
    double gmax = -inf, gmax2 = -inf;
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -g[t] > gmax) { gmax = -g[t]; i = t; }
      } else {
        if (!lower(t) && g[t] > gmax) { gmax = g[t]; i = t; }
      }
    }
    if (i == n) { res.converged = true; break; }
    std::size_t j = n;
    double obj_min = inf;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double grad_diff = gmax + g[t];
        gmax2 = std::max(gmax2, g[t]);
        if (grad_diff > 0) {
          double quad = K(i, i) + K(t, t) - 2.0 * y[i] * Q(i, t);
          if (quad <= 0) quad = tau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj < obj_min) { obj_min = obj; j = t; }
        }
      } else {
        if (upper(t)) continue;
        const double grad_diff = gmax - g[t];
        gmax2 = std::max(gmax2, -g[t]);
        if (grad_diff > 0) {
          double quad = K(i, i) + K(t, t) + 2.0 * y[i] * Q(i, t);
          if (quad <= 0) quad = tau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj < obj_min) { obj_min = obj; j = t; }
        }
      }
    }
    if (gmax + gmax2 < eps || j == n) { res.converged = true; break; }

    const double old_i = a[i], old_j = a[j];
    if (y[i] != y[j]) {
      double quad = K(i, i) + K(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) { a[j] = 0; a[i] = diff; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
      }
      if (diff > 0) {
        if (a[i] > c) { a[i] = c; a[j] = c - diff; }
      } else {
        if (a[j] > c) { a[j] = c; a[i] = c + diff; }
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c) {
        if (a[i] > c) { a[i] = c; a[j] = sum - c; }
      } else {
        if (a[j] < 0) { a[j] = 0; a[i] = sum; }
      }
      if (sum > c) {
        if (a[j] > c) { a[j] = c; a[i] = sum - c; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = sum; }
      }
    }
    const double di = a[i] - old_i, dj = a[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) g[t] += Q(i, t) * di + Q(j, t) * dj;
  }

  // rho: average of y*g over free variables, else midpoint of the feasible bounds.
  double ub = inf, lb = -inf, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  res.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  return res;
}

struct PlattSigmoid {
  double a = 0.0;
  double b = 0.0;

  double probability(double f) const {
    const double fab = f * a + b;
    return fab >= 0 ? std::exp(-fab) / (1.0 + std::exp(-fab)) : 1.0 / (1.0 + std::exp(fab));
  }
};

/// Platt scaling with regularized targets, Newton's method with backtracking.
inline PlattSigmoid fit_platt(std::span<const double> dec, std::span<const double> labels) {
  const std::size_t n = dec.size();
  double prior1 = 0, prior0 = 0;
  for (double l : labels) (l > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] > 0 ? hi : lo;

  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fab = dec[i] * a + b;
      f += fab >= 0 ? t[i] * fab + std::log1p(std::exp(-fab))
                    : (t[i] - 1.0) * fab + std::log1p(std::exp(fab));
    }
    return f;
  };
  double fval = objective(A, B);
  constexpr double sigma = 1e-12, min_step = 1e-10, eps = 1e-5;
  for (int it = 0; it < 100; ++it) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fab = dec[i] * A + B;
      double p, q;
      if (fab >= 0) {
        p = std::exp(-fab) / (1.0 + std::exp(-fab));
        q = 1.0 / (1.0 + std::exp(-fab));
      } else {
        p = 1.0 / (1.0 + std::exp(fab));
        q = std::exp(fab) / (1.0 + std::exp(fab));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= min_step) {
      const double na = A + step * dA, nb = B + step * dB;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        A = na;
        B = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < min_step) break;
  }
  return {A, B};
}

inline double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

struct SvmModel {
  std::size_t classes = 0;
  double gamma = 0.0;
  Matrix support;                    ///< union of support vectors over all classes
  std::vector<std::vector<double>> coef;  ///< per class: alpha_i * y_i over `support`
  std::vector<double> rho;
  std::vector<PlattSigmoid> platt;
  bool converged = true;

  std::vector<double> decision_values(std::span<const double> x) const {
    std::vector<double> k(support.rows);
    for (std::size_t s = 0; s < support.rows; ++s) k[s] = rbf(support.row(s), x, gamma);
    std::vector<double> out(classes);
    for (std::size_t c = 0; c < classes; ++c) out[c] = dot(coef[c], k) - rho[c];
    return out;
  }

  std::vector<double> predict_proba(std::span<const double> x) const {
    const auto dec = decision_values(x);
    std::vector<double> p(classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = platt[c].probability(dec[c]);
      sum += p[c];
    }
    if (sum <= 0.0) {
      std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(classes));
    } else {
      for (auto& v : p) v /= sum;
    }
    return p;
  }

  static SvmModel fit(const SvmOptions& opt, const Matrix& x, std::span<const int> y,
                      std::size_t classes, std::uint64_t seed) {
    require(opt.c > 0.0, ErrorCode::invalid_argument, "SVM requires C > 0");
    require(opt.gamma >= 0.0, ErrorCode::invalid_argument, "SVM gamma must be >= 0");
    require(opt.calibration_fraction > 0.0 && opt.calibration_fraction < 1.0,
            ErrorCode::invalid_argument, "calibration fraction must lie in (0, 1)");
    const std::size_t n = x.rows;
    SvmModel m;
    m.classes = classes;
    m.gamma = opt.gamma > 0.0 ? opt.gamma : 1.0 / static_cast<double>(x.cols);

    Matrix kernel(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      kernel(i, i) = 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        kernel(i, j) = kernel(j, i) = rbf(x.row(i), x.row(j), m.gamma);
      }
    }

    // Stratified calibration split.
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);
    std::vector<std::size_t> fit_rows, cal_rows;
    for (auto& rows : by_class) {
      rng.shuffle(std::span<std::size_t>(rows));
      const auto n_cal = static_cast<std::size_t>(
          std::floor(opt.calibration_fraction * static_cast<double>(rows.size()) + 0.5));
      for (std::size_t k = 0; k < rows.size(); ++k) (k < n_cal ? cal_rows : fit_rows).push_back(rows[k]);
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(cal_rows.begin(), cal_rows.end());
    const bool can_calibrate = cal_rows.size() >= 2 && fit_rows.size() >= 2;

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::vector<double>> full_coef(classes, std::vector<double>(n, 0.0));
    m.rho.resize(classes);
    m.platt.resize(classes);

    auto signs = [&](std::span<const std::size_t> rows, std::size_t cls) {
      std::vector<double> s(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        s[k] = static_cast<std::size_t>(y[rows[k]]) == cls ? 1.0 : -1.0;
      }
      return s;
    };
    auto decision = [&](const SmoResult& r, std::span<const std::size_t> train,
                        std::span<const double> ys, std::size_t row) {
      double f = -r.rho;
      for (std::size_t k = 0; k < train.size(); ++k) {
        if (r.alpha[k] > 0.0) f += r.alpha[k] * ys[k] * kernel(train[k], row);
      }
      return f;
    };

    for (std::size_t cls = 0; cls < classes; ++cls) {
      const auto y_all = signs(all, cls);
      const auto full = solve_smo(kernel, all, y_all, opt.c, opt.tolerance, opt.max_iterations);
      m.converged = m.converged && full.converged;
      for (std::size_t i = 0; i < n; ++i) full_coef[cls][i] = full.alpha[i] * y_all[i];
      m.rho[cls] = full.rho;

      std::vector<double> dec, lab;
      const auto y_fit = signs(fit_rows, cls);
      const bool split_ok = can_calibrate && std::any_of(y_fit.begin(), y_fit.end(),
                                                         [](double v) { return v > 0; });
      if (split_ok) {
        const auto part =
            solve_smo(kernel, fit_rows, y_fit, opt.c, opt.tolerance, opt.max_iterations);
        m.converged = m.converged && part.converged;
        for (auto r : cal_rows) {
          dec.push_back(decision(part, fit_rows, y_fit, r));
          lab.push_back(static_cast<std::size_t>(y[r]) == cls ? 1.0 : -1.0);
        }
      } else {
        // Too few rows to hold out: calibrate on training decision values.
        for (std::size_t i = 0; i < n; ++i) {
          dec.push_back(decision(full, all, y_all, i));
          lab.push_back(y_all[i]);
        }
      }
      m.platt[cls] = fit_platt(dec, lab);
    }

    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < n; ++i) {
      bool used = false;
      for (std::size_t cls = 0; cls < classes; ++cls) used = used || full_coef[cls][i] != 0.0;
      if (used) sv.push_back(i);
    }
    m.support = Matrix(sv.size(), x.cols);
    m.coef.assign(classes, std::vector<double>(sv.size(), 0.0));
    for (std::size_t s = 0; s < sv.size(); ++s) {
      std::copy(x.row(sv[s]).begin(), x.row(sv[s]).end(), m.support.row(s).begin());
      for (std::size_t cls = 0; cls < classes; ++cls) m.coef[cls][s] = full_coef[cls][sv[s]];
    }
    return m;
  }

  nlohmann::ordered_json to_json() const {
    auto pl = nlohmann::ordered_json::array();
    for (const auto& p : platt) pl.push_back({p.a, p.b});
    return {{"gamma", gamma},     {"dim", support.cols}, {"support", support.data},
            {"coef", coef},       {"rho", rho},          {"platt", pl},
            {"converged", converged}};
  }

  static SvmModel from_json(const nlohmann::json& j, std::size_t classes) {
    SvmModel m;
    m.classes = classes;
    m.gamma = j.at("gamma").get<double>();
    m.support.cols = j.at("dim").get<std::size_t>();
    m.support.data = j.at("support").get<std::vector<double>>();
    m.support.rows = m.support.cols ? m.support.data.size() / m.support.cols : 0;
    m.coef = j.at("coef").get<std::vector<std::vector<double>>>();
    m.rho = j.at("rho").get<std::vector<double>>();
    for (const auto& p : j.at("platt")) m.platt.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    m.converged = j.value("converged", true);
    require(m.coef.size() == classes && m.rho.size() == classes && m.platt.size() == classes,
            ErrorCode::parse_error, "SVM parameter size mismatch");
    return m;
  }
};

}  // namespace vegmap
