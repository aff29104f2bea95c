#pragma once

// Learner configuration, the fitted-model value type, and the versioned JSON
// envelope {format_version, kind, class_list, layout_id, seed, parameters}.

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vegmap/learners/dataset.hpp"
#include "vegmap/learners/knn.hpp"
#include "vegmap/learners/logistic.hpp"
#include "vegmap/learners/mlp.hpp"
#include "vegmap/learners/svm.hpp"
#include "vegmap/learners/tree.hpp"

namespace vegmap {

inline constexpr int kModelFormatVersion = 1;

enum class LearnerKind { knn, logistic_regression, tree, random_forest, neural_network, svm };

inline constexpr LearnerKind kAllLearners[] = {
    LearnerKind::knn,           LearnerKind::logistic_regression, LearnerKind::neural_network,
    LearnerKind::random_forest, LearnerKind::svm,                 LearnerKind::tree};

/// Short identifier used on the command line and in model files.
inline std::string_view short_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::knn: return "knn";
    case LearnerKind::logistic_regression: return "lr";
    case LearnerKind::tree: return "tree";
    case LearnerKind::random_forest: return "rf";
    case LearnerKind::neural_network: return "nn";
    case LearnerKind::svm: return "svm";
  }
  return "";
}

/// Human-readable name as it appears in cross-validation tables.
inline std::string_view display_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::knn: return "kNN";
    case LearnerKind::logistic_regression: return "Logistic Regression";
    case LearnerKind::tree: return "Tree";
    case LearnerKind::random_forest: return "Random Forest";
    case LearnerKind::neural_network: return "Neural Network";
    case LearnerKind::svm: return "SVM";
  }
  return "";
}

inline LearnerKind learner_from_string(std::string_view s) {
  for (auto k : kAllLearners) {
    if (s == short_name(k) || s == display_name(k)) return k;
  }
  throw Error(ErrorCode::invalid_argument, "unknown learner", std::string(s));
}

inline std::vector<LearnerKind> parse_learner_list(std::string_view csv) {
  std::vector<LearnerKind> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string_view::npos) end = csv.size();
    if (end > start) out.push_back(learner_from_string(csv.substr(start, end - start)));
    start = end + 1;
  }
  require(!out.empty(), ErrorCode::invalid_argument, "empty learner list");
  return out;
}

using LearnerOptions =
    std::variant<KnnOptions, LogisticOptions, TreeOptions, ForestOptions, MlpOptions, SvmOptions>;

struct LearnerConfig {
  LearnerKind kind = LearnerKind::knn;
  LearnerOptions options = KnnOptions{};
  std::uint64_t seed = 0;

  static LearnerConfig defaults(LearnerKind kind, std::uint64_t seed = 0) {
    LearnerConfig cfg{kind, KnnOptions{}, seed};
    switch (kind) {
      case LearnerKind::knn: cfg.options = KnnOptions{}; break;
      case LearnerKind::logistic_regression: cfg.options = LogisticOptions{}; break;
      case LearnerKind::tree: cfg.options = TreeOptions{}; break;
      case LearnerKind::random_forest: cfg.options = ForestOptions{}; break;
      case LearnerKind::neural_network: cfg.options = MlpOptions{}; break;
      case LearnerKind::svm: cfg.options = SvmOptions{}; break;
    }
    return cfg;
  }
};

using LearnedParameters =
    std::variant<KnnModel, LogisticModel, TreeModel, ForestModel, MlpModel, SvmModel>;

/// A fitted classifier. Immutable once built; predict_proba is safe to call
/// concurrently.
struct Model {
  LearnerKind kind = LearnerKind::knn;
  std::vector<std::string> class_list;
  std::string layout_id;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::size_t training_rows = 0;
  Standardizer standardizer;
  LearnedParameters parameters;

  std::vector<double> predict_proba(std::span<const double> x) const {
    require(x.size() == dim, ErrorCode::layout_mismatch, "feature dimension differs from model",
            fmt::format("{} vs {}", x.size(), dim));
    const auto z = standardizer.apply(x);
    auto p = std::visit([&](const auto& m) { return m.predict_proba(z); }, parameters);
    double sum = 0.0;
    for (double v : p) sum += v;
    for (auto& v : p) v /= sum;
    return p;
  }

  std::vector<double> predict_proba(const FeatureVector& v) const {
    require(v.layout_id == layout_id, ErrorCode::layout_mismatch,
            "feature layout differs from model", v.layout_id + " vs " + layout_id);
    return predict_proba(std::span<const double>(v.values));
  }

  std::size_t predict(std::span<const double> x) const { return argmax(predict_proba(x)); }

  /// Training diagnostics worth surfacing (non-convergence).
  std::string diagnostics() const {
    if (const auto* lr = std::get_if<LogisticModel>(&parameters); lr && !lr->converged) {
      return fmt::format("logistic regression stopped after {} iterations with gradient norm {:.3g}",
                         lr->iterations, lr->gradient_norm);
    }
    if (const auto* svm = std::get_if<SvmModel>(&parameters); svm && !svm->converged) {
      return "SVM dual solver reached its iteration limit before meeting tolerance";
    }
    return {};
  }
};

inline bool uses_standardization(LearnerKind kind) {
  return kind != LearnerKind::tree && kind != LearnerKind::random_forest;
}

inline Model fit(const LearnerConfig& cfg, const LabeledDataset& data) {
  data.validate();
  require(data.matrix.dim() >= 1, ErrorCode::degenerate_data, "dataset has no features");
  require(data.classes() >= 2, ErrorCode::degenerate_data, "training needs at least two classes");
  std::size_t present = 0;
  for (auto c : data.class_counts()) present += c > 0 ? 1 : 0;
  require(present >= 2, ErrorCode::degenerate_data,
          "training rows cover fewer than two classes");

  Model m;
  m.kind = cfg.kind;
  m.class_list = data.class_list;
  m.layout_id = data.matrix.layout_id();
  m.dim = data.matrix.dim();
  m.seed = cfg.seed;
  m.training_rows = data.rows();
  m.standardizer = uses_standardization(cfg.kind) ? Standardizer::fit(data.matrix)
                                                  : Standardizer::identity(m.dim);
  Matrix x = m.standardizer.transform(data.matrix);
  const auto& y = data.labels;
  const std::size_t k = data.classes();

  auto options_as = [&](auto tag) {
    using T = decltype(tag);
    const auto* o = std::get_if<T>(&cfg.options);
    require(o != nullptr, ErrorCode::invalid_argument, "learner options do not match learner kind",
            std::string(short_name(cfg.kind)));
    return *o;
  };

  switch (cfg.kind) {
    case LearnerKind::knn:
      m.parameters = KnnModel::fit(options_as(KnnOptions{}), std::move(x), y, k);
      break;
    case LearnerKind::logistic_regression:
      m.parameters = LogisticModel::fit(options_as(LogisticOptions{}), x, y, k);
      break;
    case LearnerKind::tree:
      m.parameters = TreeModel::fit(options_as(TreeOptions{}), x, y, k);
      break;
    case LearnerKind::random_forest:
      m.parameters = ForestModel::fit(options_as(ForestOptions{}), x, y, k, cfg.seed);
      break;
    case LearnerKind::neural_network:
      m.parameters = MlpModel::fit(options_as(MlpOptions{}), x, y, k, cfg.seed);
      break;
    case LearnerKind::svm:
      m.parameters = SvmModel::fit(options_as(SvmOptions{}), x, y, k, cfg.seed);
      break;
  }
  return m;
}

inline nlohmann::ordered_json model_to_json(const Model& m) {
  nlohmann::ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = std::string(short_name(m.kind));
  j["class_list"] = m.class_list;
  j["layout_id"] = m.layout_id;
  j["seed"] = m.seed;
  j["training_rows"] = m.training_rows;
  j["standardizer"] = {{"mean", m.standardizer.mean}, {"scale", m.standardizer.scale}};
  j["parameters"] = std::visit([](const auto& p) { return p.to_json(); }, m.parameters);
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    require(version == kModelFormatVersion, ErrorCode::parse_error, "unsupported model format",
            fmt::format("version {}", version));
    Model m;
    m.kind = learner_from_string(j.at("kind").get<std::string>());
    m.class_list = j.at("class_list").get<std::vector<std::string>>();
    m.layout_id = j.at("layout_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.training_rows = j.value("training_rows", std::size_t{0});
    m.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    m.standardizer.scale = j.at("standardizer").at("scale").get<std::vector<double>>();
    m.dim = m.standardizer.mean.size();
    const auto& p = j.at("parameters");
    const auto k = m.class_list.size();
    switch (m.kind) {
      case LearnerKind::knn: m.parameters = KnnModel::from_json(p, k); break;
      case LearnerKind::logistic_regression: m.parameters = LogisticModel::from_json(p, k); break;
      case LearnerKind::tree: m.parameters = TreeModel::from_json(p, k); break;
      case LearnerKind::random_forest: m.parameters = ForestModel::from_json(p, k); break;
      case LearnerKind::neural_network: m.parameters = MlpModel::from_json(p, k); break;
      case LearnerKind::svm: m.parameters = SvmModel::from_json(p, k); break;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "malformed model file", e.what());
  }
}

}  // namespace vegmap
