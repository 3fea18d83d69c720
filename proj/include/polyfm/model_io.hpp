#pragma once

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "polyfm/common.hpp"
#include "polyfm/direct.hpp"
#include "polyfm/lifted.hpp"
#include "polyfm/sparse_data.hpp"

namespace polyfm {

struct TrainingInfo {
  double beta = 0.0;
  std::string loss = "squared";
  std::uint64_t seed = 0;
  Index epochs_run = 0;
};

// A trained model plus what is needed to apply it to raw data: how many
// all-ones features were prepended at training time (re-applied before every
// prediction) and the training metadata.
struct StoredModel {
  std::variant<DirectModel, LiftedModel> model;
  Index augmented_count = 0;
  TrainingInfo training;

  bool is_direct() const {
    return std::holds_alternative<DirectModel>(model);
  }

  Index n_features() const {
    return is_direct() ? std::get<DirectModel>(model).n_features()
                       : std::get<LiftedModel>(model).n_features();
  }

  // Feature count of the raw data this model applies to.
  Index raw_features() const { return n_features() - augmented_count; }

  double predict(SampleView raw) const {
    if (raw.size() > 0 && raw.indices[raw.size() - 1] >= raw_features())
      throw DimensionError(
          "sample has feature index " +
          std::to_string(raw.indices[raw.size() - 1]) +
          " but the model accepts raw features below " +
          std::to_string(raw_features()));
    Sample x;
    SampleView view = raw;
    if (augmented_count > 0) {
      x.indices.reserve(augmented_count + raw.size());
      x.values.reserve(augmented_count + raw.size());
      for (Index c = 0; c < augmented_count; ++c) {
        x.indices.push_back(c);
        x.values.push_back(1.0);
      }
      for (Index t = 0; t < raw.size(); ++t) {
        x.indices.push_back(raw.indices[t] + augmented_count);
        x.values.push_back(raw.values[t]);
      }
      view = x.view();
    }
    return is_direct() ? predict_direct(std::get<DirectModel>(model), view)
                       : predict_lifted(std::get<LiftedModel>(model), view);
  }
};

inline Eigen::VectorXd predict_all(const StoredModel& stored,
                                   const SparseDataset& ds) {
  if (ds.n_features() > stored.raw_features())
    throw DimensionError("dataset has " + std::to_string(ds.n_features()) +
                         " features but the model accepts at most " +
                         std::to_string(stored.raw_features()));
  Eigen::VectorXd out(ds.n_samples());
  for (Index i = 0; i < ds.n_samples(); ++i)
    out[i] = stored.predict(ds.row(i));
  return out;
}

namespace detail {

inline std::string kernel_family_name(KernelFamily f) {
  return f == KernelFamily::anova ? "anova" : "poly";
}

inline KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "anova") return KernelFamily::anova;
  if (name == "poly") return KernelFamily::homogeneous;
  throw ParseError("unknown kernel '" + name + "'");
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  return arr;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& arr, Index rows,
                                        Index cols, const char* what) {
  if (!arr.is_array() ||
      static_cast<Index>(arr.size()) != rows * cols)
    throw DimensionError(std::string(what) + " has " +
                         std::to_string(arr.size()) + " entries, expected " +
                         std::to_string(rows * cols));
  Eigen::MatrixXd m(rows, cols);
  std::size_t t = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = arr[t++].get<double>();
  return m;
}

template <typename T>
T require_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key))
    throw ParseError(std::string("model file is missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model field '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Writes the .fmjson format, version 1. Doubles are serialized with the
// shortest round-tripping representation, so load followed by predict is
// bit-identical to the saved model's predictions.
inline void save_model(const StoredModel& stored, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["augmented_count"] = stored.augmented_count;
  j["training"] = {{"beta", stored.training.beta},
                   {"loss", stored.training.loss},
                   {"seed", stored.training.seed},
                   {"epochs_run", stored.training.epochs_run}};
  if (stored.is_direct()) {
    const DirectModel& m = std::get<DirectModel>(stored.model);
    j["kind"] = "direct";
    j["kernel"] = detail::kernel_family_name(m.kernel.family);
    j["degree"] = m.kernel.degree;
    j["n_features"] = m.n_features();
    j["num_bases"] = m.num_bases();
    nlohmann::json lam = nlohmann::json::array();
    for (Index s = 0; s < m.num_bases(); ++s) lam.push_back(m.lambda[s]);
    j["lambda"] = std::move(lam);
    j["P"] = detail::matrix_to_json(m.P);
  } else {
    const LiftedModel& m = std::get<LiftedModel>(stored.model);
    j["kind"] = "lifted";
    j["kernel"] = detail::kernel_family_name(m.kernel.family);
    j["degree"] = m.degree();
    j["n_features"] = m.n_features();
    j["rank"] = m.rank();
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& f : m.factors)
      factors.push_back(detail::matrix_to_json(f));
    j["factors"] = std::move(factors);
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write to '" + path + "' failed");
}

inline StoredModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("model file '" + path + "' is not valid JSON: " +
                     e.what());
  }

  const auto version = detail::require_field<std::int64_t>(j, "format_version");
  if (version != 1)
    throw ParseError("unsupported format_version " + std::to_string(version) +
                     " (this build reads version 1)");

  StoredModel stored;
  stored.augmented_count =
      detail::require_field<Index>(j, "augmented_count");
  if (j.contains("training")) {
    const auto& t = j.at("training");
    stored.training.beta = t.value("beta", 0.0);
    stored.training.loss = t.value("loss", std::string("squared"));
    stored.training.seed = t.value("seed", std::uint64_t{0});
    stored.training.epochs_run = t.value("epochs_run", Index{0});
  }

  const auto kind = detail::require_field<std::string>(j, "kind");
  const auto family = detail::kernel_family_from_name(
      detail::require_field<std::string>(j, "kernel"));
  const int degree = detail::require_field<int>(j, "degree");
  const Index d = detail::require_field<Index>(j, "n_features");
  if (degree < 1) throw ParseError("model degree must be >= 1");
  if (d < 0) throw ParseError("model n_features must be >= 0");
  if (stored.augmented_count < 0 || stored.augmented_count > d)
    throw ParseError("model augmented_count out of range");

  if (kind == "direct") {
    DirectModel m;
    m.kernel = KernelKind{family, degree};
    const Index k = detail::require_field<Index>(j, "num_bases");
    if (k < 0) throw ParseError("model num_bases must be >= 0");
    const auto& lam = j.contains("lambda") ? j.at("lambda") : nlohmann::json();
    if (!lam.is_array() || static_cast<Index>(lam.size()) != k)
      throw DimensionError("lambda has " + std::to_string(lam.size()) +
                           " entries, expected " + std::to_string(k));
    m.lambda.resize(k);
    for (Index s = 0; s < k; ++s) m.lambda[s] = lam[s].get<double>();
    m.P = detail::matrix_from_json(detail::require_field<nlohmann::json>(j, "P"),
                                   d, k, "P");
    stored.model = std::move(m);
  } else if (kind == "lifted") {
    LiftedModel m;
    m.kernel = KernelKind{family, degree};
    const Index r = detail::require_field<Index>(j, "rank");
    if (r < 0) throw ParseError("model rank must be >= 0");
    const auto factors = detail::require_field<nlohmann::json>(j, "factors");
    if (!factors.is_array() || static_cast<int>(factors.size()) != degree)
      throw DimensionError("model stores " + std::to_string(factors.size()) +
                           " factor matrices, expected " +
                           std::to_string(degree));
    for (const auto& f : factors)
      m.factors.push_back(detail::matrix_from_json(f, d, r, "factor"));
    detail::validate_lifted(m);
    stored.model = std::move(m);
  } else {
    throw ParseError("unknown model kind '" + kind + "'");
  }
  return stored;
}

inline double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  if (pred.size() != y.size())
    throw DimensionError("rmse: prediction and target lengths differ (" +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(y.size()) + ")");
  if (pred.size() == 0) throw DimensionError("rmse: empty input");
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

inline double r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  if (pred.size() != y.size())
    throw DimensionError("r2: prediction and target lengths differ (" +
                         std::to_string(pred.size()) + " vs " +
                         std::to_string(y.size()) + ")");
  if (pred.size() == 0) throw DimensionError("r2: empty input");
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).matrix().squaredNorm();
  if (ss_tot == 0.0)
    throw Error("r2 is undefined for constant targets");
  return 1.0 - (pred - y).squaredNorm() / ss_tot;
}

}  // namespace polyfm
