#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "polyfm/common.hpp"

namespace polyfm {

enum class LossKind { squared, squared_hinge, logistic };

// Convex loss l(y, yhat) with its derivative in yhat and a global curvature
// bound mu >= sup l''. The coordinate updates take Newton-like steps on the
// mu-majorized quadratic, so mu being a true upper bound is what makes every
// step a descent step.
class Loss {
 public:
  explicit Loss(LossKind kind) : kind_(kind) {}

  static Loss from_name(const std::string& name) {
    if (name == "squared") return Loss(LossKind::squared);
    if (name == "squared-hinge") return Loss(LossKind::squared_hinge);
    if (name == "logistic") return Loss(LossKind::logistic);
    throw ConfigError("unknown loss '" + name + "'");
  }

  LossKind kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case LossKind::squared: return "squared";
      case LossKind::squared_hinge: return "squared-hinge";
      case LossKind::logistic: return "logistic";
    }
    return {};
  }

  double value(double y, double yhat) const {
    switch (kind_) {
      case LossKind::squared: {
        const double r = yhat - y;
        return 0.5 * r * r;
      }
      case LossKind::squared_hinge: {
        const double t = std::max(1.0 - y * yhat, 0.0);
        return t * t;
      }
      case LossKind::logistic: {
        // log(1 + exp(-z)) without overflow for large |z|
        const double z = y * yhat;
        return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0);
      }
    }
    return 0.0;
  }

  double deriv(double y, double yhat) const {
    switch (kind_) {
      case LossKind::squared:
        return yhat - y;
      case LossKind::squared_hinge:
        return -2.0 * y * std::max(1.0 - y * yhat, 0.0);
      case LossKind::logistic: {
        // -y * sigmoid(-y yhat), evaluated on the non-growing exponential
        const double z = y * yhat;
        if (z >= 0.0) {
          const double e = std::exp(-z);
          return -y * e / (1.0 + e);
        }
        return -y / (1.0 + std::exp(z));
      }
    }
    return 0.0;
  }

  double mu() const {
    switch (kind_) {
      case LossKind::squared: return 1.0;
      case LossKind::squared_hinge: return 2.0;
      case LossKind::logistic: return 0.25;
    }
    return 0.0;
  }

  bool classification() const { return kind_ != LossKind::squared; }

  // Hinge and logistic losses are only defined for labels -1/+1.
  void check_labels(const Eigen::VectorXd& y) const {
    if (!classification()) return;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 1.0 && y[i] != -1.0)
        throw ConfigError(name() + " loss requires labels in {-1,+1}, got " +
                          format_double(y[i]) + " at sample " +
                          std::to_string(i));
  }

 private:
  LossKind kind_;
};

}  // namespace polyfm
