#pragma once

#include <memory>
#include <vector>

#include "thermocad/nn/hyperparams.hpp"
#include "thermocad/nn/layers.hpp"

namespace thermocad::nn {

/// Applies one update from the accumulated gradients. State (moments,
/// step count) is keyed by parameter position, so the same parameter list
/// must be passed on every call.
template <typename T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<Param<T>*>& params, double lr) = 0;
  virtual OptimizerKind kind() const = 0;
};

template <typename T>
class Sgd final : public Optimizer<T> {
 public:
  void step(const std::vector<Param<T>*>& params, double lr) override;
  OptimizerKind kind() const override { return OptimizerKind::SGD; }
};

template <typename T>
class Adam final : public Optimizer<T> {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param<T>*>& params, double lr) override;
  OptimizerKind kind() const override { return OptimizerKind::Adam; }
  long long steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Running mean of squared gradients; eps is added outside the square root.
template <typename T>
class RmsProp final : public Optimizer<T> {
 public:
  explicit RmsProp(double rho = 0.9, double eps = 1e-8) : rho_(rho), eps_(eps) {}

  void step(const std::vector<Param<T>*>& params, double lr) override;
  OptimizerKind kind() const override { return OptimizerKind::RMSProp; }

 private:
  double rho_, eps_;
  std::vector<std::vector<double>> s_;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(OptimizerKind kind);

/// 1e-2 for SGD, 1e-3 for the adaptive methods.
double default_learning_rate(OptimizerKind kind) noexcept;

}  // namespace thermocad::nn
