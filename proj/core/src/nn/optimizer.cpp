#include "thermocad/nn/optimizer.hpp"

#include <cmath>

namespace thermocad::nn {

namespace {

template <typename T>
void ensure_state(std::vector<std::vector<double>>& state, const std::vector<Param<T>*>& params) {
  if (state.size() == params.size()) return;
  state.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) state[i].assign(params[i]->value.size(), 0.0);
}

}  // namespace

template <typename T>
void Sgd<T>::step(const std::vector<Param<T>*>& params, double lr) {
  for (Param<T>* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= static_cast<T>(lr * p->grad[i]);
  }
}

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params, double lr) {
  ensure_state(m_, params);
  ensure_state(v_, params);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<T>& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= static_cast<T>(lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
    }
  }
}

template <typename T>
void RmsProp<T>::step(const std::vector<Param<T>*>& params, double lr) {
  ensure_state(s_, params);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param<T>& p = *params[k];
    auto& s = s_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      s[i] = rho_ * s[i] + (1.0 - rho_) * g * g;
      p.value[i] -= static_cast<T>(lr * g / (std::sqrt(s[i]) + eps_));
    }
  }
}

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD:
      return std::make_unique<Sgd<T>>();
    case OptimizerKind::RMSProp:
      return std::make_unique<RmsProp<T>>();
    case OptimizerKind::Adam:
      break;
  }
  return std::make_unique<Adam<T>>();
}

double default_learning_rate(OptimizerKind kind) noexcept { return kind == OptimizerKind::SGD ? 1e-2 : 1e-3; }

template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;
template class RmsProp<float>;
template class RmsProp<double>;
template std::unique_ptr<Optimizer<float>> make_optimizer<float>(OptimizerKind);
template std::unique_ptr<Optimizer<double>> make_optimizer<double>(OptimizerKind);

}  // namespace thermocad::nn
