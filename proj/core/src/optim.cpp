#include "pslab/optim.hpp"

#include <cmath>

namespace pslab {

OptimConfig OptimConfig::mask_defaults() {
  OptimConfig c;
  c.kind = OptimKind::sgd;
  c.lr = 1e-3;
  c.momentum = 0.9;
  c.weight_decay = 5e-5;
  return c;
}

OptimConfig OptimConfig::depth_defaults() {
  OptimConfig c;
  c.kind = OptimKind::adam;
  c.lr = 1e-4;
  c.momentum = 0.0;
  c.weight_decay = 5e-5;
  c.lr_halve_epoch = 500;  // reference full-length schedule; inert at desk epoch counts
  return c;
}

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optim.lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optim.momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("optim.weight_decay must be non-negative");
  if (epochs < 0) throw ConfigError("optim.epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("optim.batch_size must be positive");
  if (lr_halve_epoch && *lr_halve_epoch < 1) throw ConfigError("optim.lr_halve_epoch must be >= 1");
}

void sgd_step(Tensor& p, const std::vector<double>& grad, std::vector<double>& velocity,
              double lr, double momentum, double weight_decay) {
  PSLAB_CHECK_SHAPE(static_cast<std::int64_t>(grad.size()) == p.numel(),
                    "sgd_step: gradient size mismatch");
  if (velocity.empty()) velocity.assign(grad.size(), 0.0);
  PSLAB_CHECK_SHAPE(velocity.size() == grad.size(), "sgd_step: state size mismatch");
  for (size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i] + weight_decay * p[static_cast<std::int64_t>(i)];
    velocity[i] = momentum * velocity[i] + g;
    p[static_cast<std::int64_t>(i)] -= lr * velocity[i];
  }
}

void adam_step(Tensor& p, const std::vector<double>& grad, std::vector<double>& m,
               std::vector<double>& v, std::int64_t t, double lr, double weight_decay) {
  PSLAB_CHECK_SHAPE(static_cast<std::int64_t>(grad.size()) == p.numel(),
                    "adam_step: gradient size mismatch");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (m.empty()) m.assign(grad.size(), 0.0);
  if (v.empty()) v.assign(grad.size(), 0.0);
  PSLAB_CHECK_SHAPE(m.size() == grad.size() && v.size() == grad.size(),
                    "adam_step: state size mismatch");
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i] + weight_decay * p[static_cast<std::int64_t>(i)];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[static_cast<std::int64_t>(i)] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

Optimizer::Optimizer(OptimConfig cfg, ModelParameters& params) : cfg_(cfg), params_(&params) {
  cfg_.validate();
  slot1_.resize(params.size());
  slot2_.resize(params.size());
}

void Optimizer::zero_grad() { params_->zero_grads(); }

void Optimizer::step(double lr) {
  ++t_;
  size_t i = 0;
  for (auto& item : *params_) {
    const auto& grad = item.tensor.has_grad() ? item.tensor.grad()
                                              : (item.tensor.zero_grad(), item.tensor.grad());
    if (cfg_.kind == OptimKind::sgd) {
      sgd_step(item.tensor, grad, slot1_[i], lr, cfg_.momentum, cfg_.weight_decay);
    } else {
      adam_step(item.tensor, grad, slot1_[i], slot2_[i], t_, lr, cfg_.weight_decay);
    }
    ++i;
  }
}

}  // namespace pslab
