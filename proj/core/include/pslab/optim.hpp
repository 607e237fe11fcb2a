#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pslab/networks.hpp"

namespace pslab {

enum class OptimKind { sgd, adam };

struct OptimConfig {
  OptimKind kind = OptimKind::sgd;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  int epochs = 20;
  int batch_size = 16;
  std::optional<int> lr_halve_epoch;  // lr halves from this epoch on
  std::uint64_t seed = 1;

  // Reference presets: SGD(1e-3, 0.9, 5e-5) for mask nets, Adam(1e-4,
  // 5e-5) for depth nets.
  static OptimConfig mask_defaults();
  static OptimConfig depth_defaults();

  void validate() const;
};

// Single-tensor update rules. Weight decay is the coupled L2 form (added to
// the gradient) for both optimizers.
//   SGD:  v <- momentum*v + g + wd*p;  p <- p - lr*v
//   Adam: standard bias-corrected first/second moments,
//         beta = (0.9, 0.999), eps = 1e-8, t counted from 1.
void sgd_step(Tensor& p, const std::vector<double>& grad, std::vector<double>& velocity,
              double lr, double momentum, double weight_decay);
void adam_step(Tensor& p, const std::vector<double>& grad, std::vector<double>& m,
               std::vector<double>& v, std::int64_t t, double lr, double weight_decay);

class Optimizer {
 public:
  Optimizer(OptimConfig cfg, ModelParameters& params);

  void zero_grad();
  void step(double lr);  // applies one update using current grads

  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  ModelParameters* params_;
  std::vector<std::vector<double>> slot1_, slot2_;  // velocity / adam moments
  std::int64_t t_ = 0;
};

}  // namespace pslab
