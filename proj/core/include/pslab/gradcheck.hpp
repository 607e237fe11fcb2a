#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pslab/graph.hpp"

namespace pslab {

struct GradCheckFailure {
  std::string param;
  std::int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  int checked = 0;
  double max_rel_err = 0.0;
  std::vector<GradCheckFailure> failures;
  bool ok() const { return failures.empty(); }
};

struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
};

// Compares reverse-mode gradients against central finite differences
//   numeric = (f(x+h) - f(x-h)) / 2h
// with relative error |analytic - numeric| / max(1, |analytic|, |numeric|).
// `build` constructs a fresh graph and returns the scalar loss; it is
// re-evaluated twice per checked element. When max_elements_per_param >= 0,
// a seeded subset of that size is checked per tensor instead of every
// element. Failures are collected, never thrown.
GradCheckReport gradient_check(const std::function<Var(Graph&)>& build,
                               const std::vector<NamedParam>& params, double h = 1e-5,
                               double tol = 1e-4, int max_elements_per_param = -1,
                               std::uint64_t sample_seed = 0);

}  // namespace pslab
