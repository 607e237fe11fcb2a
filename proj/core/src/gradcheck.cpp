#include "pslab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pslab/prng.hpp"

namespace pslab {

GradCheckReport gradient_check(const std::function<Var(Graph&)>& build,
                               const std::vector<NamedParam>& params, double h, double tol,
                               int max_elements_per_param, std::uint64_t sample_seed) {
  GradCheckReport report;
  for (const auto& p : params) {
    p.tensor->set_requires_grad(true);
    p.tensor->zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Graph g;
    Var loss = build(g);
    g.backward(loss);
    for (const auto& p : params) analytic.push_back(p.tensor->grad());
  }

  auto eval = [&]() {
    Graph g;
    return g.scalar(build(g));
  };

  Prng rng(sample_seed ^ 0x5D5B1D4FA2C6C9D1ull);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = *params[pi].tensor;
    std::vector<std::int64_t> indices;
    const std::int64_t n = t.numel();
    if (max_elements_per_param < 0 || n <= max_elements_per_param) {
      indices.resize(static_cast<size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) indices[static_cast<size_t>(i)] = i;
    } else {
      // Sampled subset without replacement (partial Fisher-Yates).
      std::vector<std::int64_t> all(static_cast<size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
      for (int i = 0; i < max_elements_per_param; ++i) {
        const auto j = i + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n - i)));
        std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
      }
      indices.assign(all.begin(), all.begin() + max_elements_per_param);
    }
    for (std::int64_t idx : indices) {
      const double saved = t[idx];
      t[idx] = saved + h;
      const double fp = eval();
      t[idx] = saved - h;
      const double fm = eval();
      t[idx] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][static_cast<size_t>(idx)];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.checked;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (!(rel <= tol)) {
        report.failures.push_back({params[pi].name, idx, a, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace pslab
