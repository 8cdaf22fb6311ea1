#include "basiccs/sweep.hpp"

#include <algorithm>

#include "basiccs/error.hpp"

namespace basiccs {

std::vector<SweepRow> k_sweep(const Dataset& train, const Dataset& validation, const ModelConfig& config,
                              std::vector<int> K_list) {
  if (K_list.empty()) throw UsageError("k_sweep: empty K list");
  std::sort(K_list.begin(), K_list.end());
  K_list.erase(std::unique(K_list.begin(), K_list.end()), K_list.end());
  const ControlPrefit prefit = prefit_control_surface(train, config);
  std::vector<SweepRow> rows;
  for (int K : K_list) {
    ModelConfig c = config;
    c.K = K;
    const FitResult model = fit(train, c, prefit);
    rows.push_back({K, model.final_elbo, evaluate(model, validation)});
  }
  return rows;
}

}  // namespace basiccs
