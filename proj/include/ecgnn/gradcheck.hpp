#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ecgnn/tape.hpp"

namespace ecgnn {

struct GradCheckOptions {
    double step_base = 1e-5;     // h = step_base * (1 + |x|)
    std::size_t max_coords = 0;  // 0 = all coordinates
    std::uint64_t seed = 0;      // coordinate subsampling stream
};

struct GradCheckEntry {
    std::string param;
    std::size_t coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
    bool non_finite = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst_rel_err = 0.0;
    GradCheckEntry worst;
    std::size_t checked = 0;

    bool within(double tol) const;
};

// Central-difference check of d f / d p for the given parameters.
// f must be a deterministic scalar function of the parameter values that
// also populates Param::grad when run (forward + backward); the checker
// resets grads, runs f once for the analytic side, then perturbs each
// sampled coordinate by +-h with h = step_base * (1 + |x|) and compares
//   rel_err = |a - n| / max(1e-8, |a| + |n|).
// Non-finite f values are reported in the entry, never thrown.
GradCheckReport grad_check(const std::function<double()>& f, const std::vector<Param*>& params,
                           const GradCheckOptions& opt = {});

// Same, for an explicit list of (param index, coordinate) pairs.
GradCheckReport grad_check_coords(const std::function<double()>& f, const std::vector<Param*>& params,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& coords,
                                  double step_base = 1e-5);

}  // namespace ecgnn
