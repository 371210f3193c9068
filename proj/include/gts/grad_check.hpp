#pragma once

#include <string>
#include <vector>

#include "gts/param_store.hpp"

namespace gts::ad {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int64_t worst_index = -1;
  double analytic = 0.0, numeric = 0.0;  // at the worst entry
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;  // one row per parameter tensor
  double max_rel_err = 0.0;
  std::string worst_param;
  double step = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string summary() const;
};

// Central finite differences against the tape gradient, checking every entry
// of every parameter. Relative error uses a damped denominator,
//   |a - n| / (max(|a|, |n|) + denom_floor),
// so finite-difference noise on near-zero gradients does not dominate.
// Throws if two forward evaluations of the program disagree bitwise, since a
// non-deterministic loss invalidates finite differencing.
GradCheckReport grad_check(const Program& program, const ParameterStore& params,
                           double step = 1e-5, double tolerance = 1e-4,
                           double denom_floor = 1e-4);

}  // namespace gts::ad
