#include "gts/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace gts::ad {

std::string GradCheckReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "grad_check %s: max rel err %.3e (param '%s'), step %.1e, tol %.1e",
                pass ? "PASS" : "FAIL", max_rel_err, worst_param.c_str(), step,
                tolerance);
  std::string out = buf;
  for (const auto& e : params) {
    std::snprintf(buf, sizeof buf, "\n  %-40s %.3e", e.name.c_str(), e.max_rel_err);
    out += buf;
  }
  return out;
}

GradCheckReport grad_check(const Program& program, const ParameterStore& params,
                           double step, double tolerance, double denom_floor) {
  if (step <= 0.0) throw Error("grad_check: step must be positive");

  // Determinism guard: the same parameters must give the same bits.
  double v1 = evaluate_value(program, params);
  double v2 = evaluate_value(program, params);
  if (std::memcmp(&v1, &v2, sizeof(double)) != 0)
    throw Error("grad_check: loss is not deterministic (" + std::to_string(v1) +
                " vs " + std::to_string(v2) + "); freeze all noise before checking");

  Evaluation ev = evaluate_with_gradients(program, params);

  GradCheckReport report;
  report.step = step;
  report.tolerance = tolerance;

  ParameterStore work = params;  // mutated one entry at a time
  for (const auto& [name, tensor] : params) {
    GradCheckEntry entry;
    entry.name = name;
    Tensor& wt = work.at(name);
    const Tensor& at = ev.gradients.at(name);
    for (int64_t i = 0; i < tensor.numel(); ++i) {
      const double saved = wt.at(i);
      wt.at(i) = saved + step;
      double fp = evaluate_value(program, work);
      wt.at(i) = saved - step;
      double fm = evaluate_value(program, work);
      wt.at(i) = saved;
      double numeric = (fp - fm) / (2.0 * step);
      double analytic = at.at(i);
      double rel = std::fabs(analytic - numeric) /
                   (std::max(std::fabs(analytic), std::fabs(numeric)) + denom_floor);
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_err >= report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_param = name;
    }
    report.params.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace gts::ad
