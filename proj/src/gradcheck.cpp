#include "wsdan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace wsdan {

bool GradCheckReport::pass() const {
  for (const auto& e : entries) {
    if (e.flagged > 0) return false;
  }
  return true;
}

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%-24s coords=%-6zu max_rel_err=%-12.3e flagged=%-4zu |a|max=%.3e |n|max=%.3e\n",
                  e.name.c_str(), e.coords, e.max_rel_err, e.flagged, e.max_abs_analytic,
                  e.max_abs_numeric);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "overall max_rel_err=%.3e (tol %.1e, h %.1e) -> %s\n", max_rel_err,
                tol, step, pass() ? "PASS" : "FAIL");
  os << buf;
  return os.str();
}

GradCheckReport grad_check(const std::function<double()>& eval,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double h, double tol) {
  if (h <= 0.0) throw ContractError("grad_check: step h must be positive");
  double v1 = eval();
  double v2 = eval();
  if (!(v1 == v2)) {
    throw ContractError("grad_check: non-deterministic objective (two evaluations differ)");
  }

  GradCheckReport report;
  report.tol = tol;
  report.step = h;
  for (const auto& [name, t] : params) {
    Tensor param = t;
    if (!param.requires_grad()) continue;  // frozen: excluded from the report
    GradCheckEntry entry;
    entry.name = name;
    entry.coords = param.size();
    const double* a = param.grad();
    for (size_t i = 0; i < param.size(); ++i) {
      double saved = param.data()[i];
      param.data()[i] = saved + h;
      double fp = eval();
      param.data()[i] = saved - h;
      double fm = eval();
      param.data()[i] = saved;
      double n = (fp - fm) / (2.0 * h);
      double rel = std::fabs(a[i] - n) / std::max({std::fabs(a[i]), std::fabs(n), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::fabs(a[i]));
      entry.max_abs_numeric = std::max(entry.max_abs_numeric, std::fabs(n));
      if (rel > tol) entry.flagged++;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace wsdan
