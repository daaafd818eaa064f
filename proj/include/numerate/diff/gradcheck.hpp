#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "numerate/diff/tape.hpp"

namespace numerate::diff {

struct GradCheckOptions {
  double h = 1e-4;
  double tol = 1e-4;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
  // Entries probed per parameter; 0 checks every entry.
  std::size_t max_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool passed = true;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> failures;

  std::string summary() const;
};

// Builds the loss with `loss_fn` on a fresh tape; must be deterministic across
// calls (re-seed any dropout stream inside the closure).
using LossBuilder = std::function<Var(Tape&)>;

// Compares reverse-mode gradients with central differences
// (f(x+h) - f(x-h)) / 2h for the listed parameters.
GradCheckReport finite_diff_check(const LossBuilder& loss_fn, const std::vector<Parameter*>& params,
                                  const GradCheckOptions& opts = {});

}  // namespace numerate::diff
