#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spmu {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Max relative gradient error of the classification loss for a small random
/// model, batch and set drawn from `seed`.
double spm_grad_error(std::uint64_t seed);

/// Same for the denoiser MSE loss.
double gen_grad_error(std::uint64_t seed);

/// Fast invariant checks over every module.
std::vector<CheckResult> run_selftest();

}  // namespace spmu
