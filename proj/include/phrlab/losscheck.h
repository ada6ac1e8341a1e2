#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phrlab/nn.h"

namespace phrlab {

struct LossCheck {
  std::string loss;  // "a2c", "phr-l2", "phr-kl", "phr-ce", "squared-error"
  GradientCheckReport report;
};

/// Small random net (at most 5k parameters) with n_heads drawn from {1, 4, 16}.
NetSpec random_check_spec(std::uint64_t seed);

/// Finite-difference checks of the A2C composite loss and the three PHR
/// measures on one random net. PHR losses are skipped when the net has one head.
std::vector<LossCheck> check_training_losses(const NetSpec& spec, std::uint64_t seed,
                                             const GradientCheckOptions& options = {});

}  // namespace phrlab
