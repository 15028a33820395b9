#pragma once

#include "gmap/types.hpp"

#include <cstdint>

namespace gmap {

struct InferenceConfig {
  std::uint64_t total_samples = 1000000;
  int batch_components = 1024;
  std::uint64_t rng_seed = 0;
  // When set, each sample's intensity uses the full mixture conditional
  // instead of its generating component's conditional.
  bool exact_conditional = false;

  void validate() const;
};

/// Dense reconstruction: per component k, round(tau_k * total_samples)
/// spatial draws from the component's marginal (at least one each when the
/// budget allows), intensity from the conditional density, clamped to [0, 1].
/// Deterministic in (model, cfg); batching does not change the output.
MultimodalCloud reconstruct(const Gmm4& model, const InferenceConfig& cfg);

}  // namespace gmap
