#pragma once

#include <string>

#include "chmp/diffusion.hpp"

namespace chmp {

/// Weight checkpoint ("CHMPNETS"): named sections of shape-prefixed f64
/// arrays. Covers the denoiser plus one guidance net per condition.
void save_checkpoint(const std::string& path, const ToyDenoiser& denoiser,
                     const GuidanceNets& nets);

/// Loads into pre-constructed nets; every section's shape must match the
/// configured architecture or the loader throws.
void load_checkpoint(const std::string& path, ToyDenoiser& denoiser, GuidanceNets& nets);

}  // namespace chmp
