#pragma once

#include <cstdint>
#include <string>

#include "crowdsim/rng.hpp"

namespace crowdsim {

enum class NoiseFamily { normal, none };

std::string to_string(NoiseFamily f);
NoiseFamily noise_family_from_string(const std::string& s);

/// B_sigma: additive blender y_ref + effect + noise, noise ~ F(0, sigma^2).
struct BlenderConfig {
  NoiseFamily family = NoiseFamily::normal;
  double sigma = 0.0;
  int samples = 10;  ///< J, belief draws averaged per decision

  void validate() const;
};

/// One draw of the blender centred at y_ref + effect.
double blend(double y_ref, double effect, const BlenderConfig& cfg, Rng& rng);
double blend(double y_ref, double effect, const BlenderConfig& cfg, std::uint64_t seed);

}  // namespace crowdsim
