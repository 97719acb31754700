#include "crowdsim/blender.hpp"

#include <cmath>

#include "crowdsim/error.hpp"

namespace crowdsim {

std::string to_string(NoiseFamily f) { return f == NoiseFamily::normal ? "normal" : "none"; }

NoiseFamily noise_family_from_string(const std::string& s) {
  if (s == "normal") return NoiseFamily::normal;
  if (s == "none") return NoiseFamily::none;
  throw ConfigError("unknown noise family '" + s + "'");
}

void BlenderConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("blender sigma must be finite and >= 0");
  if (samples < 1) throw ConfigError("blender J must be >= 1");
}

double blend(double y_ref, double effect, const BlenderConfig& cfg, Rng& rng) {
  const double centre = y_ref + effect;
  if (cfg.family == NoiseFamily::none || cfg.sigma == 0.0) return centre;
  return centre + cfg.sigma * rng.normal();
}

double blend(double y_ref, double effect, const BlenderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return blend(y_ref, effect, cfg, rng);
}

}  // namespace crowdsim
