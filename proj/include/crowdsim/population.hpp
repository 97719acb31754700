#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsim/rng.hpp"

namespace crowdsim {

/// A categorical profile field: levels with probabilities p_k.
struct CategoricalField {
  std::vector<std::string> levels;
  std::vector<double> probs;
  /// Qualified-pool allow-list; empty means every level qualifies.
  std::vector<std::string> allowed;
};

struct UniformField {
  double lo = 0.0;
  double hi = 1.0;
};

/// Normal field. Encoding min-max scales over [mean - 3 sd, mean + 3 sd] unless
/// an allowed range is given, in which case that range is used.
struct NormalField {
  double mean = 0.0;
  double stddev = 1.0;
};

struct FieldSpec {
  std::string name;
  std::variant<CategoricalField, UniformField, NormalField> dist;
  /// Qualified-pool range for continuous fields.
  std::optional<std::pair<double, double>> allowed_range;
};

/// Target distribution of participant profiles, fields in fixed order.
class ProfileSpec {
public:
  explicit ProfileSpec(std::vector<FieldSpec> fields);

  const std::vector<FieldSpec>& fields() const noexcept { return fields_; }

  /// d_z: one-hot width of every categorical field plus one per continuous field.
  std::size_t encoded_dim() const noexcept { return encoded_dim_; }

  /// Offset of a field's block inside the encoded vector.
  std::size_t offset(std::size_t field) const { return offsets_.at(field); }

private:
  std::vector<FieldSpec> fields_;
  std::vector<std::size_t> offsets_;
  std::size_t encoded_dim_ = 0;
};

ProfileSpec profile_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ProfileSpec& spec);
ProfileSpec load_profile_spec(const std::filesystem::path& path);

using FieldValue = std::variant<std::string, double>;

struct Profile {
  std::string participant_id;
  std::vector<std::pair<std::string, FieldValue>> values;
  std::vector<double> encoded;

  friend bool operator==(const Profile&, const Profile&) = default;
};

/// One-hot for categoricals, min-max scaling for continuous fields.
std::vector<double> encode_profile(const ProfileSpec& spec, std::span<const FieldValue> values);

/// Recovers the categorical level of `field` from an encoded vector (argmax of its block).
std::string decode_categorical(const ProfileSpec& spec, std::span<const double> encoded, std::size_t field);

/// Draws n profiles i.i.d. from the spec, applying pool constraints by rejection
/// (at most 1000 attempts per profile). Ids are "<prefix>0001"... and the result
/// is a pure function of (spec, n, seed).
std::vector<Profile> sample_profiles(const ProfileSpec& spec, std::size_t n, std::uint64_t seed,
                                     const std::string& id_prefix = "v");

/// Builds a profile from explicit values (e.g. human participants' recorded profiles).
Profile make_profile(const ProfileSpec& spec, std::string participant_id, std::vector<FieldValue> values);

std::vector<Profile> load_profiles(const ProfileSpec& spec, const std::filesystem::path& path);
void save_profiles(const std::vector<Profile>& profiles, const std::filesystem::path& path);

/// Mixture sum_k p_k N(v_k, sd^2) with a common sd.
struct GaussianMixture {
  std::vector<double> means;
  std::vector<double> weights;
  double stddev = 0.0;

  double sample(Rng& rng) const;
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;
};

/// Continuous relaxation of a discrete law: each level v_k becomes N(v_k, (eps*eta)^2).
GaussianMixture smooth_discrete(std::span<const double> levels, std::span<const double> probs, double eps,
                                double eta);

/// Closed-form W1(Dirac(v), N(v, (eps*eta)^2)) = sqrt(2/pi) * eta * eps.
double smoothing_w1_bound(double eps, double eta);

/// 1-D empirical Wasserstein-1 distance. Inputs need not be sorted. Equal sizes
/// pair order statistics; unequal sizes are aligned on max(|a|,|b|) linearly
/// interpolated quantiles. Throws std::invalid_argument on empty input.
double empirical_w1(std::span<const double> a, std::span<const double> b);

using Mask = std::vector<std::vector<std::uint8_t>>;

/// phi_{i,t} ~ Bernoulli(p_{i,t}); rows are participants, columns problems.
Mask sample_participation(const std::vector<std::vector<double>>& probabilities, std::uint64_t seed);

}  // namespace crowdsim
