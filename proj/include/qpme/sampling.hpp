#pragma once

// Space-time training points: uniform boxes, uniform balls, the three-region
// mixture with its correction weights, and boundary points.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qpme/analytic.hpp"
#include "qpme/rng.hpp"

namespace qpme {

enum class Region { V0 = 0, V1 = 1, V2 = 2 };

std::string to_string(Region r);

/// Mixture theta0 * U(V0) + theta1 * U(V1) + theta2 * U(Omega) with
/// V0 = {|x| <= r0}, V1 = {r0 < |x| <= rT}, V2 = {|x| > rT} within Omega.
struct MixtureSpec {
  double theta0 = 0.3;
  double theta1 = 0.3;
  double r0 = 1.0;
  double rT = 2.0;
  std::vector<double> half_widths{4.0};
  std::size_t d = 1;

  double theta2() const { return 1.0 - theta0 - theta1; }
  /// r0 == rT is accepted when theta1 == 0 (empty shell).
  void validate() const;

  /// Radii of the shifted Barenblatt support at t = 0 and t = 1.
  static MixtureSpec barenblatt(std::size_t d, std::span<const double> half_widths, double theta0, double theta1);
  /// r0 = pi/2 (support of the cosine data), rT = 3.
  static MixtureSpec waiting(std::size_t d, std::span<const double> half_widths, double theta0, double theta1);
};

double barenblatt_r0(std::size_t d);
double barenblatt_rT(std::size_t d);

/// log of the d-ball volume pi^(d/2) r^d / Gamma(d/2 + 1).
double log_ball_volume(std::size_t d, double r);

struct RegionLogVolumes {
  double v0;
  double v1;
  double v2;
  double omega;
};

RegionLogVolumes region_log_volumes(const MixtureSpec& spec);

struct WeightedSample {
  double t = 0.0;
  std::vector<double> x;
  Region region = Region::V2;  // region containing x
  double c = 1.0;
};

/// Uniform point in the unit d-ball (normalized Gaussian times u^(1/d)).
std::vector<double> sample_unit_ball(Rng& rng, std::size_t d);

/// Region probabilities and corrections, computed once per spec.
class MixtureSampler {
 public:
  MixtureSampler(MixtureSpec spec, double T);

  const MixtureSpec& spec() const { return spec_; }
  double T() const { return T_; }
  /// (P_V0, P_V1, P_V2): probability that a draw lands in each region.
  const std::array<double, 3>& region_probabilities() const { return prob_; }
  /// |V_i| / (|Omega| P_Vi); infinite for regions the mixture never reaches.
  const std::array<double, 3>& corrections() const { return corr_; }
  const RegionLogVolumes& log_volumes() const { return vols_; }

  Region region_of(std::span<const double> x) const;
  double correction(std::span<const double> x) const { return corr_[static_cast<int>(region_of(x))]; }

  WeightedSample sample(Rng& rng) const;
  std::vector<WeightedSample> sample(Rng& rng, std::size_t n) const;

 private:
  MixtureSpec spec_;
  double T_;
  RegionLogVolumes vols_;
  std::array<double, 3> prob_{};
  std::array<double, 3> corr_{};
};

WeightedSample sample_mixture(Rng& rng, const MixtureSpec& spec, double T);

struct BoundarySample {
  double t;
  std::vector<double> x;
};

/// Face picked with probability proportional to its area, point uniform on it.
BoundarySample sample_boundary(Rng& rng, const DomainSpec& domain);

/// Uniform point in [0, T] x Omega with c = 1.
WeightedSample sample_uniform(Rng& rng, const DomainSpec& domain);

/// Kolmogorov-Smirnov distance of the sample to U(0, 1).
double ks_uniform(std::vector<double> u);

struct SamplerCheck {
  std::size_t n = 0;
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> expected{};  // region probabilities
  std::array<double, 3> z{};         // (count - n P) / binomial sd; 0 where P is 0 or 1
  double mean_c = 0.0;               // estimates |Omega|^-1 int 1 dx = 1
  double se_c = 0.0;
  /// KS distance of (|x| / r0)^d over the draws that land in V0, which are
  /// uniform on the ball whichever component produced them. NaN below 2 draws.
  double ks_v0 = 0.0;
  std::size_t ks_samples = 0;
};

/// n draws from the mixture; `dump`, when given, receives them.
SamplerCheck sampler_check(const MixtureSampler& sampler, Rng& rng, std::size_t n,
                           std::vector<WeightedSample>* dump = nullptr);

/// CSV with header t,x_1..x_d,region,c.
void write_samples_csv(std::ostream& os, std::span<const WeightedSample> samples);

}  // namespace qpme
