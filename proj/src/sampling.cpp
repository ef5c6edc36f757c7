#include "qpme/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "qpme/errors.hpp"

namespace qpme {

std::string to_string(Region r) {
  switch (r) {
    case Region::V0: return "V0";
    case Region::V1: return "V1";
    case Region::V2: return "V2";
  }
  return "?";
}

void MixtureSpec::validate() const {
  if (d == 0) throw ContractError("MixtureSpec: d must be >= 1");
  if (half_widths.size() != d) throw ContractError("MixtureSpec: need one half width per axis");
  if (!(theta0 >= 0.0) || !(theta1 >= 0.0) || theta0 + theta1 > 1.0 + 1e-15)
    throw ContractError("MixtureSpec: need theta0, theta1 >= 0 and theta0 + theta1 <= 1");
  if (!(r0 > 0.0)) throw ContractError("MixtureSpec: r0 must be positive");
  if (r0 > rT || (r0 == rT && theta1 > 0.0))
    throw ContractError("MixtureSpec: need r0 < rT (r0 == rT only with theta1 = 0)");
  const double amin = *std::min_element(half_widths.begin(), half_widths.end());
  if (rT > amin) throw ContractError("MixtureSpec: rT exceeds the smallest half width");
}

double barenblatt_r0(std::size_t d) { return std::sqrt(2.0 * (2.0 + static_cast<double>(d))); }

double barenblatt_rT(std::size_t d) {
  const double dd = static_cast<double>(d);
  return std::sqrt(2.0 + dd) * std::pow(2.0, (4.0 + dd) / (2.0 * dd + 4.0));
}

MixtureSpec MixtureSpec::barenblatt(std::size_t d, std::span<const double> half_widths, double theta0,
                                    double theta1) {
  MixtureSpec s{theta0, theta1, barenblatt_r0(d), barenblatt_rT(d), {half_widths.begin(), half_widths.end()}, d};
  s.validate();
  return s;
}

MixtureSpec MixtureSpec::waiting(std::size_t d, std::span<const double> half_widths, double theta0, double theta1) {
  MixtureSpec s{theta0, theta1, std::numbers::pi / 2.0, 3.0, {half_widths.begin(), half_widths.end()}, d};
  s.validate();
  return s;
}

double log_ball_volume(std::size_t d, double r) {
  const double dd = static_cast<double>(d);
  return 0.5 * dd * std::log(std::numbers::pi) - std::lgamma(0.5 * dd + 1.0) + dd * std::log(r);
}

RegionLogVolumes region_log_volumes(const MixtureSpec& spec) {
  spec.validate();
  RegionLogVolumes v{};
  double omega = 0.0;
  for (double a : spec.half_widths) omega += std::log(2.0 * a);
  v.omega = omega;
  v.v0 = log_ball_volume(spec.d, spec.r0);
  const double big = log_ball_volume(spec.d, spec.rT);
  const double dd = static_cast<double>(spec.d);
  v.v1 = spec.r0 == spec.rT ? -std::numeric_limits<double>::infinity()
                            : big + std::log1p(-std::exp(dd * std::log(spec.r0 / spec.rT)));
  v.v2 = omega + std::log(-std::expm1(big - omega));
  return v;
}

std::vector<double> sample_unit_ball(Rng& rng, std::size_t d) {
  if (d == 0) throw ContractError("sample_unit_ball: d must be >= 1");
  std::vector<double> x(d);
  double norm = 0.0;
  do {
    double s = 0.0;
    for (auto& xi : x) {
      xi = rng.normal();
      s += xi * xi;
    }
    norm = std::sqrt(s);
  } while (norm < 1e-300);
  const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  for (auto& xi : x) xi *= r / norm;
  return x;
}

namespace {

/// Unit direction times a radius from the caller's radial map.
std::vector<double> direction(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  double norm = 0.0;
  do {
    double s = 0.0;
    for (auto& xi : x) {
      xi = rng.normal();
      s += xi * xi;
    }
    norm = std::sqrt(s);
  } while (norm < 1e-300);
  for (auto& xi : x) xi /= norm;
  return x;
}

}  // namespace

MixtureSampler::MixtureSampler(MixtureSpec spec, double T) : spec_(std::move(spec)), T_(T) {
  if (!(T > 0.0)) throw ContractError("MixtureSampler: T must be positive");
  vols_ = region_log_volumes(spec_);
  const std::array<double, 3> lv{vols_.v0, vols_.v1, vols_.v2};
  const std::array<double, 3> theta{spec_.theta0, spec_.theta1, 0.0};
  const double th2 = std::max(spec_.theta2(), 0.0);
  for (int i = 0; i < 3; ++i) {
    const double frac = std::exp(lv[i] - vols_.omega);
    prob_[i] = theta[i] + th2 * frac;
    corr_[i] = prob_[i] > 0.0 ? std::exp(lv[i] - vols_.omega - std::log(prob_[i]))
                              : std::numeric_limits<double>::infinity();
  }
}

Region MixtureSampler::region_of(std::span<const double> x) const {
  double s = 0.0;
  for (double xi : x) s += xi * xi;
  const double r = std::sqrt(s);
  if (r <= spec_.r0) return Region::V0;
  if (r <= spec_.rT) return Region::V1;
  return Region::V2;
}

WeightedSample MixtureSampler::sample(Rng& rng) const {
  WeightedSample out;
  const double pick = rng.uniform();
  const std::size_t d = spec_.d;
  if (pick < spec_.theta0) {
    out.x = sample_unit_ball(rng, d);
    for (auto& xi : out.x) xi *= spec_.r0;
  } else if (pick < spec_.theta0 + spec_.theta1) {
    out.x = direction(rng, d);
    const double r = (spec_.rT - spec_.r0) * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) + spec_.r0;
    for (auto& xi : out.x) xi *= r;
  } else {
    out.x.resize(d);
    for (std::size_t i = 0; i < d; ++i) out.x[i] = rng.uniform(-spec_.half_widths[i], spec_.half_widths[i]);
  }
  out.t = rng.uniform(0.0, T_);
  out.region = region_of(out.x);
  out.c = corr_[static_cast<int>(out.region)];
  return out;
}

std::vector<WeightedSample> MixtureSampler::sample(Rng& rng, std::size_t n) const {
  std::vector<WeightedSample> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) out.push_back(sample(rng));
  return out;
}

WeightedSample sample_mixture(Rng& rng, const MixtureSpec& spec, double T) { return MixtureSampler(spec, T).sample(rng); }

BoundarySample sample_boundary(Rng& rng, const DomainSpec& domain) {
  domain.validate();
  const std::size_t d = domain.d;
  BoundarySample out{0.0, std::vector<double>(d)};
  // Face area is proportional to prod_{j != i} a_j, i.e. to 1 / a_i.
  double total = 0.0;
  for (double a : domain.half_widths) total += 1.0 / a;
  double pick = rng.uniform() * total;
  std::size_t axis = d - 1;
  for (std::size_t i = 0; i < d; ++i) {
    pick -= 1.0 / domain.half_widths[i];
    if (pick < 0.0) {
      axis = i;
      break;
    }
  }
  const bool upper = rng.uniform() < 0.5;
  for (std::size_t i = 0; i < d; ++i) {
    const double a = domain.half_widths[i];
    out.x[i] = i == axis ? (upper ? a : -a) : rng.uniform(-a, a);
  }
  out.t = rng.uniform(0.0, domain.T);
  return out;
}

WeightedSample sample_uniform(Rng& rng, const DomainSpec& domain) {
  WeightedSample out;
  out.x.resize(domain.d);
  for (std::size_t i = 0; i < domain.d; ++i) out.x[i] = rng.uniform(-domain.half_widths[i], domain.half_widths[i]);
  out.t = rng.uniform(0.0, domain.T);
  out.c = 1.0;
  return out;
}

double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    ks = std::max({ks, u[i] - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - u[i]});
  return ks;
}

SamplerCheck sampler_check(const MixtureSampler& sampler, Rng& rng, std::size_t n,
                           std::vector<WeightedSample>* dump) {
  if (n == 0) throw ContractError("sampler_check needs at least one draw");
  const MixtureSpec& spec = sampler.spec();
  SamplerCheck out;
  out.n = n;
  out.expected = sampler.region_probabilities();
  double sum = 0.0, sum2 = 0.0;
  std::vector<double> radial;
  if (dump) dump->clear();
  const double dd = static_cast<double>(spec.d);
  for (std::size_t i = 0; i < n; ++i) {
    WeightedSample w = sampler.sample(rng);
    ++out.counts[static_cast<int>(w.region)];
    sum += w.c;
    sum2 += w.c * w.c;
    if (w.region == Region::V0) {
      double r2 = 0.0;
      for (double xi : w.x) r2 += xi * xi;
      // (|x| / r0)^d in log form stays representable at d = 50.
      radial.push_back(std::exp(dd * (0.5 * std::log(r2) - std::log(spec.r0))));
    }
    if (dump) dump->push_back(std::move(w));
  }
  const double dn = static_cast<double>(n);
  for (int i = 0; i < 3; ++i) {
    const double p = out.expected[i];
    const double sd = std::sqrt(dn * p * (1.0 - p));
    out.z[i] = sd > 0.0 ? (static_cast<double>(out.counts[i]) - dn * p) / sd : 0.0;
  }
  out.mean_c = sum / dn;
  out.se_c = std::sqrt(std::max(0.0, sum2 / dn - out.mean_c * out.mean_c) / dn);
  out.ks_samples = radial.size();
  out.ks_v0 = radial.size() < 2 ? std::numeric_limits<double>::quiet_NaN() : ks_uniform(std::move(radial));
  return out;
}

void write_samples_csv(std::ostream& os, std::span<const WeightedSample> samples) {
  const std::size_t d = samples.empty() ? 0 : samples.front().x.size();
  os << "t";
  for (std::size_t i = 1; i <= d; ++i) os << ",x_" << i;
  os << ",region,c\n";
  os.precision(17);
  for (const auto& s : samples) {
    os << s.t;
    for (double xi : s.x) os << ',' << xi;
    os << ',' << to_string(s.region) << ',' << s.c << '\n';
  }
}

}  // namespace qpme
