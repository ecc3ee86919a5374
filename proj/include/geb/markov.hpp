#pragma once

#include <span>
#include <string>
#include <vector>

#include "geb/rng.hpp"

namespace geb {

/// Row-stochastic transition matrix over a finite state space.
class TransitionKernel {
 public:
  TransitionKernel(int states, std::vector<double> rows);

  int states() const { return states_; }
  double at(int from, int to) const {
    return rows_[static_cast<std::size_t>(from) * states_ + to];
  }
  const std::vector<double>& rows() const { return rows_; }

  std::string to_json_string() const;
  static TransitionKernel from_json_string(const std::string& text);

 private:
  int states_;
  std::vector<double> rows_;  // row-major
};

struct KernelValidation {
  bool irreducible = false;
  bool aperiodic = false;
};

struct StationaryDistribution {
  std::vector<double> probabilities;
};

/// Spectral mixing constants: after n steps the distance to stationarity
/// decays like lambda^n, and the epoch-average reward bias is at most
/// c_mix / tau.
struct MixingProfile {
  double lambda = 0.0;
  double c_mix = 0.0;
  double pi_min = 1.0;
};

/// Irreducibility via strong connectivity of the positive-entry digraph,
/// aperiodicity via the gcd of cycle lengths through state 0.
KernelValidation validate(const TransitionKernel& kernel);

/// Unique pi with pi P = pi, sum pi = 1 (dense solve). Throws on reducible
/// chains.
StationaryDistribution stationary(const TransitionKernel& kernel);

/// Multiplicative reversibilization M = P * P~ with
/// P~(s,s') = pi(s') P(s',s) / pi(s). Reversible, shares pi with P, and has
/// real non-negative eigenvalues.
TransitionKernel reversiblization(const TransitionKernel& kernel);

MixingProfile mixing_profile(const TransitionKernel& kernel);

/// Samples the successor of `state` from its kernel row.
int step(const TransitionKernel& kernel, int state, Rng& rng);

/// Chi-squared distance sum (dist - pi)^2 / pi. Throws if pi has zero mass.
double chi_squared(std::span<const double> dist, const StationaryDistribution& pi);

}  // namespace geb
