#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mortgee/dataio.hpp"
#include "mortgee/model_spec.hpp"

namespace mortgee::sim {

/// Lee-Carter-style generator: y_cgxt = a_x + b_x k_t + eps, with k_t a
/// random walk with drift and eps correlated within each (country, gender,
/// age) series. Output is byte-deterministic for a given seed: sampling
/// uses an explicit Box-Muller transform over mt19937_64 draws, in a fixed
/// generation order.
struct SimConfig {
  std::vector<std::string> countries{"SIM"};
  std::vector<std::string> genders{"m"};
  std::pair<int, int> ages{50, 69};
  std::pair<int, int> years{1991, 2019};
  CorrelationKind noise_corr = CorrelationKind::exchangeable;  // or ar1/independence
  double rho = 0.0;
  double sigma = 0.05;  // marginal noise sd on the log scale
  double kt_start = 0.0;
  double kt_drift = -0.025;
  double kt_sigma = 0.005;  // random-walk innovation sd
  double a_base = -9.5;     // a_x = a_base + a_slope * x
  double a_slope = 0.085;
  double b_min = 0.6;  // b_x linear from b_min to b_max over the age range
  double b_max = 1.4;
  std::uint64_t seed = 1;
};

std::vector<MortalityRecord> simulate(const SimConfig& config);

/// The latent k_t path used by `simulate` for the same config (same seed
/// stream); exposed for calibration checks.
std::vector<double> latent_kt(const SimConfig& config);

}  // namespace mortgee::sim
