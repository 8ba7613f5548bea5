#include "mortgee/sim.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mortgee/errors.hpp"

namespace mortgee::sim {

namespace {

/// Box-Muller over explicit 53-bit uniforms; fully specified, unlike
/// std::normal_distribution whose algorithm varies across libraries.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform_open() {
    // In (0, 1]: avoids log(0).
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<double> latent_kt(const SimConfig& config) {
  const int n_years = config.years.second - config.years.first + 1;
  NormalSampler normal(config.seed);
  std::vector<double> kt(static_cast<std::size_t>(n_years));
  kt[0] = config.kt_start;
  for (int t = 1; t < n_years; ++t)
    kt[static_cast<std::size_t>(t)] = kt[static_cast<std::size_t>(t - 1)] +
                                      config.kt_drift + config.kt_sigma * normal();
  return kt;
}

std::vector<MortalityRecord> simulate(const SimConfig& config) {
  if (config.countries.empty() || config.genders.empty())
    fail(errc::config, "simulation needs at least one country and gender");
  if (config.ages.first > config.ages.second || config.years.first > config.years.second)
    fail(errc::config, "empty age or year range");
  if (!(config.rho >= 0.0 && config.rho < 1.0))
    fail(errc::config, "simulation rho must be in [0, 1)");
  if (config.noise_corr == CorrelationKind::unstructured)
    fail(errc::config, "simulation supports independence, exchangeable or ar1 noise");

  const int n_years = config.years.second - config.years.first + 1;
  const int n_ages = config.ages.second - config.ages.first + 1;

  // The k_t path consumes the first draws of the stream; cluster noise
  // follows in (country, gender, age, year) order.
  NormalSampler normal(config.seed);
  std::vector<double> kt(static_cast<std::size_t>(n_years));
  kt[0] = config.kt_start;
  for (int t = 1; t < n_years; ++t)
    kt[static_cast<std::size_t>(t)] = kt[static_cast<std::size_t>(t - 1)] +
                                      config.kt_drift + config.kt_sigma * normal();

  auto b_of = [&](int age) {
    if (n_ages == 1) return 0.5 * (config.b_min + config.b_max);
    return config.b_min + (config.b_max - config.b_min) *
                              static_cast<double>(age - config.ages.first) /
                              static_cast<double>(n_ages - 1);
  };

  std::vector<MortalityRecord> records;
  records.reserve(static_cast<std::size_t>(config.countries.size()) *
                  config.genders.size() * static_cast<std::size_t>(n_ages) *
                  static_cast<std::size_t>(n_years));

  for (const auto& country : config.countries) {
    for (const auto& gender : config.genders) {
      for (int age = config.ages.first; age <= config.ages.second; ++age) {
        const double a_x = config.a_base + config.a_slope * age;
        const double b_x = b_of(age);

        // Within-series noise with the requested correlation, unit
        // marginal variance before scaling by sigma.
        std::vector<double> eps(static_cast<std::size_t>(n_years));
        if (config.noise_corr == CorrelationKind::exchangeable && config.rho > 0.0) {
          const double shared = normal();
          for (int t = 0; t < n_years; ++t)
            eps[static_cast<std::size_t>(t)] = std::sqrt(config.rho) * shared +
                                               std::sqrt(1.0 - config.rho) * normal();
        } else if (config.noise_corr == CorrelationKind::ar1 && config.rho != 0.0) {
          eps[0] = normal();
          for (int t = 1; t < n_years; ++t)
            eps[static_cast<std::size_t>(t)] =
                config.rho * eps[static_cast<std::size_t>(t - 1)] +
                std::sqrt(1.0 - config.rho * config.rho) * normal();
        } else {
          for (int t = 0; t < n_years; ++t) eps[static_cast<std::size_t>(t)] = normal();
        }

        for (int t = 0; t < n_years; ++t) {
          const double y = a_x + b_x * kt[static_cast<std::size_t>(t)] +
                           config.sigma * eps[static_cast<std::size_t>(t)];
          MortalityRecord rec;
          rec.country = country;
          rec.gender = gender;
          rec.age = age;
          rec.year = config.years.first + t;
          rec.rate = std::exp(y);
          rec.exposure = 1.0e4 * std::exp(-0.01 * (age - config.ages.first));
          records.push_back(std::move(rec));
        }
      }
    }
  }
  return records;
}

}  // namespace mortgee::sim
