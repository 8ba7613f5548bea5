#pragma once

#include <optional>
#include <string>
#include <utility>

namespace mortgee {

enum class PopulationMode { single, multi };

enum class CorrelationKind { independence, exchangeable, ar1, unstructured };

std::string to_string(PopulationMode mode);
std::string to_string(CorrelationKind kind);
std::optional<PopulationMode> population_mode_from_string(const std::string& s);
std::optional<CorrelationKind> correlation_kind_from_string(const std::string& s);

/// Declarative description of one model run: clustering, training window,
/// correlation structure and weighting.
struct ModelSpec {
  PopulationMode population_mode = PopulationMode::single;
  CorrelationKind correlation = CorrelationKind::exchangeable;
  bool weighted = false;
  std::pair<int, int> age_range{0, 110};     // inclusive
  std::pair<int, int> train_years{0, 9999};  // inclusive
  /// Constant subtracted from the cohort covariate (t - x).
  /// Unset means auto: the training-mean cohort rounded to an integer.
  std::optional<double> cohort_centering;
  /// The age-modulated cohort term can be dropped; with a mortality
  /// covariate that is exactly linear in calendar time the cohort column
  /// is collinear with the intercept/k_t block and the fit is singular.
  bool include_cohort = true;

  bool valid_ranges() const {
    return age_range.first <= age_range.second &&
           train_years.first <= train_years.second;
  }
};

}  // namespace mortgee
