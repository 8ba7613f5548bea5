#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mortgee/design.hpp"
#include "mortgee/gee.hpp"

namespace mortgee {

/// Random walk with drift fitted to the mortality covariate.
struct RwDriftModel {
  double drift = 0.0;  // mean first difference, (k_T - k_0)/T
  double sigma = 0.0;  // sd of first differences about the drift, n-1 denominator
  double last_value = 0.0;
  int last_year = 0;
  int n_train = 0;

  int n_diff() const { return n_train - 1; }
};

RwDriftModel fit_rw_drift(const KtSeries& kt);

/// Point forecasts k_T + s*drift with per-step variance s*sigma^2, plus
/// optionally the drift-estimation term s^2 sigma^2 / n_diff.
struct KtForecast {
  std::vector<int> years;
  std::vector<double> values;
  std::vector<double> variances;

  KtSeries series() const { return {years, values}; }
};

KtForecast forecast_kt(const RwDriftModel& model, int horizon,
                       bool include_drift_uncertainty = false);

/// What the interval half-width covers beyond the mean:
///  mean:          parameter uncertainty only (x' V_robust x)
///  prediction:    plus residual variance phi/w (default; bands are meant
///                 to cover observed rates)
///  prediction_kt: plus propagated k_t forecast variance via the row's
///                 d(yhat)/d(kt) = b + 2 c kt
enum class IntervalMode { mean, prediction, prediction_kt };

std::string to_string(IntervalMode mode);
std::optional<IntervalMode> interval_mode_from_string(const std::string& s);

struct ForecastRow {
  std::string country;
  std::string gender;
  int age = 0;
  int year = 0;
  double log_point = 0.0, log_lo = 0.0, log_hi = 0.0;
  double rate_point = 0.0, rate_lo = 0.0, rate_hi = 0.0;
};

struct ForecastTable {
  std::vector<ForecastRow> rows;
  double level = 0.95;
};

/// Scores future design rows and attaches intervals at the given level.
/// kt_variance is per-row (aligned with x_future); empty means zero.
ForecastTable predict(const GeeFit& fit, const DesignMatrix& x_future,
                      std::span<const double> kt_variance, double level = 0.95,
                      IntervalMode mode = IntervalMode::prediction);

/// Fixed header: country,gender,age,year,log_point,log_lo95,log_hi95,
/// rate_point,rate_lo95,rate_hi95.
void write_forecast_csv(std::ostream& os, const ForecastTable& table);

/// Standard normal quantile. Rational approximation (Acklam) polished by
/// one Halley step of the erfc-based CDF; absolute error well under 1e-8.
double normal_quantile(double prob);

}  // namespace mortgee
