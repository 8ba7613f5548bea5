#include "mortgee/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "mortgee/csv.hpp"
#include "mortgee/errors.hpp"

namespace mortgee {

RwDriftModel fit_rw_drift(const KtSeries& kt) {
  const std::size_t n = kt.values.size();
  if (n < 2 || kt.years.size() != n)
    fail(errc::too_short, "random walk with drift needs at least 2 training years");
  for (std::size_t i = 1; i < n; ++i)
    if (kt.years[i] != kt.years[i - 1] + 1)
      fail(errc::bad_value, "k_t years must be consecutive");

  RwDriftModel m;
  m.n_train = static_cast<int>(n);
  m.last_value = kt.values.back();
  m.last_year = kt.years.back();
  // Telescoping mean of first differences.
  m.drift = (kt.values.back() - kt.values.front()) / static_cast<double>(n - 1);

  if (n > 2) {
    double ss = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = kt.values[i] - kt.values[i - 1] - m.drift;
      ss += d * d;
    }
    m.sigma = std::sqrt(ss / static_cast<double>(n - 2));
  }
  return m;
}

KtForecast forecast_kt(const RwDriftModel& model, int horizon,
                       bool include_drift_uncertainty) {
  if (horizon < 1) fail(errc::config, "forecast horizon must be >= 1");
  KtForecast f;
  f.years.reserve(static_cast<std::size_t>(horizon));
  for (int s = 1; s <= horizon; ++s) {
    const auto step = static_cast<double>(s);
    f.years.push_back(model.last_year + s);
    f.values.push_back(model.last_value + step * model.drift);
    double var = step * model.sigma * model.sigma;
    if (include_drift_uncertainty && model.n_diff() > 0)
      var += step * step * model.sigma * model.sigma / model.n_diff();
    f.variances.push_back(var);
  }
  return f;
}

std::string to_string(IntervalMode mode) {
  switch (mode) {
    case IntervalMode::mean: return "mean";
    case IntervalMode::prediction: return "prediction";
    case IntervalMode::prediction_kt: return "prediction+kt";
  }
  return "?";
}

std::optional<IntervalMode> interval_mode_from_string(const std::string& s) {
  if (s == "mean") return IntervalMode::mean;
  if (s == "prediction") return IntervalMode::prediction;
  if (s == "prediction+kt") return IntervalMode::prediction_kt;
  return std::nullopt;
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0))
    fail(errc::bad_value, "quantile probability must be in (0, 1)");

  // Acklam's rational approximation in three regions.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (prob < p_low) {
    const double q = std::sqrt(-2.0 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (prob <= 1.0 - p_low) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // One Halley step against the erfc-based CDF.
  const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - prob;
  const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

ForecastTable predict(const GeeFit& fit, const DesignMatrix& x_future,
                      std::span<const double> kt_variance, double level,
                      IntervalMode mode) {
  if (x_future.column_names() != fit.terms)
    fail(errc::column_mismatch, "future design columns do not match the fit");
  const Eigen::Index n = x_future.n();
  if (!kt_variance.empty() && kt_variance.size() != static_cast<std::size_t>(n))
    fail(errc::dimension, "kt variance vector does not match the future design rows");
  if (!(level > 0.0 && level < 1.0)) fail(errc::config, "level must be in (0, 1)");

  // Hard-coded 95% quantile; other levels via the rational approximation.
  const double z = level == 0.95 ? 1.959964 : normal_quantile(0.5 * (1.0 + level));

  ForecastTable table;
  table.level = level;
  table.rows.reserve(static_cast<std::size_t>(n));

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& info = x_future.rows[static_cast<std::size_t>(i)];
    const Eigen::VectorXd x = x_future.X.row(i).transpose();
    const double point = x.dot(fit.beta);
    double var = std::max(0.0, x.dot(fit.v_robust * x));
    if (mode == IntervalMode::prediction || mode == IntervalMode::prediction_kt)
      var += fit.phi / x_future.w(i);
    if (mode == IntervalMode::prediction_kt && !kt_variance.empty()) {
      const double b = fit.beta(x_future.layout.kt_column(info.block));
      const double c = fit.beta(x_future.layout.kt2_column(info.block));
      const double dydk = b + 2.0 * c * info.kt;
      var += dydk * dydk * kt_variance[static_cast<std::size_t>(i)];
    }
    const double half = z * std::sqrt(var);

    ForecastRow row;
    row.country = info.country;
    row.gender = info.gender;
    row.age = info.age;
    row.year = info.year;
    row.log_point = point;
    row.log_lo = point - half;
    row.log_hi = point + half;
    row.rate_point = std::exp(row.log_point);
    row.rate_lo = std::exp(row.log_lo);
    row.rate_hi = std::exp(row.log_hi);
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_forecast_csv(std::ostream& os, const ForecastTable& table) {
  os << "country,gender,age,year,log_point,log_lo95,log_hi95,"
        "rate_point,rate_lo95,rate_hi95\n";
  for (const auto& r : table.rows) {
    os << r.country << ',' << r.gender << ',' << r.age << ',' << r.year << ','
       << csv::fmt17(r.log_point) << ',' << csv::fmt17(r.log_lo) << ','
       << csv::fmt17(r.log_hi) << ',' << csv::fmt17(r.rate_point) << ','
       << csv::fmt17(r.rate_lo) << ',' << csv::fmt17(r.rate_hi) << '\n';
  }
}

}  // namespace mortgee
