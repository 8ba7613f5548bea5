#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mortgee/dataio.hpp"
#include "mortgee/model_spec.hpp"

namespace mortgee {

/// The mortality covariate: per training year, the average of log death
/// rates over every (country, gender, age) cell.
struct KtSeries {
  std::vector<int> years;     // strictly increasing, no gaps
  std::vector<double> values;

  std::optional<double> at(int year) const;
};

enum class TermRole { intercept_age, intercept_country, intercept_gender, kt, kt2, cohort };

struct ColumnInfo {
  std::string name;
  TermRole role;
  int block;  // block index for age-interacted terms, -1 for main effects
};

/// Per-row bookkeeping carried through to forecasting and output.
struct RowInfo {
  std::string country;
  std::string gender;
  int age = 0;
  int year = 0;
  double kt = 0.0;  // k_t value entering this row
  int block = 0;
};

/// Frozen column layout of a fitted design. Future designs are generated
/// against the same layout so training and forecast columns agree exactly.
struct DesignLayout {
  PopulationMode mode = PopulationMode::single;
  std::vector<std::string> countries;  // sorted; first level is the reference
  std::vector<std::string> genders;    // sorted; first level is the reference
  std::vector<int> ages;               // sorted
  double cohort_center = 0.0;
  bool include_cohort = true;
  // Population labels reported for single-mode forecasts: the training
  // panel's unique country/gender when unique, empty otherwise.
  std::string single_country;
  std::string single_gender;

  int n_blocks() const;
  /// Block index of a (country, gender, age) combination; lexicographic,
  /// country-major. Single mode ignores country/gender. -1 if unknown.
  int block_index(const std::string& country, const std::string& gender, int age) const;
  std::string block_label(int block) const;

  int n_columns() const;
  int kt_column(int block) const;
  int kt2_column(int block) const;
  int cohort_column(int block) const;  // -1 when cohort is excluded
  std::vector<ColumnInfo> make_columns() const;
};

/// Dense predictor matrix plus the vectors a GEE fit needs. Rows align
/// one-to-one with the panel rows that produced it.
struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;  // size 0 for future designs
  Eigen::VectorXd w;
  std::vector<int> cluster;                  // per-row cluster index
  std::vector<std::string> cluster_labels;   // per-cluster display label
  std::vector<double> cluster_mean_weight;   // per-cluster mean training weight
  std::vector<int> wave;                     // per-row wave index (-1 for future rows)
  std::vector<int> wave_years;               // training wave grid
  std::vector<ColumnInfo> columns;
  std::vector<RowInfo> rows;
  DesignLayout layout;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  std::vector<std::string> column_names() const;
};

/// k_t per Lee-Carter convention: the unweighted mean of all cell responses
/// observed at each year. Requires a balanced panel (every year carries the
/// same cell set); summation runs in canonical cluster order so the result
/// is invariant under row permutation of the input.
KtSeries compute_kt(const PanelDataset& panel);

/// Expands the model formula over the panel:
///   single: y_xt  = a_x + b_x k_t + c_x k_t^2 + g_x (t - x - center)
///   multi:  y_cgxt = a_c + a_g + a_x + b_cgx k_t + c_cgx k_t^2 + g_cgx (t - x - center)
/// Age dummies absorb the global intercept; country and gender use
/// first-level reference coding. Column order: main effects, then the kt,
/// kt^2 and cohort interaction blocks, each over blocks in lexicographic
/// order. Rank problems surface at fit time.
DesignMatrix build_design(const PanelDataset& panel, const KtSeries& kt,
                          const ModelSpec& spec);

struct FutureRequest {
  /// (country, gender) pairs; ignored in single mode. Empty means all
  /// training populations.
  std::vector<std::pair<std::string, std::string>> populations;
  std::vector<int> ages;  // empty means all training ages
  std::vector<int> years;
};

/// Rows for every requested (population, age, future year), with the exact
/// training column layout. Categorical levels absent from training are
/// rejected; there is no extrapolation over levels.
DesignMatrix future_design(const DesignMatrix& trained, const FutureRequest& request,
                           const KtSeries& kt_forecast);

}  // namespace mortgee
