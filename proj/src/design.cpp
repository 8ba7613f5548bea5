#include "mortgee/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "mortgee/errors.hpp"

namespace mortgee {

std::optional<double> KtSeries::at(int year) const {
  auto it = std::lower_bound(years.begin(), years.end(), year);
  if (it == years.end() || *it != year) return std::nullopt;
  return values[static_cast<std::size_t>(it - years.begin())];
}

int DesignLayout::n_blocks() const {
  const int a = static_cast<int>(ages.size());
  if (mode == PopulationMode::single) return a;
  return static_cast<int>(countries.size()) * static_cast<int>(genders.size()) * a;
}

int DesignLayout::block_index(const std::string& country, const std::string& gender,
                              int age) const {
  auto ait = std::lower_bound(ages.begin(), ages.end(), age);
  if (ait == ages.end() || *ait != age) return -1;
  const int ai = static_cast<int>(ait - ages.begin());
  if (mode == PopulationMode::single) return ai;
  auto cit = std::find(countries.begin(), countries.end(), country);
  auto git = std::find(genders.begin(), genders.end(), gender);
  if (cit == countries.end() || git == genders.end()) return -1;
  const int ci = static_cast<int>(cit - countries.begin());
  const int gi = static_cast<int>(git - genders.begin());
  const int a = static_cast<int>(ages.size());
  return (ci * static_cast<int>(genders.size()) + gi) * a + ai;
}

std::string DesignLayout::block_label(int block) const {
  const int a = static_cast<int>(ages.size());
  if (mode == PopulationMode::single) return "age" + std::to_string(ages[block]);
  const int ai = block % a;
  const int gi = (block / a) % static_cast<int>(genders.size());
  const int ci = block / (a * static_cast<int>(genders.size()));
  return countries[ci] + ":" + genders[gi] + ":age" + std::to_string(ages[ai]);
}

int DesignLayout::n_columns() const {
  const int a = static_cast<int>(ages.size());
  const int b = n_blocks();
  const int per_block = include_cohort ? 3 : 2;
  if (mode == PopulationMode::single) return a + per_block * b;
  return static_cast<int>(countries.size()) - 1 + static_cast<int>(genders.size()) - 1 +
         a + per_block * b;
}

namespace {
int main_effect_columns(const DesignLayout& l) {
  const int a = static_cast<int>(l.ages.size());
  if (l.mode == PopulationMode::single) return a;
  return static_cast<int>(l.countries.size()) - 1 +
         static_cast<int>(l.genders.size()) - 1 + a;
}
}  // namespace

int DesignLayout::kt_column(int block) const { return main_effect_columns(*this) + block; }

int DesignLayout::kt2_column(int block) const {
  return main_effect_columns(*this) + n_blocks() + block;
}

int DesignLayout::cohort_column(int block) const {
  if (!include_cohort) return -1;
  return main_effect_columns(*this) + 2 * n_blocks() + block;
}

std::vector<ColumnInfo> DesignLayout::make_columns() const {
  std::vector<ColumnInfo> cols;
  cols.reserve(static_cast<std::size_t>(n_columns()));
  if (mode == PopulationMode::multi) {
    for (std::size_t i = 1; i < countries.size(); ++i)
      cols.push_back({"country" + countries[i], TermRole::intercept_country, -1});
    for (std::size_t i = 1; i < genders.size(); ++i)
      cols.push_back({"gender" + genders[i], TermRole::intercept_gender, -1});
  }
  for (int age : ages)
    cols.push_back({"age" + std::to_string(age), TermRole::intercept_age, -1});
  const int b = n_blocks();
  for (int k = 0; k < b; ++k) cols.push_back({block_label(k) + ":kt", TermRole::kt, k});
  for (int k = 0; k < b; ++k) cols.push_back({block_label(k) + ":kt2", TermRole::kt2, k});
  if (include_cohort)
    for (int k = 0; k < b; ++k)
      cols.push_back({block_label(k) + ":cohort", TermRole::cohort, k});
  return cols;
}

std::vector<std::string> DesignMatrix::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

KtSeries compute_kt(const PanelDataset& panel) {
  if (panel.n_rows() == 0) fail(errc::empty_input, "empty panel");
  if (!panel.balanced())
    fail(errc::ragged_panel,
         "k_t needs every training year to carry the same cell set");

  const auto& years = panel.years();
  const std::size_t n_years = years.size();
  const std::size_t n_cells = panel.n_clusters();

  KtSeries kt;
  kt.years = years;
  kt.values.assign(n_years, 0.0);
  // Clusters are stored in sorted key order and each holds one row per
  // year, so this summation order is canonical.
  for (std::size_t c = 0; c < n_cells; ++c) {
    const auto rows = panel.cluster(c);
    for (std::size_t t = 0; t < n_years; ++t) kt.values[t] += rows[t].y;
  }
  for (double& v : kt.values) v /= static_cast<double>(n_cells);
  return kt;
}

DesignMatrix build_design(const PanelDataset& panel, const KtSeries& kt,
                          const ModelSpec& spec) {
  if (panel.n_rows() == 0) fail(errc::empty_input, "empty panel");

  DesignLayout layout;
  layout.mode = spec.population_mode;
  layout.include_cohort = spec.include_cohort;
  {
    std::set<std::string> countries, genders;
    std::set<int> ages;
    for (const auto& o : panel.rows()) {
      countries.insert(o.country);
      genders.insert(o.gender);
      ages.insert(o.age);
    }
    if (spec.population_mode == PopulationMode::multi) {
      layout.countries.assign(countries.begin(), countries.end());
      layout.genders.assign(genders.begin(), genders.end());
    } else {
      layout.single_country = countries.size() == 1 ? *countries.begin() : "";
      layout.single_gender = genders.size() == 1 ? *genders.begin() : "";
    }
    layout.ages.assign(ages.begin(), ages.end());
  }

  if (spec.cohort_centering) {
    layout.cohort_center = *spec.cohort_centering;
  } else {
    double mean_cohort = 0.0;
    for (const auto& o : panel.rows()) mean_cohort += o.year - o.age;
    layout.cohort_center = std::round(mean_cohort / static_cast<double>(panel.n_rows()));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(panel.n_rows());
  const Eigen::Index p = layout.n_columns();

  DesignMatrix d;
  d.layout = layout;
  d.columns = layout.make_columns();
  d.X = Eigen::MatrixXd::Zero(n, p);
  d.y.resize(n);
  d.w.resize(n);
  d.cluster.resize(static_cast<std::size_t>(n));
  d.wave.resize(static_cast<std::size_t>(n));
  d.wave_years = panel.years();
  d.rows.resize(static_cast<std::size_t>(n));

  // Column positions of the main effects, resolved once.
  std::unordered_map<int, int> age_col;
  for (std::size_t i = 0; i < layout.ages.size(); ++i)
    age_col[layout.ages[i]] = (layout.mode == PopulationMode::multi
                                   ? static_cast<int>(layout.countries.size()) - 1 +
                                         static_cast<int>(layout.genders.size()) - 1
                                   : 0) +
                              static_cast<int>(i);

  Eigen::Index row = 0;
  for (std::size_t c = 0; c < panel.n_clusters(); ++c) {
    d.cluster_labels.push_back(panel.cluster_label(c));
    const auto cluster_rows = panel.cluster(c);
    double wsum = 0.0;
    for (const auto& o : cluster_rows) {
      const auto ktv = kt.at(o.year);
      if (!ktv)
        fail(errc::kt_coverage, "k_t has no value for year " + std::to_string(o.year));
      const int block = layout.block_index(o.country, o.gender, o.age);

      d.X(row, age_col.at(o.age)) = 1.0;
      if (layout.mode == PopulationMode::multi) {
        auto cit = std::find(layout.countries.begin(), layout.countries.end(), o.country);
        auto git = std::find(layout.genders.begin(), layout.genders.end(), o.gender);
        const int ci = static_cast<int>(cit - layout.countries.begin());
        const int gi = static_cast<int>(git - layout.genders.begin());
        if (ci > 0) d.X(row, ci - 1) = 1.0;
        if (gi > 0) d.X(row, static_cast<int>(layout.countries.size()) - 1 + gi - 1) = 1.0;
      }
      d.X(row, layout.kt_column(block)) = *ktv;
      d.X(row, layout.kt2_column(block)) = *ktv * *ktv;
      if (layout.include_cohort)
        d.X(row, layout.cohort_column(block)) =
            static_cast<double>(o.year - o.age) - layout.cohort_center;

      d.y(row) = o.y;
      d.w(row) = o.weight;
      wsum += o.weight;
      d.cluster[static_cast<std::size_t>(row)] = static_cast<int>(c);
      d.wave[static_cast<std::size_t>(row)] = panel.wave_index(o.year);
      d.rows[static_cast<std::size_t>(row)] =
          RowInfo{o.country, o.gender, o.age, o.year, *ktv, block};
      ++row;
    }
    d.cluster_mean_weight.push_back(wsum / static_cast<double>(cluster_rows.size()));
  }
  return d;
}

DesignMatrix future_design(const DesignMatrix& trained, const FutureRequest& request,
                           const KtSeries& kt_forecast) {
  const DesignLayout& layout = trained.layout;

  std::vector<std::pair<std::string, std::string>> populations = request.populations;
  if (layout.mode == PopulationMode::single) {
    populations = {{layout.single_country, layout.single_gender}};
  } else if (populations.empty()) {
    for (const auto& c : layout.countries)
      for (const auto& g : layout.genders) populations.emplace_back(c, g);
  } else {
    for (const auto& [c, g] : populations) {
      if (std::find(layout.countries.begin(), layout.countries.end(), c) ==
          layout.countries.end())
        fail(errc::unknown_level, "country '" + c + "' was not in the training data");
      if (std::find(layout.genders.begin(), layout.genders.end(), g) ==
          layout.genders.end())
        fail(errc::unknown_level, "gender '" + g + "' was not in the training data");
    }
  }

  std::vector<int> ages = request.ages.empty() ? layout.ages : request.ages;
  for (int age : ages)
    if (!std::binary_search(layout.ages.begin(), layout.ages.end(), age))
      fail(errc::unknown_level,
           "age " + std::to_string(age) + " was not in the training data");

  for (int year : request.years)
    if (!kt_forecast.at(year))
      fail(errc::kt_coverage,
           "k_t forecast has no value for year " + std::to_string(year));

  std::unordered_map<std::string, int> cluster_of_label;
  for (std::size_t i = 0; i < trained.cluster_labels.size(); ++i)
    cluster_of_label[trained.cluster_labels[i]] = static_cast<int>(i);

  const Eigen::Index n = static_cast<Eigen::Index>(populations.size()) *
                         static_cast<Eigen::Index>(ages.size()) *
                         static_cast<Eigen::Index>(request.years.size());
  const Eigen::Index p = layout.n_columns();

  DesignMatrix d;
  d.layout = layout;
  d.columns = layout.make_columns();
  d.X = Eigen::MatrixXd::Zero(n, p);
  d.y.resize(0);
  d.w.resize(n);
  d.cluster.resize(static_cast<std::size_t>(n));
  d.wave.assign(static_cast<std::size_t>(n), -1);
  d.wave_years = trained.wave_years;
  d.cluster_labels = trained.cluster_labels;
  d.cluster_mean_weight = trained.cluster_mean_weight;
  d.rows.resize(static_cast<std::size_t>(n));

  std::unordered_map<int, int> age_col;
  for (std::size_t i = 0; i < layout.ages.size(); ++i)
    age_col[layout.ages[i]] = (layout.mode == PopulationMode::multi
                                   ? static_cast<int>(layout.countries.size()) - 1 +
                                         static_cast<int>(layout.genders.size()) - 1
                                   : 0) +
                              static_cast<int>(i);

  Eigen::Index row = 0;
  for (const auto& [country, gender] : populations) {
    for (int age : ages) {
      const int block = layout.block_index(country, gender, age);
      const std::string label =
          layout.mode == PopulationMode::multi
              ? country + ":" + gender + ":" + std::to_string(age)
              : std::to_string(age);
      auto cl = cluster_of_label.find(label);
      if (cl == cluster_of_label.end())
        fail(errc::unknown_level, "cluster '" + label + "' was not in the training data");

      for (int year : request.years) {
        const double ktv = *kt_forecast.at(year);
        d.X(row, age_col.at(age)) = 1.0;
        if (layout.mode == PopulationMode::multi) {
          auto cit = std::find(layout.countries.begin(), layout.countries.end(), country);
          auto git = std::find(layout.genders.begin(), layout.genders.end(), gender);
          const int ci = static_cast<int>(cit - layout.countries.begin());
          const int gi = static_cast<int>(git - layout.genders.begin());
          if (ci > 0) d.X(row, ci - 1) = 1.0;
          if (gi > 0)
            d.X(row, static_cast<int>(layout.countries.size()) - 1 + gi - 1) = 1.0;
        }
        d.X(row, layout.kt_column(block)) = ktv;
        d.X(row, layout.kt2_column(block)) = ktv * ktv;
        if (layout.include_cohort)
          d.X(row, layout.cohort_column(block)) =
              static_cast<double>(year - age) - layout.cohort_center;

        d.w(row) = trained.cluster_mean_weight[static_cast<std::size_t>(cl->second)];
        d.cluster[static_cast<std::size_t>(row)] = cl->second;
        d.rows[static_cast<std::size_t>(row)] = RowInfo{country, gender, age, year, ktv, block};
        ++row;
      }
    }
  }
  return d;
}

}  // namespace mortgee
