#include "mortgee/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "mortgee/csv.hpp"
#include "mortgee/errors.hpp"

namespace mortgee {

namespace {

bool in_range(int v, const std::optional<std::pair<int, int>>& r) {
  return !r || (v >= r->first && v <= r->second);
}

[[noreturn]] void bad_value(std::size_t line_no, const std::string& column,
                            const std::string& reason) {
  fail(errc::bad_value,
       "line " + std::to_string(line_no) + ", column '" + column + "': " + reason);
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (csv::trim(header[i]) == name) return static_cast<int>(i);
  return -1;
}

int require_column(const std::vector<std::string>& header, const std::string& name) {
  int idx = find_column(header, name);
  if (idx < 0) fail(errc::missing_column, name);
  return idx;
}

void check_duplicates(const std::vector<MortalityRecord>& records) {
  std::set<std::tuple<std::string, std::string, int, int>> seen;
  for (const auto& r : records) {
    if (!seen.emplace(r.country, r.gender, r.age, r.year).second)
      fail(errc::duplicate_key, r.country + "," + r.gender + "," +
                                    std::to_string(r.year) + "," + std::to_string(r.age));
  }
}

}  // namespace

std::vector<MortalityRecord> load_csv(const std::string& path, const CsvSchema& schema,
                                      const RecordFilter& filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, path);

  std::string line;
  if (!std::getline(in, line)) fail(errc::empty_input, path + ": no header row");
  const auto header = csv::split(line);

  const int c_country = require_column(header, schema.country);
  const int c_gender = require_column(header, schema.gender);
  const int c_year = require_column(header, schema.year);
  const int c_age = require_column(header, schema.age);
  const int c_rate = require_column(header, schema.rate);
  const int c_exposure = find_column(header, schema.exposure);

  std::vector<MortalityRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    auto field = [&](int idx) -> std::string_view {
      return idx >= 0 && idx < static_cast<int>(fields.size()) ? fields[idx]
                                                               : std::string_view{};
    };

    const auto year = csv::parse_int(field(c_year));
    if (!year) bad_value(line_no, schema.year, "not an integer");
    const auto age = csv::parse_int(field(c_age));
    if (!age) bad_value(line_no, schema.age, "not an integer");
    if (!in_range(static_cast<int>(*age), filter.ages) ||
        !in_range(static_cast<int>(*year), filter.years))
      continue;

    MortalityRecord rec;
    rec.country = csv::trim(field(c_country));
    rec.gender = csv::trim(field(c_gender));
    rec.year = static_cast<int>(*year);
    rec.age = static_cast<int>(*age);

    const auto rate = csv::parse_double(field(c_rate));
    if (!rate) bad_value(line_no, schema.rate, "empty or not a number");
    if (!(*rate > 0.0) || !std::isfinite(*rate))
      bad_value(line_no, schema.rate, "rate must be a positive real (log undefined)");
    rec.rate = *rate;

    if (c_exposure >= 0) {
      const auto raw = field(c_exposure);
      if (!csv::trim(raw).empty()) {
        const auto expo = csv::parse_double(raw);
        if (!expo) bad_value(line_no, schema.exposure, "not a number");
        if (!(*expo > 0.0)) bad_value(line_no, schema.exposure, "exposure must be positive");
        rec.exposure = *expo;
      }
    }
    records.push_back(std::move(rec));
  }

  check_duplicates(records);
  return records;
}

std::vector<MortalityRecord> load_mx(const std::string& path,
                                     const std::string& country_label, MxSeries series,
                                     const RecordFilter& filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, path);

  auto tokenize = [](const std::string& line) {
    if (line.find(',') != std::string::npos) return csv::split(line);
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
  };

  // Header may follow preamble lines (HMD files carry a title line).
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    header = tokenize(line);
    if (find_column(header, "Year") >= 0 && find_column(header, "Age") >= 0) break;
    header.clear();
  }
  if (header.empty())
    fail(errc::missing_column, "Year/Age header not found in mx file " + path);

  const int c_year = require_column(header, "Year");
  const int c_age = require_column(header, "Age");
  const int c_female = find_column(header, "Female");
  const int c_male = find_column(header, "Male");
  const int c_total = find_column(header, "Total");

  struct Col {
    int idx;
    const char* gender;
  };
  std::vector<Col> cols;
  if (series == MxSeries::female || series == MxSeries::all) {
    if (c_female < 0) fail(errc::missing_column, "Female");
    cols.push_back({c_female, "f"});
  }
  if (series == MxSeries::male || series == MxSeries::all) {
    if (c_male < 0) fail(errc::missing_column, "Male");
    cols.push_back({c_male, "m"});
  }
  if (series == MxSeries::total || series == MxSeries::all) {
    if (c_total < 0) fail(errc::missing_column, "Total");
    cols.push_back({c_total, "t"});
  }

  std::vector<MortalityRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = tokenize(line);
    if (fields.empty() || (fields.size() == 1 && csv::trim(fields[0]).empty())) continue;
    auto field = [&](int idx) -> std::string {
      return idx >= 0 && idx < static_cast<int>(fields.size()) ? csv::trim(fields[idx])
                                                               : std::string{};
    };

    const auto year = csv::parse_int(field(c_year));
    if (!year) bad_value(line_no, "Year", "not an integer");
    std::string age_str = field(c_age);
    if (age_str.size() > 1 && age_str.back() == '+') age_str.pop_back();  // "110+"
    const auto age = csv::parse_int(age_str);
    if (!age) bad_value(line_no, "Age", "not an integer");
    if (!in_range(static_cast<int>(*age), filter.ages) ||
        !in_range(static_cast<int>(*year), filter.years))
      continue;

    for (const auto& col : cols) {
      const std::string cell = field(col.idx);
      if (cell.empty() || cell == ".")
        bad_value(line_no, col.gender, "missing rate cell");
      const auto rate = csv::parse_double(cell);
      if (!rate) bad_value(line_no, col.gender, "not a number");
      if (!(*rate > 0.0) || !std::isfinite(*rate))
        bad_value(line_no, col.gender, "rate must be a positive real (log undefined)");
      MortalityRecord rec;
      rec.country = country_label;
      rec.gender = col.gender;
      rec.year = static_cast<int>(*year);
      rec.age = static_cast<int>(*age);
      rec.rate = *rate;
      records.push_back(std::move(rec));
    }
  }

  check_duplicates(records);
  return records;
}

void write_records_csv(std::ostream& os, std::span<const MortalityRecord> records) {
  os << "country,gender,year,age,rate,exposure\n";
  for (const auto& r : records) {
    os << r.country << ',' << r.gender << ',' << r.year << ',' << r.age << ','
       << csv::fmt17(r.rate) << ',';
    if (r.exposure) os << csv::fmt17(*r.exposure);
    os << '\n';
  }
}

PanelDataset PanelDataset::build(std::vector<PanelObservation> rows, PopulationMode mode) {
  PanelDataset panel;
  panel.mode_ = mode;

  auto key_of = [mode](const PanelObservation& o) -> ClusterKey {
    if (mode == PopulationMode::multi) return {o.country, o.gender, o.age};
    return {std::string{}, std::string{}, o.age};
  };

  std::stable_sort(rows.begin(), rows.end(),
                   [&](const PanelObservation& a, const PanelObservation& b) {
                     auto ka = key_of(a), kb = key_of(b);
                     if (ka != kb) return ka < kb;
                     return a.year < b.year;
                   });

  for (const auto& o : rows) {
    if (!std::isfinite(o.y))
      fail(errc::bad_value, "non-finite response in panel row");
    if (!(o.weight > 0.0))
      fail(errc::bad_value, "non-positive weight in panel row");
  }

  std::set<int> year_set;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    year_set.insert(rows[i].year);
    const auto key = key_of(rows[i]);
    if (i == 0 || key != panel.cluster_keys_.back()) {
      panel.cluster_keys_.push_back(key);
      panel.cluster_start_.push_back(i);
      panel.cluster_size_.push_back(1);
    } else {
      if (rows[i].year == rows[i - 1].year) {
        std::ostringstream msg;
        msg << "cluster " << std::get<0>(key) << ":" << std::get<1>(key) << ":"
            << std::get<2>(key) << " has duplicate wave " << rows[i].year;
        fail(errc::inconsistent_panel, msg.str());
      }
      ++panel.cluster_size_.back();
    }
  }
  panel.years_.assign(year_set.begin(), year_set.end());
  panel.rows_ = std::move(rows);
  return panel;
}

std::span<const PanelObservation> PanelDataset::cluster(std::size_t c) const {
  return {rows_.data() + cluster_start_[c], cluster_size_[c]};
}

std::string PanelDataset::cluster_label(std::size_t c) const {
  const auto& [country, gender, age] = cluster_keys_[c];
  if (mode_ == PopulationMode::multi)
    return country + ":" + gender + ":" + std::to_string(age);
  return std::to_string(age);
}

int PanelDataset::wave_index(int year) const {
  auto it = std::lower_bound(years_.begin(), years_.end(), year);
  if (it == years_.end() || *it != year) return -1;
  return static_cast<int>(it - years_.begin());
}

bool PanelDataset::balanced() const {
  // Within-cluster years are strictly increasing and drawn from the grid,
  // so a cluster covers the grid iff its size matches.
  return std::all_of(cluster_size_.begin(), cluster_size_.end(),
                     [&](std::size_t n) { return n == years_.size(); });
}

PanelDataset to_panel(std::span<const MortalityRecord> records, const ModelSpec& spec) {
  if (!spec.valid_ranges()) fail(errc::config, "empty or inverted age/train range");

  std::vector<const MortalityRecord*> kept;
  for (const auto& r : records) {
    if (r.age < spec.age_range.first || r.age > spec.age_range.second) continue;
    if (r.year < spec.train_years.first || r.year > spec.train_years.second) continue;
    kept.push_back(&r);
  }
  if (kept.empty()) fail(errc::empty_input, "no records in the training window");

  double mean_exposure = 0.0;
  if (spec.weighted) {
    for (const auto* r : kept) {
      if (!r->exposure)
        fail(errc::missing_exposure,
             "weighting enabled but exposure missing for " + r->country + ":" +
                 r->gender + ":" + std::to_string(r->age) + ":" + std::to_string(r->year));
      mean_exposure += *r->exposure;
    }
    mean_exposure /= static_cast<double>(kept.size());
  }

  std::vector<PanelObservation> rows;
  rows.reserve(kept.size());
  for (const auto* r : kept) {
    if (!(r->rate > 0.0)) fail(errc::bad_value, "rate must be positive");
    PanelObservation o;
    o.country = r->country;
    o.gender = r->gender;
    o.age = r->age;
    o.year = r->year;
    o.y = std::log(r->rate);
    o.weight = spec.weighted ? *r->exposure / mean_exposure : 1.0;
    rows.push_back(std::move(o));
  }
  return PanelDataset::build(std::move(rows), spec.population_mode);
}

void write_panel_csv(std::ostream& os, const PanelDataset& panel) {
  os << "country,gender,age,year,y,weight\n";
  for (const auto& o : panel.rows())
    os << o.country << ',' << o.gender << ',' << o.age << ',' << o.year << ','
       << csv::fmt17(o.y) << ',' << csv::fmt17(o.weight) << '\n';
}

PanelDataset read_panel_csv(std::istream& is, PopulationMode mode) {
  std::string line;
  if (!std::getline(is, line)) fail(errc::empty_input, "no header row");
  const auto header = csv::split(line);
  const int c_country = require_column(header, "country");
  const int c_gender = require_column(header, "gender");
  const int c_age = require_column(header, "age");
  const int c_year = require_column(header, "year");
  const int c_y = require_column(header, "y");
  const int c_weight = require_column(header, "weight");

  std::vector<PanelObservation> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    auto field = [&](int idx) -> std::string_view {
      return idx < static_cast<int>(fields.size()) ? fields[idx] : std::string_view{};
    };
    PanelObservation o;
    o.country = csv::trim(field(c_country));
    o.gender = csv::trim(field(c_gender));
    const auto age = csv::parse_int(field(c_age));
    const auto year = csv::parse_int(field(c_year));
    const auto y = csv::parse_double(field(c_y));
    const auto w = csv::parse_double(field(c_weight));
    if (!age || !year || !y || !w)
      bad_value(line_no, "panel", "unparseable field");
    o.age = static_cast<int>(*age);
    o.year = static_cast<int>(*year);
    o.y = *y;
    o.weight = *w;
    rows.push_back(std::move(o));
  }
  return PanelDataset::build(std::move(rows), mode);
}

std::string to_string(PopulationMode mode) {
  return mode == PopulationMode::single ? "single" : "multi";
}

std::string to_string(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::independence: return "independence";
    case CorrelationKind::exchangeable: return "exchangeable";
    case CorrelationKind::ar1: return "ar1";
    case CorrelationKind::unstructured: return "unstructured";
  }
  return "?";
}

std::optional<PopulationMode> population_mode_from_string(const std::string& s) {
  if (s == "single") return PopulationMode::single;
  if (s == "multi") return PopulationMode::multi;
  return std::nullopt;
}

std::optional<CorrelationKind> correlation_kind_from_string(const std::string& s) {
  if (s == "independence") return CorrelationKind::independence;
  if (s == "exchangeable") return CorrelationKind::exchangeable;
  if (s == "ar1") return CorrelationKind::ar1;
  if (s == "unstructured") return CorrelationKind::unstructured;
  return std::nullopt;
}

}  // namespace mortgee
