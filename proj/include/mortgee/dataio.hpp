#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mortgee/model_spec.hpp"

namespace mortgee {

/// One age-specific death rate observation in long format.
struct MortalityRecord {
  std::string country;
  std::string gender;
  int year = 0;
  int age = 0;
  double rate = 0.0;                // deaths per person-year, > 0
  std::optional<double> exposure;   // person-years backing the rate

  friend bool operator==(const MortalityRecord&, const MortalityRecord&) = default;
};

/// Column-name mapping for the long CSV layout.
struct CsvSchema {
  std::string country = "country";
  std::string gender = "gender";
  std::string year = "year";
  std::string age = "age";
  std::string rate = "rate";
  std::string exposure = "exposure";  // optional column; may be absent
};

/// Restricts loading to a window before value validation. Rows outside the
/// window are out of scope entirely; rows inside it are validated strictly.
struct RecordFilter {
  std::optional<std::pair<int, int>> ages;   // inclusive
  std::optional<std::pair<int, int>> years;  // inclusive
};

std::vector<MortalityRecord> load_csv(const std::string& path,
                                      const CsvSchema& schema = {},
                                      const RecordFilter& filter = {});

/// Which series of a wide Mx table to melt.
enum class MxSeries { female, male, total, all };

/// Reads the wide "Mx" layout used by public mortality databases:
/// columns Year, Age, Female, Male, Total, whitespace- or comma-separated,
/// optional preamble lines before the header. "110+" parses as age 110.
/// The file carries no country label, so one is supplied by the caller.
std::vector<MortalityRecord> load_mx(const std::string& path,
                                     const std::string& country_label,
                                     MxSeries series = MxSeries::all,
                                     const RecordFilter& filter = {});

void write_records_csv(std::ostream& os, std::span<const MortalityRecord> records);

/// One normalized panel row. Country/gender are kept in both population
/// modes so forecasts can label their output.
struct PanelObservation {
  std::string country;
  std::string gender;
  int age = 0;
  int year = 0;
  double y = 0.0;       // log death rate
  double weight = 1.0;  // prior weight, > 0

  friend bool operator==(const PanelObservation&, const PanelObservation&) = default;
};

/// Long-format observations grouped into clusters observed at ordered waves.
/// Rows are stored sorted by (cluster key, year), so each cluster occupies a
/// contiguous span and all derived quantities are independent of input order.
class PanelDataset {
 public:
  /// Cluster key: (country, gender, age) in multi mode, ("", "", age) in
  /// single mode.
  using ClusterKey = std::tuple<std::string, std::string, int>;

  static PanelDataset build(std::vector<PanelObservation> rows, PopulationMode mode);

  PopulationMode mode() const { return mode_; }
  const std::vector<PanelObservation>& rows() const { return rows_; }
  std::size_t n_rows() const { return rows_.size(); }
  std::size_t n_clusters() const { return cluster_start_.size(); }

  std::span<const PanelObservation> cluster(std::size_t c) const;
  const ClusterKey& cluster_key(std::size_t c) const { return cluster_keys_[c]; }
  std::string cluster_label(std::size_t c) const;

  /// Sorted unique training years; the wave grid.
  const std::vector<int>& years() const { return years_; }
  int wave_index(int year) const;  // -1 if the year is not on the grid

  /// True when every cluster observes every year on the grid.
  bool balanced() const;

 private:
  PopulationMode mode_ = PopulationMode::single;
  std::vector<PanelObservation> rows_;
  std::vector<ClusterKey> cluster_keys_;
  std::vector<std::size_t> cluster_start_;  // start row of each cluster
  std::vector<std::size_t> cluster_size_;
  std::vector<int> years_;
};

/// Normalizes records into a panel: filters to the spec's age/train window,
/// takes y = ln(rate), builds cluster keys from the population mode, and
/// resolves prior weights (exposure / mean(exposure) when weighting is
/// enabled, 1 otherwise).
PanelDataset to_panel(std::span<const MortalityRecord> records, const ModelSpec& spec);

/// Exact panel serialization (y and weight at full precision); reloading
/// gives a field-by-field identical dataset.
void write_panel_csv(std::ostream& os, const PanelDataset& panel);
PanelDataset read_panel_csv(std::istream& is, PopulationMode mode);

}  // namespace mortgee
