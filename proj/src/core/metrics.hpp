// Validation metrics (JSD, MAPE, cosine similarity), distribution builders
// for the standard report figures, and the report assembler comparing a
// generated artifact directory against a reference one.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/events.hpp"
#include "core/schedule.hpp"

namespace tdg {

struct Distribution {
  std::vector<std::string> labels;
  std::vector<double> p;  // normalized, aligned with labels
};

// Normalizes counts; throws DataError when total mass is zero or any count
// is negative.
Distribution make_distribution(const std::vector<std::string>& labels,
                               const std::vector<double>& counts);

// Base-2 Jensen-Shannon divergence in [0, 1]. Supports are union-aligned by
// label with zero fill.
double jsd(const Distribution& P, const Distribution& Q);

// Mean absolute percentage error. Observations with |obs| < eps are
// excluded; *excluded receives their count. Throws DataError when every
// entry is excluded or lengths differ.
double mape(const std::vector<double>& pred, const std::vector<double>& obs,
            double eps = 1e-9, int* excluded = nullptr);

// Flattened cosine similarity of two same-shaped matrices given as sparse
// (row, col) -> value maps. Throws DataError when either side is all-zero.
double cosine_similarity(const std::map<std::pair<long, long>, double>& A,
                         const std::map<std::pair<long, long>, double>& B);

// ---- Distribution builders (report figure analogues) --------------------

struct ChainStats {
  // shares[t][c]: share of persons in activity c during slot t
  std::vector<std::vector<double>> slot_type_shares;  // [96][15]
  Distribution type_distribution;        // over activity instances
  Distribution start_time_distribution;  // 15-min bins over instances
  // per-type duration quartiles in minutes (q1, median, q3)
  std::map<int, std::array<double, 3>> duration_quartiles;
  Distribution activities_per_person;    // histogram, labels "1","2",...
};

ChainStats build_chain_stats(const ChainSet& chains,
                             const ActivityTypeTable& types);

// ---- Report -------------------------------------------------------------

struct ValidationEntry {
  std::string metric;
  std::string slice;
  double value = 0.0;
  bool available = false;
  std::string note;
};

struct ValidationOptions {
  std::string generated_dir;
  std::string reference_dir;
  std::string out_dir;
  std::vector<std::string> slices;  // empty = all known slices
};

// Computes every requested metric pairing, writes report.json plus
// fig4a..fig8d plot-data CSVs into out_dir, and returns the entries.
// A slice whose inputs are missing is reported as absent, never skipped.
std::vector<ValidationEntry> validate(const ValidationOptions& opt,
                                      const ActivityTypeTable& types);

}  // namespace tdg
