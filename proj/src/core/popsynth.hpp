// Population synthesis: IPF over a seed sample of template households
// against per-zone marginal control totals, integerized by weighted
// sampling; or import of an externally synthesized population.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/schedule.hpp"

namespace tdg {

// One controlled dimension (e.g. "size") with per-zone target counts.
// A category label is an exact value ("2") or a top-coded bound ("4+").
struct MarginalTable {
  std::string dimension;
  std::vector<std::string> categories;
  std::map<long, std::vector<double>> targets;  // zone -> counts per category
};

struct SeedSample {
  std::vector<Household> templates;
  std::vector<double> weights;  // > 0, one per template
};

struct IpfResult {
  std::vector<long> zones;
  // weights[z][i]: fitted weight of template i in zone zones[z]
  std::vector<std::vector<double>> weights;
  std::vector<double> gap_history;  // max relative marginal gap after each sweep
  bool converged = false;
  int sweeps = 0;
};

// Household's category index in a marginal, or -1 if it matches none.
int categorize(const Household& h, const MarginalTable& m);

// Classical IPF run independently per zone. Throws DataError when a
// category with positive target has no seed support (names the category).
IpfResult ipf_fit(const SeedSample& seed,
                  const std::vector<MarginalTable>& marginals,
                  double tol = 1e-4, int max_iter = 100);

// Weighted sampling with replacement; zone allocation by largest remainder
// of fitted zone mass. Fresh sequential household ids.
std::vector<Household> draw_population(const SeedSample& seed,
                                       const IpfResult& fit,
                                       long n_households,
                                       std::uint64_t rng_seed);

// Load + validate an externally synthesized population.
std::vector<Household> import_population(
    const std::string& path, const std::vector<long>* known_tazs = nullptr);

// Marginals CSV: zone,dimension,category,count
std::vector<MarginalTable> load_marginals(const std::string& path);

}  // namespace tdg
