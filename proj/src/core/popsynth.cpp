#include "core/popsynth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "core/csvio.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"

namespace tdg {

namespace {

long dimension_value(const Household& h, const std::string& dim) {
  if (dim == "size") return h.size();
  if (dim == "income") return h.income;
  if (dim == "vehicles") return h.vehicles;
  throw ConfigError("unsupported marginal dimension: '" + dim + "'");
}

bool category_matches(const std::string& cat, long value) {
  if (!cat.empty() && cat.back() == '+') {
    const long bound = std::stol(cat.substr(0, cat.size() - 1));
    return value >= bound;
  }
  return std::to_string(value) == cat;
}

}  // namespace

int categorize(const Household& h, const MarginalTable& m) {
  const long v = dimension_value(h, m.dimension);
  for (std::size_t c = 0; c < m.categories.size(); ++c)
    if (category_matches(m.categories[c], v)) return static_cast<int>(c);
  return -1;
}

IpfResult ipf_fit(const SeedSample& seed,
                  const std::vector<MarginalTable>& marginals, double tol,
                  int max_iter) {
  const std::size_t n = seed.templates.size();
  if (n == 0) throw DataError("ipf_fit: empty seed sample");
  if (seed.weights.size() != n)
    throw DataError("ipf_fit: weight/template count mismatch");
  for (double w : seed.weights)
    if (!(w > 0.0)) throw DataError("ipf_fit: non-positive seed weight");

  // Template -> category index per marginal, shared across zones.
  std::vector<std::vector<int>> cat(marginals.size(), std::vector<int>(n));
  for (std::size_t m = 0; m < marginals.size(); ++m)
    for (std::size_t i = 0; i < n; ++i)
      cat[m][i] = categorize(seed.templates[i], marginals[m]);

  std::set<long> zone_set;
  for (const auto& m : marginals)
    for (const auto& [z, t] : m.targets) zone_set.insert(z);
  if (zone_set.empty()) throw DataError("ipf_fit: no zones in marginals");

  IpfResult result;
  result.zones.assign(zone_set.begin(), zone_set.end());

  auto max_rel_gap = [&](const std::vector<double>& w, long zone) {
    double gap = 0.0;
    for (std::size_t m = 0; m < marginals.size(); ++m) {
      auto it = marginals[m].targets.find(zone);
      if (it == marginals[m].targets.end()) continue;
      const auto& target = it->second;
      std::vector<double> cur(target.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        if (cat[m][i] >= 0) cur[cat[m][i]] += w[i];
      for (std::size_t c = 0; c < target.size(); ++c) {
        if (target[c] <= 0.0) continue;
        gap = std::max(gap, std::abs(cur[c] - target[c]) / target[c]);
      }
    }
    return gap;
  };

  result.converged = true;
  for (long zone : result.zones) {
    std::vector<double> w = seed.weights;

    // Feasibility: every positive-target category needs seed support.
    for (std::size_t m = 0; m < marginals.size(); ++m) {
      auto it = marginals[m].targets.find(zone);
      if (it == marginals[m].targets.end()) continue;
      for (std::size_t c = 0; c < it->second.size(); ++c) {
        if (it->second[c] <= 0.0) continue;
        bool supported = false;
        for (std::size_t i = 0; i < n; ++i)
          if (cat[m][i] == static_cast<int>(c)) supported = true;
        if (!supported)
          throw DataError("infeasible marginal: zone " + std::to_string(zone) +
                          ", dimension '" + marginals[m].dimension +
                          "', category '" + marginals[m].categories[c] +
                          "' has no seed support");
      }
    }

    bool zone_converged = false;
    int sweeps = 0;
    for (int iter = 0; iter < max_iter; ++iter) {
      for (std::size_t m = 0; m < marginals.size(); ++m) {
        auto it = marginals[m].targets.find(zone);
        if (it == marginals[m].targets.end()) continue;
        const auto& target = it->second;
        std::vector<double> cur(target.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (cat[m][i] >= 0) cur[cat[m][i]] += w[i];
        for (std::size_t i = 0; i < n; ++i) {
          const int c = cat[m][i];
          if (c < 0) continue;
          if (cur[c] > 0.0) w[i] *= target[c] / cur[c];
        }
      }
      ++sweeps;
      const double gap = max_rel_gap(w, zone);
      result.gap_history.push_back(gap);
      if (gap < tol) {
        zone_converged = true;
        break;
      }
    }
    result.sweeps = std::max(result.sweeps, sweeps);
    if (!zone_converged) result.converged = false;
    result.weights.push_back(std::move(w));
  }
  return result;
}

std::vector<Household> draw_population(const SeedSample& seed,
                                       const IpfResult& fit, long n_households,
                                       std::uint64_t rng_seed) {
  std::vector<Household> pop;
  if (n_households == 0) return pop;

  std::vector<double> zone_mass(fit.zones.size());
  double total = 0.0;
  for (std::size_t z = 0; z < fit.zones.size(); ++z) {
    zone_mass[z] = std::accumulate(fit.weights[z].begin(), fit.weights[z].end(),
                                   0.0);
    total += zone_mass[z];
  }
  if (!(total > 0.0)) throw DataError("draw_population: zero total weight");

  // Largest-remainder allocation of n_households across zones.
  std::vector<long> alloc(fit.zones.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  long assigned = 0;
  for (std::size_t z = 0; z < fit.zones.size(); ++z) {
    const double exact = n_households * zone_mass[z] / total;
    alloc[z] = static_cast<long>(std::floor(exact));
    assigned += alloc[z];
    remainders.push_back({exact - alloc[z], z});
  }
  std::sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (long k = 0; k < n_households - assigned; ++k)
    ++alloc[remainders[k % remainders.size()].second];

  long next_hid = 1;
  for (std::size_t z = 0; z < fit.zones.size(); ++z) {
    Rng rng = Rng::derive(rng_seed, static_cast<std::uint64_t>(fit.zones[z]));
    for (long k = 0; k < alloc[z]; ++k) {
      const std::size_t i = rng.categorical(fit.weights[z]);
      Household h = seed.templates[i];
      h.household_id = next_hid;
      h.home_taz = fit.zones[z];
      for (std::size_t p = 0; p < h.members.size(); ++p)
        h.members[p].person_id = next_hid * 100 + static_cast<long>(p) + 1;
      pop.push_back(std::move(h));
      ++next_hid;
    }
  }
  return pop;
}

std::vector<Household> import_population(const std::string& path,
                                         const std::vector<long>* known_tazs) {
  return load_population(path, known_tazs);
}

std::vector<MarginalTable> load_marginals(const std::string& path) {
  csv::Table t = csv::read_file(path);
  const int c_zone = t.require("zone");
  const int c_dim = t.require("dimension");
  const int c_cat = t.require("category");
  const int c_count = t.require("count");

  std::map<std::string, MarginalTable> by_dim;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    const long zone = csv::to_long(row[c_zone], ctx);
    const double count = csv::to_double(row[c_count], ctx);
    if (count < 0.0) throw DataError(ctx + ": negative marginal count");
    MarginalTable& m = by_dim[row[c_dim]];
    m.dimension = row[c_dim];
    auto it = std::find(m.categories.begin(), m.categories.end(), row[c_cat]);
    std::size_t c;
    if (it == m.categories.end()) {
      c = m.categories.size();
      m.categories.push_back(row[c_cat]);
      for (auto& [z, tv] : m.targets) tv.resize(m.categories.size(), 0.0);
    } else {
      c = static_cast<std::size_t>(it - m.categories.begin());
    }
    auto& tv = m.targets[zone];
    tv.resize(m.categories.size(), 0.0);
    tv[c] = count;
  }
  // Zones missing rows for late-added categories get zero-filled targets.
  std::vector<MarginalTable> out;
  for (auto& [dim, m] : by_dim) {
    for (auto& [z, tv] : m.targets) tv.resize(m.categories.size(), 0.0);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace tdg
