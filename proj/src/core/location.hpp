// Activity location assignment: mandatory anchors by sampled-distance
// matching, non-mandatory infill by weighted distance/bearing cost, and
// iterative spatial refinement of zone attraction weights.
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/events.hpp"
#include "core/rng.hpp"
#include "core/schedule.hpp"

namespace tdg {

struct Zone {
  long taz_id = 0;
  double x = 0.0, y = 0.0;  // planar meters
  bool residential = false, employment = false, education = false,
       commercial = false, recreation = false;
  // Attraction weight per activity type; defaults to 1.
  std::array<double, kCodes - 1> attraction;

  Zone() { attraction.fill(1.0); }
};

struct ZoneTable {
  std::vector<Zone> zones;
  std::map<long, int> index;  // taz_id -> position

  const Zone& at(long taz_id) const;
  double distance(long a, long b, double detour_factor) const;  // meters
};

// Land-use compatibility for an activity type. Accompanying types are
// compatible everywhere.
bool land_use_compatible(const Zone& z, int activity_type,
                         const ActivityTypeTable& types);

// Empirical inverse-CDF sampler over positive values.
struct DistanceSampler {
  std::vector<double> sorted_values;

  static DistanceSampler from_values(std::vector<double> values);
  double sample(Rng& rng) const;
};

struct SamplerSet {
  DistanceSampler work;
  DistanceSampler school;
  DistanceSampler nonmandatory;
  std::optional<DistanceSampler> bearing;  // radians; uniform [0, pi/2] if unset
};

struct LocationParams {
  double alpha = 1.0;
  double beta = 1.0 / M_PI;
  double detour_factor = 1.3;
  double speed_ms = 30.0 / 3.6;  // travel time conversion, 30 km/h
  double t_max_min = 120.0;      // per-leg time budget, minutes
};

// argmin over compatible zones of |d(home, z) - sampled distance|.
long assign_mandatory(long home_taz, int activity_type,
                      const DistanceSampler& sampler, const ZoneTable& zones,
                      const ActivityTypeTable& types,
                      const LocationParams& params, Rng& rng);

// argmin of alpha*|d - d_hat| + beta*|theta - theta_hat| subject to the
// travel-time budget; infeasible budgets relax to the minimum-travel-time
// zone and set *relaxed.
long assign_nonmandatory(long z_prev, long z_next, int activity_type,
                         const SamplerSet& samplers, const ZoneTable& zones,
                         const ActivityTypeTable& types,
                         const LocationParams& params, Rng& rng,
                         bool* relaxed = nullptr);

// One located activity with its candidate set kept for refinement.
struct LocatedActivity {
  long household_id = 0;
  long person_id = 0;
  int seq = 0;
  int type = 0;
  int start = 0, end = 0;
  long taz_id = 0;
  long event_id = 0;  // 0 = solo
  bool relaxed = false;
};

// Spatial refinement for one activity type. Each assignment carries its
// candidate zone/cost vector; selection is argmin cost / (D_z + eps).
struct RefinableAssignment {
  std::vector<long> candidate_zones;
  std::vector<double> costs;
  int chosen = 0;
};

struct RefineResult {
  std::map<long, double> attraction;  // updated, renormalized D
  double final_l1 = 0.0;
  int iterations = 0;
};

RefineResult refine_spatial(std::map<long, double> attraction,
                            const std::map<long, double>& f_target,
                            std::vector<RefinableAssignment>& assignments,
                            double eta, int max_iter, double tol);

// Full per-household pass: homes, mandatory anchors, shared event
// locations, then non-mandatory infill in chain order.
std::vector<LocatedActivity> assign_household(
    const Household& h, const std::vector<ActivityChain>& chains,
    const std::vector<Event>& events, const ZoneTable& zones,
    const SamplerSet& samplers, const ActivityTypeTable& types,
    const LocationParams& params, std::uint64_t rng_seed);

// Zones CSV: taz_id,x,y,lu_residential,lu_employment,lu_education,
// lu_commercial,lu_recreation[,d_<TypeLabel>...]
ZoneTable load_zones(const std::string& path, const ActivityTypeTable& types);

// Located plans CSV: household_id,person_id,seq,activity_type,start_min,
// end_min,taz_id,event_id
void save_plans(const std::string& path,
                const std::vector<LocatedActivity>& plans,
                const ActivityTypeTable& types,
                const std::vector<std::string>& meta = {});

std::vector<LocatedActivity> load_plans(const std::string& path,
                                        const ActivityTypeTable& types);

}  // namespace tdg
