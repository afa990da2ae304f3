#include "core/location.hpp"

#include <algorithm>
#include <cmath>

#include "core/csvio.hpp"
#include "core/errors.hpp"

namespace tdg {

const Zone& ZoneTable::at(long taz_id) const {
  auto it = index.find(taz_id);
  if (it == index.end())
    throw DataError("unknown TAZ " + std::to_string(taz_id));
  return zones[it->second];
}

double ZoneTable::distance(long a, long b, double detour_factor) const {
  const Zone& za = at(a);
  const Zone& zb = at(b);
  return detour_factor * std::hypot(za.x - zb.x, za.y - zb.y);
}

bool land_use_compatible(const Zone& z, int activity_type,
                         const ActivityTypeTable& types) {
  using T = ActivityTypeTable;
  if (types.is_accompanying(activity_type)) return true;
  switch (activity_type) {
    case T::kHome:
    case T::kVisit:
      return z.residential;
    case T::kWork:
      return z.employment;
    case T::kSchool:
    case T::kAttendCare:
      return z.education;
    case T::kRecreation:
      return z.recreation;
    default:
      // Shopping, errands, meals and the configurable residual categories.
      return z.commercial;
  }
}

DistanceSampler DistanceSampler::from_values(std::vector<double> values) {
  if (values.empty()) throw ConfigError("distance sampler: no values");
  for (double v : values)
    if (!(v > 0.0)) throw ConfigError("distance sampler: non-positive value");
  std::sort(values.begin(), values.end());
  return DistanceSampler{std::move(values)};
}

double DistanceSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  const double pos = u * (sorted_values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
  return sorted_values[lo] + (pos - lo) * (sorted_values[hi] - sorted_values[lo]);
}

long assign_mandatory(long home_taz, int activity_type,
                      const DistanceSampler& sampler, const ZoneTable& zones,
                      const ActivityTypeTable& types,
                      const LocationParams& params, Rng& rng) {
  const double d_hat = sampler.sample(rng);
  long best = -1;
  double best_cost = 0.0;
  for (const Zone& z : zones.zones) {
    if (!land_use_compatible(z, activity_type, types)) continue;
    const double d = zones.distance(home_taz, z.taz_id, params.detour_factor);
    const double cost = std::abs(d - d_hat);
    if (best < 0 || cost < best_cost ||
        (cost == best_cost && z.taz_id < best)) {
      best = z.taz_id;
      best_cost = cost;
    }
  }
  if (best < 0)
    throw DataError("no land-use-compatible zone for activity type '" +
                    types.label(activity_type) + "'");
  return best;
}

long assign_nonmandatory(long z_prev, long z_next, int activity_type,
                         const SamplerSet& samplers, const ZoneTable& zones,
                         const ActivityTypeTable& types,
                         const LocationParams& params, Rng& rng,
                         bool* relaxed) {
  const double d_hat = samplers.nonmandatory.sample(rng);
  const double theta_hat = samplers.bearing ? samplers.bearing->sample(rng)
                                            : rng.uniform(0.0, M_PI / 2.0);
  if (relaxed) *relaxed = false;

  const Zone& prev = zones.at(z_prev);
  const Zone& next = zones.at(z_next);
  const double ref_angle = std::atan2(next.y - prev.y, next.x - prev.x);
  const bool degenerate_axis = z_prev == z_next;

  long best = -1, best_time_zone = -1;
  double best_cost = 0.0, best_time = 0.0;
  bool any_compatible = false;
  for (const Zone& z : zones.zones) {
    if (!land_use_compatible(z, activity_type, types)) continue;
    any_compatible = true;
    const double d = zones.distance(z_prev, z.taz_id, params.detour_factor);
    double theta = 0.0;
    if (!degenerate_axis && z.taz_id != z_prev) {
      const double angle = std::atan2(z.y - prev.y, z.x - prev.x);
      theta = std::abs(std::remainder(angle - ref_angle, 2.0 * M_PI));
    }
    const double total_time =
        (d + zones.distance(z.taz_id, z_next, params.detour_factor)) /
        params.speed_ms / 60.0;  // minutes
    if (best_time_zone < 0 || total_time < best_time ||
        (total_time == best_time && z.taz_id < best_time_zone)) {
      best_time_zone = z.taz_id;
      best_time = total_time;
    }
    if (total_time > params.t_max_min) continue;
    const double cost = params.alpha * std::abs(d - d_hat) +
                        params.beta * std::abs(theta - theta_hat);
    if (best < 0 || cost < best_cost ||
        (cost == best_cost && z.taz_id < best)) {
      best = z.taz_id;
      best_cost = cost;
    }
  }
  if (!any_compatible)
    throw DataError("no land-use-compatible zone for activity type '" +
                    types.label(activity_type) + "'");
  if (best < 0) {
    if (relaxed) *relaxed = true;
    return best_time_zone;
  }
  return best;
}

RefineResult refine_spatial(std::map<long, double> attraction,
                            const std::map<long, double>& f_target,
                            std::vector<RefinableAssignment>& assignments,
                            double eta, int max_iter, double tol) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("refine_spatial: eta");
  constexpr double kEps = 1e-6;

  auto normalize = [](std::map<long, double>& m) {
    double total = 0.0;
    for (auto& [z, v] : m) total += v;
    if (total > 0.0)
      for (auto& [z, v] : m) v /= total;
  };
  normalize(attraction);

  auto current_shares = [&]() {
    std::map<long, double> f;
    for (const auto& [z, v] : f_target) f[z] = 0.0;
    for (const auto& a : assignments)
      f[a.candidate_zones[a.chosen]] += 1.0;
    normalize(f);
    return f;
  };
  auto l1 = [&](const std::map<long, double>& f) {
    double gap = 0.0;
    for (const auto& [z, t] : f_target) {
      auto it = f.find(z);
      gap += std::abs((it == f.end() ? 0.0 : it->second) - t);
    }
    return gap;
  };

  RefineResult result;
  std::map<long, double> f_cur = current_shares();
  for (int iter = 0; iter < max_iter; ++iter) {
    if (l1(f_cur) < tol) break;
    for (auto& [z, v] : attraction) {
      auto t = f_target.find(z);
      auto c = f_cur.find(z);
      v += eta * ((t == f_target.end() ? 0.0 : t->second) -
                  (c == f_cur.end() ? 0.0 : c->second));
      v = std::max(v, 0.0);
    }
    normalize(attraction);
    for (auto& a : assignments) {
      int best = 0;
      double best_cost = 0.0;
      for (std::size_t k = 0; k < a.candidate_zones.size(); ++k) {
        auto it = attraction.find(a.candidate_zones[k]);
        const double d = it == attraction.end() ? 0.0 : it->second;
        const double cost = a.costs[k] / (d + kEps);
        if (k == 0 || cost < best_cost ||
            (cost == best_cost &&
             a.candidate_zones[k] < a.candidate_zones[best])) {
          best = static_cast<int>(k);
          best_cost = cost;
        }
      }
      a.chosen = best;
    }
    f_cur = current_shares();
    ++result.iterations;
  }
  result.attraction = std::move(attraction);
  result.final_l1 = l1(f_cur);
  return result;
}

std::vector<LocatedActivity> assign_household(
    const Household& h, const std::vector<ActivityChain>& chains,
    const std::vector<Event>& events, const ZoneTable& zones,
    const SamplerSet& samplers, const ActivityTypeTable& types,
    const LocationParams& params, std::uint64_t rng_seed) {
  using T = ActivityTypeTable;
  if (static_cast<int>(chains.size()) != h.size())
    throw DataError("assign_household: chain/member arity mismatch");
  Rng rng = Rng::derive(rng_seed, static_cast<std::uint64_t>(h.household_id));

  const int n = h.size();
  std::vector<std::vector<long>> taz(n);
  std::vector<std::vector<long>> event_of(n);
  std::vector<std::vector<bool>> relaxed(n);
  for (int m = 0; m < n; ++m) {
    taz[m].assign(chains[m].activities.size(), -1);
    event_of[m].assign(chains[m].activities.size(), 0);
    relaxed[m].assign(chains[m].activities.size(), false);
  }
  std::map<long, int> member_of;  // person_id -> member index
  for (int m = 0; m < n; ++m) member_of[h.members[m].person_id] = m;

  auto is_mandatory = [](int type) {
    return type == T::kWork || type == T::kSchool;
  };
  const DistanceSampler& work_sampler = samplers.work;
  const DistanceSampler& school_sampler = samplers.school;

  // Pass 1: home and solo mandatory anchors.
  for (int m = 0; m < n; ++m)
    for (std::size_t i = 0; i < chains[m].activities.size(); ++i) {
      const int type = chains[m].activities[i].type;
      if (type == T::kHome)
        taz[m][i] = h.home_taz;
      else if (is_mandatory(type))
        taz[m][i] = assign_mandatory(
            h.home_taz, type,
            type == T::kWork ? work_sampler : school_sampler, zones, types,
            params, rng);
    }

  auto prev_anchor = [&](int m, std::size_t i) {
    for (std::size_t j = i; j-- > 0;)
      if (taz[m][j] >= 0) return taz[m][j];
    return h.home_taz;
  };
  auto next_anchor = [&](int m, std::size_t i) {
    for (std::size_t j = i + 1; j < taz[m].size(); ++j)
      if (taz[m][j] >= 0) return taz[m][j];
    return h.home_taz;
  };

  // Pass 2: coordinated events get one shared zone, assigned from the head
  // participant's anchors (household head when present, else the first
  // participant in member order).
  for (const Event& ev : events) {
    if (!ev.coordinated) continue;
    int lead = -1;
    std::size_t lead_act = 0;
    const int head_index = select_household_head(h);
    for (const auto& p : ev.participants) {
      const int m = member_of.at(p.person_id);
      if (lead < 0 || m == head_index ||
          (m < lead && lead != head_index)) {
        lead = m;
        lead_act = static_cast<std::size_t>(p.activity_index);
      }
      if (m == head_index) break;
    }
    long zone;
    bool was_relaxed = false;
    if (ev.activity_type == T::kHome) {
      zone = h.home_taz;
    } else if (is_mandatory(ev.activity_type)) {
      zone = assign_mandatory(
          h.home_taz, ev.activity_type,
          ev.activity_type == T::kWork ? work_sampler : school_sampler, zones,
          types, params, rng);
    } else {
      zone = assign_nonmandatory(prev_anchor(lead, lead_act),
                                 next_anchor(lead, lead_act),
                                 ev.activity_type, samplers, zones, types,
                                 params, rng, &was_relaxed);
    }
    for (const auto& p : ev.participants) {
      const int m = member_of.at(p.person_id);
      taz[m][p.activity_index] = zone;
      event_of[m][p.activity_index] = ev.event_id;
      relaxed[m][p.activity_index] = was_relaxed;
    }
  }
  // Record event ids for solo events too.
  for (const Event& ev : events)
    for (const auto& p : ev.participants) {
      const int m = member_of.at(p.person_id);
      if (event_of[m][p.activity_index] == 0)
        event_of[m][p.activity_index] = ev.event_id;
    }

  // Pass 3: remaining non-mandatory activities in chain order.
  for (int m = 0; m < n; ++m)
    for (std::size_t i = 0; i < chains[m].activities.size(); ++i) {
      if (taz[m][i] >= 0) continue;
      bool was_relaxed = false;
      taz[m][i] = assign_nonmandatory(prev_anchor(m, i), next_anchor(m, i),
                                      chains[m].activities[i].type, samplers,
                                      zones, types, params, rng, &was_relaxed);
      relaxed[m][i] = was_relaxed;
    }

  std::vector<LocatedActivity> out;
  for (int m = 0; m < n; ++m)
    for (std::size_t i = 0; i < chains[m].activities.size(); ++i) {
      const Activity& a = chains[m].activities[i];
      LocatedActivity la;
      la.household_id = h.household_id;
      la.person_id = h.members[m].person_id;
      la.seq = static_cast<int>(i);
      la.type = a.type;
      la.start = a.start;
      la.end = a.end;
      la.taz_id = taz[m][i];
      la.event_id = event_of[m][i];
      la.relaxed = relaxed[m][i];
      out.push_back(la);
    }
  return out;
}

ZoneTable load_zones(const std::string& path, const ActivityTypeTable& types) {
  csv::Table t = csv::read_file(path);
  const int c_id = t.require("taz_id");
  const int c_x = t.require("x");
  const int c_y = t.require("y");
  const int c_res = t.require("lu_residential");
  const int c_emp = t.require("lu_employment");
  const int c_edu = t.require("lu_education");
  const int c_com = t.require("lu_commercial");
  const int c_rec = t.require("lu_recreation");
  std::vector<int> d_cols(kCodes - 1, -1);
  for (int c = 0; c < kCodes - 1; ++c)
    d_cols[c] = t.col("d_" + types.label(c));

  ZoneTable zt;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    Zone z;
    z.taz_id = csv::to_long(row[c_id], ctx);
    z.x = csv::to_double(row[c_x], ctx);
    z.y = csv::to_double(row[c_y], ctx);
    if (!std::isfinite(z.x) || !std::isfinite(z.y))
      throw DataError(ctx + ": non-finite centroid");
    z.residential = csv::to_bool(row[c_res], ctx);
    z.employment = csv::to_bool(row[c_emp], ctx);
    z.education = csv::to_bool(row[c_edu], ctx);
    z.commercial = csv::to_bool(row[c_com], ctx);
    z.recreation = csv::to_bool(row[c_rec], ctx);
    for (int c = 0; c < kCodes - 1; ++c)
      if (d_cols[c] >= 0) {
        z.attraction[c] = csv::to_double(row[d_cols[c]], ctx);
        if (z.attraction[c] < 0.0)
          throw DataError(ctx + ": negative attraction weight");
      }
    if (zt.index.count(z.taz_id))
      throw DataError(ctx + ": duplicate taz_id");
    zt.index[z.taz_id] = static_cast<int>(zt.zones.size());
    zt.zones.push_back(z);
  }
  if (zt.zones.empty()) throw DataError(path + ": no zones");
  return zt;
}

void save_plans(const std::string& path,
                const std::vector<LocatedActivity>& plans,
                const ActivityTypeTable& types,
                const std::vector<std::string>& meta) {
  csv::Writer w(path,
                {"household_id", "person_id", "seq", "activity_type",
                 "start_min", "end_min", "taz_id", "event_id"},
                meta);
  for (const auto& p : plans)
    w.row({csv::fmt(p.household_id), csv::fmt(p.person_id), csv::fmt(p.seq),
           types.label(p.type), csv::fmt(p.start), csv::fmt(p.end),
           csv::fmt(p.taz_id), csv::fmt(p.event_id)});
}

std::vector<LocatedActivity> load_plans(const std::string& path,
                                        const ActivityTypeTable& types) {
  csv::Table t = csv::read_file(path);
  const int c_hid = t.require("household_id");
  const int c_pid = t.require("person_id");
  const int c_seq = t.require("seq");
  const int c_type = t.require("activity_type");
  const int c_start = t.require("start_min");
  const int c_end = t.require("end_min");
  const int c_taz = t.require("taz_id");
  const int c_eid = t.require("event_id");
  std::vector<LocatedActivity> plans;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    LocatedActivity p;
    p.household_id = csv::to_long(row[c_hid], ctx);
    p.person_id = csv::to_long(row[c_pid], ctx);
    p.seq = static_cast<int>(csv::to_long(row[c_seq], ctx));
    p.type = types.code_of(row[c_type]);
    p.start = static_cast<int>(csv::to_long(row[c_start], ctx));
    p.end = static_cast<int>(csv::to_long(row[c_end], ctx));
    p.taz_id = csv::to_long(row[c_taz], ctx);
    p.event_id = csv::to_long(row[c_eid], ctx);
    plans.push_back(p);
  }
  return plans;
}

}  // namespace tdg
