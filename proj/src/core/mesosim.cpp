#include "core/mesosim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "core/csvio.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"

namespace tdg {

int Link::free_travel_s() const {
  return std::max(1, static_cast<int>(std::ceil(length_m / free_speed_ms)));
}

long Network::nearest_node(double x, double y) const {
  long best = -1;
  double best_d = 0.0;
  for (const auto& [id, xy] : node_xy) {
    const double d = std::hypot(xy.first - x, xy.second - y);
    if (best < 0 || d < best_d) {
      best = id;
      best_d = d;
    }
  }
  if (best < 0) throw DataError("network has no nodes");
  return best;
}

TravelTimes free_flow_times(const Network& net) {
  TravelTimes tt(net.links.size());
  for (std::size_t l = 0; l < net.links.size(); ++l)
    tt[l].fill(static_cast<double>(net.links[l].free_travel_s()));
  return tt;
}

void init_modes(const std::map<long, int>& household_vehicles,
                const std::map<long, long>& person_household,
                std::vector<Trip>& trips, double car_share,
                std::uint64_t rng_seed) {
  if (!(car_share >= 0.0 && car_share <= 1.0))
    throw ConfigError("car_share must be in [0, 1]");
  for (std::size_t i = 0; i < trips.size(); ++i) {
    Trip& t = trips[i];
    auto hit = person_household.find(t.person_id);
    const long hid = hit == person_household.end() ? -1 : hit->second;
    auto vit = household_vehicles.find(hid);
    const int vehicles = vit == household_vehicles.end() ? 0 : vit->second;
    if (vehicles == 0) {
      t.mode = Mode::NonCar;
      continue;
    }
    Rng rng = Rng::derive(rng_seed, static_cast<std::uint64_t>(t.person_id) *
                                            1000003ULL +
                                        i);
    t.mode = rng.bernoulli(car_share) ? Mode::Car : Mode::NonCar;
  }
}

namespace {

// Cost of an existing route under the given interval times, or NaN when the
// route does not connect the trip's origin to its destination.
double route_cost(const Trip& trip, const Network& net,
                  const TravelTimes& times) {
  double clock = trip.departure_s;
  long node = trip.origin_node;
  for (int l : trip.route) {
    if (net.links[l].from_node != node) return std::nan("");
    const int interval = std::min<int>(
        kIntervals - 1, static_cast<int>(clock) / kIntervalSeconds);
    clock += times[l][interval];
    node = net.links[l].to_node;
  }
  if (node != trip.dest_node) return std::nan("");
  return clock - trip.departure_s;
}

}  // namespace

bool route_trip(Trip& trip, const Network& net, const TravelTimes& times) {
  std::vector<int> previous = std::move(trip.route);
  trip.route.clear();
  if (trip.origin_node == trip.dest_node) return true;

  struct Label {
    double time;
    long node;
    int via_link;  // position, -1 at origin
  };
  auto cmp = [](const Label& a, const Label& b) {
    if (a.time != b.time) return a.time > b.time;
    if (a.node != b.node) return a.node > b.node;
    return a.via_link > b.via_link;
  };
  std::priority_queue<Label, std::vector<Label>, decltype(cmp)> pq(cmp);
  std::map<long, int> parent;  // node -> link position settled through
  std::map<long, double> settled_time;

  pq.push({static_cast<double>(trip.departure_s), trip.origin_node, -1});
  while (!pq.empty()) {
    Label cur = pq.top();
    pq.pop();
    if (settled_time.count(cur.node)) continue;
    settled_time[cur.node] = cur.time;
    parent[cur.node] = cur.via_link;
    if (cur.node == trip.dest_node) break;
    auto it = net.out_links.find(cur.node);
    if (it == net.out_links.end()) continue;
    for (int l : it->second) {
      const Link& link = net.links[l];
      if (settled_time.count(link.to_node)) continue;
      const int interval = std::min<int>(
          kIntervals - 1, static_cast<int>(cur.time) / kIntervalSeconds);
      pq.push({cur.time + times[l][interval], link.to_node, l});
    }
  }
  if (!settled_time.count(trip.dest_node)) return false;
  long node = trip.dest_node;
  while (node != trip.origin_node) {
    const int l = parent[node];
    trip.route.push_back(l);
    node = net.links[l].from_node;
  }
  std::reverse(trip.route.begin(), trip.route.end());
  // Keep the previous route when it is already as fast as the shortest
  // path: switching between equal-cost routes would make equilibria
  // unstable (tied trips would all collapse onto one branch).
  if (!previous.empty() && previous != trip.route) {
    Trip probe = trip;
    probe.route = previous;
    const double prev_cost = route_cost(probe, net, times);
    const double new_cost =
        settled_time.at(trip.dest_node) - trip.departure_s;
    if (prev_cost == prev_cost && prev_cost <= new_cost + 1e-9)
      trip.route = std::move(previous);
  }
  return true;
}

namespace {

struct Vehicle {
  int trip_index = 0;
  int leg = 0;         // index into route
  int entered_at = 0;  // second the current link was entered
  int ready_at = 0;    // earliest exit second
};

}  // namespace

NetworkState simulate_day(const std::vector<Trip>& trips, const Network& net) {
  NetworkState state;
  state.links.resize(net.links.size());
  state.trip_time_s.assign(trips.size(), -1.0);
  // Intervals with no observed traversal report the free-flow speed.
  for (std::size_t l = 0; l < net.links.size(); ++l)
    for (int iv = 0; iv < kIntervals; ++iv)
      state.links[l][iv].speed_ms = net.links[l].free_speed_ms;

  // Departures: car trips with non-empty routes, ordered by time then id.
  std::vector<int> order;
  for (std::size_t i = 0; i < trips.size(); ++i)
    if (trips[i].mode == Mode::Car && !trips[i].route.empty())
      order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (trips[a].departure_s != trips[b].departure_s)
      return trips[a].departure_s < trips[b].departure_s;
    return trips[a].person_id < trips[b].person_id;
  });

  std::vector<std::deque<Vehicle>> queue(net.links.size());
  std::vector<std::deque<Vehicle>> pending(net.links.size());  // at origin
  std::vector<double> tokens(net.links.size(), 0.0);
  std::vector<double> sum_traversal(net.links.size(), 0.0);
  std::vector<long> n_traversal(net.links.size(), 0);
  // Per-interval traversal accumulators, flushed at interval boundaries.
  std::vector<double> interval_sum(net.links.size(), 0.0);
  std::vector<long> interval_n(net.links.size(), 0);

  long active = 0;
  std::size_t next_dep = 0;
  int stall = 0;
  const int t_end = 2 * 24 * 3600;  // allow overflow past midnight to drain

  auto interval_of = [](int t) {
    return std::min(kIntervals - 1, t / kIntervalSeconds);
  };

  for (int t = 0; t < t_end; ++t) {
    bool moved = false;

    // Departures enter the pending queue of their first link.
    while (next_dep < order.size() &&
           trips[order[next_dep]].departure_s <= t) {
      const int ti = order[next_dep];
      pending[trips[ti].route.front()].push_back({ti, 0, t, 0});
      ++active;
      ++next_dep;
    }

    for (std::size_t l = 0; l < net.links.size(); ++l) {
      const Link& link = net.links[l];
      const double rate = link.capacity_vph / 3600.0;
      tokens[l] = std::min(tokens[l] + rate, std::max(1.0, rate));

      // Origin entries, throttled only by storage.
      while (!pending[l].empty() &&
             static_cast<double>(queue[l].size()) < link.storage()) {
        Vehicle v = pending[l].front();
        pending[l].pop_front();
        v.entered_at = t;
        v.ready_at = t + link.free_travel_s();
        queue[l].push_back(v);
        if (t < 24 * 3600) ++state.entered;
        moved = true;
      }

      // FIFO exits: ready vehicles leave at the capacity rate unless the
      // downstream link is full.
      // Accumulated rate tokens carry float error (ten 0.1 steps fall just
      // short of 1.0), so admit an exit within a small epsilon.
      while (!queue[l].empty() && tokens[l] >= 1.0 - 1e-9 &&
             queue[l].front().ready_at <= t) {
        Vehicle v = queue[l].front();
        const Trip& trip = trips[v.trip_index];
        const bool last_leg = v.leg + 1 >= static_cast<int>(trip.route.size());
        if (!last_leg) {
          const std::size_t nl = trip.route[v.leg + 1];
          if (static_cast<double>(queue[nl].size()) >=
              net.links[nl].storage())
            break;  // blocked by downstream storage
        }
        queue[l].pop_front();
        tokens[l] -= 1.0;
        moved = true;
        if (t < 24 * 3600) {
          const int iv = interval_of(t);
          ++state.links[l][iv].volume;
          interval_sum[l] += t - v.entered_at;
          ++interval_n[l];
        }
        if (last_leg) {
          state.trip_time_s[v.trip_index] = t - trip.departure_s;
          if (t < 24 * 3600) ++state.exited;
          --active;
        } else {
          ++v.leg;
          const std::size_t nl = trip.route[v.leg];
          v.entered_at = t;
          v.ready_at = t + net.links[nl].free_travel_s();
          queue[nl].push_back(v);
        }
      }
    }

    // Interval bookkeeping at the last second of each interval.
    if ((t + 1) % kIntervalSeconds == 0 && t < 24 * 3600) {
      const int iv = t / kIntervalSeconds;
      for (std::size_t l = 0; l < net.links.size(); ++l) {
        auto& s = state.links[l][iv];
        s.queue_len = static_cast<long>(queue[l].size());
        s.speed_ms = interval_n[l] > 0
                         ? net.links[l].length_m /
                               std::max(1.0, interval_sum[l] / interval_n[l])
                         : net.links[l].free_speed_ms;
        s.speed_ms = std::min(s.speed_ms, net.links[l].free_speed_ms);
        interval_sum[l] = 0.0;
        interval_n[l] = 0;
      }
    }
    if (t == 24 * 3600 - 1) state.on_network_at_end = active;

    if (active == 0 && next_dep == order.size()) {
      // Flush the interval in progress before leaving; later intervals keep
      // their free-flow defaults and empty queues.
      if (t < 24 * 3600) {
        const int iv = interval_of(t);
        for (std::size_t l = 0; l < net.links.size(); ++l) {
          auto& s = state.links[l][iv];
          s.queue_len = static_cast<long>(queue[l].size());
          if (interval_n[l] > 0)
            s.speed_ms = std::min(
                net.links[l].length_m /
                    std::max(1.0, interval_sum[l] / interval_n[l]),
                net.links[l].free_speed_ms);
        }
      }
      break;
    }

    // Gridlock detector: vehicles present, none traversing, nothing moved.
    if (!moved && active > 0) {
      bool all_blocked = true;
      for (std::size_t l = 0; l < net.links.size() && all_blocked; ++l)
        for (const auto& v : queue[l])
          if (v.ready_at > t) {
            all_blocked = false;
            break;
          }
      if (all_blocked && next_dep == order.size()) {
        if (++stall >= 600)
          throw NumericError(
              "gridlock: no vehicle moved for 600 s with " +
              std::to_string(active) + " vehicles blocked at t=" +
              std::to_string(t));
      } else {
        stall = 0;
      }
    } else {
      stall = 0;
    }
  }
  return state;
}

namespace {

TravelTimes experienced_times(const NetworkState& state, const Network& net) {
  TravelTimes tt = free_flow_times(net);
  for (std::size_t l = 0; l < net.links.size(); ++l)
    for (int iv = 0; iv < kIntervals; ++iv) {
      const auto& s = state.links[l][iv];
      if (s.volume > 0 && s.speed_ms > 0.0)
        tt[l][iv] = net.links[l].length_m / s.speed_ms;
    }
  return tt;
}

double relative_gap(const std::vector<Trip>& trips, const Network& net,
                    const NetworkState& state, const TravelTimes& times) {
  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (trips[i].mode != Mode::Car || trips[i].route.empty()) continue;
    if (state.trip_time_s[i] < 0.0) continue;
    Trip probe = trips[i];
    if (!route_trip(probe, net, times)) continue;
    double shortest = 0.0;
    double clock = probe.departure_s;
    for (int l : probe.route) {
      const int iv = std::min<int>(kIntervals - 1,
                                   static_cast<int>(clock) / kIntervalSeconds);
      shortest += times[l][iv];
      clock += times[l][iv];
    }
    if (shortest <= 0.0) continue;
    sum += std::max(0.0, state.trip_time_s[i] / shortest - 1.0);
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace

AssignmentResult iterate_assignment(std::vector<Trip> trips,
                                    const Network& net, int n_iter,
                                    double reroute_fraction,
                                    std::uint64_t rng_seed) {
  if (n_iter < 1) throw ConfigError("iterate_assignment: n_iter must be >= 1");
  AssignmentResult result;
  NetworkState state = simulate_day(trips, net);
  for (int iter = 0; iter < n_iter; ++iter) {
    const TravelTimes times = experienced_times(state, net);
    result.relative_gap.push_back(relative_gap(trips, net, state, times));
    if (iter + 1 == n_iter) break;
    if (reroute_fraction > 0.0) {
      Rng rng = Rng::derive(rng_seed, static_cast<std::uint64_t>(iter));
      for (auto& t : trips) {
        if (t.mode != Mode::Car || t.route.empty()) continue;
        if (rng.bernoulli(reroute_fraction)) route_trip(t, net, times);
      }
    }
    state = simulate_day(trips, net);
  }
  result.state = std::move(state);
  result.trips = std::move(trips);
  return result;
}

std::vector<double> vmt_series(const NetworkState& state, const Network& net) {
  std::vector<double> vmt(kIntervals, 0.0);
  for (std::size_t l = 0; l < net.links.size(); ++l)
    for (int iv = 0; iv < kIntervals; ++iv)
      vmt[iv] += state.links[l][iv].volume * net.links[l].length_m / 1000.0;
  return vmt;  // vehicle-kilometers per interval
}

std::map<std::pair<long, long>, double> od_matrix(
    const std::vector<Trip>& trips) {
  std::map<std::pair<long, long>, double> od;
  for (const auto& t : trips) od[{t.origin_taz, t.dest_taz}] += 1.0;
  return od;
}

std::vector<CorridorRow> corridor_extract(const NetworkState& state,
                                          const Network& net,
                                          const std::vector<long>& link_ids) {
  std::vector<int> positions;
  for (long id : link_ids) {
    auto it = net.link_index.find(id);
    if (it == net.link_index.end())
      throw ConfigError("corridor: unknown link id " + std::to_string(id));
    positions.push_back(it->second);
  }
  std::vector<CorridorRow> rows;
  for (int iv = 0; iv < kIntervals; ++iv) {
    CorridorRow row;
    row.interval = iv;
    double len_sum = 0.0, weighted_speed = 0.0;
    for (int l : positions) {
      row.volume += state.links[l][iv].volume;
      len_sum += net.links[l].length_m;
      weighted_speed += state.links[l][iv].speed_ms * net.links[l].length_m;
    }
    row.speed_ms = len_sum > 0.0 ? weighted_speed / len_sum : 0.0;
    rows.push_back(row);
  }
  return rows;
}

Network load_network(const std::string& links_path,
                     const std::string& nodes_path) {
  Network net;
  {
    csv::Table t = csv::read_file(nodes_path);
    const int c_id = t.require("node_id");
    const int c_x = t.require("x");
    const int c_y = t.require("y");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const auto& row = t.rows[r];
      const std::string ctx = nodes_path + " row " + std::to_string(r + 2);
      net.node_xy[csv::to_long(row[c_id], ctx)] = {
          csv::to_double(row[c_x], ctx), csv::to_double(row[c_y], ctx)};
    }
  }
  csv::Table t = csv::read_file(links_path);
  const int c_id = t.require("link_id");
  const int c_from = t.require("from_node");
  const int c_to = t.require("to_node");
  const int c_len = t.require("length_m");
  const int c_speed = t.require("free_speed_ms");
  const int c_cap = t.require("capacity_vph");
  const int c_lanes = t.require("lanes");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = links_path + " row " + std::to_string(r + 2);
    Link l;
    l.link_id = csv::to_long(row[c_id], ctx);
    l.from_node = csv::to_long(row[c_from], ctx);
    l.to_node = csv::to_long(row[c_to], ctx);
    l.length_m = csv::to_double(row[c_len], ctx);
    l.free_speed_ms = csv::to_double(row[c_speed], ctx);
    l.capacity_vph = csv::to_double(row[c_cap], ctx);
    l.lanes = static_cast<int>(csv::to_long(row[c_lanes], ctx));
    if (!(l.length_m > 0.0 && l.free_speed_ms > 0.0 && l.capacity_vph > 0.0))
      throw DataError(ctx + ": length, free_speed and capacity must be > 0");
    if (!net.node_xy.count(l.from_node) || !net.node_xy.count(l.to_node))
      throw DataError(ctx + ": link references unknown node");
    net.links.push_back(l);
  }
  std::sort(net.links.begin(), net.links.end(),
            [](const Link& a, const Link& b) { return a.link_id < b.link_id; });
  for (std::size_t i = 0; i < net.links.size(); ++i) {
    if (net.link_index.count(net.links[i].link_id))
      throw DataError(links_path + ": duplicate link id " +
                      std::to_string(net.links[i].link_id));
    net.link_index[net.links[i].link_id] = static_cast<int>(i);
    net.out_links[net.links[i].from_node].push_back(static_cast<int>(i));
  }
  return net;
}

std::vector<Trip> trips_from_plans(const std::vector<LocatedActivity>& plans,
                                   const ZoneTable& zones, const Network& net) {
  // Zone -> nearest network node, computed once.
  std::map<long, long> zone_node;
  for (const Zone& z : zones.zones)
    zone_node[z.taz_id] = net.nearest_node(z.x, z.y);

  std::map<long, std::vector<LocatedActivity>> by_person;
  for (const auto& p : plans) by_person[p.person_id].push_back(p);

  std::vector<Trip> trips;
  for (auto& [pid, acts] : by_person) {
    std::sort(acts.begin(), acts.end(),
              [](const auto& a, const auto& b) { return a.seq < b.seq; });
    for (std::size_t i = 0; i + 1 < acts.size(); ++i) {
      if (acts[i].taz_id == acts[i + 1].taz_id) continue;  // intrazonal
      Trip t;
      t.person_id = pid;
      t.origin_taz = acts[i].taz_id;
      t.dest_taz = acts[i + 1].taz_id;
      t.origin_node = zone_node.at(t.origin_taz);
      t.dest_node = zone_node.at(t.dest_taz);
      t.departure_s = acts[i].end * 60;
      trips.push_back(t);
    }
  }
  return trips;
}

void save_link_stats(const std::string& path, const NetworkState& state,
                     const Network& net,
                     const std::vector<std::string>& meta) {
  csv::Writer w(path, {"link_id", "interval", "volume", "speed_ms",
                       "queue_len"},
                meta);
  for (std::size_t l = 0; l < net.links.size(); ++l)
    for (int iv = 0; iv < kIntervals; ++iv) {
      const auto& s = state.links[l][iv];
      w.row({csv::fmt(net.links[l].link_id), csv::fmt(iv), csv::fmt(s.volume),
             csv::fmt(s.speed_ms), csv::fmt(s.queue_len)});
    }
}

void save_vmt(const std::string& path, const NetworkState& state,
              const Network& net, const std::vector<std::string>& meta) {
  const auto vmt = vmt_series(state, net);
  csv::Writer w(path, {"interval", "vmt"}, meta);
  for (int iv = 0; iv < kIntervals; ++iv)
    w.row({csv::fmt(iv), csv::fmt(vmt[iv])});
}

void save_od(const std::string& path,
             const std::map<std::pair<long, long>, double>& od,
             const std::vector<std::string>& meta) {
  csv::Writer w(path, {"origin", "dest", "trips"}, meta);
  for (const auto& [k, v] : od)
    w.row({csv::fmt(k.first), csv::fmt(k.second), csv::fmt(v)});
}

void save_corridor(const std::string& path,
                   const std::vector<CorridorRow>& rows,
                   const std::vector<std::string>& meta) {
  csv::Writer w(path, {"interval", "volume", "speed"}, meta);
  for (const auto& r : rows)
    w.row({csv::fmt(r.interval), csv::fmt(r.volume), csv::fmt(r.speed_ms)});
}

}  // namespace tdg
