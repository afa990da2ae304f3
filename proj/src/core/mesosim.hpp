// Queue-based traffic loading: mode initialization, time-dependent shortest
// path routing, point-queue-with-storage link dynamics, and the derived
// traffic observables (link stats, VMT, OD matrix, corridor extract).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/location.hpp"
#include "core/schedule.hpp"

namespace tdg {

inline constexpr int kIntervals = 96;          // 15-minute intervals
inline constexpr int kIntervalSeconds = 900;
inline constexpr double kVehicleLengthM = 7.5;  // storage per vehicle

struct Link {
  long link_id = 0;
  long from_node = 0;
  long to_node = 0;
  double length_m = 0.0;
  double free_speed_ms = 0.0;
  double capacity_vph = 0.0;
  int lanes = 1;

  double storage() const { return lanes * length_m / kVehicleLengthM; }
  int free_travel_s() const;
};

struct Network {
  std::vector<Link> links;                       // sorted by link_id
  std::map<long, int> link_index;                // link_id -> position
  std::map<long, std::pair<double, double>> node_xy;
  std::map<long, std::vector<int>> out_links;    // node -> link positions

  // Nearest node to a planar point; ties to the lower node id.
  long nearest_node(double x, double y) const;
};

enum class Mode { Car, NonCar };

struct Trip {
  long person_id = 0;
  long origin_taz = 0, dest_taz = 0;
  long origin_node = 0, dest_node = 0;
  int departure_s = 0;
  Mode mode = Mode::Car;
  std::vector<int> route;  // link positions, origin to destination
};

struct LinkIntervalState {
  long volume = 0;          // exits during the interval
  double speed_ms = 0.0;    // length / mean experienced traversal time
  long queue_len = 0;       // vehicles on the link at interval end
};

struct NetworkState {
  // [link position][interval]
  std::vector<std::array<LinkIntervalState, kIntervals>> links;
  std::vector<double> trip_time_s;   // per car trip, -1 if not arrived
  long entered = 0, exited = 0, on_network_at_end = 0;
  long dropped_unroutable = 0;
};

// Per-link per-interval experienced travel time table used for routing.
using TravelTimes = std::vector<std::array<double, kIntervals>>;

TravelTimes free_flow_times(const Network& net);

// Zero-vehicle households always go non-car; eligible trips draw car with
// probability car_share. households maps household ids to vehicle counts.
void init_modes(const std::map<long, int>& household_vehicles,
                const std::map<long, long>& person_household,
                std::vector<Trip>& trips, double car_share,
                std::uint64_t rng_seed);

// Time-dependent least-cost path; label-setting with deterministic
// link-id tie-breaks. Returns false when origin and destination are
// disconnected.
bool route_trip(Trip& trip, const Network& net, const TravelTimes& times);

// Point queue with storage, 1-second steps. Throws NumericError on a
// 600-second standstill with blocked vehicles.
NetworkState simulate_day(const std::vector<Trip>& trips, const Network& net);

struct AssignmentResult {
  NetworkState state;
  std::vector<double> relative_gap;  // one entry per iteration
  std::vector<Trip> trips;           // with final routes
};

AssignmentResult iterate_assignment(std::vector<Trip> trips,
                                    const Network& net, int n_iter,
                                    double reroute_fraction,
                                    std::uint64_t rng_seed);

// ---- Observables --------------------------------------------------------

std::vector<double> vmt_series(const NetworkState& state, const Network& net);

std::map<std::pair<long, long>, double> od_matrix(
    const std::vector<Trip>& trips);

struct CorridorRow {
  int interval = 0;
  double volume = 0.0;
  double speed_ms = 0.0;  // length-weighted over corridor links
};

// Throws ConfigError on an unknown corridor link id.
std::vector<CorridorRow> corridor_extract(const NetworkState& state,
                                          const Network& net,
                                          const std::vector<long>& link_ids);

// ---- IO -----------------------------------------------------------------

// Links CSV: link_id,from_node,to_node,length_m,free_speed_ms,capacity_vph,
// lanes. Nodes CSV: node_id,x,y.
Network load_network(const std::string& links_path,
                     const std::string& nodes_path);

std::vector<Trip> trips_from_plans(const std::vector<LocatedActivity>& plans,
                                   const ZoneTable& zones, const Network& net);

void save_link_stats(const std::string& path, const NetworkState& state,
                     const Network& net,
                     const std::vector<std::string>& meta = {});
void save_vmt(const std::string& path, const NetworkState& state,
              const Network& net, const std::vector<std::string>& meta = {});
void save_od(const std::string& path,
             const std::map<std::pair<long, long>, double>& od,
             const std::vector<std::string>& meta = {});
void save_corridor(const std::string& path,
                   const std::vector<CorridorRow>& rows,
                   const std::vector<std::string>& meta = {});

}  // namespace tdg
