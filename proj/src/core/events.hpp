// Event table construction: group activities of household members that
// start within a 15-minute window into shared events, detect coordination,
// and derive participant-count and role-combination statistics.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/schedule.hpp"

namespace tdg {

enum class Role { Self, Spouse, Child, Parent, NonRelative };

const char* role_name(Role r);
Role role_from_name(const std::string& s);

struct EventParticipant {
  long person_id = 0;
  Role role = Role::Self;
  int activity_index = 0;  // index into that person's chain
  int start = 0;
  int type = 0;
};

struct Event {
  long event_id = 0;
  int activity_type = 0;  // modal non-accompanying type; Escort if none
  std::vector<EventParticipant> participants;
  int min_start = 0;
  int max_start = 0;
  bool coordinated = false;
};

inline constexpr int kEventWindowMin = 15;  // inclusive

// Role of each member relative to the head (age-gap heuristic).
std::vector<Role> infer_roles(const Household& h, int head_index);

// Greedy earliest-start grouping. One chain per member, in member order.
// Throws DataError on arity mismatch.
std::vector<Event> build_event_table(const Household& h,
                                     const std::vector<ActivityChain>& chains,
                                     const ActivityTypeTable& types,
                                     int head_index);

// Per activity type: normalized distribution over participant counts
// 1..kPMax.
std::map<int, std::vector<double>> participant_distribution(
    const std::vector<Event>& events);

// Per activity type: role multisets of coordinated events with counts,
// sorted descending by count. Key string like "Self+Spouse".
std::map<int, std::vector<std::pair<std::string, long>>> role_combinations(
    const std::vector<Event>& events);

// Event table CSV: household_id,event_id,activity_type,person_id,role,
// start_min,coordinated
void save_events(const std::string& path,
                 const std::vector<std::pair<long, std::vector<Event>>>& all,
                 const ActivityTypeTable& types,
                 const std::vector<std::string>& meta = {});

std::vector<std::pair<long, std::vector<Event>>> load_events(
    const std::string& path, const ActivityTypeTable& types);

}  // namespace tdg
