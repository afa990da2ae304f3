#include "core/events.hpp"

#include <algorithm>

#include "core/csvio.hpp"
#include "core/errors.hpp"

namespace tdg {

const char* role_name(Role r) {
  switch (r) {
    case Role::Self: return "Self";
    case Role::Spouse: return "Spouse";
    case Role::Child: return "Child";
    case Role::Parent: return "Parent";
    case Role::NonRelative: return "NonRelative";
  }
  return "?";
}

Role role_from_name(const std::string& s) {
  if (s == "Self") return Role::Self;
  if (s == "Spouse") return Role::Spouse;
  if (s == "Child") return Role::Child;
  if (s == "Parent") return Role::Parent;
  if (s == "NonRelative") return Role::NonRelative;
  throw DataError("unknown role: '" + s + "'");
}

std::vector<Role> infer_roles(const Household& h, int head_index) {
  const int head_age = h.members[head_index].age;
  std::vector<Role> roles(h.members.size());
  for (int i = 0; i < h.size(); ++i) {
    if (i == head_index) {
      roles[i] = Role::Self;
      continue;
    }
    const int age = h.members[i].age;
    if (age < 18 || head_age - age >= 18)
      roles[i] = Role::Child;
    else if (age - head_age >= 18)
      roles[i] = Role::Parent;
    else if (std::abs(age - head_age) <= 15)
      roles[i] = Role::Spouse;
    else
      roles[i] = Role::NonRelative;
  }
  return roles;
}

namespace {

// Modal non-accompanying type; ties to the lowest code. If every member is
// accompanying, the first participant's type stands.
int consensus_type(const std::vector<EventParticipant>& ps,
                   const ActivityTypeTable& types) {
  std::array<int, kCodes> counts{};
  for (const auto& p : ps)
    if (!types.is_accompanying(p.type)) ++counts[p.type];
  int best = -1;
  for (int c = 0; c < kCodes; ++c)
    if (counts[c] > 0 && (best < 0 || counts[c] > counts[best])) best = c;
  return best >= 0 ? best : ps.front().type;
}

}  // namespace

std::vector<Event> build_event_table(const Household& h,
                                     const std::vector<ActivityChain>& chains,
                                     const ActivityTypeTable& types,
                                     int head_index) {
  if (static_cast<int>(chains.size()) != h.size())
    throw DataError("build_event_table: " + std::to_string(chains.size()) +
                    " chains for household of size " +
                    std::to_string(h.size()));
  const std::vector<Role> roles = infer_roles(h, head_index);

  std::vector<EventParticipant> acts;
  for (int m = 0; m < h.size(); ++m)
    for (std::size_t i = 0; i < chains[m].activities.size(); ++i) {
      const Activity& a = chains[m].activities[i];
      EventParticipant ep;
      ep.person_id = h.members[m].person_id;
      ep.role = roles[m];
      ep.activity_index = static_cast<int>(i);
      ep.start = a.start;
      ep.type = a.type;
      acts.push_back(ep);
    }
  std::sort(acts.begin(), acts.end(), [](const auto& a, const auto& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.person_id != b.person_id) return a.person_id < b.person_id;
    return a.activity_index < b.activity_index;
  });

  std::vector<Event> events;
  for (const auto& act : acts) {
    int chosen = -1;
    for (std::size_t g = 0; g < events.size(); ++g) {
      Event& ev = events[g];
      if (act.start - ev.min_start > kEventWindowMin) continue;
      bool same_person = false;
      for (const auto& p : ev.participants)
        if (p.person_id == act.person_id) same_person = true;
      if (same_person) continue;
      const int gtype = consensus_type(ev.participants, types);
      const bool compatible = act.type == gtype ||
                              types.is_accompanying(act.type) ||
                              types.is_accompanying(gtype);
      if (!compatible) continue;
      // Nearest earliest start wins; ties to the lower event id.
      if (chosen < 0 || ev.min_start > events[chosen].min_start) {
        chosen = static_cast<int>(g);
      }
    }
    if (chosen < 0) {
      Event ev;
      ev.event_id = static_cast<long>(events.size()) + 1;
      ev.min_start = ev.max_start = act.start;
      ev.participants.push_back(act);
      events.push_back(std::move(ev));
    } else {
      Event& ev = events[chosen];
      ev.participants.push_back(act);
      ev.max_start = std::max(ev.max_start, act.start);
    }
  }
  for (auto& ev : events) {
    ev.activity_type = consensus_type(ev.participants, types);
    ev.coordinated = ev.participants.size() >= 2;
  }
  return events;
}

std::map<int, std::vector<double>> participant_distribution(
    const std::vector<Event>& events) {
  std::map<int, std::vector<double>> dist;
  for (const auto& ev : events) {
    auto& d = dist[ev.activity_type];
    d.resize(kPMax, 0.0);
    const std::size_t n = std::min<std::size_t>(ev.participants.size(), kPMax);
    d[n - 1] += 1.0;
  }
  for (auto& [type, d] : dist) {
    double total = 0.0;
    for (double v : d) total += v;
    for (double& v : d) v /= total;
  }
  return dist;
}

std::map<int, std::vector<std::pair<std::string, long>>> role_combinations(
    const std::vector<Event>& events) {
  std::map<int, std::map<std::string, long>> counts;
  for (const auto& ev : events) {
    if (!ev.coordinated) continue;
    std::vector<Role> roles;
    for (const auto& p : ev.participants) roles.push_back(p.role);
    std::sort(roles.begin(), roles.end());
    std::string key;
    for (std::size_t i = 0; i < roles.size(); ++i) {
      if (i) key += '+';
      key += role_name(roles[i]);
    }
    ++counts[ev.activity_type][key];
  }
  std::map<int, std::vector<std::pair<std::string, long>>> out;
  for (auto& [type, by_key] : counts) {
    auto& v = out[type];
    v.assign(by_key.begin(), by_key.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;
    });
  }
  return out;
}

void save_events(const std::string& path,
                 const std::vector<std::pair<long, std::vector<Event>>>& all,
                 const ActivityTypeTable& types,
                 const std::vector<std::string>& meta) {
  csv::Writer w(path,
                {"household_id", "event_id", "activity_type", "person_id",
                 "role", "start_min", "coordinated"},
                meta);
  for (const auto& [hid, events] : all)
    for (const auto& ev : events)
      for (const auto& p : ev.participants)
        w.row({csv::fmt(hid), csv::fmt(ev.event_id),
               types.label(ev.activity_type), csv::fmt(p.person_id),
               role_name(p.role), csv::fmt(p.start),
               csv::fmt(ev.coordinated ? 1 : 0)});
}

std::vector<std::pair<long, std::vector<Event>>> load_events(
    const std::string& path, const ActivityTypeTable& types) {
  csv::Table t = csv::read_file(path);
  const int c_hid = t.require("household_id");
  const int c_eid = t.require("event_id");
  const int c_type = t.require("activity_type");
  const int c_pid = t.require("person_id");
  const int c_role = t.require("role");
  const int c_start = t.require("start_min");
  const int c_coord = t.require("coordinated");

  std::map<long, std::map<long, Event>> acc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    const long hid = csv::to_long(row[c_hid], ctx);
    const long eid = csv::to_long(row[c_eid], ctx);
    Event& ev = acc[hid][eid];
    ev.event_id = eid;
    ev.activity_type = types.code_of(row[c_type]);
    ev.coordinated = csv::to_bool(row[c_coord], ctx);
    EventParticipant p;
    p.person_id = csv::to_long(row[c_pid], ctx);
    p.role = role_from_name(row[c_role]);
    p.start = static_cast<int>(csv::to_long(row[c_start], ctx));
    p.type = ev.activity_type;
    if (ev.participants.empty()) {
      ev.min_start = ev.max_start = p.start;
    } else {
      ev.min_start = std::min(ev.min_start, p.start);
      ev.max_start = std::max(ev.max_start, p.start);
    }
    ev.participants.push_back(p);
  }
  std::vector<std::pair<long, std::vector<Event>>> out;
  for (auto& [hid, by_eid] : acc) {
    std::vector<Event> evs;
    for (auto& [eid, ev] : by_eid) evs.push_back(std::move(ev));
    out.push_back({hid, std::move(evs)});
  }
  return out;
}

}  // namespace tdg
