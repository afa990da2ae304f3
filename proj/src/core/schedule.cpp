#include "core/schedule.hpp"

#include <algorithm>
#include <tuple>

#include "core/csvio.hpp"
#include "core/errors.hpp"

namespace tdg {

ActivityTypeTable::ActivityTypeTable() {
  labels_ = {"Home",       "Work",          "School",
             "BuyGoods",   "BuyServices",   "GeneralErrands",
             "Recreation", "Meal",          "ReligiousCommunity",
             "Visit",      "AttendCare",    "Escort",
             "Exercise",   "HealthCare",    "Other",
             "PAD"};
  accompanying_[kEscort] = true;
  reindex();
}

void ActivityTypeTable::reindex() {
  by_label_.clear();
  for (int c = 0; c < kCodes; ++c) by_label_[labels_[c]] = c;
}

const std::string& ActivityTypeTable::label(int code) const {
  if (code < 0 || code >= kCodes) throw DataError("activity code out of range");
  return labels_[code];
}

int ActivityTypeTable::code_of(const std::string& label) const {
  auto it = by_label_.find(label);
  if (it == by_label_.end())
    throw DataError("unknown activity type label: '" + label + "'");
  return it->second;
}

bool ActivityTypeTable::is_accompanying(int code) const {
  if (code < 0 || code >= kCodes) throw DataError("activity code out of range");
  return accompanying_[code];
}

void ActivityTypeTable::rename(int code, const std::string& label) {
  if (code < 12 || code > 14)
    throw ConfigError("only activity codes 12..14 are renamable");
  labels_[code] = label;
  reindex();
}

void ActivityTypeTable::set_accompanying(int code, bool flag) {
  if (code < 0 || code >= kCodes || code == kPad)
    throw ConfigError("bad accompanying code");
  accompanying_[code] = flag;
}

void ActivityChain::validate_full_day() const {
  if (activities.empty())
    throw DataError("chain for person " + std::to_string(person_id) +
                    " is empty");
  int cursor = 0;
  for (std::size_t i = 0; i < activities.size(); ++i) {
    const Activity& a = activities[i];
    if (a.type == kPad)
      throw DataError("PAD activity in chain for person " +
                      std::to_string(person_id));
    if (a.start >= a.end)
      throw DataError("activity with start >= end for person " +
                      std::to_string(person_id));
    if (a.start != cursor)
      throw DataError("gap or overlap at minute " + std::to_string(cursor) +
                      " in chain for person " + std::to_string(person_id));
    cursor = a.end;
  }
  if (cursor != kDayMinutes)
    throw DataError("chain for person " + std::to_string(person_id) +
                    " ends at minute " + std::to_string(cursor) +
                    ", expected 1440");
}

SlotGrid SlotGrid::padded(int n_members) {
  SlotGrid g;
  g.n_members = n_members;
  for (auto& row : g.codes) row.fill(kPad);
  return g;
}

GridRow encode_chain(const ActivityChain& chain) {
  chain.validate_full_day();
  GridRow row;
  std::size_t ai = 0;
  for (int s = 0; s < kSlots; ++s) {
    const int minute = s * kSlotMinutes;
    while (chain.activities[ai].end <= minute) ++ai;
    row[s] = static_cast<std::uint8_t>(chain.activities[ai].type);
  }
  return row;
}

ActivityChain decode_grid(const GridRow& row, long person_id) {
  ActivityChain chain;
  chain.person_id = person_id;
  int run_start = 0;
  for (int s = 1; s <= kSlots; ++s) {
    if (row[run_start] == kPad)
      throw DataError("PAD code in grid row for person " +
                      std::to_string(person_id));
    if (s == kSlots || row[s] != row[run_start]) {
      chain.activities.push_back({static_cast<int>(row[run_start]),
                                  run_start * kSlotMinutes, s * kSlotMinutes});
      run_start = s;
    }
  }
  return chain;
}

int select_household_head(const Household& h,
                          const std::map<int, int>& gender_priority) {
  if (h.members.empty()) throw DataError("empty household");
  auto key = [&](const Person& p) {
    int grank = 0;
    if (!gender_priority.empty()) {
      auto it = gender_priority.find(p.gender);
      // Higher tuple wins, so negate the rank (rank 0 = highest priority).
      grank = it == gender_priority.end() ? -1000 : -it->second;
    }
    return std::make_tuple(p.age >= 18, p.employed, p.has_license,
                           h.vehicles > 0 && p.has_license, grank, p.age,
                           -p.person_id);
  };
  int best = 0;
  for (int i = 1; i < h.size(); ++i)
    if (key(h.members[i]) > key(h.members[best])) best = i;
  return best;
}

// ---- CSV ----------------------------------------------------------------

std::vector<Household> load_population(const std::string& path,
                                       const std::vector<long>* known_tazs) {
  csv::Table t = csv::read_file(path);
  const int c_hid = t.require("household_id");
  const int c_pid = t.require("person_id");
  const int c_age = t.require("age");
  const int c_emp = t.require("employed");
  const int c_stu = t.require("student");
  const int c_edu = t.require("education");
  const int c_lic = t.require("has_license");
  const int c_gen = t.require("gender");
  const int c_size = t.require("hh_size");
  const int c_inc = t.require("income");
  const int c_veh = t.require("vehicles");
  const int c_taz = t.require("home_taz");

  std::vector<Household> pop;
  std::map<long, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    Person p;
    p.person_id = csv::to_long(row[c_pid], ctx);
    p.age = static_cast<int>(csv::to_long(row[c_age], ctx));
    if (p.age < 0) throw DataError(ctx + ": negative age");
    p.employed = csv::to_bool(row[c_emp], ctx);
    p.student = csv::to_bool(row[c_stu], ctx);
    p.education = static_cast<int>(csv::to_long(row[c_edu], ctx));
    p.has_license = csv::to_bool(row[c_lic], ctx);
    p.gender = static_cast<int>(csv::to_long(row[c_gen], ctx));

    const long hid = csv::to_long(row[c_hid], ctx);
    auto it = index.find(hid);
    if (it == index.end()) {
      Household h;
      h.household_id = hid;
      h.income = static_cast<int>(csv::to_long(row[c_inc], ctx));
      h.vehicles = static_cast<int>(csv::to_long(row[c_veh], ctx));
      if (h.vehicles < 0) throw DataError(ctx + ": negative vehicle count");
      h.home_taz = csv::to_long(row[c_taz], ctx);
      if (known_tazs &&
          std::find(known_tazs->begin(), known_tazs->end(), h.home_taz) ==
              known_tazs->end())
        throw DataError(ctx + ": unknown home_taz " +
                        std::to_string(h.home_taz));
      index[hid] = pop.size();
      pop.push_back(std::move(h));
      it = index.find(hid);
    }
    Household& h = pop[it->second];
    const int declared = static_cast<int>(csv::to_long(row[c_size], ctx));
    h.members.push_back(p);
    if (h.size() > kPMax)
      throw DataError(ctx + ": household exceeds " + std::to_string(kPMax) +
                      " members");
    if (declared < h.size())
      throw DataError(ctx + ": hh_size smaller than member rows seen");
  }
  return pop;
}

void save_population(const std::string& path, const std::vector<Household>& pop,
                     const std::vector<std::string>& meta) {
  csv::Writer w(path,
                {"household_id", "person_id", "age", "employed", "student",
                 "education", "has_license", "gender", "hh_size", "income",
                 "vehicles", "home_taz"},
                meta);
  for (const auto& h : pop)
    for (const auto& p : h.members)
      w.row({csv::fmt(h.household_id), csv::fmt(p.person_id), csv::fmt(p.age),
             csv::fmt(p.employed ? 1 : 0), csv::fmt(p.student ? 1 : 0),
             csv::fmt(p.education), csv::fmt(p.has_license ? 1 : 0),
             csv::fmt(p.gender), csv::fmt(h.size()), csv::fmt(h.income),
             csv::fmt(h.vehicles), csv::fmt(h.home_taz)});
}

ChainSet load_chains(const std::string& path, const ActivityTypeTable& types) {
  csv::Table t = csv::read_file(path);
  const int c_hid = t.require("household_id");
  const int c_pid = t.require("person_id");
  const int c_type = t.require("activity_type");
  const int c_start = t.require("start_min");
  const int c_end = t.require("end_min");

  ChainSet chains;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    const long hid = csv::to_long(row[c_hid], ctx);
    const long pid = csv::to_long(row[c_pid], ctx);
    Activity a;
    a.type = types.code_of(row[c_type]);
    a.start = static_cast<int>(csv::to_long(row[c_start], ctx));
    a.end = static_cast<int>(csv::to_long(row[c_end], ctx));
    auto& chain = chains[hid][pid];
    chain.person_id = pid;
    chain.activities.push_back(a);
  }
  for (auto& [hid, by_person] : chains)
    for (auto& [pid, chain] : by_person) {
      std::stable_sort(chain.activities.begin(), chain.activities.end(),
                       [](const Activity& a, const Activity& b) {
                         return a.start < b.start;
                       });
      chain.validate_full_day();
    }
  return chains;
}

void save_chains(const std::string& path, const ChainSet& chains,
                 const ActivityTypeTable& types,
                 const std::vector<std::string>& meta) {
  csv::Writer w(
      path, {"household_id", "person_id", "activity_type", "start_min",
             "end_min"},
      meta);
  for (const auto& [hid, by_person] : chains)
    for (const auto& [pid, chain] : by_person)
      for (const auto& a : chain.activities)
        w.row({csv::fmt(hid), csv::fmt(pid), types.label(a.type),
               csv::fmt(a.start), csv::fmt(a.end)});
}

}  // namespace tdg
