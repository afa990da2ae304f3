// Domain types: activity taxonomy, persons, households, daily chains and
// their 96-slot grid encoding, plus household-head selection.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tdg {

inline constexpr int kSlots = 96;        // 15-minute slots per day
inline constexpr int kSlotMinutes = 15;
inline constexpr int kDayMinutes = 1440;
inline constexpr int kCodes = 16;        // 15 activity types + PAD
inline constexpr int kPad = 15;
inline constexpr int kPMax = 8;          // max modeled household members

// The 15-category activity taxonomy. Codes 0..11 are fixed; 12..14 default
// to Exercise/HealthCare/Other and can be renamed in config. Code 15 is the
// PAD sentinel for absent household members.
class ActivityTypeTable {
 public:
  ActivityTypeTable();  // default labels and accompanying set ({Escort})

  static constexpr int kHome = 0;
  static constexpr int kWork = 1;
  static constexpr int kSchool = 2;
  static constexpr int kBuyGoods = 3;
  static constexpr int kBuyServices = 4;
  static constexpr int kGeneralErrands = 5;
  static constexpr int kRecreation = 6;
  static constexpr int kMeal = 7;
  static constexpr int kReligiousCommunity = 8;
  static constexpr int kVisit = 9;
  static constexpr int kAttendCare = 10;
  static constexpr int kEscort = 11;

  const std::string& label(int code) const;
  int code_of(const std::string& label) const;  // throws DataError if unknown
  bool is_accompanying(int code) const;

  void rename(int code, const std::string& label);           // codes 12..14
  void set_accompanying(int code, bool flag);

 private:
  std::array<std::string, kCodes> labels_;
  std::array<bool, kCodes> accompanying_{};
  std::map<std::string, int> by_label_;
  void reindex();
};

struct Person {
  long person_id = 0;
  int age = 0;
  bool employed = false;
  bool student = false;
  int education = 0;   // ordinal level
  bool has_license = false;
  int gender = 0;      // categorical code
};

struct Household {
  long household_id = 0;
  std::vector<Person> members;  // ordered, length 1..kPMax
  int income = 0;               // ordinal bracket
  int vehicles = 0;
  long home_taz = 0;

  int size() const { return static_cast<int>(members.size()); }
};

struct Activity {
  int type = 0;        // ActivityType code, never kPad
  int start = 0;       // minutes of day, [0, 1440)
  int end = 0;         // minutes of day, (0, 1440]
};

struct ActivityChain {
  long person_id = 0;
  std::vector<Activity> activities;

  // Throws DataError unless activities are sorted, non-overlapping, and
  // cover [0, 1440] without gaps.
  void validate_full_day() const;
};

using GridRow = std::array<std::uint8_t, kSlots>;

// Per-household member-by-slot code matrix. Rows beyond the household size
// are all PAD.
struct SlotGrid {
  std::array<GridRow, kPMax> codes{};
  int n_members = 0;

  static SlotGrid padded(int n_members);
};

// Slot i holds the type of the activity covering minute 15*i (partial-slot
// ownership goes to the activity covering the slot's start minute).
GridRow encode_chain(const ActivityChain& chain);

// Maximal runs of identical codes become activities. Throws DataError if the
// row contains PAD.
ActivityChain decode_grid(const GridRow& row, long person_id);

// Lexicographic priority: adulthood, employment, license, vehicle access,
// gender priority (optional), age, then lowest person_id. Returns the index
// into household.members.
// gender_priority maps gender code -> rank (lower rank wins); empty = ignore.
int select_household_head(const Household& h,
                          const std::map<int, int>& gender_priority = {});

// ---- CSV ingestion / emission -------------------------------------------

// Population CSV schema (one row per person):
//   household_id,person_id,age,employed,student,education,has_license,
//   gender,hh_size,income,vehicles,home_taz
std::vector<Household> load_population(
    const std::string& path,
    const std::vector<long>* known_tazs = nullptr);

void save_population(const std::string& path,
                     const std::vector<Household>& pop,
                     const std::vector<std::string>& meta = {});

// Chain corpus CSV schema:
//   household_id,person_id,activity_type,start_min,end_min
using ChainSet = std::map<long, std::map<long, ActivityChain>>;

ChainSet load_chains(const std::string& path, const ActivityTypeTable& types);

void save_chains(const std::string& path, const ChainSet& chains,
                 const ActivityTypeTable& types,
                 const std::vector<std::string>& meta = {});

}  // namespace tdg
