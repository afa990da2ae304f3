#include <doctest.h>

#include <algorithm>

#include "core/errors.hpp"
#include "core/rng.hpp"
#include "core/schedule.hpp"
#include "test_util.hpp"

using namespace tdg;

namespace {

Person make_person(long id, int age, bool employed = false,
                   bool licensed = false) {
  Person p;
  p.person_id = id;
  p.age = age;
  p.employed = employed;
  p.has_license = licensed;
  return p;
}

}  // namespace

TEST_CASE("activity table: default taxonomy") {
  ActivityTypeTable t;
  CHECK(t.label(ActivityTypeTable::kHome) == "Home");
  CHECK(t.label(ActivityTypeTable::kEscort) == "Escort");
  CHECK(t.code_of("Work") == ActivityTypeTable::kWork);
  CHECK(t.is_accompanying(ActivityTypeTable::kEscort));
  for (int c = 0; c < kCodes; ++c)
    if (c != ActivityTypeTable::kEscort) CHECK(!t.is_accompanying(c));
  // Renamable upper codes.
  t.rename(12, "Gym");
  CHECK(t.code_of("Gym") == 12);
  CHECK_THROWS_AS(t.rename(0, "X"), ConfigError);
  CHECK_THROWS_AS((void)t.code_of("NoSuchLabel"), DataError);
}

TEST_CASE("encode_chain: morning commute example") {
  ActivityChain c;
  c.person_id = 1;
  c.activities = {{ActivityTypeTable::kHome, 0, 480},
                  {ActivityTypeTable::kWork, 480, 570},
                  {ActivityTypeTable::kHome, 570, 1440}};
  const GridRow row = encode_chain(c);
  for (int i = 0; i <= 31; ++i) CHECK(row[i] == ActivityTypeTable::kHome);
  for (int i = 32; i <= 37; ++i) CHECK(row[i] == ActivityTypeTable::kWork);
  for (int i = 38; i <= 95; ++i) CHECK(row[i] == ActivityTypeTable::kHome);
}

TEST_CASE("encode_chain: all-home day and gap error") {
  ActivityChain home;
  home.person_id = 1;
  home.activities = {{ActivityTypeTable::kHome, 0, 1440}};
  const GridRow row = encode_chain(home);
  CHECK(std::all_of(row.begin(), row.end(),
                    [](std::uint8_t c) { return c == 0; }));

  ActivityChain gap;
  gap.person_id = 1;
  gap.activities = {{0, 0, 540}, {1, 600, 1440}};  // hole 09:00-10:00
  CHECK_THROWS_AS((void)encode_chain(gap), DataError);
}

TEST_CASE("encode_chain: partial slot goes to the activity covering its start "
          "minute") {
  ActivityChain c;
  c.person_id = 1;
  // Work starts 08:05: slot 32 (08:00) still belongs to Home.
  c.activities = {{0, 0, 485}, {1, 485, 1440}};
  const GridRow row = encode_chain(c);
  CHECK(row[32] == 0);
  CHECK(row[33] == 1);
}

TEST_CASE("decode_grid: run-length decoding and round trips") {
  GridRow home;
  home.fill(0);
  const ActivityChain c = decode_grid(home, 5);
  REQUIRE(c.activities.size() == 1);
  CHECK(c.person_id == 5);
  CHECK(c.activities[0].start == 0);
  CHECK(c.activities[0].end == 1440);

  ActivityChain commute;
  commute.person_id = 2;
  commute.activities = {{0, 0, 480}, {1, 480, 570}, {0, 570, 1440}};
  const ActivityChain back = decode_grid(encode_chain(commute), 2);
  REQUIRE(back.activities.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.activities[i].type == commute.activities[i].type);
    CHECK(back.activities[i].start == commute.activities[i].start);
    CHECK(back.activities[i].end == commute.activities[i].end);
  }

  GridRow alternating;
  for (int i = 0; i < kSlots; ++i) alternating[i] = i % 2;
  const ActivityChain alt = decode_grid(alternating, 3);
  CHECK(alt.activities.size() == kSlots);
  for (const auto& a : alt.activities) CHECK(a.end - a.start == kSlotMinutes);

  GridRow padded;
  padded.fill(0);
  padded[50] = kPad;
  CHECK_THROWS_AS((void)decode_grid(padded, 1), DataError);
}

TEST_CASE("decode_grid then encode_chain is the identity on valid grids") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    GridRow row;
    int code = (int)rng.uniform_int(0, 14);
    for (int i = 0; i < kSlots; ++i) {
      if (rng.bernoulli(0.1)) code = (int)rng.uniform_int(0, 14);
      row[i] = (std::uint8_t)code;
    }
    const GridRow back = encode_chain(decode_grid(row, 1));
    CHECK(back == row);
  }
}

TEST_CASE("select_household_head: dominance, employment, tie-break") {
  Household h;
  h.household_id = 1;
  h.vehicles = 1;
  h.members = {make_person(10, 40, true, true), make_person(11, 10)};
  CHECK(select_household_head(h) == 0);

  Household h2;
  h2.household_id = 2;
  h2.members = {make_person(20, 35, false, true),
                make_person(21, 35, true, true)};
  CHECK(select_household_head(h2) == 1);  // employment decides

  Household h3;
  h3.household_id = 3;
  h3.members = {make_person(31, 30, true, true),
                make_person(30, 30, true, true)};
  CHECK(h3.members[select_household_head(h3)].person_id == 30);  // lower id
}

TEST_CASE("select_household_head: permutation stability") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Household h;
    h.household_id = trial;
    h.vehicles = (int)rng.uniform_int(0, 2);
    const int n = (int)rng.uniform_int(1, 5);
    for (int i = 0; i < n; ++i) {
      Person p = make_person(100 + i, (int)rng.uniform_int(2, 80),
                             rng.bernoulli(0.5), rng.bernoulli(0.5));
      p.gender = (int)rng.uniform_int(0, 1);
      h.members.push_back(p);
    }
    const long head_id = h.members[select_household_head(h)].person_id;
    Household shuffled = h;
    for (int i = n - 1; i > 0; --i)
      std::swap(shuffled.members[i],
                shuffled.members[(int)rng.uniform_int(0, i)]);
    CHECK(shuffled.members[select_household_head(shuffled)].person_id ==
          head_id);
  }
}

TEST_CASE("population and chain CSV round trips") {
  testutil::TempDir dir("sched");
  ActivityTypeTable types;

  Household h;
  h.household_id = 7;
  h.income = 3;
  h.vehicles = 2;
  h.home_taz = 4;
  h.members = {make_person(70, 44, true, true), make_person(71, 42)};
  std::vector<Household> pop{h};
  save_population(dir.file("pop.csv"), pop, {"stage=test"});
  const auto loaded = load_population(dir.file("pop.csv"));
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].household_id == 7);
  CHECK(loaded[0].size() == 2);
  CHECK(loaded[0].members[1].person_id == 71);
  CHECK(loaded[0].vehicles == 2);
  CHECK(loaded[0].home_taz == 4);

  ChainSet chains;
  ActivityChain c;
  c.person_id = 70;
  c.activities = {{0, 0, 480}, {1, 480, 1020}, {0, 1020, 1440}};
  chains[7][70] = c;
  save_chains(dir.file("chains.csv"), chains, types);
  const auto back = load_chains(dir.file("chains.csv"), types);
  REQUIRE(back.count(7) == 1);
  REQUIRE(back.at(7).count(70) == 1);
  CHECK(back.at(7).at(70).activities.size() == 3);
  CHECK(back.at(7).at(70).activities[1].type == 1);
}

TEST_CASE("load_population rejects invalid rows") {
  testutil::TempDir dir("schedbad");
  testutil::write_file(
      dir.file("bad.csv"),
      "household_id,person_id,age,employed,student,education,has_license,"
      "gender,hh_size,income,vehicles,home_taz\n"
      "1,10,-1,0,0,0,0,0,1,1,0,1\n");
  CHECK_THROWS_AS((void)load_population(dir.file("bad.csv")), DataError);

  testutil::write_file(
      dir.file("taz.csv"),
      "household_id,person_id,age,employed,student,education,has_license,"
      "gender,hh_size,income,vehicles,home_taz\n"
      "1,10,30,0,0,0,0,0,1,1,0,99\n");
  const std::vector<long> known{1, 2};
  CHECK_THROWS_AS((void)load_population(dir.file("taz.csv"), &known),
                  DataError);
}
