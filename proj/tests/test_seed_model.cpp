#include <doctest.h>

#include <cmath>

#include "core/rng.hpp"
#include "core/schedule.hpp"
#include "core/seed_model.hpp"

using namespace tdg;

namespace {

Household household_with_head(long hid, bool employed, bool children) {
  Household h;
  h.household_id = hid;
  Person head;
  head.person_id = hid * 10;
  head.age = 40;
  head.employed = employed;
  head.has_license = true;
  h.members.push_back(head);
  if (children) {
    Person kid;
    kid.person_id = hid * 10 + 1;
    kid.age = 8;
    h.members.push_back(kid);
  }
  return h;
}

ActivityChain all_home(long pid) {
  ActivityChain c;
  c.person_id = pid;
  c.activities = {{0, 0, 1440}};
  return c;
}

}  // namespace

TEST_CASE("seed model: all-home corpus emits Home with high probability") {
  std::vector<Household> pop;
  ChainSet chains;
  for (long hid = 1; hid <= 400; ++hid) {
    pop.push_back(household_with_head(hid, hid % 2, false));
    chains[hid][hid * 10] = all_home(hid * 10);
  }
  const SeedChainModel model = fit_seed_model(pop, chains, SeedModelConfig{});
  const auto& st = model.lookup(pop[0], pop[0].members[0]);
  // Initial distribution: Home dominates despite smoothing.
  CHECK(st.initial(0) >= 0.85);
  // Every transition out of Home returns Home with prob >= 0.99.
  for (const auto& m : st.trans) CHECK(m(0, 0) >= 0.99);

  // Deterministic sampling of the model yields the all-home chain.
  const GridRow row =
      generate_seed_chain(model, pop[0], pop[0].members[0], 5, 0.0);
  for (int t = 0; t < kSlots; ++t) CHECK(row[t] == 0);
}

TEST_CASE("seed model: identical seeds give identical rows") {
  std::vector<Household> pop;
  ChainSet chains;
  for (long hid = 1; hid <= 10; ++hid) {
    pop.push_back(household_with_head(hid, true, false));
    ActivityChain c;
    c.person_id = hid * 10;
    c.activities = {{0, 0, 480}, {1, 480, 1020}, {0, 1020, 1440}};
    chains[hid][hid * 10] = c;
  }
  const SeedChainModel model = fit_seed_model(pop, chains, SeedModelConfig{});
  const GridRow a =
      generate_seed_chain(model, pop[0], pop[0].members[0], 77, 1.0);
  const GridRow b =
      generate_seed_chain(model, pop[0], pop[0].members[0], 77, 1.0);
  CHECK(a == b);
}

TEST_CASE("seed model: Monte-Carlo recovery of a two-state toy model") {
  // Build a corpus whose slot transitions alternate Home/Work with known
  // asymmetric rates, then verify sampled frequencies track the stored
  // tensor within 0.02.
  std::vector<Household> pop;
  ChainSet chains;
  Rng rng(2024);
  for (long hid = 1; hid <= 400; ++hid) {
    pop.push_back(household_with_head(hid, true, false));
    ActivityChain c;
    c.person_id = hid * 10;
    int code = 0;
    int start = 0;
    for (int t = 1; t < kSlots; ++t) {
      const double p_switch = code == 0 ? 0.3 : 0.1;
      if (rng.bernoulli(p_switch)) {
        c.activities.push_back({code, start, t * kSlotMinutes});
        code = 1 - code;
        start = t * kSlotMinutes;
      }
    }
    c.activities.push_back({code, start, kDayMinutes});
    chains[hid][hid * 10] = c;
  }
  const SeedChainModel model = fit_seed_model(pop, chains, SeedModelConfig{});
  const auto& st = model.lookup(pop[0], pop[0].members[0]);

  // Sample 10k chains and compare empirical slot-40 transitions with the
  // stored conditional probabilities.
  long n_home = 0, home_to_work = 0;
  for (int s = 0; s < 10000; ++s) {
    const GridRow row =
        generate_seed_chain(model, pop[0], pop[0].members[0], 9000 + s, 1.0);
    if (row[40] == 0) {
      ++n_home;
      home_to_work += row[41] == 1;
    }
  }
  REQUIRE(n_home > 500);
  const double empirical = double(home_to_work) / n_home;
  CHECK(std::abs(empirical - st.trans[40](0, 1)) < 0.02);
  // The fitted rate itself is close to the generator's 0.3.
  CHECK(std::abs(st.trans[40](0, 1) - 0.3) < 0.1);
}

TEST_CASE("seed model: absent stratum falls back to the pooled estimate") {
  std::vector<Household> pop;
  ChainSet chains;
  for (long hid = 1; hid <= 5; ++hid) {
    pop.push_back(household_with_head(hid, true, false));
    chains[hid][hid * 10] = all_home(hid * 10);
  }
  const SeedChainModel model = fit_seed_model(pop, chains, SeedModelConfig{});
  // Query with an unseen stratum (unemployed head with children).
  const Household other = household_with_head(99, false, true);
  const auto& st = model.lookup(other, other.members[0]);
  CHECK(st.n_chains == 5);  // pooled over everything
  CHECK(model.strata.count("*") == 1);
}

TEST_CASE("seed model: conditionals are normalized and PAD-free") {
  std::vector<Household> pop;
  ChainSet chains;
  for (long hid = 1; hid <= 8; ++hid) {
    pop.push_back(household_with_head(hid, hid % 2, hid % 3 == 0));
    ActivityChain c;
    c.person_id = hid * 10;
    c.activities = {{0, 0, 600}, {7, 600, 660}, {0, 660, 1440}};
    chains[hid][hid * 10] = c;
  }
  const SeedChainModel model = fit_seed_model(pop, chains, SeedModelConfig{});
  for (const auto& [key, st] : model.strata) {
    CHECK(std::abs(st.initial.sum() - 1.0) < 1e-9);
    CHECK(st.initial.size() == kCodes - 1);  // PAD never emitted
    for (const auto& m : st.trans) {
      for (int i = 0; i < m.rows(); ++i)
        CHECK(std::abs(m.row(i).sum() - 1.0) < 1e-9);
      CHECK(m.cols() == kCodes - 1);
    }
  }
}

TEST_CASE("seed model: JSON round trip preserves the tensors") {
  std::vector<Household> pop;
  ChainSet chains;
  for (long hid = 1; hid <= 6; ++hid) {
    pop.push_back(household_with_head(hid, true, false));
    ActivityChain c;
    c.person_id = hid * 10;
    c.activities = {{0, 0, 480}, {1, 480, 1020}, {0, 1020, 1440}};
    chains[hid][hid * 10] = c;
  }
  const SeedChainModel model = fit_seed_model(pop, chains, SeedModelConfig{});
  const SeedChainModel back = SeedChainModel::from_json(model.to_json());
  REQUIRE(back.strata.size() == model.strata.size());
  for (const auto& [key, st] : model.strata) {
    REQUIRE(back.strata.count(key) == 1);
    const auto& bst = back.strata.at(key);
    CHECK(bst.initial.isApprox(st.initial, 1e-12));
    REQUIRE(bst.trans.size() == st.trans.size());
    for (std::size_t t = 0; t < st.trans.size(); ++t)
      CHECK(bst.trans[t].isApprox(st.trans[t], 1e-12));
  }
  // Sampling from the round-tripped model is identical.
  const GridRow a =
      generate_seed_chain(model, pop[0], pop[0].members[0], 3, 1.0);
  const GridRow b =
      generate_seed_chain(back, pop[0], pop[0].members[0], 3, 1.0);
  CHECK(a == b);
}
