#include "core/synthcorpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/events.hpp"
#include "core/rng.hpp"

namespace tdg {

namespace {

using T = ActivityTypeTable;

constexpr int kExercise = 12;  // default label of the first renamable code

// Non-home segments; Home fills every gap so the chain covers the day.
ActivityChain fill_home(long person_id, std::vector<Activity> acts) {
  std::sort(acts.begin(), acts.end(),
            [](const Activity& a, const Activity& b) { return a.start < b.start; });
  ActivityChain chain;
  chain.person_id = person_id;
  int at = 0;
  for (const auto& a : acts) {
    if (a.start > at) chain.activities.push_back({T::kHome, at, a.start});
    chain.activities.push_back(a);
    at = a.end;
  }
  if (at < kDayMinutes)
    chain.activities.push_back({T::kHome, at, kDayMinutes});
  chain.validate_full_day();
  return chain;
}

Person make_adult(long person_id, bool employed, int gender, Rng& rng) {
  Person p;
  p.person_id = person_id;
  p.age = 25 + static_cast<int>(rng.uniform_int(0, 35));
  p.employed = employed;
  p.student = false;
  p.education = 2 + static_cast<int>(rng.uniform_int(0, 3));
  p.has_license = true;
  p.gender = gender;
  return p;
}

Person make_child(long person_id, Rng& rng) {
  Person p;
  p.person_id = person_id;
  p.age = 6 + static_cast<int>(rng.uniform_int(0, 9));
  p.student = true;
  p.education = 1;
  p.gender = 1 + static_cast<int>(rng.uniform_int(0, 1));
  return p;
}

// Dinner start: 18:00 or 19:00.
int draw_meal_start(Rng& rng) { return rng.bernoulli(0.5) ? 1080 : 1140; }

}  // namespace

void SyntheticRuleSet::validate() const {
  auto prob = [](double v, const char* name) {
    if (v < 0.0 || v > 1.0)
      throw ConfigError(std::string("synthetic rules: ") + name +
                        " outside [0, 1]");
  };
  prob(p_spouse_meal, "p_spouse_meal");
  prob(q_escort, "q_escort");
  prob(share_single, "share_single");
  prob(share_couple, "share_couple");
  if (share_single + share_couple > 1.0)
    throw ConfigError("synthetic rules: segment shares exceed 1");
  if (n_zones < 1) throw ConfigError("synthetic rules: n_zones < 1");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticRuleSet& rules,
                                          int n_households,
                                          std::uint64_t rng_seed) {
  rules.validate();
  SyntheticCorpus out;
  for (long hid = 1; hid <= n_households; ++hid) {
    Rng rng = Rng::derive(rng_seed, static_cast<std::uint64_t>(hid));
    Household h;
    h.household_id = hid;
    h.income = 3 + static_cast<int>(rng.uniform_int(0, 5));
    h.vehicles = 1 + static_cast<int>(rng.uniform_int(0, 1));
    h.home_taz = 1 + rng.uniform_int(0, rules.n_zones - 1);

    const double seg = rng.uniform();
    auto& hc = out.chains[hid];
    const long base = hid * 100;

    if (rules.all_home) {
      Person p = make_adult(base + 1, true, 1, rng);
      h.members.push_back(p);
      hc[p.person_id] = fill_home(p.person_id, {});
      out.population.push_back(std::move(h));
      continue;
    }

    if (seg < rules.share_single) {
      Person p = make_adult(base + 1, true, 1 + (int)rng.uniform_int(0, 1), rng);
      h.members.push_back(p);
      const int ex = 420 + 15 * static_cast<int>(rng.uniform_int(0, 2));
      const int rec = 1260 + 15 * static_cast<int>(rng.uniform_int(0, 3));
      const int meal = draw_meal_start(rng);
      hc[p.person_id] = fill_home(
          p.person_id, {{kExercise, ex, ex + 30},
                        {T::kWork, 480, 1020},
                        {T::kMeal, meal, meal + 15},
                        {T::kRecreation, rec, rec + 30}});
      out.population.push_back(std::move(h));
      continue;
    }

    const bool family = seg >= rules.share_single + rules.share_couple;
    Person head = make_adult(base + 1, true, 1, rng);
    Person spouse = make_adult(base + 2, false, 2, rng);
    spouse.has_license = rng.bernoulli(0.7);
    h.members.push_back(head);
    h.members.push_back(spouse);

    const int meal = draw_meal_start(rng);
    std::vector<Activity> head_acts{{T::kWork, 480, 1020},
                                    {T::kMeal, meal, meal + 15}};
    std::vector<Activity> spouse_acts;
    const int errand = 540 + 15 * static_cast<int>(rng.uniform_int(0, 5));
    spouse_acts.push_back({T::kBuyGoods, errand, errand + 30});
    if (rng.bernoulli(rules.p_spouse_meal)) {
      spouse_acts.push_back({T::kMeal, meal, meal + 15});
      // Post-meal recreation staggers the spouse's return home so the two
      // homecomings stay independent events.
      spouse_acts.push_back({T::kRecreation, meal + 15, meal + 45});
    }

    if (family) {
      Person child = make_child(base + 3, rng);
      h.members.push_back(child);
      if (rng.bernoulli(rules.q_escort))
        head_acts.push_back({T::kEscort, 465, 480});
      hc[child.person_id] =
          fill_home(child.person_id, {{T::kSchool, 480, 960}});
    }
    hc[head.person_id] = fill_home(head.person_id, std::move(head_acts));
    hc[spouse.person_id] = fill_home(spouse.person_id, std::move(spouse_acts));
    out.population.push_back(std::move(h));
  }
  return out;
}

double measure_meal_join_rate(const std::vector<Household>& pop,
                              const ChainSet& chains) {
  long joined = 0, total = 0;
  for (const auto& h : pop) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    int adults = 0;
    for (const auto& p : h.members)
      if (p.age >= 18) ++adults;
    if (adults < 2) continue;
    const Person& head = h.members[select_household_head(h)];
    auto head_it = hit->second.find(head.person_id);
    if (head_it == hit->second.end()) continue;
    for (const auto& a : head_it->second.activities) {
      if (a.type != T::kMeal) continue;
      ++total;
      bool hit_join = false;
      for (const auto& p : h.members) {
        if (p.person_id == head.person_id || p.age < 18) continue;
        auto pit = hit->second.find(p.person_id);
        if (pit == hit->second.end()) continue;
        for (const auto& b : pit->second.activities)
          if (b.type == T::kMeal && std::abs(b.start - a.start) <= 15)
            hit_join = true;
      }
      if (hit_join) ++joined;
    }
  }
  return total == 0 ? std::nan("") : static_cast<double>(joined) / total;
}

double measure_escort_rate(const std::vector<Household>& pop,
                           const ChainSet& chains) {
  long escorted = 0, total = 0;
  for (const auto& h : pop) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    for (const auto& p : h.members) {
      if (p.age >= 18) continue;
      auto pit = hit->second.find(p.person_id);
      if (pit == hit->second.end()) continue;
      for (const auto& a : pit->second.activities) {
        if (a.type != T::kSchool) continue;
        ++total;
        bool esc = false;
        for (const auto& q : h.members) {
          if (q.age < 18) continue;
          auto qit = hit->second.find(q.person_id);
          if (qit == hit->second.end()) continue;
          for (const auto& b : qit->second.activities)
            if (b.type == T::kEscort && std::abs(b.start - a.start) <= 15)
              esc = true;
        }
        if (esc) ++escorted;
      }
    }
  }
  return total == 0 ? std::nan("") : static_cast<double>(escorted) / total;
}

double measure_solo_share(const std::vector<Household>& pop,
                          const ChainSet& chains,
                          const ActivityTypeTable& types) {
  long solo = 0, total = 0;
  for (const auto& h : pop) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    std::vector<ActivityChain> cs;
    bool complete = true;
    for (const auto& p : h.members) {
      auto pit = hit->second.find(p.person_id);
      if (pit == hit->second.end()) {
        complete = false;
        break;
      }
      cs.push_back(pit->second);
    }
    if (!complete) continue;
    for (const auto& ev :
         build_event_table(h, cs, types, select_household_head(h))) {
      ++total;
      if (ev.participants.size() == 1) ++solo;
    }
  }
  return total == 0 ? std::nan("") : static_cast<double>(solo) / total;
}

std::string corpus_targets_json(const SyntheticRuleSet& rules,
                                const SyntheticCorpus& corpus,
                                const ActivityTypeTable& types) {
  nlohmann::json j;
  j["planted"] = {{"p_spouse_meal", rules.p_spouse_meal},
                  {"q_escort", rules.q_escort}};

  std::array<double, kCodes - 1> minutes{};
  for (const auto& [hid, persons] : corpus.chains)
    for (const auto& [pid, chain] : persons)
      for (const auto& a : chain.activities)
        minutes[a.type] += a.end - a.start;
  const double total =
      std::accumulate(minutes.begin(), minutes.end(), 0.0);
  nlohmann::json shares = nlohmann::json::object();
  for (int c = 0; c < kCodes - 1; ++c)
    if (minutes[c] > 0) shares[types.label(c)] = minutes[c] / total;

  j["realized"] = {
      {"meal_join_rate",
       measure_meal_join_rate(corpus.population, corpus.chains)},
      {"escort_rate", measure_escort_rate(corpus.population, corpus.chains)},
      {"solo_share",
       measure_solo_share(corpus.population, corpus.chains, types)},
      {"type_time_shares", std::move(shares)}};
  return j.dump(2);
}

}  // namespace tdg
