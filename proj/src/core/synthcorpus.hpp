// Synthetic ground-truth corpus generator: demographic segment templates
// with planted coordination rules, plus the measurement helpers used to
// recover those rules from any corpus (planted or generated).
#pragma once

#include <string>
#include <vector>

#include "core/schedule.hpp"

namespace tdg {

struct SyntheticRuleSet {
  double p_spouse_meal = 0.8;  // spouse joins the head's dinner Meal
  double q_escort = 0.7;       // child School escorted by the head
  double share_single = 0.55;  // single-adult households
  double share_couple = 0.20;  // two-adult; remainder are families
  int n_zones = 4;             // home TAZ ids 1..n_zones
  bool all_home = false;       // degenerate rule: everyone Home all day

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<Household> population;
  ChainSet chains;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticRuleSet& rules,
                                          int n_households,
                                          std::uint64_t rng_seed);

// Fraction of head Meal activities with another adult's Meal starting
// within 15 minutes. NaN when no head Meal exists beside another adult.
double measure_meal_join_rate(const std::vector<Household>& pop,
                              const ChainSet& chains);

// Fraction of child School activities with an adult Escort starting within
// 15 minutes. NaN when there are no child School activities.
double measure_escort_rate(const std::vector<Household>& pop,
                           const ChainSet& chains);

// Fraction of events with a single participant.
double measure_solo_share(const std::vector<Household>& pop,
                          const ChainSet& chains,
                          const ActivityTypeTable& types);

// Planted rates plus realized corpus statistics, for recovery tests.
std::string corpus_targets_json(const SyntheticRuleSet& rules,
                                const SyntheticCorpus& corpus,
                                const ActivityTypeTable& types);

}  // namespace tdg
