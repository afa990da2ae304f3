// Seed-chain generator for household heads: a per-slot Markov model with
// Laplace smoothing, stratified on head/household attributes, sampled
// ancestrally to produce the 96-slot seed schedule.
#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/schedule.hpp"

namespace tdg {

struct SeedModelConfig {
  // Stratification attributes; supported: "employed", "has_children".
  std::vector<std::string> strata{"employed", "has_children"};
  double alpha = 0.1;  // Laplace smoothing
};

class SeedChainModel {
 public:
  struct Stratum {
    Eigen::VectorXd initial;               // [15], slot-0 code distribution
    // trans[t](i, j) = P(code j at slot t+1 | code i at slot t), t in 0..94
    std::vector<Eigen::MatrixXd> trans;
    long n_chains = 0;
  };

  SeedModelConfig config;
  std::map<std::string, Stratum> strata;  // includes pooled key "*"

  static std::string stratum_key(const Household& h, const Person& head,
                                 const std::vector<std::string>& attrs);

  // Stratum for this household, falling back to the pooled estimate.
  const Stratum& lookup(const Household& h, const Person& head) const;

  std::string to_json() const;
  static SeedChainModel from_json(const std::string& text);
};

// Fits per-stratum transition tensors from the heads' chains. Each
// conditional is add-alpha smoothed over the 15 non-PAD codes.
SeedChainModel fit_seed_model(const std::vector<Household>& population,
                              const ChainSet& chains,
                              const SeedModelConfig& config);

// Ancestral sampling; temperature 0 takes the per-slot argmax path.
GridRow generate_seed_chain(const SeedChainModel& model, const Household& h,
                            const Person& head, std::uint64_t rng_seed,
                            double temperature = 1.0);

}  // namespace tdg
