// Household schedule model: role-feature matching over member attributes,
// a person-axis encoder, and a causal per-person time-axis decoder that
// conditions on the head's 96-slot grid. Training runs on the reverse-mode
// tape; generation uses a separate incremental (KV-cached) plain-Eigen path.
#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/rng.hpp"
#include "core/schedule.hpp"

namespace tdg {

inline constexpr int kFeatureDim = 10;  // person attribute vector width

struct ModelConfig {
  int embed_dim = 64;
  int n_heads = 4;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int ffn_dim = 128;
  int p_max = kPMax;
  double diag_bias = 2.0;         // identity bias on role-match logits
  double match_temperature = 1.0; // role-match logit temperature
  double lambda_aor = 0.5;

  void validate() const;  // embed_dim % n_heads == 0, positive sizes
};

// Normalized attribute row for one household member.
Eigen::RowVectorXd person_feature_vector(const Household& h, const Person& p);

// Hash of the input schema (feature layout + activity labels); checkpoints
// refuse to load against a different schema.
std::uint64_t corpus_schema_hash(const ActivityTypeTable& types);

// One training sample: a household with the head's grid as conditioning and
// every member's grid as the target. Members beyond index p_max-1 are
// dropped; the head always occupies row 0.
struct HouseholdSample {
  long household_id = 0;
  GridRow head_grid{};
  std::vector<GridRow> member_grids;     // [p_max]
  std::vector<bool> valid;               // [p_max]
  Eigen::MatrixXd features;              // [p_max x kFeatureDim], masked rows 0
};

HouseholdSample make_sample(const Household& h,
                            const std::map<long, ActivityChain>& chains,
                            int head_index, int p_max);

// Sample for generation: every member is valid, targets are PAD, only the
// head grid is known.
HouseholdSample make_generation_sample(const Household& h, int head_index,
                                       const GridRow& head_grid, int p_max);

// Per-activity hinge weights w_a = solo instances / all instances, over the
// 15 non-PAD codes; types never observed get weight 1.
Eigen::VectorXd compute_activity_weights(
    const std::vector<Household>& population, const ChainSet& chains,
    const ActivityTypeTable& types);

class DeepCam {
 public:
  DeepCam(const ModelConfig& config, std::uint64_t init_seed,
          std::uint64_t schema_hash);

  const ModelConfig& config() const { return config_; }
  std::uint64_t schema_hash() const { return schema_hash_; }
  std::vector<ad::Parameter*> parameters();
  long parameter_count() const;

  // Teacher-forced logits for every valid member, [p_max] entries of
  // [96 x 16]; rows for masked members hold the forced-PAD pattern and
  // carry no gradient.
  struct Forward {
    std::vector<ad::Tape::V> logits;  // null for masked members
    ad::Tape::V refined;              // [p_max x E] role-matched features
  };
  Forward forward(ad::Tape& tape, const HouseholdSample& s) const;

  // Scalar tape node for one household's loss contributions, divided by
  // batch-level counts supplied by the caller:
  //   n_ind = valid (household, slot, person) triples in the batch
  //   n_hh  = (households in batch) * 96 slots * 15 activity types
  ad::Tape::V loss(ad::Tape& tape, const Forward& f, const HouseholdSample& s,
                   const Eigen::VectorXd& weights, double n_ind,
                   double n_hh) const;

  // Loss split for reporting; same normalization as loss().
  struct LossParts {
    double ce = 0, r_ind = 0, r_hh = 0;
    double total(double lambda) const { return ce + lambda * (r_ind + r_hh); }
  };
  LossParts loss_parts(const HouseholdSample& s,
                       const Eigen::VectorXd& weights, double n_ind,
                       double n_hh) const;

  // Plain-Eigen teacher-forced logits, identical to forward(); used to
  // cross-check the inference path and for validation loss.
  std::vector<Eigen::MatrixXd> infer_logits(const HouseholdSample& s) const;

  // Teacher-forced logits through the cached incremental decoder; must
  // match infer_logits exactly.
  std::vector<Eigen::MatrixXd> incremental_logits(
      const HouseholdSample& s) const;

  // Autoregressive sampling of all non-head members conditioned on the head
  // grid. Row 0 of the result is the head grid copied through.
  SlotGrid generate_members(const HouseholdSample& s, std::uint64_t rng_seed,
                            double temperature = 1.0) const;

  std::string to_json() const;
  static std::unique_ptr<DeepCam> from_json(const std::string& text,
                                            std::uint64_t expected_schema);

  ad::Parameter& param(const std::string& name);
  const ad::Parameter& param(const std::string& name) const;

 private:
  ModelConfig config_;
  std::uint64_t schema_hash_ = 0;
  std::vector<std::unique_ptr<ad::Parameter>> params_;
  std::map<std::string, ad::Parameter*> by_name_;

  ad::Parameter& add_param(const std::string& name, int rows, int cols,
                           Rng& rng, double scale);
  struct Cache;  // incremental decode state
};

struct TrainSettings {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;  // global norm; <=0 disables
  bool verbose = false;
};

struct TrainResult {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val = 0;
  double test_loss = 0;
  bool diverged = false;
};

// Deterministic 0.8/0.1/0.1 household split, mini-batch Adam; the model is
// left holding the best-validation parameters. Aborts on non-finite loss
// and restores the last finite best checkpoint.
TrainResult train_deepcam(DeepCam& model, std::vector<HouseholdSample> samples,
                          const Eigen::VectorXd& weights,
                          const TrainSettings& settings);

// Finite-difference probe used by the gradient tests: relative error of the
// analytic gradient for the given parameter entries.
double gradient_check(DeepCam& model, const HouseholdSample& s,
                      const Eigen::VectorXd& weights,
                      const std::string& param_name, int row, int col,
                      double eps = 1e-4);

}  // namespace tdg
