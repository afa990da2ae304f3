#include "core/deepcam.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "core/csvio.hpp"
#include "core/errors.hpp"
#include "core/events.hpp"

namespace tdg {

using ad::Mat;
using V = ad::Tape::V;

namespace {

constexpr int kRealCodes = kCodes - 1;
constexpr double kMaskLogit = -1e9;

Mat onehot_grid(const GridRow& row) {
  Mat y = Mat::Zero(kSlots, kCodes);
  for (int t = 0; t < kSlots; ++t) y(t, row[t]) = 1.0;
  return y;
}

// Hinge weights expanded over the code axis; PAD column stays zero so it
// never enters the regularizers or the household entry count.
Mat weight_matrix(const Eigen::VectorXd& w) {
  Mat wm = Mat::Zero(kSlots, kCodes);
  for (int a = 0; a < kRealCodes; ++a) wm.col(a).setConstant(w(a));
  return wm;
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim <= 0 || n_heads <= 0 || ffn_dim <= 0 || p_max <= 0 ||
      n_encoder_layers < 0 || n_decoder_layers < 0)
    throw ConfigError("model config: sizes must be positive");
  if (embed_dim % n_heads != 0)
    throw ConfigError("model config: embed_dim must be divisible by n_heads");
  if (p_max > kPMax)
    throw ConfigError("model config: p_max exceeds the member limit");
  if (match_temperature <= 0.0)
    throw ConfigError("model config: match_temperature must be positive");
  if (lambda_aor < 0.0)
    throw ConfigError("model config: lambda_aor must be non-negative");
}

Eigen::RowVectorXd person_feature_vector(const Household& h, const Person& p) {
  Eigen::RowVectorXd f(kFeatureDim);
  f << p.age / 100.0, p.employed ? 1.0 : 0.0, p.student ? 1.0 : 0.0,
      p.education / 5.0, p.has_license ? 1.0 : 0.0, p.gender / 3.0,
      h.size() / static_cast<double>(kPMax), h.income / 10.0,
      h.vehicles / 4.0, 1.0;
  return f;
}

std::uint64_t corpus_schema_hash(const ActivityTypeTable& types) {
  std::string s = "schema-v1|F=" + std::to_string(kFeatureDim) + "|";
  for (int c = 0; c < kCodes; ++c) s += types.label(c) + "|";
  return csv::fnv1a(s);
}

HouseholdSample make_sample(const Household& h,
                            const std::map<long, ActivityChain>& chains,
                            int head_index, int p_max) {
  HouseholdSample s;
  s.household_id = h.household_id;
  s.member_grids.assign(p_max, GridRow{});
  for (auto& g : s.member_grids) g.fill(kPad);
  s.valid.assign(p_max, false);
  s.features = Mat::Zero(p_max, kFeatureDim);

  // Head first, remaining members in household order.
  std::vector<int> order{head_index};
  for (int i = 0; i < h.size(); ++i)
    if (i != head_index) order.push_back(i);

  for (int row = 0; row < p_max && row < static_cast<int>(order.size());
       ++row) {
    const Person& p = h.members[order[row]];
    auto it = chains.find(p.person_id);
    if (it == chains.end()) {
      if (row == 0)
        throw DataError("household " + std::to_string(h.household_id) +
                        ": head person " + std::to_string(p.person_id) +
                        " has no chain");
      continue;
    }
    s.valid[row] = true;
    s.member_grids[row] = encode_chain(it->second);
    s.features.row(row) = person_feature_vector(h, p);
  }
  s.head_grid = s.member_grids[0];
  return s;
}

HouseholdSample make_generation_sample(const Household& h, int head_index,
                                       const GridRow& head_grid, int p_max) {
  HouseholdSample s;
  s.household_id = h.household_id;
  s.head_grid = head_grid;
  s.member_grids.assign(p_max, GridRow{});
  for (auto& g : s.member_grids) g.fill(kPad);
  s.valid.assign(p_max, false);
  s.features = Mat::Zero(p_max, kFeatureDim);

  std::vector<int> order{head_index};
  for (int i = 0; i < h.size(); ++i)
    if (i != head_index) order.push_back(i);
  for (int row = 0; row < p_max && row < static_cast<int>(order.size());
       ++row) {
    s.valid[row] = true;
    s.features.row(row) = person_feature_vector(h, h.members[order[row]]);
  }
  s.member_grids[0] = head_grid;
  return s;
}

Eigen::VectorXd compute_activity_weights(
    const std::vector<Household>& population, const ChainSet& chains,
    const ActivityTypeTable& types) {
  Eigen::VectorXd solo = Eigen::VectorXd::Zero(kRealCodes);
  Eigen::VectorXd all = Eigen::VectorXd::Zero(kRealCodes);
  for (const auto& h : population) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    std::vector<ActivityChain> cs;
    for (const auto& p : h.members) {
      auto pit = hit->second.find(p.person_id);
      if (pit == hit->second.end()) {
        cs.clear();
        break;
      }
      cs.push_back(pit->second);
    }
    if (cs.empty()) continue;
    const int head = select_household_head(h);
    for (const auto& ev : build_event_table(h, cs, types, head)) {
      const bool is_solo = ev.participants.size() == 1;
      for (const auto& pt : ev.participants) {
        all(pt.type) += 1.0;
        if (is_solo) solo(pt.type) += 1.0;
      }
    }
  }
  Eigen::VectorXd w(kRealCodes);
  for (int a = 0; a < kRealCodes; ++a)
    w(a) = all(a) > 0.0 ? solo(a) / all(a) : 1.0;
  return w;
}

// ---- parameters ---------------------------------------------------------

DeepCam::DeepCam(const ModelConfig& config, std::uint64_t init_seed,
                 std::uint64_t schema_hash)
    : config_(config), schema_hash_(schema_hash) {
  config_.validate();
  const int E = config_.embed_dim;
  const int F = kFeatureDim;
  const int P = config_.p_max;
  const int ffn = config_.ffn_dim;
  Rng rng(init_seed);

  auto dense = [&](const std::string& name, int r, int c) {
    add_param(name, r, c, rng, std::sqrt(2.0 / (r + c)));
  };
  auto bias = [&](const std::string& name, int c) {
    add_param(name, 1, c, rng, 0.0);
  };
  auto gain = [&](const std::string& name, int c) {
    ad::Parameter& p = add_param(name, 1, c, rng, 0.0);
    p.val.setOnes();
  };
  auto attention = [&](const std::string& pre) {
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) dense(pre + w, E, E);
    for (const char* b : {"bq", "bk", "bv", "bo"}) bias(pre + b, E);
  };
  auto ffn_block = [&](const std::string& pre) {
    dense(pre + "ffn_W1", E, ffn);
    bias(pre + "ffn_b1", ffn);
    dense(pre + "ffn_W2", ffn, E);
    bias(pre + "ffn_b2", E);
  };
  auto ln = [&](const std::string& pre) {
    gain(pre + "g", E);
    bias(pre + "b", E);
  };

  dense("code_emb", kCodes, E);
  dense("time_emb", kSlots, E);
  dense("attr_W", F, E);
  bias("attr_b", E);
  dense("role_q", P, E);
  dense("rm_Wv", E, E);
  for (int i = 0; i < config_.n_encoder_layers; ++i) {
    const std::string pre = "enc" + std::to_string(i) + ".";
    ln(pre + "ln1_");
    attention(pre);
    ln(pre + "ln2_");
    ffn_block(pre);
  }
  ln("enc_ln_");
  for (int i = 0; i < config_.n_decoder_layers; ++i) {
    const std::string pre = "dec" + std::to_string(i) + ".";
    ln(pre + "ln1_");
    attention(pre + "s");
    ln(pre + "ln2_");
    attention(pre + "c");
    ln(pre + "ln3_");
    ffn_block(pre);
  }
  ln("dec_ln_");
  dense("out_W1", 2 * E, ffn);
  bias("out_b1", ffn);
  dense("out_W2", ffn, kCodes);
  bias("out_b2", kCodes);
}

ad::Parameter& DeepCam::add_param(const std::string& name, int rows, int cols,
                                  Rng& rng, double scale) {
  Mat init = Mat::Zero(rows, cols);
  if (scale > 0.0)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) init(r, c) = scale * rng.normal();
  params_.push_back(std::make_unique<ad::Parameter>(name, std::move(init)));
  by_name_[name] = params_.back().get();
  return *params_.back();
}

std::vector<ad::Parameter*> DeepCam::parameters() {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

long DeepCam::parameter_count() const {
  long n = 0;
  for (const auto& p : params_) n += p->val.size();
  return n;
}

ad::Parameter& DeepCam::param(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
  return *it->second;
}

const ad::Parameter& DeepCam::param(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
  return *it->second;
}

// ---- tape forward -------------------------------------------------------

namespace {

V tape_mha(ad::Tape& t, const DeepCam& m, const std::string& pre, V x, V mem,
           const Mat* addmask) {
  const int E = m.config().embed_dim;
  const int H = m.config().n_heads;
  const int dh = E / H;
  auto P = [&](const std::string& n) -> ad::Parameter& {
    return const_cast<DeepCam&>(m).param(pre + n);
  };
  V q = t.add_rowvec(t.matmul(x, t.param(P("Wq"))), t.param(P("bq")));
  V k = t.add_rowvec(t.matmul(mem, t.param(P("Wk"))), t.param(P("bk")));
  V v = t.add_rowvec(t.matmul(mem, t.param(P("Wv"))), t.param(P("bv")));
  std::vector<V> heads;
  for (int h = 0; h < H; ++h) {
    V qh = t.cols(q, h * dh, dh);
    V kh = t.cols(k, h * dh, dh);
    V vh = t.cols(v, h * dh, dh);
    V sc = t.scale(t.matmul(qh, kh, false, true), 1.0 / std::sqrt(dh));
    if (addmask) sc = t.add_const(sc, *addmask);
    heads.push_back(t.matmul(t.softmax_rows(sc), vh));
  }
  return t.add_rowvec(t.matmul(t.concat_cols(heads), t.param(P("Wo"))),
                      t.param(P("bo")));
}

V tape_ffn(ad::Tape& t, const DeepCam& m, const std::string& pre, V x) {
  auto P = [&](const std::string& n) -> ad::Parameter& {
    return const_cast<DeepCam&>(m).param(pre + n);
  };
  V h = t.relu(
      t.add_rowvec(t.matmul(x, t.param(P("ffn_W1"))), t.param(P("ffn_b1"))));
  return t.add_rowvec(t.matmul(h, t.param(P("ffn_W2"))),
                      t.param(P("ffn_b2")));
}

V tape_ln(ad::Tape& t, const DeepCam& m, const std::string& pre, V x) {
  auto& g = const_cast<DeepCam&>(m).param(pre + "g");
  auto& b = const_cast<DeepCam&>(m).param(pre + "b");
  return t.layernorm_rows(x, t.param(g), t.param(b));
}

}  // namespace

DeepCam::Forward DeepCam::forward(ad::Tape& t, const HouseholdSample& s) const {
  const int E = config_.embed_dim;
  const int P = config_.p_max;
  DeepCam& self = const_cast<DeepCam&>(*this);
  if (std::none_of(s.valid.begin(), s.valid.end(), [](bool v) { return v; }))
    throw DataError("role-match attention: every person is masked");

  Mat rowmask = Mat::Zero(P, E);
  Mat keymask = Mat::Zero(P, P);
  for (int p = 0; p < P; ++p) {
    if (s.valid[p])
      rowmask.row(p).setOnes();
    else
      keymask.col(p).setConstant(kMaskLogit);
  }

  // Attribute embedding, zeroed on masked rows.
  V feats = t.constant(s.features);
  V x0 = t.add_rowvec(t.matmul(feats, t.param(self.param("attr_W"))),
                      t.param(self.param("attr_b")));
  x0 = t.cwise_mul_const(x0, rowmask);

  // Role-feature matching with an identity bias, residual over attributes.
  Mat rm_bias = keymask;
  for (int p = 0; p < P; ++p) rm_bias(p, p) += config_.diag_bias;
  V rq = t.param(self.param("role_q"));
  V rlog = t.scale(t.matmul(rq, x0, false, true),
                   1.0 / (config_.match_temperature * std::sqrt(E)));
  V attn = t.softmax_rows(t.add_const(rlog, rm_bias));
  V vals = t.matmul(x0, t.param(self.param("rm_Wv")));
  V refined = t.cwise_mul_const(t.add(t.matmul(attn, vals), x0), rowmask);

  // Person-axis encoder; masked members never serve as keys.
  V x = refined;
  for (int i = 0; i < config_.n_encoder_layers; ++i) {
    const std::string pre = "enc" + std::to_string(i) + ".";
    V h = tape_ln(t, *this, pre + "ln1_", x);
    x = t.add(x, tape_mha(t, *this, pre, h, h, &keymask));
    V h2 = tape_ln(t, *this, pre + "ln2_", x);
    x = t.add(x, tape_ffn(t, *this, pre, h2));
  }
  V ctx = t.cwise_mul_const(tape_ln(t, *this, "enc_ln_", x), rowmask);

  // Head-grid memory for cross-attention.
  std::vector<int> head_idx(kSlots);
  for (int tt = 0; tt < kSlots; ++tt) head_idx[tt] = s.head_grid[tt];
  V head_mem = t.add(t.gather_rows(self.param("code_emb"), head_idx),
                     t.param(self.param("time_emb")));

  Mat causal = Mat::Zero(kSlots, kSlots);
  for (int a = 0; a < kSlots; ++a)
    for (int b = a + 1; b < kSlots; ++b) causal(a, b) = kMaskLogit;
  const Mat ones_t = Mat::Ones(kSlots, 1);

  Forward out;
  out.refined = refined;
  out.logits.assign(P, nullptr);
  for (int p = 0; p < P; ++p) {
    if (!s.valid[p]) continue;
    // Slot input: previous code (PAD embedding acts as start-of-day),
    // time position, and the person's encoder context.
    std::vector<int> prev(kSlots);
    prev[0] = kPad;
    for (int tt = 1; tt < kSlots; ++tt) prev[tt] = s.member_grids[p][tt - 1];
    V d = t.add(t.gather_rows(self.param("code_emb"), prev),
                t.param(self.param("time_emb")));
    d = t.add(d, t.matmul(t.constant(ones_t), t.rows(ctx, p, 1)));
    for (int i = 0; i < config_.n_decoder_layers; ++i) {
      const std::string pre = "dec" + std::to_string(i) + ".";
      V h = tape_ln(t, *this, pre + "ln1_", d);
      d = t.add(d, tape_mha(t, *this, pre + "s", h, h, &causal));
      V h2 = tape_ln(t, *this, pre + "ln2_", d);
      d = t.add(d, tape_mha(t, *this, pre + "c", h2, head_mem, nullptr));
      V h3 = tape_ln(t, *this, pre + "ln3_", d);
      d = t.add(d, tape_ffn(t, *this, pre, h3));
    }
    d = tape_ln(t, *this, "dec_ln_", d);
    V rp = t.matmul(t.constant(ones_t), t.rows(refined, p, 1));
    V cat = t.concat_cols({d, rp});
    V h1 = t.relu(t.add_rowvec(t.matmul(cat, t.param(self.param("out_W1"))),
                               t.param(self.param("out_b1"))));
    out.logits[p] =
        t.add_rowvec(t.matmul(h1, t.param(self.param("out_W2"))),
                     t.param(self.param("out_b2")));
    if (!out.logits[p]->val.allFinite())
      throw NumericError("non-finite activation in output head");
  }
  return out;
}

V DeepCam::loss(ad::Tape& t, const Forward& f, const HouseholdSample& s,
                const Eigen::VectorXd& weights, double n_ind,
                double n_hh) const {
  const Mat wmat = weight_matrix(weights);
  V ce_sum = nullptr, rind_sum = nullptr, phat_sum = nullptr;
  Mat y_sum = Mat::Zero(kSlots, kCodes);
  for (int p = 0; p < config_.p_max; ++p) {
    if (!s.valid[p]) continue;
    const Mat y = onehot_grid(s.member_grids[p]);
    V logp = t.log_softmax_rows(f.logits[p]);
    V ce_p = t.sum_all(t.cwise_mul_const(logp, -y));
    ce_sum = ce_sum ? t.add(ce_sum, ce_p) : ce_p;
    V phat = t.softmax_rows(f.logits[p]);
    V hinge = t.relu(t.add_const(phat, -y));
    V r_p = t.sum_all(t.cwise_mul_const(hinge, wmat));
    rind_sum = rind_sum ? t.add(rind_sum, r_p) : r_p;
    phat_sum = phat_sum ? t.add(phat_sum, phat) : phat;
    y_sum += y;
  }
  V hh = t.sum_all(t.cwise_mul_const(
      t.relu(t.add_const(phat_sum, -y_sum)), wmat));
  V total = t.add(t.scale(ce_sum, 1.0 / n_ind),
                  t.scale(rind_sum, config_.lambda_aor / n_ind));
  return t.add(total, t.scale(hh, config_.lambda_aor / n_hh));
}

// ---- plain-Eigen forward ------------------------------------------------

namespace {

Mat pl_softmax_rows(Mat x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    x.row(r) = (x.row(r).array() - mx).exp();
    x.row(r) /= x.row(r).sum();
  }
  return x;
}

Mat pl_ln(const DeepCam& m, const std::string& pre, const Mat& x,
          double eps = 1e-5) {
  const auto& g = m.param(pre + "g").val;
  const auto& b = m.param(pre + "b").val;
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / x.cols();
    out.row(r) =
        (((x.row(r).array() - mu) / std::sqrt(var + eps)) * g.row(0).array())
            .matrix() +
        b.row(0);
  }
  return out;
}

Mat pl_mha(const DeepCam& m, const std::string& pre, const Mat& x,
           const Mat& mem, const Mat* addmask) {
  const int E = m.config().embed_dim;
  const int H = m.config().n_heads;
  const int dh = E / H;
  auto P = [&](const std::string& n) -> const Mat& {
    return m.param(pre + n).val;
  };
  Mat q = (x * P("Wq")).rowwise() + Eigen::RowVectorXd(P("bq").row(0));
  Mat k = (mem * P("Wk")).rowwise() + Eigen::RowVectorXd(P("bk").row(0));
  Mat v = (mem * P("Wv")).rowwise() + Eigen::RowVectorXd(P("bv").row(0));
  Mat cat(x.rows(), E);
  for (int h = 0; h < H; ++h) {
    Mat sc = q.middleCols(h * dh, dh) *
             k.middleCols(h * dh, dh).transpose() / std::sqrt(dh);
    if (addmask) sc += *addmask;
    cat.middleCols(h * dh, dh) =
        pl_softmax_rows(std::move(sc)) * v.middleCols(h * dh, dh);
  }
  return (cat * P("Wo")).rowwise() + Eigen::RowVectorXd(P("bo").row(0));
}

Mat pl_ffn(const DeepCam& m, const std::string& pre, const Mat& x) {
  auto P = [&](const std::string& n) -> const Mat& {
    return m.param(pre + n).val;
  };
  Mat h = ((x * P("ffn_W1")).rowwise() +
           Eigen::RowVectorXd(P("ffn_b1").row(0)))
              .cwiseMax(0.0);
  return (h * P("ffn_W2")).rowwise() + Eigen::RowVectorXd(P("ffn_b2").row(0));
}

struct PlainContext {
  Mat refined;   // [P x E]
  Mat ctx;       // [P x E]
  Mat head_mem;  // [96 x E]
};

PlainContext pl_encode(const DeepCam& m, const HouseholdSample& s) {
  const ModelConfig& c = m.config();
  const int E = c.embed_dim;
  const int P = c.p_max;
  if (std::none_of(s.valid.begin(), s.valid.end(), [](bool v) { return v; }))
    throw DataError("role-match attention: every person is masked");

  Mat rowmask = Mat::Zero(P, E);
  Mat keymask = Mat::Zero(P, P);
  for (int p = 0; p < P; ++p) {
    if (s.valid[p])
      rowmask.row(p).setOnes();
    else
      keymask.col(p).setConstant(kMaskLogit);
  }

  Mat x0 = (s.features * m.param("attr_W").val).rowwise() +
           Eigen::RowVectorXd(m.param("attr_b").val.row(0));
  x0 = x0.cwiseProduct(rowmask);

  Mat rm_bias = keymask;
  for (int p = 0; p < P; ++p) rm_bias(p, p) += c.diag_bias;
  Mat rlog = m.param("role_q").val * x0.transpose() /
             (c.match_temperature * std::sqrt(E));
  Mat attn = pl_softmax_rows(rlog + rm_bias);
  Mat refined =
      ((attn * (x0 * m.param("rm_Wv").val)) + x0).cwiseProduct(rowmask);

  Mat x = refined;
  for (int i = 0; i < c.n_encoder_layers; ++i) {
    const std::string pre = "enc" + std::to_string(i) + ".";
    Mat h = pl_ln(m, pre + "ln1_", x);
    x += pl_mha(m, pre, h, h, &keymask);
    x += pl_ffn(m, pre, pl_ln(m, pre + "ln2_", x));
  }
  PlainContext out;
  out.refined = refined;
  out.ctx = pl_ln(m, "enc_ln_", x).cwiseProduct(rowmask);

  out.head_mem = Mat(kSlots, E);
  const Mat& code_emb = m.param("code_emb").val;
  for (int t = 0; t < kSlots; ++t)
    out.head_mem.row(t) =
        code_emb.row(s.head_grid[t]) + m.param("time_emb").val.row(t);
  return out;
}

Mat pl_decode_person(const DeepCam& m, const PlainContext& pc, int p,
                     const std::vector<int>& prev) {
  const ModelConfig& c = m.config();
  Mat d(kSlots, c.embed_dim);
  const Mat& code_emb = m.param("code_emb").val;
  for (int t = 0; t < kSlots; ++t)
    d.row(t) = code_emb.row(prev[t]) + m.param("time_emb").val.row(t) +
               pc.ctx.row(p);
  Mat causal = Mat::Zero(kSlots, kSlots);
  for (int a = 0; a < kSlots; ++a)
    for (int b = a + 1; b < kSlots; ++b) causal(a, b) = kMaskLogit;
  for (int i = 0; i < c.n_decoder_layers; ++i) {
    const std::string pre = "dec" + std::to_string(i) + ".";
    Mat h = pl_ln(m, pre + "ln1_", d);
    d += pl_mha(m, pre + "s", h, h, &causal);
    d += pl_mha(m, pre + "c", pl_ln(m, pre + "ln2_", d), pc.head_mem,
                nullptr);
    d += pl_ffn(m, pre, pl_ln(m, pre + "ln3_", d));
  }
  d = pl_ln(m, "dec_ln_", d);
  Mat cat(kSlots, 2 * c.embed_dim);
  cat.leftCols(c.embed_dim) = d;
  for (int t = 0; t < kSlots; ++t)
    cat.row(t).tail(c.embed_dim) = pc.refined.row(p);
  Mat h1 = ((cat * m.param("out_W1").val).rowwise() +
            Eigen::RowVectorXd(m.param("out_b1").val.row(0)))
               .cwiseMax(0.0);
  return (h1 * m.param("out_W2").val).rowwise() +
         Eigen::RowVectorXd(m.param("out_b2").val.row(0));
}

// Masked member rows are forced to PAD and excluded from every loss term.
Mat forced_pad_logits() {
  Mat l = Mat::Constant(kSlots, kCodes, kMaskLogit);
  l.col(kPad).setZero();
  return l;
}

}  // namespace

std::vector<Mat> DeepCam::infer_logits(const HouseholdSample& s) const {
  const PlainContext pc = pl_encode(*this, s);
  std::vector<Mat> out(config_.p_max);
  for (int p = 0; p < config_.p_max; ++p) {
    if (!s.valid[p]) {
      out[p] = forced_pad_logits();
      continue;
    }
    std::vector<int> prev(kSlots);
    prev[0] = kPad;
    for (int t = 1; t < kSlots; ++t) prev[t] = s.member_grids[p][t - 1];
    out[p] = pl_decode_person(*this, pc, p, prev);
  }
  return out;
}

// ---- incremental (KV-cached) decoding -----------------------------------

struct DeepCam::Cache {
  const DeepCam& m;
  const PlainContext& pc;
  int person;
  // Per decoder layer: accumulated self-attention keys/values and the
  // precomputed cross-attention keys/values over the head memory.
  std::vector<Mat> self_k, self_v, cross_k, cross_v;
  int t = 0;

  Cache(const DeepCam& model, const PlainContext& context, int p)
      : m(model), pc(context), person(p) {
    const int L = m.config().n_decoder_layers;
    const int E = m.config().embed_dim;
    self_k.assign(L, Mat(kSlots, E));
    self_v.assign(L, Mat(kSlots, E));
    for (int i = 0; i < L; ++i) {
      const std::string pre = "dec" + std::to_string(i) + ".c";
      cross_k.push_back((pc.head_mem * m.param(pre + "Wk").val).rowwise() +
                        Eigen::RowVectorXd(m.param(pre + "bk").val.row(0)));
      cross_v.push_back((pc.head_mem * m.param(pre + "Wv").val).rowwise() +
                        Eigen::RowVectorXd(m.param(pre + "bv").val.row(0)));
    }
  }

  // One decoding step; prev is the code emitted at slot t-1 (PAD at t=0).
  // Returns the [1 x 16] logits for slot t.
  Mat step(int prev) {
    const ModelConfig& c = m.config();
    const int E = c.embed_dim;
    const int H = c.n_heads;
    const int dh = E / H;
    Mat d = m.param("code_emb").val.row(prev) +
            m.param("time_emb").val.row(t) + pc.ctx.row(person);
    for (int i = 0; i < c.n_decoder_layers; ++i) {
      const std::string pre = "dec" + std::to_string(i) + ".";
      auto P = [&](const std::string& n) -> const Mat& {
        return m.param(n).val;
      };
      Mat h = pl_ln(m, pre + "ln1_", d);
      self_k[i].row(t) = (h * P(pre + "sWk") + P(pre + "sbk")).row(0);
      self_v[i].row(t) = (h * P(pre + "sWv") + P(pre + "sbv")).row(0);
      Mat q = h * P(pre + "sWq") + P(pre + "sbq");
      Mat cat(1, E);
      for (int hh = 0; hh < H; ++hh) {
        Mat sc = q.middleCols(hh * dh, dh) *
                 self_k[i].topRows(t + 1).middleCols(hh * dh, dh).transpose() /
                 std::sqrt(dh);
        cat.middleCols(hh * dh, dh) =
            pl_softmax_rows(std::move(sc)) *
            self_v[i].topRows(t + 1).middleCols(hh * dh, dh);
      }
      d += cat * P(pre + "sWo") + P(pre + "sbo");

      Mat h2 = pl_ln(m, pre + "ln2_", d);
      Mat q2 = h2 * P(pre + "cWq") + P(pre + "cbq");
      Mat cat2(1, E);
      for (int hh = 0; hh < H; ++hh) {
        Mat sc = q2.middleCols(hh * dh, dh) *
                 cross_k[i].middleCols(hh * dh, dh).transpose() /
                 std::sqrt(dh);
        cat2.middleCols(hh * dh, dh) =
            pl_softmax_rows(std::move(sc)) * cross_v[i].middleCols(hh * dh, dh);
      }
      d += cat2 * P(pre + "cWo") + P(pre + "cbo");
      d += pl_ffn(m, pre, pl_ln(m, pre + "ln3_", d));
    }
    d = pl_ln(m, "dec_ln_", d);
    Mat cat(1, 2 * E);
    cat.leftCols(E) = d;
    cat.rightCols(E) = pc.refined.row(person);
    Mat h1 =
        (cat * m.param("out_W1").val + m.param("out_b1").val).cwiseMax(0.0);
    ++t;
    return h1 * m.param("out_W2").val + m.param("out_b2").val;
  }
};

std::vector<Mat> DeepCam::incremental_logits(const HouseholdSample& s) const {
  const PlainContext pc = pl_encode(*this, s);
  std::vector<Mat> out(config_.p_max);
  for (int p = 0; p < config_.p_max; ++p) {
    if (!s.valid[p]) {
      out[p] = forced_pad_logits();
      continue;
    }
    Cache cache(*this, pc, p);
    Mat logits(kSlots, kCodes);
    int prev = kPad;
    for (int t = 0; t < kSlots; ++t) {
      logits.row(t) = cache.step(prev).row(0);
      prev = s.member_grids[p][t];
    }
    out[p] = logits;
  }
  return out;
}

SlotGrid DeepCam::generate_members(const HouseholdSample& s,
                                   std::uint64_t rng_seed,
                                   double temperature) const {
  const PlainContext pc = pl_encode(*this, s);
  SlotGrid grid = SlotGrid::padded(0);
  Rng rng(rng_seed);
  int n = 0;
  for (int p = 0; p < config_.p_max; ++p) {
    if (!s.valid[p]) continue;
    ++n;
    if (p == 0) {
      grid.codes[0] = s.head_grid;
      continue;
    }
    Cache cache(*this, pc, p);
    int prev = kPad;
    for (int t = 0; t < kSlots; ++t) {
      Mat logits = cache.step(prev);
      // Valid members always hold a real activity; PAD is not sampleable.
      int code;
      if (temperature <= 0.0) {
        code = 0;
        for (int a = 1; a < kRealCodes; ++a)
          if (logits(0, a) > logits(0, code)) code = a;
      } else {
        const double mx = logits.row(0).head(kRealCodes).maxCoeff();
        std::vector<double> w(kRealCodes);
        for (int a = 0; a < kRealCodes; ++a)
          w[a] = std::exp((logits(0, a) - mx) / temperature);
        code = static_cast<int>(rng.categorical(w));
      }
      grid.codes[p][t] = static_cast<std::uint8_t>(code);
      prev = code;
    }
  }
  grid.n_members = n;
  return grid;
}

// ---- loss (plain) -------------------------------------------------------

DeepCam::LossParts DeepCam::loss_parts(const HouseholdSample& s,
                                       const Eigen::VectorXd& weights,
                                       double n_ind, double n_hh) const {
  const std::vector<Mat> logits = infer_logits(s);
  const Mat wmat = weight_matrix(weights);
  LossParts out;
  Mat phat_sum = Mat::Zero(kSlots, kCodes);
  Mat y_sum = Mat::Zero(kSlots, kCodes);
  for (int p = 0; p < config_.p_max; ++p) {
    if (!s.valid[p]) continue;
    const Mat y = onehot_grid(s.member_grids[p]);
    Mat logp = logits[p];
    for (int t = 0; t < kSlots; ++t) {
      const double mx = logp.row(t).maxCoeff();
      logp.row(t).array() -=
          std::log((logp.row(t).array() - mx).exp().sum()) + mx;
    }
    out.ce -= logp.cwiseProduct(y).sum();
    const Mat phat = pl_softmax_rows(logits[p]);
    out.r_ind += (phat - y).cwiseMax(0.0).cwiseProduct(wmat).sum();
    phat_sum += phat;
    y_sum += y;
  }
  out.r_hh = (phat_sum - y_sum).cwiseMax(0.0).cwiseProduct(wmat).sum() / n_hh;
  out.ce /= n_ind;
  out.r_ind /= n_ind;
  return out;
}

// ---- training -----------------------------------------------------------

namespace {

double sample_entries(const HouseholdSample& s) {
  double n = 0;
  for (bool v : s.valid)
    if (v) n += kSlots;
  return n;
}

double eval_set(const DeepCam& model,
                const std::vector<HouseholdSample>& samples,
                const std::vector<int>& idx, const Eigen::VectorXd& weights) {
  if (idx.empty()) return 0.0;
  double n_ind = 0;
  for (int i : idx) n_ind += sample_entries(samples[i]);
  const double n_hh = static_cast<double>(idx.size()) * kSlots * kRealCodes;
  double total = 0;
  for (int i : idx) {
    const auto parts = model.loss_parts(samples[i], weights, n_ind, n_hh);
    total += parts.total(model.config().lambda_aor);
  }
  return total;
}

}  // namespace

TrainResult train_deepcam(DeepCam& model, std::vector<HouseholdSample> samples,
                          const Eigen::VectorXd& weights,
                          const TrainSettings& settings) {
  if (samples.empty()) throw DataError("train: empty corpus");
  TrainResult result;

  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = Rng::derive(settings.seed, 0);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[split_rng.uniform_int(0, i)]);
  const int n = static_cast<int>(order.size());
  const int n_train = std::max(1, static_cast<int>(n * 0.8));
  const int n_val = std::max(n > 1 ? 1 : 0, static_cast<int>(n * 0.1));
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> val_idx(
      order.begin() + n_train,
      order.begin() + std::min(n, n_train + n_val));
  std::vector<int> test_idx(order.begin() + std::min(n, n_train + n_val),
                            order.end());

  ad::AdamOptimizer opt;
  opt.lr = settings.lr;
  auto params = model.parameters();

  std::vector<Mat> best;
  auto snapshot = [&]() {
    best.clear();
    for (auto* p : params) best.push_back(p->val);
  };
  auto restore = [&]() {
    if (best.empty()) return;
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->val = best[i];
  };
  snapshot();
  result.best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(settings.seed, 1000 + epoch);
    std::vector<int> ep = train_idx;
    for (int i = static_cast<int>(ep.size()) - 1; i > 0; --i)
      std::swap(ep[i], ep[shuffle_rng.uniform_int(0, i)]);

    double loss_sum = 0;
    int n_batches = 0;
    for (std::size_t at = 0; at < ep.size(); at += settings.batch_size) {
      const std::size_t end =
          std::min(ep.size(), at + static_cast<std::size_t>(settings.batch_size));
      double n_ind = 0;
      for (std::size_t i = at; i < end; ++i)
        n_ind += sample_entries(samples[ep[i]]);
      const double n_hh =
          static_cast<double>(end - at) * kSlots * kRealCodes;

      for (auto* p : params) p->zero_grad();
      double batch_loss = 0;
      for (std::size_t i = at; i < end; ++i) {
        ad::Tape tape;
        const auto fwd = model.forward(tape, samples[ep[i]]);
        V l = model.loss(tape, fwd, samples[ep[i]], weights, n_ind, n_hh);
        batch_loss += l->val(0, 0);
        tape.backward(l);
      }
      if (!std::isfinite(batch_loss)) {
        result.diverged = true;
        restore();
        return result;
      }
      if (settings.grad_clip > 0.0) {
        double sq = 0;
        for (auto* p : params) sq += p->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > settings.grad_clip) {
          const double sc = settings.grad_clip / norm;
          for (auto* p : params) p->grad *= sc;
        }
      }
      opt.step(params);
      loss_sum += batch_loss;
      ++n_batches;
    }
    const double train_loss = loss_sum / std::max(1, n_batches);
    result.train_loss.push_back(train_loss);

    const double val_loss =
        val_idx.empty() ? train_loss
                        : eval_set(model, samples, val_idx, weights);
    result.val_loss.push_back(val_loss);
    if (settings.verbose)
      std::cerr << "epoch " << epoch << " train " << train_loss << " val "
                << val_loss << "\n";
    if (std::isfinite(val_loss) && val_loss < result.best_val) {
      result.best_val = val_loss;
      result.best_epoch = epoch;
      snapshot();
    }
  }
  restore();
  result.test_loss = eval_set(model, samples, test_idx, weights);
  return result;
}

double gradient_check(DeepCam& model, const HouseholdSample& s,
                      const Eigen::VectorXd& weights,
                      const std::string& param_name, int row, int col,
                      double eps) {
  const double n_ind = [&] {
    double n = 0;
    for (bool v : s.valid)
      if (v) n += kSlots;
    return n;
  }();
  const double n_hh = static_cast<double>(kSlots) * kRealCodes;

  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  {
    ad::Tape tape;
    const auto fwd = model.forward(tape, s);
    V l = model.loss(tape, fwd, s, weights, n_ind, n_hh);
    tape.backward(l);
  }
  const double analytic = model.param(param_name).grad(row, col);

  auto eval = [&](double delta) {
    model.param(param_name).val(row, col) += delta;
    ad::Tape tape;
    const auto fwd = model.forward(tape, s);
    V l = model.loss(tape, fwd, s, weights, n_ind, n_hh);
    const double v = l->val(0, 0);
    model.param(param_name).val(row, col) -= delta;
    return v;
  };
  const double fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
  return std::abs(analytic - fd) /
         std::max(1e-8, std::abs(analytic) + std::abs(fd));
}

// ---- serialization ------------------------------------------------------

std::string DeepCam::to_json() const {
  nlohmann::json j;
  j["format"] = "deepcam-1";
  j["schema_hash"] = schema_hash_;
  j["config"] = {{"embed_dim", config_.embed_dim},
                 {"n_heads", config_.n_heads},
                 {"n_encoder_layers", config_.n_encoder_layers},
                 {"n_decoder_layers", config_.n_decoder_layers},
                 {"ffn_dim", config_.ffn_dim},
                 {"p_max", config_.p_max},
                 {"diag_bias", config_.diag_bias},
                 {"match_temperature", config_.match_temperature},
                 {"lambda_aor", config_.lambda_aor}};
  nlohmann::json jp = nlohmann::json::object();
  for (const auto& p : params_) {
    std::vector<double> flat(p->val.size());
    for (int r = 0; r < p->val.rows(); ++r)
      for (int c = 0; c < p->val.cols(); ++c)
        flat[r * p->val.cols() + c] = p->val(r, c);
    jp[p->name] = {{"rows", p->val.rows()},
                   {"cols", p->val.cols()},
                   {"data", std::move(flat)}};
  }
  j["params"] = std::move(jp);
  return j.dump();
}

std::unique_ptr<DeepCam> DeepCam::from_json(const std::string& text,
                                            std::uint64_t expected_schema) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != std::string("deepcam-1"))
    throw DataError("checkpoint: unrecognized format");
  try {
  const auto hash = j.at("schema_hash").get<std::uint64_t>();
  if (expected_schema != 0 && hash != expected_schema)
    throw DataError("checkpoint: corpus schema mismatch");
  const auto& jc = j.at("config");
  ModelConfig c;
  c.embed_dim = jc.at("embed_dim").get<int>();
  c.n_heads = jc.at("n_heads").get<int>();
  c.n_encoder_layers = jc.at("n_encoder_layers").get<int>();
  c.n_decoder_layers = jc.at("n_decoder_layers").get<int>();
  c.ffn_dim = jc.at("ffn_dim").get<int>();
  c.p_max = jc.at("p_max").get<int>();
  c.diag_bias = jc.at("diag_bias").get<double>();
  c.match_temperature = jc.at("match_temperature").get<double>();
  c.lambda_aor = jc.at("lambda_aor").get<double>();

  auto model = std::make_unique<DeepCam>(c, 0, hash);
  const auto& jp = j.at("params");
  for (const auto& p : model->params_) {
    if (!jp.contains(p->name))
      throw DataError("checkpoint: missing tensor " + p->name);
    const auto& e = jp.at(p->name);
    const long rows = e.at("rows").get<long>();
    const long cols = e.at("cols").get<long>();
    if (rows != p->val.rows() || cols != p->val.cols())
      throw DataError("checkpoint: shape mismatch for " + p->name);
    const auto flat = e.at("data").get<std::vector<double>>();
    for (long r = 0; r < rows; ++r)
      for (long cc = 0; cc < cols; ++cc) p->val(r, cc) = flat[r * cols + cc];
  }
  return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace tdg
