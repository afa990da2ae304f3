#include "core/seed_model.hpp"

#include <cmath>
#include <iostream>

#include <json.hpp>

#include "core/errors.hpp"

namespace tdg {

namespace {
constexpr int kReal = kCodes - 1;  // non-PAD codes

bool has_children(const Household& h) {
  for (const auto& p : h.members)
    if (p.age < 18) return true;
  return false;
}

int sample_temperature(const Eigen::VectorXd& probs, Rng& rng,
                       double temperature) {
  if (temperature <= 0.0) {
    int best = 0;
    for (int i = 1; i < probs.size(); ++i)
      if (probs(i) > probs(best)) best = i;
    return best;
  }
  std::vector<double> w(probs.size());
  for (int i = 0; i < probs.size(); ++i)
    w[i] = std::pow(std::max(probs(i), 0.0), 1.0 / temperature);
  return static_cast<int>(rng.categorical(w));
}

}  // namespace

std::string SeedChainModel::stratum_key(const Household& h, const Person& head,
                                        const std::vector<std::string>& attrs) {
  std::string key;
  for (const auto& a : attrs) {
    int v;
    if (a == "employed")
      v = head.employed ? 1 : 0;
    else if (a == "has_children")
      v = has_children(h) ? 1 : 0;
    else
      throw ConfigError("unsupported seed-model stratum attribute: '" + a +
                        "'");
    key += a + "=" + std::to_string(v) + "|";
  }
  return key.empty() ? "*" : key;
}

const SeedChainModel::Stratum& SeedChainModel::lookup(
    const Household& h, const Person& head) const {
  const std::string key = stratum_key(h, head, config.strata);
  auto it = strata.find(key);
  if (it != strata.end() && it->second.n_chains > 0) return it->second;
  return strata.at("*");
}

SeedChainModel fit_seed_model(const std::vector<Household>& population,
                              const ChainSet& chains,
                              const SeedModelConfig& config) {
  SeedChainModel model;
  model.config = config;

  struct Counts {
    Eigen::VectorXd initial = Eigen::VectorXd::Zero(kReal);
    std::vector<Eigen::MatrixXd> trans;
    long n_chains = 0;
    Counts() : trans(kSlots - 1, Eigen::MatrixXd::Zero(kReal, kReal)) {}
  };
  std::map<std::string, Counts> counts;
  counts["*"];  // pooled estimate always present

  long used = 0;
  for (const auto& h : population) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    const int head_idx = select_household_head(h);
    const Person& head = h.members[head_idx];
    auto pit = hit->second.find(head.person_id);
    if (pit == hit->second.end()) continue;
    const GridRow row = encode_chain(pit->second);
    const std::string key =
        SeedChainModel::stratum_key(h, head, config.strata);
    for (const std::string& k : {key, std::string("*")}) {
      Counts& c = counts[k];
      c.initial(row[0]) += 1.0;
      for (int t = 0; t + 1 < kSlots; ++t) c.trans[t](row[t], row[t + 1]) += 1.0;
      ++c.n_chains;
      if (key == "*") break;
    }
    ++used;
  }
  if (used == 0) throw DataError("fit_seed_model: no head chains in corpus");

  for (auto& [key, c] : counts) {
    if (c.n_chains == 0 && key != "*")
      std::cerr << "warning: empty seed-model stratum '" << key
                << "', pooled fallback will be used\n";
    SeedChainModel::Stratum s;
    s.n_chains = c.n_chains;
    s.initial = (c.initial.array() + config.alpha) /
                (c.initial.sum() + config.alpha * kReal);
    s.trans.resize(kSlots - 1);
    for (int t = 0; t + 1 < kSlots; ++t) {
      s.trans[t] = Eigen::MatrixXd(kReal, kReal);
      for (int i = 0; i < kReal; ++i) {
        const double row_sum = c.trans[t].row(i).sum();
        s.trans[t].row(i) = (c.trans[t].row(i).array() + config.alpha) /
                            (row_sum + config.alpha * kReal);
      }
    }
    model.strata[key] = std::move(s);
  }
  return model;
}

GridRow generate_seed_chain(const SeedChainModel& model, const Household& h,
                            const Person& head, std::uint64_t rng_seed,
                            double temperature) {
  const auto& s = model.lookup(h, head);
  Rng rng(rng_seed);
  GridRow row;
  row[0] = static_cast<std::uint8_t>(
      sample_temperature(s.initial, rng, temperature));
  for (int t = 1; t < kSlots; ++t)
    row[t] = static_cast<std::uint8_t>(sample_temperature(
        s.trans[t - 1].row(row[t - 1]).transpose(), rng, temperature));
  return row;
}

// ---- serialization ------------------------------------------------------

std::string SeedChainModel::to_json() const {
  nlohmann::json j;
  j["strata_spec"] = config.strata;
  j["alpha"] = config.alpha;
  nlohmann::json js = nlohmann::json::object();
  for (const auto& [key, s] : strata) {
    nlohmann::json e;
    e["n_chains"] = s.n_chains;
    e["initial"] = std::vector<double>(s.initial.data(),
                                       s.initial.data() + s.initial.size());
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& m : s.trans) {
      std::vector<double> flat(m.size());
      for (int i = 0; i < m.rows(); ++i)
        for (int c = 0; c < m.cols(); ++c) flat[i * m.cols() + c] = m(i, c);
      tr.push_back(flat);
    }
    e["trans"] = std::move(tr);
    js[key] = std::move(e);
  }
  j["strata"] = std::move(js);
  return j.dump();
}

SeedChainModel SeedChainModel::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SeedChainModel model;
  model.config.strata = j.at("strata_spec").get<std::vector<std::string>>();
  model.config.alpha = j.at("alpha").get<double>();
  for (auto& [key, e] : j.at("strata").items()) {
    Stratum s;
    s.n_chains = e.at("n_chains").get<long>();
    const auto init = e.at("initial").get<std::vector<double>>();
    s.initial = Eigen::Map<const Eigen::VectorXd>(init.data(), init.size());
    for (const auto& flat_j : e.at("trans")) {
      const auto flat = flat_j.get<std::vector<double>>();
      Eigen::MatrixXd m(kReal, kReal);
      for (int i = 0; i < kReal; ++i)
        for (int c = 0; c < kReal; ++c) m(i, c) = flat[i * kReal + c];
      s.trans.push_back(std::move(m));
    }
    model.strata[key] = std::move(s);
  }
  if (!model.strata.count("*"))
    throw DataError("seed model: missing pooled stratum");
  return model;
}

}  // namespace tdg
