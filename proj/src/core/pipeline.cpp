#include "core/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "core/csvio.hpp"
#include "core/deepcam.hpp"
#include "core/errors.hpp"
#include "core/events.hpp"
#include "core/location.hpp"
#include "core/mesosim.hpp"
#include "core/metrics.hpp"
#include "core/popsynth.hpp"
#include "core/rng.hpp"
#include "core/seed_model.hpp"
#include "core/synthcorpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tdg {

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return from_json(read_text(path));
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  PipelineConfig cfg;
  try {
    cfg.raw = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!cfg.raw.contains("out_dir"))
    throw ConfigError("config: missing out_dir");
  cfg.out_dir = cfg.raw.at("out_dir").get<std::string>();
  return cfg;
}

std::uint64_t PipelineConfig::seed(const std::string& stage) const {
  if (!raw.contains("seeds") || !raw.at("seeds").contains(stage))
    throw ConfigError("config: no seed for stage '" + stage + "'");
  return raw.at("seeds").at(stage).get<std::uint64_t>();
}

std::uint64_t PipelineConfig::config_hash() const {
  return csv::fnv1a(raw.dump());
}

std::vector<std::string> PipelineConfig::meta_lines(
    const std::string& stage) const {
  return {"stage=" + stage, "config_hash=" + hex64(config_hash())};
}

ActivityTypeTable types_from_config(const PipelineConfig& cfg) {
  ActivityTypeTable types;
  if (cfg.raw.contains("activity_labels"))
    for (const auto& [code, label] : cfg.raw.at("activity_labels").items())
      types.rename(std::stoi(code), label.get<std::string>());
  if (cfg.raw.contains("accompanying_types"))
    for (const auto& label : cfg.raw.at("accompanying_types"))
      types.set_accompanying(types.code_of(label.get<std::string>()), true);
  return types;
}

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{
      "gen-corpus", "synth-pop", "train",    "generate",
      "events",     "assign",    "simulate", "validate"};
  return stages;
}

namespace {

// ---- config readers -----------------------------------------------------

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

json section(const PipelineConfig& cfg, const std::string& name) {
  return cfg.raw.contains(name) ? cfg.raw.at(name) : json::object();
}

std::string path_of(const PipelineConfig& cfg, const std::string& key,
                    const std::string& fallback = "") {
  const json paths = section(cfg, "paths");
  return get_or<std::string>(paths, key, fallback);
}

std::string artifact(const PipelineConfig& cfg, const std::string& rel) {
  return (fs::path(cfg.out_dir) / rel).string();
}

ModelConfig model_config(const PipelineConfig& cfg) {
  const json m = section(cfg, "model");
  ModelConfig c;
  c.embed_dim = get_or(m, "embed_dim", c.embed_dim);
  c.n_heads = get_or(m, "n_heads", c.n_heads);
  c.n_encoder_layers = get_or(m, "n_encoder_layers", c.n_encoder_layers);
  c.n_decoder_layers = get_or(m, "n_decoder_layers", c.n_decoder_layers);
  c.ffn_dim = get_or(m, "ffn_dim", c.ffn_dim);
  c.p_max = get_or(m, "p_max", c.p_max);
  c.diag_bias = get_or(m, "diag_bias", c.diag_bias);
  c.match_temperature = get_or(m, "match_temperature", c.match_temperature);
  c.lambda_aor = get_or(m, "lambda_aor", c.lambda_aor);
  c.validate();
  return c;
}

SyntheticRuleSet rules_from(const PipelineConfig& cfg) {
  const json r = section(cfg, "synthetic_rules");
  SyntheticRuleSet rules;
  rules.p_spouse_meal = get_or(r, "p_spouse_meal", rules.p_spouse_meal);
  rules.q_escort = get_or(r, "q_escort", rules.q_escort);
  rules.share_single = get_or(r, "share_single", rules.share_single);
  rules.share_couple = get_or(r, "share_couple", rules.share_couple);
  rules.n_zones = get_or(r, "n_zones", rules.n_zones);
  rules.all_home = get_or(r, "all_home", rules.all_home);
  rules.validate();
  return rules;
}

long n_households(const PipelineConfig& cfg) {
  if (!cfg.raw.contains("n_households"))
    throw ConfigError("config: missing n_households");
  return cfg.raw.at("n_households").get<long>();
}

// Corpus artifacts: explicit paths win over the gen-corpus outputs.
std::string corpus_population_path(const PipelineConfig& cfg) {
  return path_of(cfg, "corpus_population",
                 artifact(cfg, "corpus/population.csv"));
}
std::string corpus_chains_path(const PipelineConfig& cfg) {
  return path_of(cfg, "corpus_chains", artifact(cfg, "corpus/chains.csv"));
}

void write_sidecar(const PipelineConfig& cfg, const std::string& stage,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = hex64(cfg.config_hash());
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  write_text(artifact(cfg, "meta/" + stage + ".json"), j.dump(2));
}

// Household restricted to members that have a chain, chains in member
// order. Skips the household when the head's chain is missing.
struct HouseholdView {
  Household household;
  std::vector<ActivityChain> chains;
  int head_index = 0;
};

std::vector<HouseholdView> chain_views(const std::vector<Household>& pop,
                                       const ChainSet& chains) {
  std::vector<HouseholdView> out;
  for (const auto& h : pop) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    HouseholdView v;
    v.household.household_id = h.household_id;
    v.household.income = h.income;
    v.household.vehicles = h.vehicles;
    v.household.home_taz = h.home_taz;
    for (const auto& p : h.members) {
      auto pit = hit->second.find(p.person_id);
      if (pit == hit->second.end()) continue;
      v.household.members.push_back(p);
      v.chains.push_back(pit->second);
    }
    if (v.household.members.empty()) continue;
    v.head_index = select_household_head(v.household);
    out.push_back(std::move(v));
  }
  return out;
}

// ---- stages -------------------------------------------------------------

void stage_gen_corpus(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  const SyntheticRuleSet rules = rules_from(cfg);
  const auto corpus = generate_synthetic_corpus(rules, n_households(cfg),
                                                cfg.seed("gen-corpus"));
  fs::create_directories(artifact(cfg, "corpus"));
  const auto meta = cfg.meta_lines("gen-corpus");
  save_population(artifact(cfg, "corpus/population.csv"), corpus.population,
                  meta);
  save_chains(artifact(cfg, "corpus/chains.csv"), corpus.chains, types, meta);

  std::vector<std::pair<long, std::vector<Event>>> all_events;
  for (const auto& v : chain_views(corpus.population, corpus.chains))
    all_events.emplace_back(
        v.household.household_id,
        build_event_table(v.household, v.chains, types, v.head_index));
  save_events(artifact(cfg, "corpus/events.csv"), all_events, types, meta);
  write_text(artifact(cfg, "corpus/targets.json"),
             corpus_targets_json(rules, corpus, types));
  write_sidecar(cfg, "gen-corpus", {},
                {"corpus/population.csv", "corpus/chains.csv",
                 "corpus/events.csv", "corpus/targets.json"});
}

void stage_synth_pop(const PipelineConfig& cfg) {
  const std::string marginals_path = path_of(cfg, "marginals");
  const std::string seed_path = path_of(cfg, "seed_sample");
  if (marginals_path.empty() || seed_path.empty())
    throw ConfigError("synth-pop: paths.marginals and paths.seed_sample required");

  const auto marginals = load_marginals(marginals_path);
  SeedSample seed;
  seed.templates = load_population(seed_path);
  seed.weights.assign(seed.templates.size(), 1.0);
  const std::string wpath = path_of(cfg, "seed_weights");
  if (!wpath.empty()) {
    const auto table = csv::read_file(wpath);
    std::map<long, double> by_hid;
    const int c_hid = table.require("household_id");
    const int c_w = table.require("weight");
    for (const auto& r : table.rows)
      by_hid[csv::to_long(r[c_hid], wpath)] = csv::to_double(r[c_w], wpath);
    for (std::size_t i = 0; i < seed.templates.size(); ++i) {
      auto it = by_hid.find(seed.templates[i].household_id);
      if (it != by_hid.end()) seed.weights[i] = it->second;
    }
  }

  const json s = section(cfg, "synth");
  const auto fit = ipf_fit(seed, marginals, get_or(s, "tol", 1e-4),
                           get_or(s, "max_iter", 100));
  const auto pop = draw_population(seed, fit, n_households(cfg),
                                   cfg.seed("synth-pop"));
  save_population(artifact(cfg, "population.csv"), pop,
                  cfg.meta_lines("synth-pop"));

  json j;
  j["converged"] = fit.converged;
  j["sweeps"] = fit.sweeps;
  j["gap_history"] = fit.gap_history;
  write_text(artifact(cfg, "ipf.json"), j.dump(2));
  write_sidecar(cfg, "synth-pop", {marginals_path, seed_path},
                {"population.csv", "ipf.json"});
}

void stage_train(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  const auto pop = load_population(corpus_population_path(cfg));
  const auto chains = load_chains(corpus_chains_path(cfg), types);

  const json sm = section(cfg, "seed_model");
  SeedModelConfig smc;
  if (sm.contains("strata"))
    smc.strata = sm.at("strata").get<std::vector<std::string>>();
  smc.alpha = get_or(sm, "alpha", smc.alpha);
  const SeedChainModel seed_model = fit_seed_model(pop, chains, smc);
  write_text(artifact(cfg, "seed_model.json"), seed_model.to_json());

  const Eigen::VectorXd weights = compute_activity_weights(pop, chains, types);
  {
    json j = json::array();
    for (int a = 0; a < weights.size(); ++a) j.push_back(weights(a));
    write_text(artifact(cfg, "weights.json"), j.dump());
  }

  const ModelConfig mc = model_config(cfg);
  const std::uint64_t train_seed = cfg.seed("train");
  DeepCam model(mc, Rng::derive(train_seed, 99).next(),
                corpus_schema_hash(types));

  std::vector<HouseholdSample> samples;
  for (const auto& h : pop) {
    auto hit = chains.find(h.household_id);
    if (hit == chains.end()) continue;
    const int head = select_household_head(h);
    if (!hit->second.count(h.members[head].person_id)) continue;
    samples.push_back(make_sample(h, hit->second, head, mc.p_max));
  }

  const json t = section(cfg, "train");
  TrainSettings ts;
  ts.epochs = get_or(t, "epochs", ts.epochs);
  ts.batch_size = get_or(t, "batch_size", ts.batch_size);
  ts.lr = get_or(t, "lr", ts.lr);
  ts.grad_clip = get_or(t, "grad_clip", ts.grad_clip);
  ts.verbose = get_or(t, "verbose", ts.verbose);
  ts.seed = train_seed;
  const TrainResult result = train_deepcam(model, std::move(samples), weights, ts);
  if (result.diverged)
    throw NumericError("train: loss diverged; kept last finite checkpoint");

  write_text(artifact(cfg, "model.json"), model.to_json());
  json log;
  log["train_loss"] = result.train_loss;
  log["val_loss"] = result.val_loss;
  log["best_epoch"] = result.best_epoch;
  log["best_val"] = result.best_val;
  log["test_loss"] = result.test_loss;
  write_text(artifact(cfg, "train_log.json"), log.dump(2));
  write_sidecar(cfg, "train",
                {corpus_population_path(cfg), corpus_chains_path(cfg)},
                {"model.json", "seed_model.json", "weights.json",
                 "train_log.json"});
}

void stage_generate(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  std::string pop_path = artifact(cfg, "population.csv");
  if (!fs::exists(pop_path)) pop_path = corpus_population_path(cfg);
  const auto pop = load_population(pop_path);

  const std::string ckpt =
      path_of(cfg, "checkpoint", artifact(cfg, "model.json"));
  auto model = DeepCam::from_json(read_text(ckpt), corpus_schema_hash(types));
  const auto seed_model = SeedChainModel::from_json(
      read_text(path_of(cfg, "seed_model", artifact(cfg, "seed_model.json"))));

  const json g = section(cfg, "generate");
  const double temp = get_or(g, "temperature", 1.0);
  const double seed_temp = get_or(g, "seed_temperature", 1.0);
  const std::uint64_t stage_seed = cfg.seed("generate");

  ChainSet out;
  for (const auto& h : pop) {
    const int head_idx = select_household_head(h);
    const Person& head = h.members[head_idx];
    const std::uint64_t hid = static_cast<std::uint64_t>(h.household_id);
    const GridRow head_grid = generate_seed_chain(
        seed_model, h, head, Rng::derive(stage_seed, 2 * hid).next(),
        seed_temp);
    const auto sample = make_generation_sample(h, head_idx, head_grid,
                                               model->config().p_max);
    const SlotGrid grid = model->generate_members(
        sample, Rng::derive(stage_seed, 2 * hid + 1).next(), temp);

    std::vector<int> order{head_idx};
    for (int i = 0; i < h.size(); ++i)
      if (i != head_idx) order.push_back(i);
    for (int row = 0; row < model->config().p_max &&
                      row < static_cast<int>(order.size());
         ++row) {
      const long pid = h.members[order[row]].person_id;
      out[h.household_id][pid] = decode_grid(grid.codes[row], pid);
    }
  }
  save_chains(artifact(cfg, "chains.csv"), out, types,
              cfg.meta_lines("generate"));
  write_sidecar(cfg, "generate", {pop_path, ckpt}, {"chains.csv"});
}

void stage_events(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  std::string pop_path = artifact(cfg, "population.csv");
  if (!fs::exists(pop_path)) pop_path = corpus_population_path(cfg);
  const auto pop = load_population(pop_path);
  const auto chains = load_chains(artifact(cfg, "chains.csv"), types);

  std::vector<std::pair<long, std::vector<Event>>> all_events;
  for (const auto& v : chain_views(pop, chains))
    all_events.emplace_back(
        v.household.household_id,
        build_event_table(v.household, v.chains, types, v.head_index));
  save_events(artifact(cfg, "events.csv"), all_events, types,
              cfg.meta_lines("events"));
  write_sidecar(cfg, "events", {pop_path, "chains.csv"}, {"events.csv"});
}

SamplerSet samplers_from(const PipelineConfig& cfg, const ZoneTable& zones,
                         const LocationParams& params) {
  const std::string path = path_of(cfg, "distance_samples");
  SamplerSet set;
  if (!path.empty()) {
    const auto table = csv::read_file(path);
    const int c_p = table.require("purpose");
    const int c_v = table.require("value");
    std::map<std::string, std::vector<double>> by_purpose;
    for (const auto& r : table.rows)
      by_purpose[r[c_p]].push_back(csv::to_double(r[c_v], path));
    auto get = [&](const std::string& k) {
      auto it = by_purpose.find(k);
      if (it == by_purpose.end())
        throw DataError("distance samples: missing purpose '" + k + "'");
      return DistanceSampler::from_values(it->second);
    };
    set.work = get("work");
    set.school = get("school");
    set.nonmandatory = get("nonmandatory");
    if (by_purpose.count("bearing"))
      set.bearing = DistanceSampler::from_values(by_purpose.at("bearing"));
    return set;
  }
  // Fall back to the empirical inter-zone distance spectrum.
  std::vector<double> d;
  for (std::size_t i = 0; i < zones.zones.size(); ++i)
    for (std::size_t j = i + 1; j < zones.zones.size(); ++j)
      d.push_back(zones.distance(zones.zones[i].taz_id,
                                 zones.zones[j].taz_id,
                                 params.detour_factor));
  if (d.empty()) d.push_back(1000.0);
  set.work = DistanceSampler::from_values(d);
  set.school = DistanceSampler::from_values(d);
  set.nonmandatory = DistanceSampler::from_values(d);
  return set;
}

void stage_assign(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  std::string pop_path = artifact(cfg, "population.csv");
  if (!fs::exists(pop_path)) pop_path = corpus_population_path(cfg);
  const auto pop = load_population(pop_path);
  const auto chains = load_chains(artifact(cfg, "chains.csv"), types);
  const auto events = load_events(artifact(cfg, "events.csv"), types);
  const std::string zones_path = path_of(cfg, "zones");
  if (zones_path.empty()) throw ConfigError("assign: paths.zones required");
  const ZoneTable zones = load_zones(zones_path, types);

  const json l = section(cfg, "location");
  LocationParams params;
  params.alpha = get_or(l, "alpha", params.alpha);
  params.beta = get_or(l, "beta", params.beta);
  params.detour_factor = get_or(l, "detour_factor", params.detour_factor);
  params.speed_ms = get_or(l, "speed_kmh", 30.0) / 3.6;
  params.t_max_min = get_or(l, "t_max_min", params.t_max_min);

  const SamplerSet samplers = samplers_from(cfg, zones, params);
  std::map<long, const std::vector<Event>*> events_by_hid;
  for (const auto& [hid, evs] : events) events_by_hid[hid] = &evs;

  const std::uint64_t stage_seed = cfg.seed("assign");
  std::vector<LocatedActivity> plans;
  static const std::vector<Event> kNoEvents;
  for (const auto& v : chain_views(pop, chains)) {
    auto it = events_by_hid.find(v.household.household_id);
    const auto& evs = it == events_by_hid.end() ? kNoEvents : *it->second;
    auto located = assign_household(
        v.household, v.chains, evs, zones, samplers, types, params,
        Rng::derive(stage_seed,
                    static_cast<std::uint64_t>(v.household.household_id))
            .next());
    plans.insert(plans.end(), located.begin(), located.end());
  }
  save_plans(artifact(cfg, "plans.csv"), plans, types,
             cfg.meta_lines("assign"));
  write_sidecar(cfg, "assign", {pop_path, zones_path, "chains.csv"},
                {"plans.csv"});
}

void stage_simulate(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  const std::string links_path = path_of(cfg, "links");
  const std::string nodes_path = path_of(cfg, "nodes");
  if (links_path.empty() || nodes_path.empty())
    throw ConfigError("simulate: paths.links and paths.nodes required");
  const Network net = load_network(links_path, nodes_path);
  const std::string zones_path = path_of(cfg, "zones");
  if (zones_path.empty()) throw ConfigError("simulate: paths.zones required");
  const ZoneTable zones = load_zones(zones_path, types);
  const auto plans = load_plans(artifact(cfg, "plans.csv"), types);

  std::string pop_path = artifact(cfg, "population.csv");
  if (!fs::exists(pop_path)) pop_path = corpus_population_path(cfg);
  const auto pop = load_population(pop_path);
  std::map<long, int> household_vehicles;
  std::map<long, long> person_household;
  for (const auto& h : pop) {
    household_vehicles[h.household_id] = h.vehicles;
    for (const auto& p : h.members)
      person_household[p.person_id] = h.household_id;
  }

  const json s = section(cfg, "simulation");
  const std::uint64_t stage_seed = cfg.seed("simulate");
  auto trips = trips_from_plans(plans, zones, net);
  init_modes(household_vehicles, person_household, trips,
             get_or(s, "car_share", 0.8), Rng::derive(stage_seed, 1).next());
  const auto result = iterate_assignment(
      std::move(trips), net, get_or(s, "iterations", 1),
      get_or(s, "reroute_fraction", 0.1), Rng::derive(stage_seed, 2).next());

  const auto meta = cfg.meta_lines("simulate");
  save_link_stats(artifact(cfg, "link_stats.csv"), result.state, net, meta);
  save_vmt(artifact(cfg, "vmt.csv"), result.state, net, meta);
  save_od(artifact(cfg, "od.csv"), od_matrix(result.trips), meta);
  std::vector<std::string> outputs{"link_stats.csv", "vmt.csv", "od.csv"};
  if (s.contains("corridor_links")) {
    const auto ids = s.at("corridor_links").get<std::vector<long>>();
    save_corridor(artifact(cfg, "corridor.csv"),
                  corridor_extract(result.state, net, ids), meta);
    outputs.push_back("corridor.csv");
  }
  json j;
  j["relative_gap"] = result.relative_gap;
  j["entered"] = result.state.entered;
  j["exited"] = result.state.exited;
  j["on_network_at_end"] = result.state.on_network_at_end;
  j["dropped_unroutable"] = result.state.dropped_unroutable;
  write_text(artifact(cfg, "gaps.json"), j.dump(2));
  outputs.push_back("gaps.json");
  write_sidecar(cfg, "simulate", {links_path, nodes_path, "plans.csv"},
                outputs);
}

void stage_validate(const PipelineConfig& cfg) {
  const ActivityTypeTable types = types_from_config(cfg);
  ValidationOptions opt;
  opt.generated_dir = cfg.out_dir;
  opt.reference_dir =
      path_of(cfg, "reference_dir", artifact(cfg, "corpus"));
  opt.out_dir = artifact(cfg, "report");
  const json v = section(cfg, "validation");
  if (v.contains("slices"))
    opt.slices = v.at("slices").get<std::vector<std::string>>();
  validate(opt, types);
  write_sidecar(cfg, "validate", {opt.reference_dir}, {"report/report.json"});
}

// Primary output used for resume checks.
std::string stage_output(const PipelineConfig& cfg, const std::string& stage) {
  if (stage == "gen-corpus") return artifact(cfg, "corpus/chains.csv");
  if (stage == "synth-pop") return artifact(cfg, "population.csv");
  if (stage == "train") return artifact(cfg, "model.json");
  if (stage == "generate") return artifact(cfg, "chains.csv");
  if (stage == "events") return artifact(cfg, "events.csv");
  if (stage == "assign") return artifact(cfg, "plans.csv");
  if (stage == "simulate") return artifact(cfg, "vmt.csv");
  if (stage == "validate") return artifact(cfg, "report/report.json");
  throw ConfigError("unknown stage: " + stage);
}

bool stage_applicable(const PipelineConfig& cfg, const std::string& stage) {
  if (stage == "gen-corpus") return cfg.raw.contains("synthetic_rules");
  if (stage == "synth-pop")
    return !path_of(cfg, "marginals").empty() &&
           !path_of(cfg, "seed_sample").empty();
  if (stage == "simulate")
    return !path_of(cfg, "links").empty() && !path_of(cfg, "nodes").empty();
  if (stage == "assign") return !path_of(cfg, "zones").empty();
  return true;
}

void check_paths(const PipelineConfig& cfg) {
  if (!cfg.raw.contains("paths")) return;
  for (const auto& [key, value] : cfg.raw.at("paths").items()) {
    const auto p = value.get<std::string>();
    if (!p.empty() && !fs::exists(p))
      throw ConfigError("config: paths." + key + " does not exist: " + p);
  }
}

}  // namespace

void run_stage(const PipelineConfig& cfg, const std::string& stage) {
  check_paths(cfg);
  fs::create_directories(cfg.out_dir);
  try {
    if (stage == "gen-corpus")
      stage_gen_corpus(cfg);
    else if (stage == "synth-pop")
      stage_synth_pop(cfg);
    else if (stage == "train")
      stage_train(cfg);
    else if (stage == "generate")
      stage_generate(cfg);
    else if (stage == "events")
      stage_events(cfg);
    else if (stage == "assign")
      stage_assign(cfg);
    else if (stage == "simulate")
      stage_simulate(cfg);
    else if (stage == "validate")
      stage_validate(cfg);
    else
      throw ConfigError("unknown stage: " + stage);
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + stage + ": " + e.what());
  }
}

std::vector<std::string> run_pipeline(const PipelineConfig& cfg, bool resume) {
  check_paths(cfg);
  std::vector<std::string> ran;
  std::string last_good = "(none)";
  for (const auto& stage : pipeline_stages()) {
    if (!stage_applicable(cfg, stage)) continue;
    if (resume && fs::exists(stage_output(cfg, stage))) {
      last_good = stage_output(cfg, stage);
      continue;
    }
    try {
      run_stage(cfg, stage);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) +
                        "; last good artifact: " + last_good);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) +
                      "; last good artifact: " + last_good);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) +
                         "; last good artifact: " + last_good);
    }
    last_good = stage_output(cfg, stage);
    ran.push_back(stage);
  }
  return ran;
}

}  // namespace tdg
