#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/csvio.hpp"
#include "core/errors.hpp"

namespace fs = std::filesystem;

namespace tdg {

Distribution make_distribution(const std::vector<std::string>& labels,
                               const std::vector<double>& counts) {
  if (labels.size() != counts.size())
    throw DataError("make_distribution: label/count size mismatch");
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw DataError("make_distribution: negative mass");
    total += c;
  }
  if (!(total > 0.0)) throw DataError("make_distribution: zero total mass");
  Distribution d;
  d.labels = labels;
  d.p.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) d.p[i] = counts[i] / total;
  return d;
}

namespace {

void check_normalized(const Distribution& d) {
  double total = 0.0;
  for (double v : d.p) {
    if (v < 0.0) throw DataError("jsd: negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DataError("jsd: distribution not normalized");
}

}  // namespace

double jsd(const Distribution& P, const Distribution& Q) {
  check_normalized(P);
  check_normalized(Q);
  // Union-align supports.
  std::map<std::string, std::pair<double, double>> aligned;
  for (std::size_t i = 0; i < P.labels.size(); ++i)
    aligned[P.labels[i]].first += P.p[i];
  for (std::size_t i = 0; i < Q.labels.size(); ++i)
    aligned[Q.labels[i]].second += Q.p[i];

  double div = 0.0;
  for (const auto& [label, pq] : aligned) {
    const double p = pq.first, q = pq.second, m = 0.5 * (p + q);
    if (p > 0.0) div += 0.5 * p * std::log2(p / m);
    if (q > 0.0) div += 0.5 * q * std::log2(q / m);
  }
  return std::clamp(div, 0.0, 1.0);
}

double mape(const std::vector<double>& pred, const std::vector<double>& obs,
            double eps, int* excluded) {
  if (pred.size() != obs.size()) throw DataError("mape: length mismatch");
  double sum = 0.0;
  int n = 0, skipped = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (std::abs(obs[i]) < eps) {
      ++skipped;
      continue;
    }
    sum += std::abs(pred[i] - obs[i]) / std::abs(obs[i]);
    ++n;
  }
  if (excluded) *excluded = skipped;
  if (n == 0) throw DataError("mape: all observations excluded");
  return sum / n * 100.0;
}

double cosine_similarity(const std::map<std::pair<long, long>, double>& A,
                         const std::map<std::pair<long, long>, double>& B) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : A) {
    na += v * v;
    auto it = B.find(k);
    if (it != B.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : B) nb += v * v;
  if (!(na > 0.0) || !(nb > 0.0))
    throw DataError("cosine_similarity: zero matrix");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

ChainStats build_chain_stats(const ChainSet& chains,
                             const ActivityTypeTable& types) {
  if (chains.empty()) throw DataError("build_chain_stats: empty chain set");
  ChainStats st;
  st.slot_type_shares.assign(kSlots, std::vector<double>(kCodes - 1, 0.0));
  std::vector<double> type_counts(kCodes - 1, 0.0);
  std::vector<double> start_counts(kSlots, 0.0);
  std::map<int, std::vector<double>> durations;
  std::map<int, double> act_counts;

  long n_persons = 0;
  for (const auto& [hid, by_person] : chains)
    for (const auto& [pid, chain] : by_person) {
      ++n_persons;
      const GridRow row = encode_chain(chain);
      for (int s = 0; s < kSlots; ++s) st.slot_type_shares[s][row[s]] += 1.0;
      for (const auto& a : chain.activities) {
        type_counts[a.type] += 1.0;
        start_counts[a.start / kSlotMinutes] += 1.0;
        durations[a.type].push_back(a.end - a.start);
      }
      act_counts[static_cast<int>(chain.activities.size())] += 1.0;
    }

  for (auto& slot : st.slot_type_shares)
    for (auto& v : slot) v /= static_cast<double>(n_persons);

  std::vector<std::string> type_labels;
  for (int c = 0; c < kCodes - 1; ++c) type_labels.push_back(types.label(c));
  st.type_distribution = make_distribution(type_labels, type_counts);

  std::vector<std::string> slot_labels;
  for (int s = 0; s < kSlots; ++s)
    slot_labels.push_back(std::to_string(s * kSlotMinutes));
  st.start_time_distribution = make_distribution(slot_labels, start_counts);

  for (auto& [type, d] : durations) {
    std::sort(d.begin(), d.end());
    auto quantile = [&](double q) {
      const double pos = q * (d.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, d.size() - 1);
      return d[lo] + (pos - lo) * (d[hi] - d[lo]);
    };
    st.duration_quartiles[type] = {quantile(0.25), quantile(0.5),
                                   quantile(0.75)};
  }

  const int max_n = act_counts.rbegin()->first;
  std::vector<std::string> count_labels;
  std::vector<double> count_counts;
  for (int n = 1; n <= max_n; ++n) {
    count_labels.push_back(std::to_string(n));
    auto it = act_counts.find(n);
    count_counts.push_back(it == act_counts.end() ? 0.0 : it->second);
  }
  st.activities_per_person = make_distribution(count_labels, count_counts);
  return st;
}

// ---- Report assembly ----------------------------------------------------

namespace {

bool has(const std::vector<std::string>& slices, const std::string& s) {
  return slices.empty() ||
         std::find(slices.begin(), slices.end(), s) != slices.end();
}

struct Series {
  std::vector<std::string> keys;
  std::vector<double> values;
};

// Reads a two-sided keyed series (e.g. vmt.csv interval,vmt) aligned on the
// union of keys with zero fill.
void align_series(const csv::Table& a, const csv::Table& b,
                  const std::string& key_col, const std::string& val_col,
                  std::vector<double>& va, std::vector<double>& vb) {
  std::map<std::string, std::pair<double, double>> m;
  const int ka = a.col(key_col), vac = a.col(val_col);
  const int kb = b.col(key_col), vbc = b.col(val_col);
  if (ka < 0 || vac < 0 || kb < 0 || vbc < 0)
    throw DataError("series missing column " + key_col + " or " + val_col);
  for (const auto& r : a.rows)
    m[r[ka]].first += csv::to_double(r[vac], "series");
  for (const auto& r : b.rows)
    m[r[kb]].second += csv::to_double(r[vbc], "series");
  for (const auto& [k, pq] : m) {
    va.push_back(pq.first);
    vb.push_back(pq.second);
  }
}

std::map<std::pair<long, long>, double> load_od(const std::string& path) {
  csv::Table t = csv::read_file(path);
  const int c_o = t.require("origin");
  const int c_d = t.require("dest");
  const int c_n = t.require("trips");
  std::map<std::pair<long, long>, double> od;
  for (const auto& r : t.rows)
    od[{csv::to_long(r[c_o], path), csv::to_long(r[c_d], path)}] +=
        csv::to_double(r[c_n], path);
  return od;
}

}  // namespace

std::vector<ValidationEntry> validate(const ValidationOptions& opt,
                                      const ActivityTypeTable& types) {
  fs::create_directories(opt.out_dir);
  std::vector<ValidationEntry> entries;
  auto emit = [&](const std::string& metric, const std::string& slice,
                  double value) {
    entries.push_back({metric, slice, value, true, ""});
  };
  auto absent = [&](const std::string& metric, const std::string& slice,
                    const std::string& why) {
    entries.push_back({metric, slice, 0.0, false, why});
  };

  const std::string gen_chains = opt.generated_dir + "/chains.csv";
  const std::string ref_chains = opt.reference_dir + "/chains.csv";
  const bool chains_ok = fs::exists(gen_chains) && fs::exists(ref_chains);

  if (chains_ok) {
    ChainStats g = build_chain_stats(load_chains(gen_chains, types), types);
    ChainStats r = build_chain_stats(load_chains(ref_chains, types), types);

    if (has(opt.slices, "timeslot_jsd")) {
      // One JSD per 15-minute slot across types (fig4a analogue).
      csv::Writer w(opt.out_dir + "/fig4a.csv", {"slot_min", "jsd"});
      double max_jsd = 0.0;
      std::vector<std::string> type_labels;
      for (int c = 0; c < kCodes - 1; ++c) type_labels.push_back(types.label(c));
      for (int s = 0; s < kSlots; ++s) {
        const double v = jsd(make_distribution(type_labels, g.slot_type_shares[s]),
                             make_distribution(type_labels, r.slot_type_shares[s]));
        max_jsd = std::max(max_jsd, v);
        w.row({csv::fmt(s * kSlotMinutes), csv::fmt(v)});
      }
      emit("jsd_max", "timeslot_jsd", max_jsd);
    }
    if (has(opt.slices, "activity_type_jsd")) {
      csv::Writer w(opt.out_dir + "/fig4b.csv",
                    {"activity_type", "generated", "reference"});
      for (std::size_t i = 0; i < g.type_distribution.labels.size(); ++i)
        w.row({g.type_distribution.labels[i], csv::fmt(g.type_distribution.p[i]),
               csv::fmt(r.type_distribution.p[i])});
      emit("jsd", "activity_type_jsd",
           jsd(g.type_distribution, r.type_distribution));
    }
    if (has(opt.slices, "start_time_jsd")) {
      csv::Writer w(opt.out_dir + "/fig4c.csv",
                    {"start_min", "generated", "reference"});
      for (std::size_t i = 0; i < g.start_time_distribution.labels.size(); ++i)
        w.row({g.start_time_distribution.labels[i],
               csv::fmt(g.start_time_distribution.p[i]),
               csv::fmt(r.start_time_distribution.p[i])});
      emit("jsd", "start_time_jsd",
           jsd(g.start_time_distribution, r.start_time_distribution));
    }
    if (has(opt.slices, "duration_quartiles")) {
      csv::Writer w(opt.out_dir + "/fig4d.csv",
                    {"activity_type", "gen_q1", "gen_median", "gen_q3",
                     "ref_q1", "ref_median", "ref_q3"});
      double sum = 0.0;
      int n = 0;
      for (const auto& [type, rq] : r.duration_quartiles) {
        auto it = g.duration_quartiles.find(type);
        const std::array<double, 3> gq =
            it != g.duration_quartiles.end() ? it->second
                                             : std::array<double, 3>{0, 0, 0};
        w.row({types.label(type), csv::fmt(gq[0]), csv::fmt(gq[1]),
               csv::fmt(gq[2]), csv::fmt(rq[0]), csv::fmt(rq[1]),
               csv::fmt(rq[2])});
        sum += std::abs(gq[1] - rq[1]);
        ++n;
      }
      emit("mean_abs_median_gap_min", "duration_quartiles", n ? sum / n : 0.0);
    }
    if (has(opt.slices, "activity_count_jsd")) {
      csv::Writer w(opt.out_dir + "/fig4e.csv",
                    {"n_activities", "generated", "reference"});
      std::map<std::string, std::pair<double, double>> aligned;
      for (std::size_t i = 0; i < g.activities_per_person.labels.size(); ++i)
        aligned[g.activities_per_person.labels[i]].first =
            g.activities_per_person.p[i];
      for (std::size_t i = 0; i < r.activities_per_person.labels.size(); ++i)
        aligned[r.activities_per_person.labels[i]].second =
            r.activities_per_person.p[i];
      for (const auto& [k, pq] : aligned)
        w.row({k, csv::fmt(pq.first), csv::fmt(pq.second)});
      emit("jsd", "activity_count_jsd",
           jsd(g.activities_per_person, r.activities_per_person));
    }
  } else {
    for (const char* s : {"timeslot_jsd", "activity_type_jsd",
                          "start_time_jsd", "duration_quartiles",
                          "activity_count_jsd"})
      if (has(opt.slices, s)) absent("jsd", s, "chains.csv missing");
  }

  const std::string gen_events = opt.generated_dir + "/events.csv";
  const std::string ref_events = opt.reference_dir + "/events.csv";
  if (fs::exists(gen_events) && fs::exists(ref_events)) {
    auto flatten = [](const std::vector<std::pair<long, std::vector<Event>>>&
                          all) {
      std::vector<Event> out;
      for (const auto& [hid, evs] : all)
        out.insert(out.end(), evs.begin(), evs.end());
      return out;
    };
    const auto gev = flatten(load_events(gen_events, types));
    const auto rev = flatten(load_events(ref_events, types));
    if (has(opt.slices, "participants_jsd")) {
      auto gd = participant_distribution(gev);
      auto rd = participant_distribution(rev);
      std::vector<std::string> labels;
      for (int i = 1; i <= kPMax; ++i) labels.push_back(std::to_string(i));
      csv::Writer w(opt.out_dir + "/fig5.csv",
                    {"activity_type", "participants", "generated", "reference"});
      double sum = 0.0;
      int n = 0;
      for (const auto& [type, rp] : rd) {
        auto it = gd.find(type);
        std::vector<double> gp =
            it != gd.end() ? it->second : std::vector<double>(kPMax, 0.0);
        for (int i = 0; i < kPMax; ++i)
          w.row({types.label(type), labels[i], csv::fmt(gp[i]),
                 csv::fmt(rp[i])});
        if (it != gd.end()) {
          sum += jsd(make_distribution(labels, gp),
                     make_distribution(labels, rp));
          ++n;
        }
      }
      emit("mean_jsd", "participants_jsd", n ? sum / n : 0.0);
    }
    if (has(opt.slices, "role_combinations")) {
      auto gc = role_combinations(gev);
      auto rc = role_combinations(rev);
      csv::Writer w(opt.out_dir + "/fig6.csv",
                    {"activity_type", "side", "combo", "count"});
      for (const auto& [type, combos] : gc)
        for (const auto& [combo, count] : combos)
          w.row({types.label(type), "generated", combo, csv::fmt(count)});
      for (const auto& [type, combos] : rc)
        for (const auto& [combo, count] : combos)
          w.row({types.label(type), "reference", combo, csv::fmt(count)});
      int agree = 0, n = 0;
      for (const auto& [type, combos] : rc) {
        auto it = gc.find(type);
        if (it == gc.end() || it->second.empty() || combos.empty()) continue;
        ++n;
        if (it->second.front().first == combos.front().first) ++agree;
      }
      emit("top_combo_agreement", "role_combinations",
           n ? static_cast<double>(agree) / n : 0.0);
    }
  } else {
    for (const char* s : {"participants_jsd", "role_combinations"})
      if (has(opt.slices, s)) absent("jsd", s, "events.csv missing");
  }

  if (has(opt.slices, "od_cosine")) {
    const std::string ga = opt.generated_dir + "/od.csv";
    const std::string rb = opt.reference_dir + "/od.csv";
    if (fs::exists(ga) && fs::exists(rb)) {
      auto A = load_od(ga);
      auto B = load_od(rb);
      csv::Writer w(opt.out_dir + "/fig7a.csv",
                    {"origin", "dest", "generated", "reference"});
      std::map<std::pair<long, long>, std::pair<double, double>> aligned;
      for (const auto& [k, v] : A) aligned[k].first = v;
      for (const auto& [k, v] : B) aligned[k].second = v;
      for (const auto& [k, pq] : aligned)
        w.row({csv::fmt(k.first), csv::fmt(k.second), csv::fmt(pq.first),
               csv::fmt(pq.second)});
      emit("cosine", "od_cosine", cosine_similarity(A, B));
    } else {
      absent("cosine", "od_cosine", "od.csv missing");
    }
  }

  auto series_slice = [&](const std::string& slice, const std::string& file,
                          const std::string& key_col,
                          const std::string& val_col,
                          const std::string& fig) {
    if (!has(opt.slices, slice)) return;
    const std::string ga = opt.generated_dir + "/" + file;
    const std::string rb = opt.reference_dir + "/" + file;
    if (!(fs::exists(ga) && fs::exists(rb))) {
      absent("series", slice, file + " missing");
      return;
    }
    std::vector<double> va, vb;
    align_series(csv::read_file(ga), csv::read_file(rb), key_col, val_col, va,
                 vb);
    csv::Writer w(opt.out_dir + "/" + fig + ".csv",
                  {key_col, "generated", "reference"});
    // Re-read keys in aligned (sorted) order for the plot file.
    {
      std::map<std::string, std::pair<double, double>> m;
      csv::Table a = csv::read_file(ga);
      csv::Table b = csv::read_file(rb);
      const int ka = a.require(key_col), vac = a.require(val_col);
      const int kb = b.require(key_col), vbc = b.require(val_col);
      for (const auto& r : a.rows)
        m[r[ka]].first += csv::to_double(r[vac], file);
      for (const auto& r : b.rows)
        m[r[kb]].second += csv::to_double(r[vbc], file);
      for (const auto& [k, pq] : m)
        w.row({k, csv::fmt(pq.first), csv::fmt(pq.second)});
    }
    double total_a = 0.0, total_b = 0.0;
    for (double v : va) total_a += v;
    for (double v : vb) total_b += v;
    if (total_a > 0.0 && total_b > 0.0) {
      std::vector<std::string> labels(va.size());
      for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = std::to_string(i);
      emit("jsd", slice, jsd(make_distribution(labels, va),
                             make_distribution(labels, vb)));
    }
    try {
      emit("mape", slice, mape(va, vb));
    } catch (const DataError&) {
      absent("mape", slice, "all observations near zero");
    }
  };

  series_slice("vmt", "vmt.csv", "interval", "vmt", "fig7b");
  series_slice("corridor_volume", "corridor.csv", "interval", "volume",
               "fig8c");
  series_slice("corridor_speed", "corridor.csv", "interval", "speed", "fig8d");

  nlohmann::json report = nlohmann::json::array();
  for (const auto& e : entries)
    report.push_back({{"metric", e.metric},
                      {"slice", e.slice},
                      {"value", e.value},
                      {"available", e.available},
                      {"note", e.note}});
  std::ofstream out(opt.out_dir + "/report.json");
  out << report.dump(2) << "\n";
  return entries;
}

}  // namespace tdg
