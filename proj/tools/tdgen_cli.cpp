// Command-line front end; all work happens behind the C API.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdgen.h"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  long long rng_seed = -1;
  bool verbose = false;
  bool resume = false;
};

int fail(tdg_context* ctx, int code) {
  std::fprintf(stderr, "error: %s\n", tdg_last_error(ctx));
  tdg_context_destroy(ctx);
  return code;
}

int run(const std::string& command, const Options& opt) {
  tdg_context* ctx = tdg_context_create();
  int rc = tdg_load_config_file(ctx, opt.config_path.c_str());
  if (rc != TDG_OK) return fail(ctx, rc);

  if (!opt.out_dir.empty()) {
    rc = tdg_set_override(ctx, "/out_dir",
                          ("\"" + opt.out_dir + "\"").c_str());
    if (rc != TDG_OK) return fail(ctx, rc);
  }
  if (opt.verbose) {
    rc = tdg_set_override(ctx, "/train/verbose", "true");
    if (rc != TDG_OK) return fail(ctx, rc);
  }
  if (opt.rng_seed >= 0) {
    const std::string value = std::to_string(opt.rng_seed);
    static const char* kStages[] = {"gen-corpus", "synth-pop", "train",
                                    "generate",   "events",    "assign",
                                    "simulate",   "validate"};
    for (const char* stage : kStages) {
      if (command != "pipeline" && command != stage) continue;
      rc = tdg_set_override(ctx, ("/seeds/" + std::string(stage)).c_str(),
                            value.c_str());
      if (rc != TDG_OK) return fail(ctx, rc);
    }
  }

  if (command == "pipeline")
    rc = tdg_run_pipeline(ctx, opt.resume ? 1 : 0);
  else
    rc = tdg_run_stage(ctx, command.c_str());
  if (rc != TDG_OK) return fail(ctx, rc);
  if (opt.verbose) std::fprintf(stderr, "%s: done\n", command.c_str());
  tdg_context_destroy(ctx);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"travel demand generation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tdg_version());

  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth-pop", "synthesize the household population"},
      {"gen-corpus", "generate the synthetic ground-truth corpus"},
      {"train", "fit the seed-chain model and the schedule network"},
      {"generate", "generate household schedules"},
      {"events", "build the coordinated event table"},
      {"assign", "assign activity locations"},
      {"simulate", "run the traffic simulation"},
      {"validate", "compare generated artifacts against a reference"},
      {"pipeline", "run every applicable stage in order"}};

  std::vector<CLI::App*> subs;
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", opt.config_path, "pipeline config JSON")
        ->required();
    sub->add_option("--out", opt.out_dir, "override the artifact directory");
    sub->add_option("--rng-seed", opt.rng_seed, "override the stage seed(s)");
    sub->add_flag("--verbose", opt.verbose, "progress output on stderr");
    if (name == "pipeline")
      sub->add_flag("--resume", opt.resume,
                    "skip stages whose outputs already exist");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage problems are config errors
  }
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) return run(commands[i].first, opt);
  return 2;
}
