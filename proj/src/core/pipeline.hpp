// Stage orchestration: a declarative JSON config drives the eight pipeline
// stages, each persisting plain-CSV artifacts plus a metadata sidecar so
// any stage can be re-run from the artifacts alone.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/schedule.hpp"

namespace tdg {

struct PipelineConfig {
  std::string out_dir;
  nlohmann::json raw;

  static PipelineConfig load(const std::string& path);
  static PipelineConfig from_json(const std::string& text);

  // Stage seed; throws ConfigError when absent (seeds are never implicit).
  std::uint64_t seed(const std::string& stage) const;
  std::uint64_t config_hash() const;
  std::vector<std::string> meta_lines(const std::string& stage) const;
};

// Activity taxonomy with the config's optional code renames applied.
ActivityTypeTable types_from_config(const PipelineConfig& cfg);

// Known stages, in pipeline order: gen-corpus, synth-pop, train, generate,
// events, assign, simulate, validate.
const std::vector<std::string>& pipeline_stages();

// Runs one stage, reading inputs from the config and the artifact
// directory. Throws the stage's error with its name prefixed.
void run_stage(const PipelineConfig& cfg, const std::string& stage);

// Runs every applicable stage in order; with resume, stages whose outputs
// already exist are skipped. Returns the stages that actually ran.
std::vector<std::string> run_pipeline(const PipelineConfig& cfg, bool resume);

}  // namespace tdg
