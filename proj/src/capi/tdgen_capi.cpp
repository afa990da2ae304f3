#include "tdgen.h"

#include <optional>
#include <string>

#include "core/errors.hpp"
#include "core/pipeline.hpp"

struct tdg_context {
  std::optional<tdg::PipelineConfig> config;
  std::string last_error;
};

namespace {

template <typename F>
int guarded(tdg_context* ctx, F&& fn) {
  if (!ctx) return TDG_ERR_CONFIG;
  ctx->last_error.clear();
  try {
    fn();
    return TDG_OK;
  } catch (const tdg::ConfigError& e) {
    ctx->last_error = e.what();
    return TDG_ERR_CONFIG;
  } catch (const tdg::DataError& e) {
    ctx->last_error = e.what();
    return TDG_ERR_DATA;
  } catch (const tdg::NumericError& e) {
    ctx->last_error = e.what();
    return TDG_ERR_NUMERIC;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return TDG_ERR_UNKNOWN;
  }
}

tdg::PipelineConfig& need_config(tdg_context* ctx) {
  if (!ctx->config) throw tdg::ConfigError("no configuration loaded");
  return *ctx->config;
}

}  // namespace

extern "C" {

const char* tdg_version(void) { return "0.1.0"; }

tdg_context* tdg_context_create(void) { return new tdg_context(); }

void tdg_context_destroy(tdg_context* ctx) { delete ctx; }

const char* tdg_last_error(const tdg_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

int tdg_load_config(tdg_context* ctx, const char* config_json) {
  return guarded(ctx, [&] {
    if (!config_json) throw tdg::ConfigError("null config document");
    ctx->config = tdg::PipelineConfig::from_json(config_json);
  });
}

int tdg_load_config_file(tdg_context* ctx, const char* path) {
  return guarded(ctx, [&] {
    if (!path) throw tdg::ConfigError("null config path");
    ctx->config = tdg::PipelineConfig::load(path);
  });
}

int tdg_set_override(tdg_context* ctx, const char* pointer,
                     const char* value_json) {
  return guarded(ctx, [&] {
    if (!pointer || !value_json)
      throw tdg::ConfigError("null override argument");
    auto& cfg = need_config(ctx);
    try {
      cfg.raw[nlohmann::json::json_pointer(pointer)] =
          nlohmann::json::parse(value_json);
    } catch (const nlohmann::json::exception& e) {
      throw tdg::ConfigError(std::string("override '") + pointer +
                             "': " + e.what());
    }
    // Re-derive cached fields.
    cfg = tdg::PipelineConfig::from_json(cfg.raw.dump());
  });
}

int tdg_run_stage(tdg_context* ctx, const char* stage) {
  return guarded(ctx, [&] {
    if (!stage) throw tdg::ConfigError("null stage name");
    tdg::run_stage(need_config(ctx), stage);
  });
}

int tdg_run_pipeline(tdg_context* ctx, int resume) {
  return guarded(ctx,
                 [&] { tdg::run_pipeline(need_config(ctx), resume != 0); });
}

}  // extern "C"
