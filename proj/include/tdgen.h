/* C interface to the travel demand generation pipeline. All entry points
 * return a status code; details of the last failure are kept per context. */
#ifndef TDGEN_H
#define TDGEN_H

#ifdef __cplusplus
extern "C" {
#endif

#define TDG_OK 0
#define TDG_ERR_UNKNOWN 1
#define TDG_ERR_CONFIG 2
#define TDG_ERR_DATA 3
#define TDG_ERR_NUMERIC 4

typedef struct tdg_context tdg_context;

const char* tdg_version(void);

tdg_context* tdg_context_create(void);
void tdg_context_destroy(tdg_context* ctx);

/* Message of the most recent failure on this context; empty string when the
 * last call succeeded. Owned by the context. */
const char* tdg_last_error(const tdg_context* ctx);

/* Load the pipeline configuration from a JSON document or file. */
int tdg_load_config(tdg_context* ctx, const char* config_json);
int tdg_load_config_file(tdg_context* ctx, const char* path);

/* Override one config value; pointer is a JSON pointer ("/out_dir",
 * "/seeds/train"), value_json a JSON literal. */
int tdg_set_override(tdg_context* ctx, const char* pointer,
                     const char* value_json);

/* Stage names: gen-corpus, synth-pop, train, generate, events, assign,
 * simulate, validate. */
int tdg_run_stage(tdg_context* ctx, const char* stage);

/* Run all applicable stages in order; resume != 0 skips stages whose
 * outputs exist. */
int tdg_run_pipeline(tdg_context* ctx, int resume);

#ifdef __cplusplus
}
#endif

#endif /* TDGEN_H */
