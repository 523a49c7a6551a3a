/*
 * earid C API: ear-EEG biometric identification toolkit.
 *
 * All functions return earid_status (0 on success); the codes double as
 * CLI exit codes. On failure, earid_last_error() returns a thread-local
 * message describing what went wrong and in which stage. Objects are
 * opaque handles released with their matching _free function.
 */
#ifndef EARID_H
#define EARID_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum earid_status {
  EARID_OK = 0,
  EARID_ERROR = 1,          /* unclassified failure */
  EARID_INVALID_CONFIG = 2, /* config/validation problem */
  EARID_DATA_ERROR = 3,     /* bad or missing input data */
  EARID_NUMERIC_ERROR = 4   /* non-finite values, unstable designs */
} earid_status;

const char* earid_version(void);

/* Message for the most recent failure on this thread; empty if none. */
const char* earid_last_error(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct earid_config earid_config;

earid_status earid_config_default(earid_config** out);
earid_status earid_config_load(const char* path, earid_config** out);
earid_status earid_config_parse(const char* json_text, earid_config** out);
/* Replace one value, e.g. ("seed", "7") or ("split.strategy",
 * "\"block_contiguous\""). The value is parsed as JSON. */
earid_status earid_config_set(earid_config* cfg, const char* dotted_key,
                              const char* json_value);
/* Serialized config; free with earid_string_free. */
earid_status earid_config_dump(const earid_config* cfg, char** json_out);
void earid_config_free(earid_config* cfg);

/* ---- recordings -------------------------------------------------------- */

typedef struct earid_recording earid_recording;

/* Loads .earg containers directly; CSV needs fs_hint > 0 (the subject id
 * of a CSV comes from trailing digits in the file stem). */
earid_status earid_recording_load(const char* path, double fs_hint,
                                  earid_recording** out);
earid_status earid_recording_save(const earid_recording* rec,
                                  const char* path);
int32_t earid_recording_channels(const earid_recording* rec);
int64_t earid_recording_samples(const earid_recording* rec);
double earid_recording_sample_rate(const earid_recording* rec);
int32_t earid_recording_subject(const earid_recording* rec);
const char* earid_recording_label(const earid_recording* rec, int32_t channel);
/* Copies one channel into out (out_len >= sample count required). */
earid_status earid_recording_copy_channel(const earid_recording* rec,
                                          int32_t channel, float* out,
                                          int64_t out_len);
void earid_recording_free(earid_recording* rec);

/* ---- trained models ---------------------------------------------------- */

typedef struct earid_model earid_model;

/* model_path + standardizer_path produced by the train/pipeline commands. */
earid_status earid_model_load(const char* model_path,
                              const char* standardizer_path,
                              earid_model** out);
int32_t earid_model_input_dim(const earid_model* m);
int32_t earid_model_num_classes(const earid_model* m);
/* Predicts from one raw (unstandardized) feature vector. probs_out may be
 * NULL; otherwise it receives num_classes probabilities. */
earid_status earid_model_predict(const earid_model* m, const double* features,
                                 int32_t n_features, int32_t* class_out,
                                 double* probs_out);
void earid_model_free(earid_model* m);

/* ---- pipeline commands (mirror the CLI subcommands) -------------------- */

/* Synthesizes the configured cohort into out_dir (.earg files + manifest). */
earid_status earid_cmd_synth(const earid_config* cfg, const char* out_dir);

/* Filters recordings from input_path into out_dir (*_filtered.earg). */
earid_status earid_cmd_preprocess(const earid_config* cfg,
                                  const char* input_path, const char* out_dir);

/* Recordings -> feature CSV (no split, no augmentation). */
earid_status earid_cmd_extract(const earid_config* cfg, const char* input_path,
                               const char* out_csv);

/* Recordings -> split -> augmented train features; writes
 * features_{train,val,test}.csv and split.json into out_dir. */
earid_status earid_cmd_augment(const earid_config* cfg, const char* input_path,
                               const char* out_dir);

/* Feature CSVs -> model.json, standardizer.json, history.csv in out_dir. */
earid_status earid_cmd_train(const earid_config* cfg, const char* train_csv,
                             const char* val_csv, const char* out_dir);

/* Scores model against untouched test features; writes report JSON. */
earid_status earid_cmd_eval(const earid_config* cfg, const char* model_path,
                            const char* standardizer_path,
                            const char* test_csv, const char* report_path);

/* Full pipeline; writes model/standardizer/report/history/audit into
 * out_dir. report_json_out (optional) receives the report document; free
 * with earid_string_free. */
earid_status earid_cmd_pipeline(const earid_config* cfg,
                                const char* input_path, const char* out_dir,
                                char** report_json_out);

/* Architecture comparison on a shared split; writes the ablation CSV(s)
 * and ablation_comparison.csv next to out_csv. */
earid_status earid_cmd_ablate(const earid_config* cfg, const char* input_path,
                              const char* out_csv);

void earid_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* EARID_H */
