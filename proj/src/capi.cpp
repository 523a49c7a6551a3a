#include "earid/earid.h"

#include <cstring>
#include <fstream>
#include <string>

#include "earid/config.hpp"
#include "earid/dataio.hpp"
#include "earid/error.hpp"
#include "earid/model.hpp"
#include "earid/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

earid_status to_status(const earid::Error& e) {
  return static_cast<earid_status>(static_cast<int>(e.status()));
}

template <typename Fn>
earid_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EARID_OK;
  } catch (const earid::Error& e) {
    g_last_error = e.what();
    return to_status(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EARID_ERROR;
  } catch (...) {
    g_last_error = "unknown failure";
    return EARID_ERROR;
  }
}

earid_status fail_null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return EARID_INVALID_CONFIG;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

/* Keeps the raw source document so overrides re-run the full parse: a
 * master-seed override then re-derives stage seeds that the file did not
 * pin explicitly. */
struct earid_config {
  nlohmann::json source;
  earid::pipeline::PipelineConfig cfg;
};

struct earid_recording {
  earid::dataio::EegRecording rec;
};

struct earid_model {
  earid::model::Mlp mlp;
  earid::features::Standardizer standardizer;
};

extern "C" {

const char* earid_version(void) { return "0.1.0"; }

const char* earid_last_error(void) { return g_last_error.c_str(); }

earid_status earid_config_default(earid_config** out) {
  if (!out) return fail_null_arg("out");
  return guarded([&] {
    *out = new earid_config{nlohmann::json::object(),
                            earid::pipeline::PipelineConfig::defaults()};
  });
}

earid_status earid_config_load(const char* path, earid_config** out) {
  if (!path || !out) return fail_null_arg("path/out");
  return guarded([&] {
    std::ifstream is(path);
    if (!is) throw earid::config_error(std::string("cannot open config: ") + path);
    nlohmann::json doc;
    try {
      is >> doc;
    } catch (const std::exception& e) {
      throw earid::config_error(std::string("config parse error in ") + path +
                                ": " + e.what());
    }
    *out = new earid_config{doc,
                            earid::pipeline::PipelineConfig::from_json(doc)};
  });
}

earid_status earid_config_parse(const char* json_text, earid_config** out) {
  if (!json_text || !out) return fail_null_arg("json_text/out");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
      throw earid::config_error(std::string("config parse error: ") + e.what());
    }
    *out = new earid_config{doc,
                            earid::pipeline::PipelineConfig::from_json(doc)};
  });
}

earid_status earid_config_set(earid_config* cfg, const char* dotted_key,
                              const char* json_value) {
  if (!cfg || !dotted_key || !json_value)
    return fail_null_arg("cfg/dotted_key/json_value");
  return guarded([&] {
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(json_value);
    } catch (const std::exception&) {
      throw earid::config_error(std::string("config_set: value for '") +
                                dotted_key + "' is not valid JSON");
    }
    nlohmann::json doc = cfg->source;
    nlohmann::json* node = &doc;
    std::string key(dotted_key);
    std::size_t pos;
    while ((pos = key.find('.')) != std::string::npos) {
      node = &(*node)[key.substr(0, pos)];  // created as needed
      key = key.substr(pos + 1);
    }
    (*node)[key] = value;
    // full re-parse validates the key and re-derives dependent seeds
    cfg->cfg = earid::pipeline::PipelineConfig::from_json(doc);
    cfg->source = std::move(doc);
  });
}

earid_status earid_config_dump(const earid_config* cfg, char** json_out) {
  if (!cfg || !json_out) return fail_null_arg("cfg/json_out");
  return guarded([&] { *json_out = dup_string(cfg->cfg.to_json().dump(2)); });
}

void earid_config_free(earid_config* cfg) { delete cfg; }

earid_status earid_recording_load(const char* path, double fs_hint,
                                  earid_recording** out) {
  if (!path || !out) return fail_null_arg("path/out");
  return guarded([&] {
    earid::pipeline::PipelineConfig cfg =
        earid::pipeline::PipelineConfig::defaults();
    cfg.io.csv_fs = fs_hint;
    *out = new earid_recording{
        earid::pipeline::load_input_recording(cfg, path)};
  });
}

earid_status earid_recording_save(const earid_recording* rec,
                                  const char* path) {
  if (!rec || !path) return fail_null_arg("rec/path");
  return guarded([&] { earid::dataio::save_recording(rec->rec, path); });
}

int32_t earid_recording_channels(const earid_recording* rec) {
  return rec ? static_cast<int32_t>(rec->rec.n_channels()) : -1;
}

int64_t earid_recording_samples(const earid_recording* rec) {
  return rec ? static_cast<int64_t>(rec->rec.n_samples) : -1;
}

double earid_recording_sample_rate(const earid_recording* rec) {
  return rec ? rec->rec.sampling_rate_hz : 0.0;
}

int32_t earid_recording_subject(const earid_recording* rec) {
  return rec ? rec->rec.subject_id : -1;
}

const char* earid_recording_label(const earid_recording* rec,
                                  int32_t channel) {
  if (!rec || channel < 0 ||
      static_cast<std::size_t>(channel) >= rec->rec.n_channels())
    return nullptr;
  return rec->rec.channel_labels[static_cast<std::size_t>(channel)].c_str();
}

earid_status earid_recording_copy_channel(const earid_recording* rec,
                                          int32_t channel, float* out,
                                          int64_t out_len) {
  if (!rec || !out) return fail_null_arg("rec/out");
  return guarded([&] {
    if (channel < 0 ||
        static_cast<std::size_t>(channel) >= rec->rec.n_channels())
      throw earid::data_error("channel index out of range");
    if (out_len < static_cast<int64_t>(rec->rec.n_samples))
      throw earid::data_error("output buffer too small");
    auto src = rec->rec.channel(static_cast<std::size_t>(channel));
    std::memcpy(out, src.data(), src.size() * sizeof(float));
  });
}

void earid_recording_free(earid_recording* rec) { delete rec; }

earid_status earid_model_load(const char* model_path,
                              const char* standardizer_path,
                              earid_model** out) {
  if (!model_path || !standardizer_path || !out)
    return fail_null_arg("model_path/standardizer_path/out");
  return guarded([&] {
    auto* handle = new earid_model{
        earid::model::load_model(model_path),
        earid::features::load_standardizer(standardizer_path)};
    if (handle->standardizer.mean.size() !=
        static_cast<std::size_t>(handle->mlp.cfg.input_dim)) {
      delete handle;
      throw earid::data_error(
          "standardizer dimension does not match the model input");
    }
    *out = handle;
  });
}

int32_t earid_model_input_dim(const earid_model* m) {
  return m ? m->mlp.cfg.input_dim : -1;
}

int32_t earid_model_num_classes(const earid_model* m) {
  return m ? m->mlp.cfg.n_classes : -1;
}

earid_status earid_model_predict(const earid_model* m, const double* features,
                                 int32_t n_features, int32_t* class_out,
                                 double* probs_out) {
  if (!m || !features || !class_out)
    return fail_null_arg("model/features/class_out");
  return guarded([&] {
    if (n_features != m->mlp.cfg.input_dim)
      throw earid::data_error("predict: wrong feature dimension");
    earid::features::FeatureVector fv;
    fv.values.assign(features, features + n_features);
    fv.soft_label.assign(static_cast<std::size_t>(m->mlp.cfg.n_classes), 0.0);
    fv.soft_label[0] = 1.0;  // placeholder label; prediction ignores it
    const auto standardized =
        earid::features::apply_standardizer(m->standardizer, fv);
    const auto [cls, probs] = earid::model::predict(m->mlp, standardized);
    *class_out = cls;
    if (probs_out)
      std::memcpy(probs_out, probs.data(), probs.size() * sizeof(double));
  });
}

void earid_model_free(earid_model* m) { delete m; }

earid_status earid_cmd_synth(const earid_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) return fail_null_arg("cfg/out_dir");
  return guarded([&] { earid::pipeline::cmd_synth(cfg->cfg, out_dir); });
}

earid_status earid_cmd_preprocess(const earid_config* cfg,
                                  const char* input_path,
                                  const char* out_dir) {
  if (!cfg || !input_path || !out_dir)
    return fail_null_arg("cfg/input_path/out_dir");
  return guarded(
      [&] { earid::pipeline::cmd_preprocess(cfg->cfg, input_path, out_dir); });
}

earid_status earid_cmd_extract(const earid_config* cfg, const char* input_path,
                               const char* out_csv) {
  if (!cfg || !input_path || !out_csv)
    return fail_null_arg("cfg/input_path/out_csv");
  return guarded(
      [&] { earid::pipeline::cmd_extract(cfg->cfg, input_path, out_csv); });
}

earid_status earid_cmd_augment(const earid_config* cfg, const char* input_path,
                               const char* out_dir) {
  if (!cfg || !input_path || !out_dir)
    return fail_null_arg("cfg/input_path/out_dir");
  return guarded(
      [&] { earid::pipeline::cmd_augment(cfg->cfg, input_path, out_dir); });
}

earid_status earid_cmd_train(const earid_config* cfg, const char* train_csv,
                             const char* val_csv, const char* out_dir) {
  if (!cfg || !train_csv || !val_csv || !out_dir)
    return fail_null_arg("cfg/train_csv/val_csv/out_dir");
  return guarded([&] {
    earid::pipeline::cmd_train(cfg->cfg, train_csv, val_csv, out_dir);
  });
}

earid_status earid_cmd_eval(const earid_config* cfg, const char* model_path,
                            const char* standardizer_path,
                            const char* test_csv, const char* report_path) {
  if (!cfg || !model_path || !standardizer_path || !test_csv)
    return fail_null_arg("cfg/model_path/standardizer_path/test_csv");
  return guarded([&] {
    earid::pipeline::cmd_eval(cfg->cfg, model_path, standardizer_path,
                              test_csv, report_path ? report_path : "");
  });
}

earid_status earid_cmd_pipeline(const earid_config* cfg,
                                const char* input_path, const char* out_dir,
                                char** report_json_out) {
  if (!cfg || !input_path || !out_dir)
    return fail_null_arg("cfg/input_path/out_dir");
  return guarded([&] {
    const auto result =
        earid::pipeline::cmd_pipeline(cfg->cfg, input_path, out_dir);
    if (report_json_out) *report_json_out = dup_string(result.report.to_json());
  });
}

earid_status earid_cmd_ablate(const earid_config* cfg, const char* input_path,
                              const char* out_csv) {
  if (!cfg || !input_path || !out_csv)
    return fail_null_arg("cfg/input_path/out_csv");
  return guarded(
      [&] { earid::pipeline::cmd_ablate(cfg->cfg, input_path, out_csv); });
}

void earid_string_free(char* s) { delete[] s; }

}  // extern "C"
