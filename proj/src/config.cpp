#include "earid/config.hpp"

#include <fstream>
#include <set>

#include "earid/error.hpp"
#include "earid/rng.hpp"

namespace earid::pipeline {

namespace {

void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!obj.is_object())
    throw config_error("config: " + context + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key))
      throw config_error("config: unknown key '" + key + "' in " + context);
}

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const std::exception&) {
      throw config_error(std::string("config: bad value for '") + key + "'");
    }
  }
}

}  // namespace

PipelineConfig PipelineConfig::defaults(std::uint64_t master_seed) {
  PipelineConfig cfg;
  cfg.seed = master_seed;
  cfg.augment.rng_seed = derive_seed(master_seed, "augment");
  cfg.model.rng_seed = derive_seed(master_seed, "model");
  cfg.split.rng_seed = derive_seed(master_seed, "split");
  return cfg;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
  check_keys(doc,
             {"seed", "threads", "verbose", "synth", "io", "preprocess",
              "features", "augment", "model", "split", "ablation"},
             "top level");

  std::uint64_t master = 42;
  if (doc.contains("seed")) master = doc.at("seed").get<std::uint64_t>();
  PipelineConfig cfg = defaults(master);
  read_if(doc, "threads", cfg.threads);
  read_if(doc, "verbose", cfg.verbose);

  if (doc.contains("synth")) {
    const auto& j = doc.at("synth");
    check_keys(j, {"n_subjects", "duration_s", "sampling_rate_hz"}, "synth");
    read_if(j, "n_subjects", cfg.synth.n_subjects);
    read_if(j, "duration_s", cfg.synth.duration_s);
    read_if(j, "sampling_rate_hz", cfg.synth.sampling_rate_hz);
  }

  if (doc.contains("io")) {
    const auto& j = doc.at("io");
    check_keys(j, {"csv_fs", "skip_filter"}, "io");
    read_if(j, "csv_fs", cfg.io.csv_fs);
    read_if(j, "skip_filter", cfg.io.skip_filter);
  }

  if (doc.contains("preprocess")) {
    const auto& j = doc.at("preprocess");
    check_keys(j, {"channels", "bandpass", "notch", "window_len", "hop"},
               "preprocess");
    read_if(j, "channels", cfg.preprocess.channels);
    if (j.contains("bandpass")) {
      const auto& b = j.at("bandpass");
      check_keys(b, {"low_hz", "high_hz", "order", "zero_phase"},
                 "preprocess.bandpass");
      read_if(b, "low_hz", cfg.preprocess.bandpass.low_hz);
      read_if(b, "high_hz", cfg.preprocess.bandpass.high_hz);
      read_if(b, "order", cfg.preprocess.bandpass.order);
      read_if(b, "zero_phase", cfg.preprocess.bandpass.zero_phase);
    }
    if (j.contains("notch")) {
      const auto& nj = j.at("notch");
      check_keys(nj, {"center_hz", "q_factor", "zero_phase"},
                 "preprocess.notch");
      read_if(nj, "center_hz", cfg.preprocess.notch.center_hz);
      read_if(nj, "q_factor", cfg.preprocess.notch.q_factor);
      read_if(nj, "zero_phase", cfg.preprocess.notch.zero_phase);
    }
    read_if(j, "window_len", cfg.preprocess.window_len);
    read_if(j, "hop", cfg.preprocess.hop);
  }

  if (doc.contains("features")) {
    const auto& j = doc.at("features");
    check_keys(j, {"welch", "psd_keep", "ar_order"}, "features");
    if (j.contains("welch")) {
      const auto& w = j.at("welch");
      check_keys(w, {"nperseg", "noverlap"}, "features.welch");
      read_if(w, "nperseg", cfg.features.welch.nperseg);
      read_if(w, "noverlap", cfg.features.welch.noverlap);
    }
    read_if(j, "psd_keep", cfg.features.psd_keep);
    read_if(j, "ar_order", cfg.features.ar_order);
  }

  if (doc.contains("augment")) {
    const auto& j = doc.at("augment");
    check_keys(j,
               {"noise_rel_std", "max_shift_samples", "mixup_alpha",
                "target_multiplier", "rng_seed"},
               "augment");
    read_if(j, "noise_rel_std", cfg.augment.noise_rel_std);
    read_if(j, "max_shift_samples", cfg.augment.max_shift_samples);
    read_if(j, "mixup_alpha", cfg.augment.mixup_alpha);
    read_if(j, "target_multiplier", cfg.augment.target_multiplier);
    read_if(j, "rng_seed", cfg.augment.rng_seed);
  }

  if (doc.contains("model")) {
    const auto& j = doc.at("model");
    check_keys(j,
               {"input_dim", "hidden_dims", "n_classes", "dropout_rate",
                "l2_lambda", "learning_rate", "batch_size", "max_epochs",
                "early_stop_patience", "optimizer", "rng_seed"},
               "model");
    read_if(j, "input_dim", cfg.model.input_dim);
    read_if(j, "hidden_dims", cfg.model.hidden_dims);
    read_if(j, "n_classes", cfg.model.n_classes);
    read_if(j, "dropout_rate", cfg.model.dropout_rate);
    read_if(j, "l2_lambda", cfg.model.l2_lambda);
    read_if(j, "learning_rate", cfg.model.learning_rate);
    read_if(j, "batch_size", cfg.model.batch_size);
    read_if(j, "max_epochs", cfg.model.max_epochs);
    read_if(j, "early_stop_patience", cfg.model.early_stop_patience);
    if (j.contains("optimizer"))
      cfg.model.optimizer =
          model::optimizer_from_string(j.at("optimizer").get<std::string>());
    read_if(j, "rng_seed", cfg.model.rng_seed);
  }

  if (doc.contains("split")) {
    const auto& j = doc.at("split");
    check_keys(j, {"ratios", "strategy", "rng_seed", "allow_empty"}, "split");
    if (j.contains("ratios")) {
      const auto ratios = j.at("ratios").get<std::vector<double>>();
      if (ratios.size() != 3)
        throw config_error("config: split.ratios must have 3 entries");
      cfg.split.ratios = {ratios[0], ratios[1], ratios[2]};
    }
    if (j.contains("strategy"))
      cfg.split.strategy =
          eval::strategy_from_string(j.at("strategy").get<std::string>());
    read_if(j, "rng_seed", cfg.split.rng_seed);
    read_if(j, "allow_empty", cfg.split.allow_empty);
  }

  if (doc.contains("ablation")) {
    const auto& j = doc.at("ablation");
    check_keys(j, {"hidden_dims", "split_strategies"}, "ablation");
    read_if(j, "hidden_dims", cfg.ablation.hidden_dims);
    if (j.contains("split_strategies")) {
      cfg.ablation.split_strategies =
          j.at("split_strategies").get<std::vector<std::string>>();
      for (const auto& s : cfg.ablation.split_strategies)
        eval::strategy_from_string(s);  // validate names
    }
  }

  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config: " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const std::exception& e) {
    throw config_error("config parse error in " + path + ": " + e.what());
  }
  return from_json(doc);
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["threads"] = threads;
  doc["verbose"] = verbose;
  doc["synth"] = {{"n_subjects", synth.n_subjects},
                  {"duration_s", synth.duration_s},
                  {"sampling_rate_hz", synth.sampling_rate_hz}};
  doc["io"] = {{"csv_fs", io.csv_fs}, {"skip_filter", io.skip_filter}};
  doc["preprocess"] = {
      {"channels", preprocess.channels},
      {"bandpass",
       {{"low_hz", preprocess.bandpass.low_hz},
        {"high_hz", preprocess.bandpass.high_hz},
        {"order", preprocess.bandpass.order},
        {"zero_phase", preprocess.bandpass.zero_phase}}},
      {"notch",
       {{"center_hz", preprocess.notch.center_hz},
        {"q_factor", preprocess.notch.q_factor},
        {"zero_phase", preprocess.notch.zero_phase}}},
      {"window_len", preprocess.window_len},
      {"hop", preprocess.hop}};
  doc["features"] = {{"welch",
                      {{"nperseg", features.welch.nperseg},
                       {"noverlap", features.welch.noverlap}}},
                     {"psd_keep", features.psd_keep},
                     {"ar_order", features.ar_order}};
  doc["augment"] = {{"noise_rel_std", augment.noise_rel_std},
                    {"max_shift_samples", augment.max_shift_samples},
                    {"mixup_alpha", augment.mixup_alpha},
                    {"target_multiplier", augment.target_multiplier},
                    {"rng_seed", augment.rng_seed}};
  doc["model"] = {{"input_dim", model.input_dim},
                  {"hidden_dims", model.hidden_dims},
                  {"n_classes", model.n_classes},
                  {"dropout_rate", model.dropout_rate},
                  {"l2_lambda", model.l2_lambda},
                  {"learning_rate", model.learning_rate},
                  {"batch_size", model.batch_size},
                  {"max_epochs", model.max_epochs},
                  {"early_stop_patience", model.early_stop_patience},
                  {"optimizer", model::optimizer_to_string(model.optimizer)},
                  {"rng_seed", model.rng_seed}};
  doc["split"] = {{"ratios", std::vector<double>{split.ratios[0],
                                                 split.ratios[1],
                                                 split.ratios[2]}},
                  {"strategy", eval::strategy_to_string(split.strategy)},
                  {"rng_seed", split.rng_seed},
                  {"allow_empty", split.allow_empty}};
  doc["ablation"] = {{"hidden_dims", ablation.hidden_dims},
                     {"split_strategies", ablation.split_strategies}};
  return doc;
}

void PipelineConfig::validate() const {
  if (synth.n_subjects < 1)
    throw config_error("config: synth.n_subjects must be >= 1");
  if (synth.duration_s <= 0.0)
    throw config_error("config: synth.duration_s must be positive");
  if (synth.sampling_rate_hz <= 0.0)
    throw config_error("config: synth.sampling_rate_hz must be positive");

  if (preprocess.channels.empty())
    throw config_error("config: preprocess.channels must be non-empty");
  if (preprocess.window_len < 1 || preprocess.hop < 1)
    throw config_error("config: window_len and hop must be >= 1");
  if (!(preprocess.bandpass.low_hz > 0.0 &&
        preprocess.bandpass.low_hz < preprocess.bandpass.high_hz))
    throw config_error("config: bandpass needs 0 < low_hz < high_hz");
  if (preprocess.bandpass.order < 2 || preprocess.bandpass.order % 2 != 0)
    throw config_error("config: bandpass.order must be a positive even integer");
  if (preprocess.notch.center_hz <= 0.0 || preprocess.notch.q_factor <= 0.0)
    throw config_error("config: notch needs positive center_hz and q_factor");

  if (features.welch.nperseg < 2)
    throw config_error("config: welch.nperseg must be >= 2");
  if (features.welch.noverlap >= features.welch.nperseg)
    throw config_error("config: welch.noverlap must be < nperseg");
  if (features.welch.nperseg > preprocess.window_len)
    throw config_error("config: welch.nperseg must be <= window_len");
  if (features.psd_keep < 1)
    throw config_error("config: features.psd_keep must be >= 1");
  if (features.ar_order < 1)
    throw config_error("config: features.ar_order must be >= 1");
  if (preprocess.window_len <= 10 * features.ar_order)
    throw config_error("config: window_len must exceed 10 * ar_order");

  if (augment.noise_rel_std < 0.0)
    throw config_error("config: augment.noise_rel_std must be >= 0");
  if (augment.max_shift_samples >= preprocess.window_len)
    throw config_error("config: augment.max_shift_samples must be < window_len");
  if (!(augment.mixup_alpha > 0.0))
    throw config_error("config: augment.mixup_alpha must be positive");
  if (!(augment.target_multiplier > 0.0))
    throw config_error("config: augment.target_multiplier must be positive");

  model.validate();
  if (static_cast<std::size_t>(model.input_dim) != derived_input_dim())
    throw config_error(
        "config: model.input_dim " + std::to_string(model.input_dim) +
        " != channels * (psd_keep + ar_order + 4) = " +
        std::to_string(derived_input_dim()));

  split.validate();

  if (ablation.hidden_dims.empty())
    throw config_error("config: ablation.hidden_dims must be non-empty");
  for (const auto& dims : ablation.hidden_dims) {
    if (dims.empty())
      throw config_error("config: ablation row with no hidden layers");
    for (int d : dims)
      if (d < 1) throw config_error("config: ablation hidden dim must be >= 1");
  }
}

}  // namespace earid::pipeline
