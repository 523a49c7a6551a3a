#include "earid/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "earid/augment.hpp"
#include "earid/error.hpp"
#include "earid/parallel.hpp"
#include "earid/rng.hpp"

namespace earid::pipeline {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.status(), std::string("[") + stage + "] " + e.what());
  } catch (const std::exception& e) {
    throw Error(Status::error, std::string("[") + stage + "] " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw data_error("cannot open for writing: " + path);
  os << text;
  os.flush();
  if (!os) throw data_error("write failed: " + path);
}

int subject_from_stem(const std::string& stem) {
  // trailing digit run, e.g. subject_03 -> 3
  std::size_t end = stem.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1])))
    --end;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1])))
    --begin;
  if (begin == end)
    throw data_error("cannot infer subject id from file name '" + stem +
                     "' (expected trailing digits, e.g. subject_03.csv)");
  return std::stoi(stem.substr(begin, end - begin));
}

struct PreprocessedData {
  std::vector<preprocess::FilteredRecording> parents;
  std::vector<preprocess::Segment> segments;
  std::size_t n_classes = 0;
  double fs = 0.0;
};

PreprocessedData load_and_preprocess(const PipelineConfig& cfg,
                                     const std::string& input_path) {
  const auto paths = discover_recordings(input_path);

  PreprocessedData data;
  data.parents.resize(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const dataio::EegRecording rec = load_input_recording(cfg, paths[i]);
    if (data.fs == 0.0) data.fs = rec.sampling_rate_hz;
    if (rec.sampling_rate_hz != data.fs)
      throw data_error("mixed sampling rates across recordings (" +
                       std::to_string(rec.sampling_rate_hz) + " vs " +
                       std::to_string(data.fs) + ")");
    if (cfg.io.skip_filter) {
      const dataio::EegRecording selected =
          preprocess::select_channels(rec, cfg.preprocess.channels);
      preprocess::FilteredRecording filtered;
      filtered.subject_id = selected.subject_id;
      filtered.sampling_rate_hz = selected.sampling_rate_hz;
      filtered.channel_labels = selected.channel_labels;
      filtered.channels.resize(selected.n_channels());
      for (std::size_t c = 0; c < selected.n_channels(); ++c) {
        auto src = selected.channel(c);
        filtered.channels[c].assign(src.begin(), src.end());
      }
      data.parents[i] = std::move(filtered);
    } else {
      data.parents[i] = preprocess::filter_recording(rec, cfg.preprocess);
    }
    auto segments = preprocess::segment_channels(
        data.parents[i].channels, data.parents[i].subject_id,
        cfg.preprocess.window_len, cfg.preprocess.hop, i);
    data.segments.insert(data.segments.end(),
                         std::make_move_iterator(segments.begin()),
                         std::make_move_iterator(segments.end()));
  }

  std::set<int> subjects;
  for (const auto& seg : data.segments) subjects.insert(seg.subject_id);
  if (subjects.empty()) throw data_error("no segments produced");
  const int max_id = *subjects.rbegin();
  for (int id = 0; id <= max_id; ++id)
    if (!subjects.contains(id))
      throw data_error("subject ids must be contiguous from 0; missing " +
                       std::to_string(id));
  data.n_classes = static_cast<std::size_t>(max_id) + 1;
  return data;
}

features::FeatureConfig feature_config_for(const PipelineConfig& cfg,
                                           double fs) {
  features::FeatureConfig feat = cfg.features;
  feat.welch.fs = fs;
  return feat;
}

std::vector<features::FeatureVector> extract_all(
    const std::vector<preprocess::Segment>& segments,
    const features::FeatureConfig& feat, std::size_t n_classes,
    unsigned threads) {
  std::vector<features::FeatureVector> out(segments.size());
  parallel_for(segments.size(), threads, [&](std::size_t i) {
    out[i] = features::extract_features(segments[i], feat, n_classes);
  });
  return out;
}

std::vector<preprocess::Segment> fetch_split(
    const std::vector<preprocess::Segment>& all,
    const std::vector<std::size_t>& indices,
    std::array<std::size_t, 3>& counter, SplitId split) {
  std::vector<preprocess::Segment> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    counter[split] += 1;
    out.push_back(all[i]);
  }
  return out;
}

std::vector<int> hard_labels(const std::vector<features::FeatureVector>& set) {
  std::vector<int> labels;
  labels.reserve(set.size());
  for (const auto& fv : set) labels.push_back(fv.subject_id);
  return labels;
}

std::string history_csv(const model::TrainHistory& history) {
  std::string csv = "epoch,train_loss,val_loss,val_accuracy,is_best\n";
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%d\n", e,
                  history.epochs[e].train_loss, history.epochs[e].val_loss,
                  history.epochs[e].val_accuracy,
                  static_cast<int>(e == static_cast<std::size_t>(history.best_epoch)));
    csv += buf;
  }
  return csv;
}

void check_model_dims(const PipelineConfig& cfg, std::size_t input_dim,
                      std::size_t n_classes) {
  if (static_cast<std::size_t>(cfg.model.input_dim) != input_dim)
    throw config_error("model.input_dim " + std::to_string(cfg.model.input_dim) +
                       " does not match the data (" +
                       std::to_string(input_dim) + ")");
  if (static_cast<std::size_t>(cfg.model.n_classes) != n_classes)
    throw config_error("model.n_classes " + std::to_string(cfg.model.n_classes) +
                       " does not match the data (" +
                       std::to_string(n_classes) + " subjects)");
}

}  // namespace

nlohmann::json StageAudit::to_json() const {
  auto row = [](const std::array<std::size_t, 3>& a) {
    return nlohmann::json{{"train", a[0]}, {"val", a[1]}, {"test", a[2]}};
  };
  return nlohmann::json{{"augment_reads", row(augment_reads)},
                        {"standardizer_fit_reads", row(standardizer_fit_reads)},
                        {"train_reads", row(train_reads)},
                        {"eval_reads", row(eval_reads)}};
}

std::vector<std::string> discover_recordings(const std::string& input_path) {
  std::vector<std::string> paths;
  const fs::path p(input_path);
  if (fs::is_directory(p)) {
    for (const auto& entry : fs::directory_iterator(p)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".earg" || ext == ".csv")
        paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty())
      throw data_error("no .earg or .csv recordings in " + input_path);
  } else if (fs::is_regular_file(p)) {
    paths.push_back(input_path);
  } else {
    throw data_error("input path does not exist: " + input_path);
  }
  return paths;
}

dataio::EegRecording load_input_recording(const PipelineConfig& cfg,
                                          const std::string& path) {
  const fs::path p(path);
  if (p.extension() == ".csv") {
    const int subject = subject_from_stem(p.stem().string());
    return dataio::load_recording_csv(path, cfg.io.csv_fs, subject);
  }
  return dataio::load_recording_auto(path, cfg.io.csv_fs, 0);
}

std::vector<std::string> cmd_synth(const PipelineConfig& cfg,
                                   const std::string& out_dir) {
  return run_stage("synth", [&] {
    fs::create_directories(out_dir);
    const auto cohort = dataio::default_cohort(
        cfg.synth.n_subjects, derive_seed(cfg.seed, "synth"));

    std::vector<std::string> files;
    nlohmann::json manifest;
    manifest["sampling_rate_hz"] = cfg.synth.sampling_rate_hz;
    manifest["duration_s"] = cfg.synth.duration_s;
    manifest["subjects"] = nlohmann::json::array();
    for (const auto& spec : cohort) {
      char name[64];
      std::snprintf(name, sizeof(name), "subject_%03d.earg", spec.subject_id);
      const std::string path = (fs::path(out_dir) / name).string();
      const dataio::EegRecording rec = dataio::generate_synthetic_subject(
          spec, cfg.synth.duration_s, cfg.synth.sampling_rate_hz);
      dataio::save_recording(rec, path);
      files.push_back(path);
      manifest["subjects"].push_back({{"subject_id", spec.subject_id},
                                      {"file", std::string(name)},
                                      {"rng_seed", spec.rng_seed},
                                      {"tone_freq_hz", spec.tone_freq_hz},
                                      {"tone_amplitude", spec.tone_amplitude},
                                      {"noise_std", spec.noise_std}});
    }
    write_text_file((fs::path(out_dir) / "manifest.json").string(),
                    manifest.dump(2) + "\n");
    return files;
  });
}

std::vector<std::string> cmd_preprocess(const PipelineConfig& cfg,
                                        const std::string& input_path,
                                        const std::string& out_dir) {
  return run_stage("preprocess", [&] {
    fs::create_directories(out_dir);
    const auto paths = discover_recordings(input_path);
    std::vector<std::string> outputs;
    for (const auto& path : paths) {
      const dataio::EegRecording rec = load_input_recording(cfg, path);
      const preprocess::FilteredRecording filtered =
          preprocess::filter_recording(rec, cfg.preprocess);

      dataio::EegRecording out;
      out.subject_id = filtered.subject_id;
      out.sampling_rate_hz = filtered.sampling_rate_hz;
      out.channel_labels = filtered.channel_labels;
      out.n_samples = filtered.n_samples();
      out.samples.resize(out.n_channels() * out.n_samples);
      for (std::size_t c = 0; c < filtered.channels.size(); ++c)
        for (std::size_t i = 0; i < out.n_samples; ++i)
          out.samples[c * out.n_samples + i] =
              static_cast<float>(filtered.channels[c][i]);

      const std::string out_path =
          (fs::path(out_dir) / (fs::path(path).stem().string() + "_filtered.earg"))
              .string();
      dataio::save_recording(out, out_path);
      outputs.push_back(out_path);
    }
    return outputs;
  });
}

void cmd_extract(const PipelineConfig& cfg, const std::string& input_path,
                 const std::string& out_csv) {
  const PreprocessedData data =
      run_stage("preprocess", [&] { return load_and_preprocess(cfg, input_path); });
  run_stage("extract", [&] {
    const auto feat = feature_config_for(cfg, data.fs);
    const auto features_all =
        extract_all(data.segments, feat, data.n_classes, cfg.threads);
    features::save_features_csv(features_all, out_csv);
    return 0;
  });
}

namespace {

struct SplitOutcome {
  eval::SplitIndices indices;
  std::vector<features::FeatureVector> train_features;  // augmented
  std::vector<features::FeatureVector> val_features;
  std::vector<features::FeatureVector> test_features;
  StageAudit audit;
  std::uint64_t split_hash = 0;
};

SplitOutcome split_and_augment(const PipelineConfig& cfg,
                               const PreprocessedData& data) {
  SplitOutcome out;

  run_stage("split", [&] {
    std::vector<eval::SplitItem> items;
    items.reserve(data.segments.size());
    for (const auto& seg : data.segments)
      items.push_back({seg.subject_id, seg.parent_index, seg.source_offset});
    out.indices = eval::split_dataset(items, cfg.split);
    out.split_hash = out.indices.hash();
    return 0;
  });

  const auto feat = feature_config_for(cfg, data.fs);

  run_stage("augment", [&] {
    // the augmentation stage pulls training items only; the audit records
    // exactly what it read, per split
    const auto train_segments = fetch_split(data.segments, out.indices.train,
                                            out.audit.augment_reads, kTrain);
    out.train_features = augment::augment_training_set(
        train_segments, data.parents, cfg.augment, feat, data.n_classes,
        cfg.threads);
    return 0;
  });

  run_stage("extract", [&] {
    const auto val_segments = fetch_split(data.segments, out.indices.val,
                                          out.audit.eval_reads, kVal);
    const auto test_segments = fetch_split(data.segments, out.indices.test,
                                           out.audit.eval_reads, kTest);
    out.val_features =
        extract_all(val_segments, feat, data.n_classes, cfg.threads);
    out.test_features =
        extract_all(test_segments, feat, data.n_classes, cfg.threads);
    return 0;
  });

  return out;
}

}  // namespace

StageAudit cmd_augment(const PipelineConfig& cfg, const std::string& input_path,
                       const std::string& out_dir) {
  const PreprocessedData data =
      run_stage("preprocess", [&] { return load_and_preprocess(cfg, input_path); });
  SplitOutcome outcome = split_and_augment(cfg, data);

  run_stage("augment", [&] {
    fs::create_directories(out_dir);
    features::save_features_csv(outcome.train_features,
                                (fs::path(out_dir) / "features_train.csv").string());
    features::save_features_csv(outcome.val_features,
                                (fs::path(out_dir) / "features_val.csv").string());
    features::save_features_csv(outcome.test_features,
                                (fs::path(out_dir) / "features_test.csv").string());
    nlohmann::json split_doc;
    split_doc["split_hash"] = outcome.split_hash;
    split_doc["counts"] = {{"train", outcome.indices.train.size()},
                           {"val", outcome.indices.val.size()},
                           {"test", outcome.indices.test.size()},
                           {"train_augmented", outcome.train_features.size()}};
    split_doc["audit"] = outcome.audit.to_json();
    write_text_file((fs::path(out_dir) / "split.json").string(),
                    split_doc.dump(2) + "\n");
    return 0;
  });
  return outcome.audit;
}

model::TrainHistory cmd_train(const PipelineConfig& cfg,
                              const std::string& train_csv,
                              const std::string& val_csv,
                              const std::string& out_dir) {
  return run_stage("train", [&] {
    const auto train_set = features::load_features_csv(train_csv);
    const auto val_set = features::load_features_csv(val_csv);
    check_model_dims(cfg, train_set[0].values.size(),
                     train_set[0].soft_label.size());

    const auto weights =
        augment::compute_class_weights(hard_labels(train_set),
                                       train_set[0].soft_label.size());
    const auto standardizer = features::fit_standardizer(train_set);
    std::vector<features::FeatureVector> train_std(train_set.size());
    std::vector<features::FeatureVector> val_std(val_set.size());
    for (std::size_t i = 0; i < train_set.size(); ++i)
      train_std[i] = features::apply_standardizer(standardizer, train_set[i]);
    for (std::size_t i = 0; i < val_set.size(); ++i)
      val_std[i] = features::apply_standardizer(standardizer, val_set[i]);

    const auto result =
        model::train(train_std, val_std, cfg.model, weights.weights);

    fs::create_directories(out_dir);
    model::save_model(result.mlp, (fs::path(out_dir) / "model.json").string());
    features::save_standardizer(
        standardizer, (fs::path(out_dir) / "standardizer.json").string());
    write_text_file((fs::path(out_dir) / "history.csv").string(),
                    history_csv(result.history));
    return result.history;
  });
}

eval::EvalReport cmd_eval(const PipelineConfig& cfg,
                          const std::string& model_path,
                          const std::string& standardizer_path,
                          const std::string& test_csv,
                          const std::string& report_path) {
  (void)cfg;
  return run_stage("eval", [&] {
    const model::Mlp m = model::load_model(model_path);
    const features::Standardizer s =
        features::load_standardizer(standardizer_path);
    const auto test_set = features::load_features_csv(test_csv);
    const eval::EvalReport report = eval::evaluate(m, s, test_set);
    if (!report_path.empty()) write_text_file(report_path, report.to_json());
    return report;
  });
}

PipelineResult cmd_pipeline(const PipelineConfig& cfg,
                            const std::string& input_path,
                            const std::string& out_dir) {
  const PreprocessedData data =
      run_stage("preprocess", [&] { return load_and_preprocess(cfg, input_path); });
  SplitOutcome outcome = split_and_augment(cfg, data);

  PipelineResult result;
  result.audit = outcome.audit;
  result.split_hash = outcome.split_hash;
  result.n_train_features = outcome.train_features.size();

  features::Standardizer standardizer;
  std::vector<features::FeatureVector> train_std, val_std;
  augment::ClassWeights weights;

  run_stage("standardize", [&] {
    check_model_dims(cfg, outcome.train_features[0].values.size(),
                     data.n_classes);
    result.audit.standardizer_fit_reads[kTrain] += outcome.train_features.size();
    standardizer = features::fit_standardizer(outcome.train_features);
    train_std.resize(outcome.train_features.size());
    val_std.resize(outcome.val_features.size());
    for (std::size_t i = 0; i < outcome.train_features.size(); ++i)
      train_std[i] =
          features::apply_standardizer(standardizer, outcome.train_features[i]);
    for (std::size_t i = 0; i < outcome.val_features.size(); ++i)
      val_std[i] =
          features::apply_standardizer(standardizer, outcome.val_features[i]);
    return 0;
  });

  const auto train_result = run_stage("train", [&] {
    weights = augment::compute_class_weights(hard_labels(outcome.train_features),
                                             data.n_classes);
    result.audit.train_reads[kTrain] += train_std.size();
    result.audit.train_reads[kVal] += val_std.size();
    return model::train(train_std, val_std, cfg.model, weights.weights);
  });
  result.history = train_result.history;

  run_stage("eval", [&] {
    result.audit.eval_reads[kTest] += outcome.test_features.size();
    result.report =
        eval::evaluate(train_result.mlp, standardizer, outcome.test_features);
    return 0;
  });

  run_stage("write", [&] {
    fs::create_directories(out_dir);
    model::save_model(train_result.mlp,
                      (fs::path(out_dir) / "model.json").string());
    features::save_standardizer(
        standardizer, (fs::path(out_dir) / "standardizer.json").string());
    write_text_file((fs::path(out_dir) / "report.json").string(),
                    result.report.to_json());
    write_text_file((fs::path(out_dir) / "report.txt").string(),
                    result.report.render_text());
    write_text_file((fs::path(out_dir) / "history.csv").string(),
                    history_csv(result.history));
    nlohmann::json audit_doc = result.audit.to_json();
    audit_doc["split_hash"] = result.split_hash;
    audit_doc["best_epoch"] = result.history.best_epoch;
    audit_doc["stopped_epoch"] = result.history.stopped_epoch;
    audit_doc["n_train_features"] = result.n_train_features;
    write_text_file((fs::path(out_dir) / "audit.json").string(),
                    audit_doc.dump(2) + "\n");
    return 0;
  });

  return result;
}

double reference_accuracy_pct(const std::string& signature) {
  static const std::map<std::string, double> reference = {
      {"128-64-32", 74.3},
      {"256-128-64-32", 81.0},
      {"512-256-128-64", 76.1},
      {"128-128-64-64", 73.2},
  };
  const auto it = reference.find(signature);
  return it == reference.end() ? -1.0 : it->second;
}

void cmd_ablate(const PipelineConfig& cfg, const std::string& input_path,
                const std::string& out_csv) {
  const PreprocessedData data =
      run_stage("preprocess", [&] { return load_and_preprocess(cfg, input_path); });

  std::vector<std::string> strategies = cfg.ablation.split_strategies;
  if (strategies.empty())
    strategies.push_back(eval::strategy_to_string(cfg.split.strategy));

  std::string comparison =
      "strategy,config,accuracy_pct,reference_accuracy_pct\n";

  for (const auto& strategy_name : strategies) {
    PipelineConfig run_cfg = cfg;
    run_cfg.split.strategy = eval::strategy_from_string(strategy_name);
    const SplitOutcome outcome = split_and_augment(run_cfg, data);

    const auto rows = run_stage("ablate", [&] {
      check_model_dims(cfg, outcome.train_features[0].values.size(),
                       data.n_classes);
      eval::AblationInputs inputs;
      inputs.train = outcome.train_features;
      inputs.val = outcome.val_features;
      inputs.test = outcome.test_features;
      inputs.split_hash = outcome.split_hash;

      std::vector<model::ModelConfig> configs;
      for (const auto& dims : cfg.ablation.hidden_dims) {
        model::ModelConfig row_cfg = cfg.model;  // shared seed: paired runs
        row_cfg.hidden_dims = dims;
        configs.push_back(row_cfg);
      }
      const auto weights = augment::compute_class_weights(
          hard_labels(outcome.train_features), data.n_classes);
      return eval::run_ablation(inputs, configs, weights.weights);
    });

    for (const auto& row : rows)
      if (row.split_hash != rows[0].split_hash)
        throw numeric_error("ablate: split hash diverged across rows");
    std::printf("ablate: strategy=%s rows=%zu shared split_hash=%016llx\n",
                strategy_name.c_str(), rows.size(),
                static_cast<unsigned long long>(rows[0].split_hash));

    std::string path = out_csv;
    if (strategies.size() > 1) {
      const fs::path p(out_csv);
      path = (p.parent_path() /
              (p.stem().string() + "_" + strategy_name + p.extension().string()))
                 .string();
    }
    run_stage("write", [&] {
      write_text_file(path, eval::ablation_csv(rows));
      return 0;
    });

    for (const auto& row : rows) {
      char buf[160];
      const double ref = reference_accuracy_pct(row.config);
      if (ref >= 0.0)
        std::snprintf(buf, sizeof(buf), "%s,%s,%.1f,%.1f\n",
                      strategy_name.c_str(), row.config.c_str(),
                      100.0 * row.accuracy, ref);
      else
        std::snprintf(buf, sizeof(buf), "%s,%s,%.1f,\n", strategy_name.c_str(),
                      row.config.c_str(), 100.0 * row.accuracy);
      comparison += buf;
    }
  }

  run_stage("write", [&] {
    const fs::path p(out_csv);
    const std::string cmp_path =
        (p.parent_path() / "ablation_comparison.csv").string();
    write_text_file(cmp_path, comparison);
    return 0;
  });
}

}  // namespace earid::pipeline
