#pragma once

#include <array>
#include <string>
#include <vector>

#include "earid/config.hpp"
#include "earid/eval.hpp"
#include "earid/model.hpp"

namespace earid::pipeline {

enum SplitId { kTrain = 0, kVal = 1, kTest = 2 };

/// Per-split item reads observed at each stage boundary. The hygiene tests
/// assert the val/test columns stay zero for augmentation and
/// standardizer fitting.
struct StageAudit {
  std::array<std::size_t, 3> augment_reads{};
  std::array<std::size_t, 3> standardizer_fit_reads{};
  std::array<std::size_t, 3> train_reads{};
  std::array<std::size_t, 3> eval_reads{};

  nlohmann::json to_json() const;
};

struct PipelineResult {
  eval::EvalReport report;
  model::TrainHistory history;
  StageAudit audit;
  std::uint64_t split_hash = 0;
  std::size_t n_train_features = 0;
};

/// Discovers *.earg / *.csv recordings (a directory or a single file),
/// sorted by name. CSV needs io.csv_fs; its subject id comes from trailing
/// digits in the file stem.
std::vector<std::string> discover_recordings(const std::string& input_path);
dataio::EegRecording load_input_recording(const PipelineConfig& cfg,
                                          const std::string& path);

/// Writes one .earg per synthetic subject plus manifest.json.
std::vector<std::string> cmd_synth(const PipelineConfig& cfg,
                                   const std::string& out_dir);

/// select + filter each input recording, writes *_filtered.earg copies.
std::vector<std::string> cmd_preprocess(const PipelineConfig& cfg,
                                        const std::string& input_path,
                                        const std::string& out_dir);

/// Recordings -> segments -> feature CSV (no split, no augmentation).
void cmd_extract(const PipelineConfig& cfg, const std::string& input_path,
                 const std::string& out_csv);

/// Recordings -> split -> augmented train features; writes
/// features_train/val/test.csv and split.json into out_dir.
StageAudit cmd_augment(const PipelineConfig& cfg, const std::string& input_path,
                       const std::string& out_dir);

/// Feature CSVs -> model.json + standardizer.json + history.csv.
model::TrainHistory cmd_train(const PipelineConfig& cfg,
                              const std::string& train_csv,
                              const std::string& val_csv,
                              const std::string& out_dir);

/// Scores a saved model against untouched test features.
eval::EvalReport cmd_eval(const PipelineConfig& cfg,
                          const std::string& model_path,
                          const std::string& standardizer_path,
                          const std::string& test_csv,
                          const std::string& report_path);

/// Full run: preprocess -> split -> augment(train) -> standardize(train)
/// -> train -> evaluate. Writes model.json, standardizer.json,
/// report.json, report.txt, history.csv, audit.json.
PipelineResult cmd_pipeline(const PipelineConfig& cfg,
                            const std::string& input_path,
                            const std::string& out_dir);

/// Paired-architecture comparison on a shared split; one CSV per
/// configured split strategy plus a comparison table against the
/// published reference accuracies.
void cmd_ablate(const PipelineConfig& cfg, const std::string& input_path,
                const std::string& out_csv);

/// Published reference accuracies (percent) for the known architecture
/// signatures; returns a negative value for unknown signatures.
double reference_accuracy_pct(const std::string& signature);

}  // namespace earid::pipeline
