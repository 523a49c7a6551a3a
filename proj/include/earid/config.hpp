#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "earid/augment.hpp"
#include "earid/eval.hpp"
#include "earid/features.hpp"
#include "earid/model.hpp"
#include "earid/preprocess.hpp"

namespace earid::pipeline {

struct SynthConfig {
  std::size_t n_subjects = 6;
  double duration_s = 1001.0;  // 1000 default windows per subject
  double sampling_rate_hz = 1000.0;
};

struct IoConfig {
  double csv_fs = 0.0;       // sampling rate for CSV recordings (CSV carries none)
  bool skip_filter = false;  // input recordings are already filtered
};

struct AblationConfig {
  std::vector<std::vector<int>> hidden_dims = {
      {128, 64, 32}, {256, 128, 64, 32}, {512, 256, 128, 64}, {128, 128, 64, 64}};
  std::vector<std::string> split_strategies;  // empty: use split.strategy
};

/// Everything a run needs, one JSON document. The master seed fans out to
/// per-stage seeds via derive_seed unless a section pins its own.
struct PipelineConfig {
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0 = hardware concurrency
  bool verbose = false;

  SynthConfig synth;
  IoConfig io;
  preprocess::PreprocessConfig preprocess;
  features::FeatureConfig features;
  augment::AugmentConfig augment;
  model::ModelConfig model;
  eval::SplitSpec split;
  AblationConfig ablation;

  /// Defaults with stage seeds derived from the master seed.
  static PipelineConfig defaults(std::uint64_t master_seed = 42);
  /// Parses and validates; unknown keys are rejected.
  static PipelineConfig from_json(const nlohmann::json& doc);
  static PipelineConfig from_file(const std::string& path);

  nlohmann::json to_json() const;
  void validate() const;

  /// Feature dimensionality implied by channels and descriptor counts.
  std::size_t derived_input_dim() const {
    return preprocess.channels.size() * features.per_channel();
  }
};

}  // namespace earid::pipeline
