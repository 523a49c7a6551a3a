#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "earid/features.hpp"
#include "earid/model.hpp"

namespace earid::eval {

struct SplitSpec {
  enum class Strategy { random_segment, block_contiguous };
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};  // train/val/test
  Strategy strategy = Strategy::random_segment;
  std::uint64_t rng_seed = 0;
  bool allow_empty = false;  // permit zero-ratio splits when explicitly set

  void validate() const;
};

SplitSpec::Strategy strategy_from_string(const std::string& name);
std::string strategy_to_string(SplitSpec::Strategy s);

/// What the splitter needs to know about one item.
struct SplitItem {
  int label = 0;
  std::size_t parent_index = 0;   // recording of origin
  std::size_t source_offset = 0;  // position within that recording
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;

  /// Order-independent digest; ablation rows assert equal hashes.
  std::uint64_t hash() const;
};

/// Stratified split with largest-remainder rounding per class.
/// random_segment shuffles within each class; block_contiguous keeps runs
/// of consecutive source offsets per recording together (train, then val,
/// then test) to avoid overlap leakage across splits.
SplitIndices split_dataset(const std::vector<SplitItem>& items,
                           const SplitSpec& spec);

struct EvalReport {
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
  double overall_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::size_t n_test = 0;

  std::string to_json() const;
  std::string render_text() const;
};

/// Standardizes the (untouched) test vectors and scores the model.
EvalReport evaluate(const model::Mlp& m, const features::Standardizer& s,
                    const std::vector<features::FeatureVector>& test);

struct AblationRow {
  std::string config;  // e.g. "256-128-64-32"
  double accuracy = 0.0;
  std::uint64_t split_hash = 0;
};

struct AblationInputs {
  std::vector<features::FeatureVector> train;  // augmented + standardizer-ready
  std::vector<features::FeatureVector> val;
  std::vector<features::FeatureVector> test;
  std::uint64_t split_hash = 0;
};

/// Trains each configuration on identical, pre-split data (paired
/// comparison; one row per config).
std::vector<AblationRow> run_ablation(const AblationInputs& inputs,
                                      const std::vector<model::ModelConfig>& configs,
                                      const std::vector<double>& class_weights);

std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Hidden-dim signature, "256-128-64-32" style.
std::string config_signature(const model::ModelConfig& cfg);

}  // namespace earid::eval
