#pragma once

#include <cstdint>
#include <vector>

#include "earid/features.hpp"
#include "earid/preprocess.hpp"
#include "earid/rng.hpp"

namespace earid::augment {

struct AugmentConfig {
  double noise_rel_std = 0.05;
  std::size_t max_shift_samples = 100;
  double mixup_alpha = 0.2;
  double target_multiplier = 6.0;
  std::uint64_t rng_seed = 0;
};

struct ClassWeights {
  std::vector<double> weights;  // one per class, > 0
};

/// Adds zero-mean Gaussian noise scaled to each channel's own standard
/// deviation. rel_std = 0 returns the segment unchanged.
preprocess::Segment add_gaussian_noise(const preprocess::Segment& seg,
                                       double noise_rel_std, RngStream& rng);

/// Re-crops the window from its parent recording at source_offset + shift.
/// Shifts that would leave the recording are clamped to the nearest legal
/// offset; no wraparound.
preprocess::Segment temporal_shift(const preprocess::FilteredRecording& parent,
                                   const preprocess::Segment& seg,
                                   std::ptrdiff_t shift);

/// Convex combination of two feature vectors and their labels.
features::FeatureVector mixup(const features::FeatureVector& a,
                              const features::FeatureVector& b, double lambda);

/// Duplicates uniformly-chosen members of minority classes until every
/// class count equals the majority count. Items are grouped by the argmax
/// of their soft label.
std::vector<features::FeatureVector> random_oversample(
    const std::vector<features::FeatureVector>& dataset, RngStream& rng);

/// Inverse-frequency weights w_k = N / (K * N_k).
ClassWeights compute_class_weights(const std::vector<int>& labels,
                                   std::size_t n_classes);

/// Composite training-set expansion: raw-level noise/shift variants with
/// features re-extracted, feature-level MixUp, rounds appended until the
/// count reaches target_multiplier x originals, then oversampling to exact
/// class balance. Deterministic in cfg.rng_seed; per-item streams are
/// derived so extraction can run in parallel.
std::vector<features::FeatureVector> augment_training_set(
    const std::vector<preprocess::Segment>& segments,
    const std::vector<preprocess::FilteredRecording>& parents,
    const AugmentConfig& cfg, const features::FeatureConfig& feat_cfg,
    std::size_t n_classes, unsigned threads = 1);

}  // namespace earid::augment
