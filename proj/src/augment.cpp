#include "earid/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "earid/error.hpp"
#include "earid/parallel.hpp"

namespace earid::augment {

namespace {

double channel_std(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double acc = 0.0;
  for (double v : x) {
    const double d = v - mean;
    acc += d * d;
  }
  return std::sqrt(acc / n);
}

}  // namespace

preprocess::Segment add_gaussian_noise(const preprocess::Segment& seg,
                                       double noise_rel_std, RngStream& rng) {
  if (noise_rel_std < 0.0)
    throw config_error("augment: noise_rel_std must be >= 0");
  if (noise_rel_std == 0.0) return seg;

  preprocess::Segment out = seg;
  for (std::size_t c = 0; c < seg.n_channels; ++c) {
    const double sigma = noise_rel_std * channel_std(seg.channel(c));
    auto dst = out.channel(c);
    for (double& v : dst) v += sigma * rng.normal();
  }
  return out;
}

preprocess::Segment temporal_shift(const preprocess::FilteredRecording& parent,
                                   const preprocess::Segment& seg,
                                   std::ptrdiff_t shift) {
  const std::size_t n_total = parent.n_samples();
  if (parent.channels.size() != seg.n_channels)
    throw data_error("temporal_shift: parent/segment channel mismatch");
  if (seg.window_len > n_total)
    throw data_error("temporal_shift: window exceeds parent length");

  const std::ptrdiff_t max_offset =
      static_cast<std::ptrdiff_t>(n_total - seg.window_len);
  std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(seg.source_offset) + shift;
  offset = std::clamp<std::ptrdiff_t>(offset, 0, max_offset);

  preprocess::Segment out = seg;
  out.source_offset = static_cast<std::size_t>(offset);
  for (std::size_t c = 0; c < seg.n_channels; ++c) {
    auto dst = out.channel(c);
    std::copy_n(parent.channels[c].begin() + offset, seg.window_len,
                dst.begin());
  }
  return out;
}

features::FeatureVector mixup(const features::FeatureVector& a,
                              const features::FeatureVector& b,
                              double lambda) {
  if (a.values.size() != b.values.size())
    throw data_error("mixup: feature dimension mismatch");
  if (a.soft_label.size() != b.soft_label.size())
    throw data_error("mixup: label arity mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw config_error("mixup: lambda must lie in [0, 1]");

  features::FeatureVector out;
  out.values.resize(a.values.size());
  out.soft_label.resize(a.soft_label.size());
  for (std::size_t i = 0; i < a.values.size(); ++i)
    out.values[i] = lambda * a.values[i] + (1.0 - lambda) * b.values[i];
  for (std::size_t k = 0; k < a.soft_label.size(); ++k)
    out.soft_label[k] = lambda * a.soft_label[k] + (1.0 - lambda) * b.soft_label[k];
  out.subject_id = static_cast<int>(
      std::max_element(out.soft_label.begin(), out.soft_label.end()) -
      out.soft_label.begin());
  return out;
}

std::vector<features::FeatureVector> random_oversample(
    const std::vector<features::FeatureVector>& dataset, RngStream& rng) {
  if (dataset.empty()) throw data_error("oversample: empty dataset");
  const std::size_t n_classes = dataset[0].soft_label.size();

  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& label = dataset[i].soft_label;
    const std::size_t k = static_cast<std::size_t>(
        std::max_element(label.begin(), label.end()) - label.begin());
    by_class[k].push_back(i);
  }
  std::size_t max_count = 0;
  for (std::size_t k = 0; k < n_classes; ++k) {
    if (by_class[k].empty())
      throw data_error("oversample: class " + std::to_string(k) +
                       " has no samples");
    max_count = std::max(max_count, by_class[k].size());
  }

  std::vector<features::FeatureVector> out = dataset;
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t added = by_class[k].size(); added < max_count; ++added) {
      const std::size_t pick = by_class[k][rng.uniform_index(by_class[k].size())];
      out.push_back(dataset[pick]);
    }
  }
  return out;
}

ClassWeights compute_class_weights(const std::vector<int>& labels,
                                   std::size_t n_classes) {
  if (n_classes < 2) throw config_error("class weights: need >= 2 classes");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      throw data_error("class weights: label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  ClassWeights w;
  w.weights.resize(n_classes);
  const double n_total = static_cast<double>(labels.size());
  for (std::size_t k = 0; k < n_classes; ++k) {
    if (counts[k] == 0)
      throw data_error("class weights: class " + std::to_string(k) +
                       " absent from labels");
    w.weights[k] = n_total / (static_cast<double>(n_classes) *
                              static_cast<double>(counts[k]));
  }
  return w;
}

std::vector<features::FeatureVector> augment_training_set(
    const std::vector<preprocess::Segment>& segments,
    const std::vector<preprocess::FilteredRecording>& parents,
    const AugmentConfig& cfg, const features::FeatureConfig& feat_cfg,
    std::size_t n_classes, unsigned threads) {
  if (segments.empty()) throw data_error("augment: no training segments");
  if (cfg.target_multiplier <= 0.0)
    throw config_error("augment: target_multiplier must be positive");
  if (!(cfg.mixup_alpha > 0.0))
    throw config_error("augment: mixup_alpha must be positive");
  for (const auto& seg : segments) {
    if (cfg.max_shift_samples >= seg.window_len)
      throw config_error("augment: max_shift_samples must be < window_len");
    if (seg.parent_index >= parents.size())
      throw data_error("augment: segment references missing parent");
  }

  const std::size_t n = segments.size();
  const std::size_t target = static_cast<std::size_t>(
      std::ceil(cfg.target_multiplier * static_cast<double>(n)));

  std::vector<features::FeatureVector> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out[i] = features::extract_features(segments[i], feat_cfg, n_classes);
  });
  const std::vector<features::FeatureVector> originals = out;

  // Variant rounds cycle noise -> shift -> noise+shift -> mixup, each with
  // its own derived seed space, until the target count is reached.
  enum { kNoise, kShift, kNoiseShift, kMixup };
  std::size_t round = 0;
  while (out.size() < target) {
    const int technique = static_cast<int>(round % 4);
    const std::size_t base = out.size();
    out.resize(base + n);

    if (technique == kMixup) {
      RngStream rng(derive_seed(cfg.rng_seed, "augment.mixup", round));
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t partner = rng.uniform_index(n);
        const double lambda = rng.beta(cfg.mixup_alpha, cfg.mixup_alpha);
        out[base + i] = mixup(originals[i], originals[partner], lambda);
      }
    } else {
      // Raw-level variants; features re-extracted from the modified window.
      parallel_for(n, threads, [&](std::size_t i) {
        const auto& seg = segments[i];
        RngStream rng(derive_seed(cfg.rng_seed, "augment.raw", round * n + i));
        preprocess::Segment variant = seg;
        if (technique == kShift || technique == kNoiseShift) {
          const std::ptrdiff_t span =
              static_cast<std::ptrdiff_t>(cfg.max_shift_samples);
          const std::ptrdiff_t shift =
              span > 0 ? rng.uniform_int(-span, span) : 0;
          variant = temporal_shift(parents[seg.parent_index], variant, shift);
        }
        if (technique == kNoise || technique == kNoiseShift)
          variant = add_gaussian_noise(variant, cfg.noise_rel_std, rng);
        out[base + i] =
            features::extract_features(variant, feat_cfg, n_classes);
      });
    }
    ++round;
  }

  RngStream oversample_rng(derive_seed(cfg.rng_seed, "augment.oversample"));
  return random_oversample(out, oversample_rng);
}

}  // namespace earid::augment
