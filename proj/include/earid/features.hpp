#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "earid/preprocess.hpp"

namespace earid::features {

struct WelchConfig {
  std::size_t nperseg = 256;
  std::size_t noverlap = 128;
  double fs = 1000.0;
  // window function: periodic Hann
};

struct PsdEstimate {
  std::vector<double> freqs_hz;  // ascending, 0 .. fs/2
  std::vector<double> power;     // one-sided density
};

struct ArFeatures {
  std::vector<double> coeffs;  // a_i of x(n) = -sum a_i x(n-i) + e(n)
  double residual_variance = 0.0;
};

struct HjorthFeatures {
  double activity = 0.0;
  double mobility = 0.0;
  double complexity = 0.0;
};

struct FeatureVector {
  std::vector<double> values;
  std::vector<double> soft_label;  // on the probability simplex
  int subject_id = 0;              // argmax of soft_label

  void validate() const;
};

/// Per-feature z-scoring statistics, fitted on training data only.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8
};

/// Averaged periodogram over Hann-windowed overlapping subsegments,
/// one-sided density normalization (sum(power) * df recovers the mean
/// power of a stationary input). No detrending.
PsdEstimate welch_psd(std::span<const double> signal, const WelchConfig& cfg);

/// First n_keep one-sided bins of the estimate.
std::vector<double> retain_psd_features(const PsdEstimate& psd,
                                        std::size_t n_keep = 20);

/// Yule-Walker AR fit via Levinson-Durbin on biased (divide by N),
/// demeaned sample autocovariances. residual_variance is the final
/// prediction-error power.
ArFeatures yule_walker(std::span<const double> signal, std::size_t order);

/// Activity/mobility/complexity with the unscaled first difference as
/// derivative and population variances.
HjorthFeatures hjorth(std::span<const double> signal);

/// Shannon entropy (bits) of the normalized power spectrum; 0 log 0 := 0.
double spectral_entropy(const PsdEstimate& psd);

struct FeatureConfig {
  WelchConfig welch{};
  std::size_t psd_keep = 20;
  std::size_t ar_order = 10;

  std::size_t per_channel() const { return psd_keep + ar_order + 3 + 1; }
};

/// Per channel [psd_keep PSD bins | ar_order AR coeffs | activity,
/// mobility, complexity | spectral entropy], channels concatenated in
/// recording order; one-hot soft label over n_classes.
FeatureVector extract_features(const preprocess::Segment& seg,
                               const FeatureConfig& cfg,
                               std::size_t n_classes);

Standardizer fit_standardizer(const std::vector<FeatureVector>& train);
FeatureVector apply_standardizer(const Standardizer& s,
                                 const FeatureVector& fv);

/// Feature dataset CSV: f000.., label columns y0.., then subject_id; one
/// row per vector. Doubles are printed with round-trip precision.
void save_features_csv(const std::vector<FeatureVector>& dataset,
                       const std::string& path);
std::vector<FeatureVector> load_features_csv(const std::string& path);

void save_standardizer(const Standardizer& s, const std::string& path);
Standardizer load_standardizer(const std::string& path);

}  // namespace earid::features
