#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace earid::dataio {

/// Multi-channel raw EEG, channel-major float32 samples (microvolts).
struct EegRecording {
  int subject_id = 0;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channel_labels;
  std::size_t n_samples = 0;   // per channel
  std::vector<float> samples;  // n_channels() * n_samples, channel-major

  std::size_t n_channels() const { return channel_labels.size(); }

  std::span<const float> channel(std::size_t c) const {
    return {samples.data() + c * n_samples, n_samples};
  }
  std::span<float> channel(std::size_t c) {
    return {samples.data() + c * n_samples, n_samples};
  }

  /// Throws on any broken invariant (shape mismatch, non-finite sample,
  /// non-positive sampling rate).
  void validate() const;
};

/// Recipe for one synthetic subject: per-channel stable AR processes plus a
/// subject-specific tone in the alpha band.
struct SyntheticSubjectSpec {
  int subject_id = 0;
  /// Per channel; coefficients a_i of x(n) = -sum_i a_i x(n-i) + e(n).
  std::vector<std::vector<double>> ar_coeffs;
  double tone_freq_hz = 10.0;
  double tone_amplitude = 1.0;
  double noise_std = 1.0;
  std::uint64_t rng_seed = 0;
};

/// The in-ear montage of the target recordings.
const std::vector<std::string>& ear_channel_labels();

/// Writes the .earg container (see README for the byte layout). Rejects
/// non-finite samples before touching the file.
void save_recording(const EegRecording& rec, const std::string& path);

/// Reads a .earg container.
EegRecording load_recording(const std::string& path);

/// Reads a column-per-channel CSV with a header row of labels. The CSV
/// carries no sampling rate, so fs comes from the caller.
EegRecording load_recording_csv(const std::string& path, double fs,
                                int subject_id);

/// Sniffs the format (container magic vs. CSV) and dispatches. fs_hint is
/// required for CSV input; subject_hint applies to CSV only.
EegRecording load_recording_auto(const std::string& path, double fs_hint,
                                 int subject_hint);

/// True iff all roots of z^p + a_1 z^(p-1) + ... + a_p lie strictly inside
/// the unit circle (step-down recursion on reflection coefficients).
bool ar_coeffs_stable(std::span<const double> coeffs);

/// AR-filtered white noise plus a tone, per channel, deterministic in
/// spec.rng_seed. Burn-in samples are generated and discarded so the
/// output starts near stationarity.
EegRecording generate_synthetic_subject(const SyntheticSubjectSpec& spec,
                                        double duration_s, double fs);

/// Default six-subject cohort: AR orders 2-4 with distinct resonance
/// angles, tone frequencies spread over 8-14 Hz, one derived seed per
/// subject. Separable but not trivially so.
std::vector<SyntheticSubjectSpec> default_cohort(std::size_t n_subjects,
                                                 std::uint64_t master_seed);

}  // namespace earid::dataio
