#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "earid/dataio.hpp"

namespace earid::preprocess {

/// One second-order section, direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Cascade of second-order sections.
struct SosFilter {
  std::vector<Biquad> sections;
  int order = 0;

  /// Complex response H(e^{j 2 pi f / fs}).
  std::complex<double> response(double freq_hz, double fs) const;
  /// Largest pole magnitude over all sections.
  double max_pole_radius() const;
};

struct FilterSpec {
  enum class Kind { bandpass, notch };
  Kind kind = Kind::bandpass;
  double low_hz = 0.5;     // bandpass
  double high_hz = 100.0;  // bandpass
  double center_hz = 50.0; // notch
  double q_factor = 30.0;  // notch
  int order = 4;           // bandpass overall order, even
  bool zero_phase = true;
};

/// Butterworth bandpass of the given overall (even) order as cascaded
/// biquads: analog prototype, frequency prewarp, bandpass transform,
/// bilinear transform. Pole radii are checked after design.
SosFilter design_bandpass(double low_hz, double high_hz, int order, double fs);

/// Second-order IIR notch (constrained zeros on the unit circle at the
/// center frequency, bandwidth center/q).
SosFilter design_notch(double center_hz, double q_factor, double fs);

SosFilter design_filter(const FilterSpec& spec, double fs);

/// Single forward pass through the cascade. Filter state starts at the
/// step-response steady state for x[0], which removes the DC startup
/// transient.
std::vector<double> sos_filter(const SosFilter& filter,
                               std::span<const double> x);

/// Forward-backward (zero phase) pass with odd-reflection padding of
/// 3 * filter order on both ends. Output has the input length.
std::vector<double> filtfilt(const SosFilter& filter,
                             std::span<const double> x);

/// Applies spec (zero-phase or single-pass) to one signal.
std::vector<double> apply_filter(std::span<const double> signal,
                                 const FilterSpec& spec, double fs);

/// One fixed-length window of one recording, all channels, filtered values.
struct Segment {
  int subject_id = 0;
  std::size_t n_channels = 0;
  std::size_t window_len = 0;
  std::size_t source_offset = 0;
  std::size_t parent_index = 0;    // recording this window was cut from
  std::vector<double> samples;     // n_channels * window_len, channel-major

  std::span<const double> channel(std::size_t c) const {
    return {samples.data() + c * window_len, window_len};
  }
  std::span<double> channel(std::size_t c) {
    return {samples.data() + c * window_len, window_len};
  }
};

/// Keeps exactly the wanted channels, in wanted order. Unknown labels are
/// an error naming the label.
dataio::EegRecording select_channels(const dataio::EegRecording& rec,
                                     const std::vector<std::string>& wanted);

/// Windows at offsets 0, hop, 2*hop, ... while offset + window_len fits.
std::vector<Segment> segment_recording(const dataio::EegRecording& rec,
                                       std::size_t window_len, std::size_t hop,
                                       std::size_t parent_index = 0);

/// Same, over an already-filtered double-valued signal matrix.
std::vector<Segment> segment_channels(const std::vector<std::vector<double>>& channels,
                                      int subject_id, std::size_t window_len,
                                      std::size_t hop, std::size_t parent_index);

struct PreprocessConfig {
  std::vector<std::string> channels = dataio::ear_channel_labels();
  FilterSpec bandpass{};  // defaults: 0.5-100 Hz, order 4, zero phase
  FilterSpec notch{.kind = FilterSpec::Kind::notch, .order = 2};
  std::size_t window_len = 2000;
  std::size_t hop = 1000;
  unsigned threads = 0;
};

/// Filtered recording kept around as augmentation re-crops shifted windows
/// from it.
struct FilteredRecording {
  int subject_id = 0;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channel_labels;
  std::vector<std::vector<double>> channels;
  std::size_t n_samples() const { return channels.empty() ? 0 : channels[0].size(); }
};

/// select -> bandpass -> notch, channels filtered in parallel.
FilteredRecording filter_recording(const dataio::EegRecording& rec,
                                   const PreprocessConfig& cfg);

/// Full pipeline for one recording: select -> bandpass -> notch -> segment.
std::vector<Segment> preprocess_pipeline(const dataio::EegRecording& rec,
                                         const PreprocessConfig& cfg,
                                         std::size_t parent_index = 0);

}  // namespace earid::preprocess
