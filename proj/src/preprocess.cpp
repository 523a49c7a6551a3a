#include "earid/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "earid/error.hpp"
#include "earid/parallel.hpp"

namespace earid::preprocess {

namespace {

using cplx = std::complex<double>;

void check_stability(const SosFilter& filter, const char* what) {
  const double r = filter.max_pole_radius();
  if (!(r < 1.0))
    throw numeric_error(std::string(what) + ": unstable design, pole radius " +
                        std::to_string(r));
}

/// Steady-state DF2T state for a unit step input; scaled by the actual
/// first sample before filtering.
std::array<double, 2> step_steady_state(const Biquad& s) {
  const double h_dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  const double z2 = s.b2 - s.a2 * h_dc;
  const double z1 = (s.b1 + s.b2) - (s.a1 + s.a2) * h_dc;
  return {z1, z2};
}

void run_biquad(const Biquad& s, std::span<double> x, double x0_scale) {
  auto zi = step_steady_state(s);
  double z1 = zi[0] * x0_scale;
  double z2 = zi[1] * x0_scale;
  for (double& v : x) {
    const double in = v;
    const double out = s.b0 * in + z1;
    z1 = s.b1 * in - s.a1 * out + z2;
    z2 = s.b2 * in - s.a2 * out;
    v = out;
  }
}

void run_cascade(const SosFilter& filter, std::span<double> x) {
  if (x.empty()) return;
  double head = x.front();
  for (const auto& s : filter.sections) {
    run_biquad(s, x, head);
    // each section sees the previous section's DC-scaled head sample
    head *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  }
}

}  // namespace

std::complex<double> SosFilter::response(double freq_hz, double fs) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / fs;
  const cplx z1 = std::polar(1.0, -w);
  const cplx z2 = z1 * z1;
  cplx h(1.0, 0.0);
  for (const auto& s : sections)
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

double SosFilter::max_pole_radius() const {
  double r = 0.0;
  for (const auto& s : sections) {
    // roots of z^2 + a1 z + a2
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    r = std::max(r, std::abs((-s.a1 + disc) / 2.0));
    r = std::max(r, std::abs((-s.a1 - disc) / 2.0));
  }
  return r;
}

SosFilter design_bandpass(double low_hz, double high_hz, int order, double fs) {
  if (fs <= 0.0) throw config_error("bandpass: fs must be positive");
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0))
    throw config_error("bandpass: need 0 < low < high < fs/2");
  if (order < 2 || order % 2 != 0)
    throw config_error("bandpass: order must be a positive even integer");

  const int m = order / 2;  // analog prototype order
  const double pi = std::numbers::pi;

  // Butterworth prototype poles on the unit circle, left half plane.
  std::vector<cplx> proto;
  proto.reserve(m);
  for (int k = 1; k <= m; ++k) {
    const double phi = pi * (2.0 * k + m - 1.0) / (2.0 * m);
    proto.emplace_back(std::cos(phi), std::sin(phi));
  }

  // Prewarped band edges, rad/s.
  const double warp_lo = 2.0 * fs * std::tan(pi * low_hz / fs);
  const double warp_hi = 2.0 * fs * std::tan(pi * high_hz / fs);
  const double bw = warp_hi - warp_lo;
  const double w0_sq = warp_lo * warp_hi;

  // Lowpass-to-bandpass: each prototype pole p maps to the roots of
  // s^2 - p*bw*s + w0^2.
  std::vector<cplx> analog_poles;
  analog_poles.reserve(2 * m);
  for (const cplx& p : proto) {
    const cplx half = p * bw * 0.5;
    const cplx root = std::sqrt(half * half - w0_sq);
    analog_poles.push_back(half + root);
    analog_poles.push_back(half - root);
  }

  // Bilinear transform, K = 2 fs. Analog zeros: m at s = 0.
  const double K = 2.0 * fs;
  std::vector<cplx> digital_poles;
  digital_poles.reserve(2 * m);
  cplx pole_prod(1.0, 0.0);
  for (const cplx& s : analog_poles) {
    digital_poles.push_back((K + s) / (K - s));
    pole_prod *= (K - s);
  }
  // gain: analog numerator (bw*s)^m evaluated through the transform
  const double zero_prod = std::pow(K, m);
  const double gain = std::pow(bw, m) * zero_prod / pole_prod.real();

  // Pair conjugate poles into sections; each section gets one zero at z=1
  // and one at z=-1 (b = [1, 0, -1]).
  std::sort(digital_poles.begin(), digital_poles.end(),
            [](const cplx& a, const cplx& b) {
              if (std::abs(a.imag()) != std::abs(b.imag()))
                return std::abs(a.imag()) > std::abs(b.imag());
              return a.imag() > b.imag();
            });

  SosFilter filter;
  filter.order = order;
  for (int i = 0; i < m; ++i) {
    const cplx p1 = digital_poles[2 * i];
    const cplx p2 = digital_poles[2 * i + 1];
    Biquad s;
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    s.b0 = 1.0;
    s.b1 = 0.0;
    s.b2 = -1.0;
    if (i == 0) {
      s.b0 *= gain;
      s.b2 *= gain;
    }
    filter.sections.push_back(s);
  }
  check_stability(filter, "bandpass");
  return filter;
}

SosFilter design_notch(double center_hz, double q_factor, double fs) {
  if (fs <= 0.0) throw config_error("notch: fs must be positive");
  if (!(0.0 < center_hz && center_hz < fs / 2.0))
    throw config_error("notch: need 0 < center < fs/2");
  if (q_factor <= 0.0) throw config_error("notch: q_factor must be positive");

  const double w0 = 2.0 * std::numbers::pi * center_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * q_factor);
  const double a0 = 1.0 + alpha;

  Biquad s;
  s.b0 = 1.0 / a0;
  s.b1 = -2.0 * std::cos(w0) / a0;
  s.b2 = 1.0 / a0;
  s.a1 = -2.0 * std::cos(w0) / a0;
  s.a2 = (1.0 - alpha) / a0;

  SosFilter filter;
  filter.order = 2;
  filter.sections.push_back(s);
  check_stability(filter, "notch");
  return filter;
}

SosFilter design_filter(const FilterSpec& spec, double fs) {
  if (spec.kind == FilterSpec::Kind::bandpass)
    return design_bandpass(spec.low_hz, spec.high_hz, spec.order, fs);
  return design_notch(spec.center_hz, spec.q_factor, fs);
}

std::vector<double> sos_filter(const SosFilter& filter,
                               std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_cascade(filter, y);
  return y;
}

std::vector<double> filtfilt(const SosFilter& filter,
                             std::span<const double> x) {
  const std::size_t pad = static_cast<std::size_t>(3 * filter.order);
  if (x.size() <= pad)
    throw data_error("filtfilt: signal too short for filter order (need > " +
                     std::to_string(pad) + " samples)");

  // odd reflection about the end samples
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * pad);
  for (std::size_t i = pad; i > 0; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 2; i <= pad + 1; ++i)
    ext.push_back(2.0 * x[x.size() - 1] - x[x.size() - i]);

  run_cascade(filter, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(filter, ext);
  std::reverse(ext.begin(), ext.end());

  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

std::vector<double> apply_filter(std::span<const double> signal,
                                 const FilterSpec& spec, double fs) {
  const SosFilter filter = design_filter(spec, fs);
  if (signal.size() <= static_cast<std::size_t>(3 * filter.order))
    throw data_error("apply_filter: signal too short for filter order");
  if (spec.zero_phase) return filtfilt(filter, signal);
  return sos_filter(filter, signal);
}

dataio::EegRecording select_channels(const dataio::EegRecording& rec,
                                     const std::vector<std::string>& wanted) {
  dataio::EegRecording out;
  out.subject_id = rec.subject_id;
  out.sampling_rate_hz = rec.sampling_rate_hz;
  out.n_samples = rec.n_samples;
  out.channel_labels = wanted;
  out.samples.resize(wanted.size() * rec.n_samples);
  for (std::size_t i = 0; i < wanted.size(); ++i) {
    const auto it = std::find(rec.channel_labels.begin(),
                              rec.channel_labels.end(), wanted[i]);
    if (it == rec.channel_labels.end())
      throw data_error("unknown channel " + wanted[i]);
    const std::size_t c =
        static_cast<std::size_t>(it - rec.channel_labels.begin());
    auto src = rec.channel(c);
    std::copy(src.begin(), src.end(), out.samples.begin() + i * rec.n_samples);
  }
  return out;
}

std::vector<Segment> segment_channels(
    const std::vector<std::vector<double>>& channels, int subject_id,
    std::size_t window_len, std::size_t hop, std::size_t parent_index) {
  if (channels.empty()) throw data_error("segment: no channels");
  if (hop < 1) throw config_error("segment: hop must be >= 1");
  const std::size_t n_total = channels[0].size();
  if (window_len < 1) throw config_error("segment: window_len must be >= 1");
  if (window_len > n_total)
    throw data_error("segment: window_len " + std::to_string(window_len) +
                     " exceeds recording length " + std::to_string(n_total));

  const std::size_t count = (n_total - window_len) / hop + 1;
  std::vector<Segment> segments;
  segments.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Segment seg;
    seg.subject_id = subject_id;
    seg.n_channels = channels.size();
    seg.window_len = window_len;
    seg.source_offset = k * hop;
    seg.parent_index = parent_index;
    seg.samples.resize(channels.size() * window_len);
    for (std::size_t c = 0; c < channels.size(); ++c)
      std::copy_n(channels[c].begin() + static_cast<std::ptrdiff_t>(seg.source_offset),
                  window_len, seg.samples.begin() + c * window_len);
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<Segment> segment_recording(const dataio::EegRecording& rec,
                                       std::size_t window_len, std::size_t hop,
                                       std::size_t parent_index) {
  std::vector<std::vector<double>> channels(rec.n_channels());
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto src = rec.channel(c);
    channels[c].assign(src.begin(), src.end());
  }
  return segment_channels(channels, rec.subject_id, window_len, hop,
                          parent_index);
}

FilteredRecording filter_recording(const dataio::EegRecording& rec,
                                   const PreprocessConfig& cfg) {
  const dataio::EegRecording selected = select_channels(rec, cfg.channels);
  const SosFilter bandpass = design_filter(cfg.bandpass, rec.sampling_rate_hz);
  const SosFilter notch = design_filter(cfg.notch, rec.sampling_rate_hz);

  FilteredRecording out;
  out.subject_id = selected.subject_id;
  out.sampling_rate_hz = selected.sampling_rate_hz;
  out.channel_labels = selected.channel_labels;
  out.channels.resize(selected.n_channels());

  parallel_for(selected.n_channels(), cfg.threads, [&](std::size_t c) {
    auto src = selected.channel(c);
    std::vector<double> x(src.begin(), src.end());
    std::vector<double> bp = cfg.bandpass.zero_phase
                                 ? filtfilt(bandpass, x)
                                 : sos_filter(bandpass, x);
    out.channels[c] =
        cfg.notch.zero_phase ? filtfilt(notch, bp) : sos_filter(notch, bp);
  });
  return out;
}

std::vector<Segment> preprocess_pipeline(const dataio::EegRecording& rec,
                                         const PreprocessConfig& cfg,
                                         std::size_t parent_index) {
  const FilteredRecording filtered = filter_recording(rec, cfg);
  return segment_channels(filtered.channels, filtered.subject_id,
                          cfg.window_len, cfg.hop, parent_index);
}

}  // namespace earid::preprocess
