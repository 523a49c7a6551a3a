#include "earid/dataio.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "earid/error.hpp"
#include "earid/rng.hpp"

namespace earid::dataio {

namespace {

constexpr std::array<char, 4> kMagic = {'E', 'A', 'R', 'G'};
constexpr std::uint16_t kFormatVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  const unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                              static_cast<unsigned char>((bits >> 8) & 0xff),
                              static_cast<unsigned char>((bits >> 16) & 0xff),
                              static_cast<unsigned char>(bits >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

bool get_bytes(std::istream& is, unsigned char* out, std::size_t n) {
  is.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(is.gcount()) == n;
}

std::uint16_t load_u16(const unsigned char* b) {
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint64_t load_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

const std::vector<std::string>& ear_channel_labels() {
  static const std::vector<std::string> labels = {"LF", "LB",  "LOU", "LOD",
                                                  "RF", "RB",  "ROU", "ROD"};
  return labels;
}

void EegRecording::validate() const {
  if (sampling_rate_hz <= 0.0)
    throw data_error("recording: sampling_rate_hz must be positive");
  if (subject_id < 0)
    throw data_error("recording: subject_id must be non-negative");
  if (n_samples < 1) throw data_error("recording: empty recording");
  if (channel_labels.empty()) throw data_error("recording: no channels");
  if (samples.size() != channel_labels.size() * n_samples)
    throw data_error("recording: channel count mismatch");
  for (float v : samples)
    if (!std::isfinite(v)) throw numeric_error("recording: non-finite sample");
}

void save_recording(const EegRecording& rec, const std::string& path) {
  rec.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw data_error("cannot open for writing: " + path);
  os.write(kMagic.data(), 4);
  put_u16(os, kFormatVersion);
  put_u16(os, static_cast<std::uint16_t>(rec.subject_id));
  put_f64(os, rec.sampling_rate_hz);
  put_u16(os, static_cast<std::uint16_t>(rec.n_channels()));
  put_u64(os, rec.n_samples);
  for (const auto& label : rec.channel_labels) {
    if (label.size() > 0xffff)
      throw data_error("channel label too long: " + label.substr(0, 32));
    put_u16(os, static_cast<std::uint16_t>(label.size()));
    os.write(label.data(), static_cast<std::streamsize>(label.size()));
  }
  for (float v : rec.samples) put_f32(os, v);
  os.flush();
  if (!os) throw data_error("write failed: " + path);
}

EegRecording load_recording(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open: " + path);

  unsigned char head[4 + 2 + 2 + 8 + 2 + 8];
  if (!get_bytes(is, head, sizeof(head)))
    throw data_error("truncated header: " + path);
  if (std::memcmp(head, kMagic.data(), 4) != 0)
    throw data_error("bad magic (not an .earg container): " + path);
  const std::uint16_t version = load_u16(head + 4);
  if (version != kFormatVersion)
    throw data_error("unsupported container version " +
                     std::to_string(version) + ": " + path);

  EegRecording rec;
  rec.subject_id = load_u16(head + 6);
  const std::uint64_t fs_bits = load_u64(head + 8);
  std::memcpy(&rec.sampling_rate_hz, &fs_bits, 8);
  const std::uint16_t n_channels = load_u16(head + 16);
  rec.n_samples = load_u64(head + 18);

  rec.channel_labels.reserve(n_channels);
  for (std::uint16_t c = 0; c < n_channels; ++c) {
    unsigned char len_b[2];
    if (!get_bytes(is, len_b, 2))
      throw data_error("channel count mismatch (labels truncated): " + path);
    const std::uint16_t len = load_u16(len_b);
    std::string label(len, '\0');
    if (len > 0 && !get_bytes(is, reinterpret_cast<unsigned char*>(label.data()), len))
      throw data_error("channel count mismatch (labels truncated): " + path);
    rec.channel_labels.push_back(std::move(label));
  }

  const std::size_t total = static_cast<std::size_t>(n_channels) * rec.n_samples;
  rec.samples.resize(total);
  std::vector<unsigned char> payload(total * 4);
  if (!get_bytes(is, payload.data(), payload.size()))
    throw data_error("truncated payload: " + path);
  for (std::size_t i = 0; i < total; ++i) {
    std::uint32_t bits = payload[4 * i] | (payload[4 * i + 1] << 8) |
                         (payload[4 * i + 2] << 16) |
                         (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
    std::memcpy(&rec.samples[i], &bits, 4);
  }
  rec.validate();
  return rec;
}

EegRecording load_recording_csv(const std::string& path, double fs,
                                int subject_id) {
  if (fs <= 0.0)
    throw config_error("sampling rate required for CSV input (use --fs)");
  std::ifstream is(path);
  if (!is) throw data_error("cannot open: " + path);

  std::string line;
  if (!std::getline(is, line)) throw data_error("empty CSV: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  EegRecording rec;
  rec.subject_id = subject_id;
  rec.sampling_rate_hz = fs;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) rec.channel_labels.push_back(cell);
  }
  const std::size_t n_channels = rec.channel_labels.size();
  if (n_channels == 0) throw data_error("CSV header has no columns: " + path);

  std::vector<std::vector<float>> columns(n_channels);
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= n_channels)
        throw data_error("CSV row " + std::to_string(row) +
                         " has too many columns: " + path);
      try {
        columns[col].push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw data_error("CSV row " + std::to_string(row) +
                         ": cannot parse value '" + cell + "'");
      }
      ++col;
    }
    if (col != n_channels)
      throw data_error("CSV row " + std::to_string(row) +
                       " has too few columns: " + path);
  }
  if (columns[0].empty()) throw data_error("CSV has no data rows: " + path);

  rec.n_samples = columns[0].size();
  rec.samples.resize(n_channels * rec.n_samples);
  for (std::size_t c = 0; c < n_channels; ++c)
    for (std::size_t i = 0; i < rec.n_samples; ++i)
      rec.samples[c * rec.n_samples + i] = columns[c][i];
  rec.validate();
  return rec;
}

EegRecording load_recording_auto(const std::string& path, double fs_hint,
                                 int subject_hint) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  is.close();
  if (std::memcmp(magic, kMagic.data(), 4) == 0) return load_recording(path);
  return load_recording_csv(path, fs_hint, subject_hint);
}

bool ar_coeffs_stable(std::span<const double> coeffs) {
  // Step-down (inverse Levinson) recursion: the polynomial is stable iff
  // every reflection coefficient has magnitude < 1.
  std::vector<double> a(coeffs.begin(), coeffs.end());
  for (std::size_t m = a.size(); m > 0; --m) {
    const double k = a[m - 1];
    if (!(std::abs(k) < 1.0)) return false;
    const double denom = 1.0 - k * k;
    std::vector<double> next(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i)
      next[i] = (a[i] - k * a[m - 2 - i]) / denom;
    a = std::move(next);
  }
  return true;
}

EegRecording generate_synthetic_subject(const SyntheticSubjectSpec& spec,
                                        double duration_s, double fs) {
  if (duration_s <= 0.0) throw config_error("synth: duration_s must be positive");
  if (fs <= 0.0) throw config_error("synth: fs must be positive");
  if (spec.noise_std < 0.0) throw config_error("synth: noise_std must be >= 0");
  if (spec.tone_amplitude < 0.0)
    throw config_error("synth: tone_amplitude must be >= 0");
  if (spec.ar_coeffs.empty()) throw config_error("synth: no channels in spec");
  for (std::size_t c = 0; c < spec.ar_coeffs.size(); ++c)
    if (!ar_coeffs_stable(spec.ar_coeffs[c]))
      throw numeric_error("synth: unstable AR coefficients on channel " +
                          std::to_string(c));

  const std::size_t n_channels = spec.ar_coeffs.size();
  const std::size_t n_samples =
      static_cast<std::size_t>(std::floor(duration_s * fs));
  if (n_samples < 1) throw config_error("synth: duration too short");

  EegRecording rec;
  rec.subject_id = spec.subject_id;
  rec.sampling_rate_hz = fs;
  if (n_channels <= ear_channel_labels().size()) {
    rec.channel_labels.assign(ear_channel_labels().begin(),
                              ear_channel_labels().begin() + n_channels);
  } else {
    for (std::size_t c = 0; c < n_channels; ++c)
      rec.channel_labels.push_back("CH" + std::to_string(c));
  }
  rec.n_samples = n_samples;
  rec.samples.resize(n_channels * n_samples);

  const double two_pi = 6.283185307179586476925286766559;
  for (std::size_t c = 0; c < n_channels; ++c) {
    const auto& a = spec.ar_coeffs[c];
    const std::size_t p = a.size();
    const std::size_t burn_in = 500 + 10 * p;
    RngStream rng(derive_seed(spec.rng_seed, "synth.channel", c));
    std::vector<double> history(p, 0.0);
    auto out = rec.channel(c);
    for (std::size_t n = 0; n < burn_in + n_samples; ++n) {
      double x = spec.noise_std * rng.normal();
      for (std::size_t i = 0; i < p; ++i) x -= a[i] * history[i];
      if (p > 0) {
        for (std::size_t i = p - 1; i > 0; --i) history[i] = history[i - 1];
        history[0] = x;
      }
      if (n >= burn_in) {
        const std::size_t t = n - burn_in;
        const double tone = spec.tone_amplitude *
                            std::sin(two_pi * spec.tone_freq_hz *
                                     static_cast<double>(t) / fs);
        out[t] = static_cast<float>(x + tone);
      }
    }
  }
  rec.validate();
  return rec;
}

std::vector<SyntheticSubjectSpec> default_cohort(std::size_t n_subjects,
                                                 std::uint64_t master_seed) {
  if (n_subjects == 0) throw config_error("synth: n_subjects must be >= 1");
  const std::size_t n_channels = ear_channel_labels().size();
  const double fs = 1000.0;
  const double two_pi = 6.283185307179586476925286766559;

  // Expands pole pairs (radius, freq) into monic polynomial coefficients;
  // roots inside the unit circle by construction.
  auto pair_coeffs = [&](double radius, double freq_hz) {
    const double theta = two_pi * freq_hz / fs;
    return std::array<double, 2>{-2.0 * radius * std::cos(theta),
                                 radius * radius};
  };
  auto multiply_factor = [](std::vector<double>& poly,
                            std::span<const double> factor) {
    // poly and factor hold a_1.. of monic polynomials (implicit leading 1).
    std::vector<double> out(poly.size() + factor.size(), 0.0);
    for (std::size_t i = 0; i < factor.size(); ++i) out[i] += factor[i];
    for (std::size_t i = 0; i < poly.size(); ++i) {
      out[i] += poly[i];
      for (std::size_t j = 0; j < factor.size(); ++j)
        out[i + j + 1] += poly[i] * factor[j];
    }
    poly = std::move(out);
  };

  std::vector<SyntheticSubjectSpec> cohort;
  cohort.reserve(n_subjects);
  for (std::size_t s = 0; s < n_subjects; ++s) {
    SyntheticSubjectSpec spec;
    spec.subject_id = static_cast<int>(s);
    spec.tone_freq_hz = 8.0 + 6.0 * static_cast<double>(s) /
                                  std::max<std::size_t>(n_subjects - 1, 1);
    spec.tone_amplitude = 0.7 + 0.12 * static_cast<double>(s % 6);
    spec.noise_std = 1.0 + 0.08 * static_cast<double>(s % 3);
    spec.rng_seed = derive_seed(master_seed, "synth.subject", s);

    const int order_cycle[3] = {2, 3, 4};
    const int order = order_cycle[s % 3];
    const double resonance_hz = 6.0 + 4.5 * static_cast<double>(s);
    const double radius = 0.90 + 0.01 * static_cast<double>(s % 4);

    spec.ar_coeffs.reserve(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
      // Small per-channel detuning so channels are correlated in character
      // but not identical.
      const double detune = 1.0 + 0.02 * static_cast<double>(c);
      std::vector<double> poly;
      auto first = pair_coeffs(radius, resonance_hz * detune);
      multiply_factor(poly, first);
      if (order == 3) {
        const double real_pole = 0.35 + 0.03 * static_cast<double>(c % 4);
        const double factor[1] = {-real_pole};
        multiply_factor(poly, factor);
      } else if (order == 4) {
        auto second = pair_coeffs(0.80, 2.4 * resonance_hz * detune);
        multiply_factor(poly, second);
      }
      spec.ar_coeffs.push_back(std::move(poly));
    }
    cohort.push_back(std::move(spec));
  }
  return cohort;
}

}  // namespace earid::dataio
