#include "earid/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "earid/error.hpp"

namespace earid::features {

namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT.
void fft_pow2(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

/// O(n^2) fallback for non-power-of-two sizes.
std::vector<cplx> dft_direct(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t f = 0; f < n; ++f) {
    cplx acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(f) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * cplx(std::cos(ang), std::sin(ang));
    }
    out[f] = acc;
  }
  return out;
}

double population_variance(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double acc = 0.0;
  for (double v : x) {
    const double d = v - mean;
    acc += d * d;
  }
  return acc / n;
}

std::vector<double> first_difference(std::span<const double> x) {
  std::vector<double> d(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

void append_csv_double(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

}  // namespace

void FeatureVector::validate() const {
  for (double v : values)
    if (!std::isfinite(v)) throw numeric_error("feature vector: non-finite value");
  double sum = 0.0;
  for (double v : soft_label) {
    if (!(v >= 0.0)) throw data_error("feature vector: negative label mass");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw data_error("feature vector: soft label does not sum to 1");
}

PsdEstimate welch_psd(std::span<const double> signal, const WelchConfig& cfg) {
  if (cfg.nperseg < 2) throw config_error("welch: nperseg must be >= 2");
  if (cfg.noverlap >= cfg.nperseg)
    throw config_error("welch: noverlap must be < nperseg");
  if (cfg.fs <= 0.0) throw config_error("welch: fs must be positive");
  if (signal.size() < cfg.nperseg)
    throw data_error("welch: signal shorter than nperseg");

  const std::size_t n = cfg.nperseg;
  const std::size_t hop = n - cfg.noverlap;
  const std::size_t k_segments = (signal.size() - cfg.noverlap) / hop;

  // periodic Hann
  std::vector<double> window(n);
  double win_sq_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                      static_cast<double>(i) /
                                      static_cast<double>(n)));
    win_sq_sum += window[i] * window[i];
  }
  const double scale = 1.0 / (cfg.fs * win_sq_sum);

  const std::size_t n_bins = n / 2 + 1;
  PsdEstimate psd;
  psd.freqs_hz.resize(n_bins);
  psd.power.assign(n_bins, 0.0);
  for (std::size_t f = 0; f < n_bins; ++f)
    psd.freqs_hz[f] = cfg.fs * static_cast<double>(f) / static_cast<double>(n);

  std::vector<cplx> buf(n);
  for (std::size_t k = 0; k < k_segments; ++k) {
    const double* seg = signal.data() + k * hop;
    for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(seg[i] * window[i], 0.0);
    std::vector<cplx> spec;
    if (is_pow2(n)) {
      fft_pow2(buf);
      spec = buf;
    } else {
      spec = dft_direct(buf);
    }
    for (std::size_t f = 0; f < n_bins; ++f) {
      double p = std::norm(spec[f]) * scale;
      const bool nyquist = (n % 2 == 0) && (f == n_bins - 1);
      if (f != 0 && !nyquist) p *= 2.0;  // one-sided folding
      psd.power[f] += p;
    }
  }
  const double inv_k = 1.0 / static_cast<double>(k_segments);
  for (double& p : psd.power) p *= inv_k;
  return psd;
}

std::vector<double> retain_psd_features(const PsdEstimate& psd,
                                        std::size_t n_keep) {
  if (n_keep == 0) throw config_error("retain_psd: empty feature slice");
  if (psd.power.size() < n_keep)
    throw data_error("retain_psd: PSD has fewer bins than n_keep");
  return {psd.power.begin(),
          psd.power.begin() + static_cast<std::ptrdiff_t>(n_keep)};
}

ArFeatures yule_walker(std::span<const double> signal, std::size_t order) {
  if (order < 1) throw config_error("yule_walker: order must be >= 1");
  if (signal.size() <= 10 * order)
    throw data_error("yule_walker: signal too short (need > 10 * order samples)");

  const std::size_t n = signal.size();
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);

  // biased autocovariances r[0..order]
  std::vector<double> r(order + 1, 0.0);
  for (std::size_t k = 0; k <= order; ++k) {
    double acc = 0.0;
    for (std::size_t t = k; t < n; ++t)
      acc += (signal[t] - mean) * (signal[t - k] - mean);
    r[k] = acc / static_cast<double>(n);
  }
  if (r[0] <= 0.0) throw data_error("yule_walker: zero variance input");

  // Levinson-Durbin in the predictor convention x(n) = sum phi_i x(n-i) + e;
  // reported coefficients are a_i = -phi_i.
  std::vector<double> phi(order, 0.0);
  std::vector<double> prev(order, 0.0);
  double err = r[0];
  for (std::size_t m = 1; m <= order; ++m) {
    double acc = r[m];
    for (std::size_t i = 1; i < m; ++i) acc -= prev[i - 1] * r[m - i];
    if (err <= 0.0)
      throw numeric_error("yule_walker: degenerate autocovariance sequence");
    const double k = acc / err;
    phi[m - 1] = k;
    for (std::size_t i = 1; i < m; ++i)
      phi[i - 1] = prev[i - 1] - k * prev[m - 1 - i];
    err *= (1.0 - k * k);
    std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(m),
              prev.begin());
  }

  ArFeatures out;
  out.coeffs.resize(order);
  for (std::size_t i = 0; i < order; ++i) out.coeffs[i] = -phi[i];
  out.residual_variance = std::max(err, 0.0);
  return out;
}

HjorthFeatures hjorth(std::span<const double> signal) {
  if (signal.size() < 3)
    throw data_error("hjorth: need at least 3 samples");
  const double var_x = population_variance(signal);
  if (var_x <= 0.0) throw data_error("hjorth: degenerate signal (zero variance)");

  const std::vector<double> dx = first_difference(signal);
  const double var_dx = population_variance(dx);
  if (var_dx <= 0.0)
    throw data_error("hjorth: degenerate signal (constant derivative)");

  const std::vector<double> ddx = first_difference(dx);
  const double var_ddx = population_variance(ddx);

  HjorthFeatures h;
  h.activity = var_x;
  h.mobility = std::sqrt(var_dx / var_x);
  h.complexity = std::sqrt(var_ddx / var_dx) / h.mobility;
  return h;
}

double spectral_entropy(const PsdEstimate& psd) {
  double total = 0.0;
  for (double p : psd.power) {
    if (!(p >= 0.0)) throw numeric_error("entropy: negative PSD value");
    total += p;
  }
  if (total <= 0.0) throw data_error("entropy: all-zero PSD");
  double h = 0.0;
  for (double p : psd.power) {
    if (p <= 0.0) continue;
    const double q = p / total;
    h -= q * std::log2(q);
  }
  return h;
}

FeatureVector extract_features(const preprocess::Segment& seg,
                               const FeatureConfig& cfg,
                               std::size_t n_classes) {
  if (seg.n_channels == 0 || seg.window_len == 0)
    throw data_error("extract: empty segment");
  if (n_classes < 1) throw config_error("extract: n_classes must be >= 1");
  if (seg.subject_id < 0 ||
      static_cast<std::size_t>(seg.subject_id) >= n_classes)
    throw data_error("extract: subject_id " + std::to_string(seg.subject_id) +
                     " outside the " + std::to_string(n_classes) +
                     "-class label space");

  FeatureVector fv;
  fv.values.reserve(seg.n_channels * cfg.per_channel());
  for (std::size_t c = 0; c < seg.n_channels; ++c) {
    auto x = seg.channel(c);
    if (population_variance(x) <= 0.0)
      throw data_error("extract: degenerate channel " + std::to_string(c));

    const PsdEstimate psd = welch_psd(x, cfg.welch);
    const std::vector<double> psd_kept = retain_psd_features(psd, cfg.psd_keep);
    fv.values.insert(fv.values.end(), psd_kept.begin(), psd_kept.end());

    const ArFeatures ar = yule_walker(x, cfg.ar_order);
    fv.values.insert(fv.values.end(), ar.coeffs.begin(), ar.coeffs.end());

    const HjorthFeatures h = hjorth(x);
    fv.values.push_back(h.activity);
    fv.values.push_back(h.mobility);
    fv.values.push_back(h.complexity);

    fv.values.push_back(spectral_entropy(psd));
  }

  fv.soft_label.assign(n_classes, 0.0);
  fv.soft_label[static_cast<std::size_t>(seg.subject_id)] = 1.0;
  fv.subject_id = seg.subject_id;
  fv.validate();
  return fv;
}

Standardizer fit_standardizer(const std::vector<FeatureVector>& train) {
  if (train.empty()) throw data_error("standardizer: empty training set");
  const std::size_t dim = train[0].values.size();
  Standardizer s;
  s.mean.assign(dim, 0.0);
  s.stddev.assign(dim, 0.0);
  for (const auto& fv : train) {
    if (fv.values.size() != dim)
      throw data_error("standardizer: inconsistent feature dimensions");
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] += fv.values[i];
  }
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (double& m : s.mean) m *= inv_n;
  for (const auto& fv : train)
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = fv.values[i] - s.mean[i];
      s.stddev[i] += d * d;
    }
  for (double& v : s.stddev) v = std::max(std::sqrt(v * inv_n), 1e-8);
  return s;
}

FeatureVector apply_standardizer(const Standardizer& s,
                                 const FeatureVector& fv) {
  if (fv.values.size() != s.mean.size())
    throw data_error("standardizer: dimension mismatch");
  FeatureVector out = fv;
  for (std::size_t i = 0; i < fv.values.size(); ++i)
    out.values[i] = (fv.values[i] - s.mean[i]) / s.stddev[i];
  return out;
}

void save_features_csv(const std::vector<FeatureVector>& dataset,
                       const std::string& path) {
  if (dataset.empty()) throw data_error("features csv: empty dataset");
  const std::size_t dim = dataset[0].values.size();
  const std::size_t n_classes = dataset[0].soft_label.size();

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw data_error("cannot open for writing: " + path);

  std::string line;
  for (std::size_t i = 0; i < dim; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "f%03zu", i);
    line += buf;
    line += ',';
  }
  for (std::size_t k = 0; k < n_classes; ++k) {
    line += 'y';
    line += std::to_string(k);
    line += ',';
  }
  line += "subject_id\n";
  os << line;

  for (const auto& fv : dataset) {
    if (fv.values.size() != dim || fv.soft_label.size() != n_classes)
      throw data_error("features csv: inconsistent row shape");
    line.clear();
    for (double v : fv.values) {
      append_csv_double(line, v);
      line += ',';
    }
    for (double v : fv.soft_label) {
      append_csv_double(line, v);
      line += ',';
    }
    line += std::to_string(fv.subject_id);
    line += '\n';
    os << line;
  }
  os.flush();
  if (!os) throw data_error("write failed: " + path);
}

std::vector<FeatureVector> load_features_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw data_error("empty features csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::size_t dim = 0, n_classes = 0;
  {
    std::stringstream header(line);
    std::string cell;
    bool saw_subject = false;
    while (std::getline(header, cell, ',')) {
      if (cell.size() > 1 && cell[0] == 'f' && std::isdigit(cell[1]))
        ++dim;
      else if (cell.size() > 1 && cell[0] == 'y' && std::isdigit(cell[1]))
        ++n_classes;
      else if (cell == "subject_id")
        saw_subject = true;
      else
        throw data_error("features csv: unexpected column '" + cell + "'");
    }
    if (dim == 0 || n_classes == 0 || !saw_subject)
      throw data_error("features csv: malformed header: " + path);
  }

  std::vector<FeatureVector> dataset;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    FeatureVector fv;
    fv.values.reserve(dim);
    fv.soft_label.reserve(n_classes);
    std::size_t col = 0;
    const std::size_t total = dim + n_classes + 1;
    while (std::getline(ss, cell, ',')) {
      if (col >= total)
        throw data_error("features csv row " + std::to_string(row) +
                         ": too many columns");
      double v;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw data_error("features csv row " + std::to_string(row) +
                         ": bad value '" + cell + "'");
      }
      if (col < dim)
        fv.values.push_back(v);
      else if (col < dim + n_classes)
        fv.soft_label.push_back(v);
      else
        fv.subject_id = static_cast<int>(v);
      ++col;
    }
    if (col != total)
      throw data_error("features csv row " + std::to_string(row) +
                       ": too few columns");
    fv.validate();
    dataset.push_back(std::move(fv));
  }
  if (dataset.empty()) throw data_error("features csv has no rows: " + path);
  return dataset;
}

void save_standardizer(const Standardizer& s, const std::string& path) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["mean"] = s.mean;
  doc["stddev"] = s.stddev;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw data_error("cannot open for writing: " + path);
  os << doc.dump(2) << '\n';
}

Standardizer load_standardizer(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open: " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const std::exception& e) {
    throw data_error("standardizer parse error: " + std::string(e.what()));
  }
  Standardizer s;
  try {
    s.mean = doc.at("mean").get<std::vector<double>>();
    s.stddev = doc.at("stddev").get<std::vector<double>>();
  } catch (const std::exception& e) {
    throw data_error("standardizer schema error: " + std::string(e.what()));
  }
  if (s.mean.size() != s.stddev.size())
    throw data_error("standardizer: mean/stddev length mismatch");
  for (double v : s.stddev)
    if (!(v > 0.0)) throw data_error("standardizer: non-positive stddev");
  return s;
}

}  // namespace earid::features
