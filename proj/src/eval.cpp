#include "earid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "earid/error.hpp"
#include "earid/rng.hpp"

namespace earid::eval {

namespace {

/// Largest-remainder apportionment of n into three parts.
std::array<std::size_t, 3> apportion(std::size_t n,
                                     const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = ratios[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(std::floor(exact));
    remainders[s] = exact - std::floor(exact);
    assigned += counts[s];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    return a < b;  // deterministic tie-break toward train
  });
  for (std::size_t left = n - assigned, i = 0; left > 0; --left, ++i)
    ++counts[order[i % 3]];
  return counts;
}

}  // namespace

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw config_error("split: ratios must be non-negative");
    if (!allow_empty && r <= 0.0)
      throw config_error("split: zero ratio requires allow_empty");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw config_error("split: ratios must sum to 1");
}

SplitSpec::Strategy strategy_from_string(const std::string& name) {
  if (name == "random_segment") return SplitSpec::Strategy::random_segment;
  if (name == "block_contiguous") return SplitSpec::Strategy::block_contiguous;
  throw config_error("split: unknown strategy '" + name + "'");
}

std::string strategy_to_string(SplitSpec::Strategy s) {
  return s == SplitSpec::Strategy::random_segment ? "random_segment"
                                                  : "block_contiguous";
}

std::uint64_t SplitIndices::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  mix(0x7472);  // section markers keep (train=[1],val=[]) != (train=[],val=[1])
  for (auto i : train) mix(i + 1);
  mix(0x76616c);
  for (auto i : val) mix(i + 1);
  mix(0x74657374);
  for (auto i : test) mix(i + 1);
  return h;
}

SplitIndices split_dataset(const std::vector<SplitItem>& items,
                           const SplitSpec& spec) {
  spec.validate();
  if (items.empty()) throw data_error("split: no items");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i)
    by_class[items[i].label].push_back(i);

  for (auto& [label, indices] : by_class) {
    if (!spec.allow_empty && indices.size() < 10)
      throw data_error("split: class " + std::to_string(label) +
                       " has only " + std::to_string(indices.size()) +
                       " items (need >= 10)");
  }

  SplitIndices out;
  for (auto& [label, indices] : by_class) {
    if (spec.strategy == SplitSpec::Strategy::random_segment) {
      RngStream rng(derive_seed(spec.rng_seed, "split.class",
                                static_cast<std::uint64_t>(label)));
      for (std::size_t i = indices.size(); i > 1; --i)
        std::swap(indices[i - 1], indices[rng.uniform_index(i)]);
    } else {
      // contiguous runs: order by recording, then by position inside it
      std::sort(indices.begin(), indices.end(),
                [&](std::size_t a, std::size_t b) {
                  if (items[a].parent_index != items[b].parent_index)
                    return items[a].parent_index < items[b].parent_index;
                  return items[a].source_offset < items[b].source_offset;
                });
    }
    const auto counts = apportion(indices.size(), spec.ratios);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) out.train.push_back(indices[pos++]);
    for (std::size_t i = 0; i < counts[1]; ++i) out.val.push_back(indices[pos++]);
    for (std::size_t i = 0; i < counts[2]; ++i) out.test.push_back(indices[pos++]);
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json doc;
  doc["confusion"] = confusion;
  doc["overall_accuracy"] = overall_accuracy;
  doc["per_class_accuracy"] = per_class_accuracy;
  doc["n_test"] = n_test;
  return doc.dump(2) + "\n";
}

std::string EvalReport::render_text() const {
  std::ostringstream os;
  const std::size_t k = confusion.size();
  os << "confusion matrix (rows = true, cols = predicted)\n";
  os << "      ";
  for (std::size_t c = 0; c < k; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%8zu", c);
    os << buf;
  }
  os << '\n';
  for (std::size_t r = 0; r < k; ++r) {
    char head[32];
    std::snprintf(head, sizeof(head), "S%-5zu", r);
    os << head;
    for (std::size_t c = 0; c < k; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%8lld",
                    static_cast<long long>(confusion[r][c]));
      os << buf;
    }
    char acc[32];
    std::snprintf(acc, sizeof(acc), "  | %.4f", per_class_accuracy[r]);
    os << acc << '\n';
  }
  char overall[64];
  std::snprintf(overall, sizeof(overall),
                "overall accuracy %.4f on %zu test items\n", overall_accuracy,
                n_test);
  os << overall;
  return os.str();
}

EvalReport evaluate(const model::Mlp& m, const features::Standardizer& s,
                    const std::vector<features::FeatureVector>& test) {
  if (test.empty()) throw data_error("evaluate: empty test set");
  const std::size_t k = static_cast<std::size_t>(m.cfg.n_classes);

  EvalReport report;
  report.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  report.n_test = test.size();

  for (const auto& fv : test) {
    if (fv.soft_label.size() != k)
      throw data_error("evaluate: label arity mismatch");
    const auto standardized = features::apply_standardizer(s, fv);
    const auto [pred, probs] = model::predict(m, standardized);
    const std::size_t truth = static_cast<std::size_t>(
        std::max_element(fv.soft_label.begin(), fv.soft_label.end()) -
        fv.soft_label.begin());
    ++report.confusion[truth][static_cast<std::size_t>(pred)];
  }

  std::int64_t trace = 0;
  report.per_class_accuracy.assign(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    std::int64_t row_sum = 0;
    for (std::size_t c = 0; c < k; ++c) row_sum += report.confusion[r][c];
    trace += report.confusion[r][r];
    report.per_class_accuracy[r] =
        row_sum > 0 ? static_cast<double>(report.confusion[r][r]) /
                          static_cast<double>(row_sum)
                    : 0.0;
  }
  report.overall_accuracy =
      static_cast<double>(trace) / static_cast<double>(report.n_test);
  return report;
}

std::string config_signature(const model::ModelConfig& cfg) {
  std::string sig;
  for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
    if (i > 0) sig += '-';
    sig += std::to_string(cfg.hidden_dims[i]);
  }
  return sig;
}

std::vector<AblationRow> run_ablation(
    const AblationInputs& inputs,
    const std::vector<model::ModelConfig>& configs,
    const std::vector<double>& class_weights) {
  if (configs.empty()) throw config_error("ablation: empty config list");

  const features::Standardizer standardizer =
      features::fit_standardizer(inputs.train);
  std::vector<features::FeatureVector> train_std(inputs.train.size());
  std::vector<features::FeatureVector> val_std(inputs.val.size());
  for (std::size_t i = 0; i < inputs.train.size(); ++i)
    train_std[i] = features::apply_standardizer(standardizer, inputs.train[i]);
  for (std::size_t i = 0; i < inputs.val.size(); ++i)
    val_std[i] = features::apply_standardizer(standardizer, inputs.val[i]);

  std::vector<AblationRow> rows;
  rows.reserve(configs.size());
  for (const auto& cfg : configs) {
    const auto result = model::train(train_std, val_std, cfg, class_weights);
    const EvalReport report =
        evaluate(result.mlp, standardizer, inputs.test);
    AblationRow row;
    row.config = config_signature(cfg);
    row.accuracy = report.overall_accuracy;
    row.split_hash = inputs.split_hash;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string csv = "config,accuracy\n";
  for (const auto& row : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", row.accuracy);
    csv += row.config;
    csv += ',';
    csv += buf;
    csv += '\n';
  }
  return csv;
}

}  // namespace earid::eval
