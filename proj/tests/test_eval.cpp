#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "earid/augment.hpp"
#include "earid/error.hpp"
#include "earid/eval.hpp"
#include "earid/rng.hpp"

using namespace earid;
using eval::SplitSpec;

namespace {

std::vector<eval::SplitItem> balanced_items(std::size_t per_class,
                                            std::size_t k,
                                            std::size_t parents_per_class = 1) {
  std::vector<eval::SplitItem> items;
  for (std::size_t cls = 0; cls < k; ++cls)
    for (std::size_t i = 0; i < per_class; ++i)
      items.push_back({static_cast<int>(cls),
                       cls * parents_per_class + i % parents_per_class,
                       (i / parents_per_class) * 1000});
  return items;
}

std::vector<features::FeatureVector> blob_dataset(int per_class, int k,
                                                  int dim, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<features::FeatureVector> out;
  for (int cls = 0; cls < k; ++cls) {
    for (int i = 0; i < per_class; ++i) {
      features::FeatureVector fv;
      fv.values.resize(dim);
      for (int d = 0; d < dim; ++d)
        fv.values[d] = rng.normal() + (d % k == cls ? 2.5 : 0.0);
      fv.soft_label.assign(k, 0.0);
      fv.soft_label[static_cast<std::size_t>(cls)] = 1.0;
      fv.subject_id = cls;
      out.push_back(std::move(fv));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("stratified split: 1000 per class x 6 -> 800/100/100 per class") {
  const auto items = balanced_items(1000, 6);
  SplitSpec spec;
  spec.rng_seed = 9;
  const auto idx = eval::split_dataset(items, spec);
  CHECK(idx.train.size() == 4800);
  CHECK(idx.val.size() == 600);
  CHECK(idx.test.size() == 600);

  std::map<int, int> train_counts;
  for (auto i : idx.train) ++train_counts[items[i].label];
  for (const auto& [cls, count] : train_counts) CHECK(count == 800);
}

TEST_CASE("split is a partition") {
  const auto items = balanced_items(53, 3);  // odd size exercises rounding
  SplitSpec spec;
  spec.rng_seed = 10;
  const auto idx = eval::split_dataset(items, spec);

  std::set<std::size_t> seen;
  for (const auto* part : {&idx.train, &idx.val, &idx.test})
    for (auto i : *part) {
      CHECK(seen.insert(i).second);  // pairwise disjoint
      CHECK(i < items.size());
    }
  CHECK(seen.size() == items.size());  // union covers everything
}

TEST_CASE("split edge cases") {
  SUBCASE("ratios must sum to one") {
    SplitSpec spec;
    spec.ratios = {0.8, 0.1, 0.2};
    CHECK_THROWS_WITH_AS(eval::split_dataset(balanced_items(20, 2), spec),
                         doctest::Contains("split"), Error);
  }
  SUBCASE("(1,0,0) needs the explicit allow_empty flag") {
    SplitSpec spec;
    spec.ratios = {1.0, 0.0, 0.0};
    CHECK_THROWS_AS(eval::split_dataset(balanced_items(20, 2), spec), Error);
    spec.allow_empty = true;
    const auto idx = eval::split_dataset(balanced_items(20, 2), spec);
    CHECK(idx.train.size() == 40);
    CHECK(idx.val.empty());
    CHECK(idx.test.empty());
  }
  SUBCASE("a class with fewer than 10 items is rejected") {
    auto items = balanced_items(20, 2);
    items.push_back({2, 0, 0});
    SplitSpec spec;
    CHECK_THROWS_WITH_AS(eval::split_dataset(items, spec),
                         doctest::Contains("class 2"), Error);
  }
}

TEST_CASE("block_contiguous assigns monotone offset runs per recording") {
  // two recordings per class, offsets 0,1000,...; within any recording,
  // all train offsets precede all val offsets precede all test offsets,
  // so adjacent overlapping windows cannot straddle a split boundary more
  // than once
  const auto items = balanced_items(40, 2, 2);
  SplitSpec spec;
  spec.strategy = SplitSpec::Strategy::block_contiguous;
  const auto idx = eval::split_dataset(items, spec);

  std::map<std::size_t, std::array<std::vector<std::size_t>, 3>> by_parent;
  for (auto i : idx.train) by_parent[items[i].parent_index][0].push_back(items[i].source_offset);
  for (auto i : idx.val) by_parent[items[i].parent_index][1].push_back(items[i].source_offset);
  for (auto i : idx.test) by_parent[items[i].parent_index][2].push_back(items[i].source_offset);

  std::size_t parents_with_test = 0;
  for (auto& [parent, splits] : by_parent) {
    for (auto& offsets : splits) std::sort(offsets.begin(), offsets.end());
    if (!splits[2].empty()) ++parents_with_test;
    // monotone: max(train) < min(val) < ... for the splits present
    if (!splits[0].empty() && !splits[1].empty())
      CHECK(splits[0].back() < splits[1].front());
    if (!splits[1].empty() && !splits[2].empty())
      CHECK(splits[1].back() < splits[2].front());
    if (!splits[0].empty() && !splits[2].empty())
      CHECK(splits[0].back() < splits[2].front());
    // each split occupies one contiguous run of the recording's offsets
    for (const auto& offsets : splits)
      for (std::size_t i = 1; i < offsets.size(); ++i)
        CHECK(offsets[i] - offsets[i - 1] == 1000);
  }
  CHECK(parents_with_test > 0);

  // and the split is still exactly stratified per class
  std::map<int, int> test_counts;
  for (auto i : idx.test) ++test_counts[items[i].label];
  for (const auto& [cls, count] : test_counts) CHECK(count == 4);
}

TEST_CASE("random_segment split depends on the seed, deterministically") {
  const auto items = balanced_items(50, 2);
  SplitSpec a;
  a.rng_seed = 1;
  SplitSpec b;
  b.rng_seed = 2;
  const auto split_a = eval::split_dataset(items, a);
  const auto split_a2 = eval::split_dataset(items, a);
  const auto split_b = eval::split_dataset(items, b);
  CHECK(split_a.hash() == split_a2.hash());
  CHECK(split_a.hash() != split_b.hash());
}

TEST_CASE("evaluate: constant classifier and report invariants") {
  // zero output layer ties every logit; argmax tie-break predicts class 0
  model::ModelConfig cfg;
  cfg.input_dim = 12;
  cfg.hidden_dims = {8};
  cfg.n_classes = 6;
  cfg.rng_seed = 4;
  auto m = model::init_mlp(cfg);
  m.output.w.setZero();
  m.output.b.setZero();

  features::Standardizer s;
  s.mean.assign(12, 0.0);
  s.stddev.assign(12, 1.0);

  const auto test_set = blob_dataset(10, 6, 12, 8);
  const auto report = eval::evaluate(m, s, test_set);

  CHECK(report.n_test == 60);
  CHECK(report.overall_accuracy == doctest::Approx(1.0 / 6.0));
  std::int64_t total = 0;
  for (std::size_t r = 0; r < 6; ++r) {
    std::int64_t row_sum = 0;
    for (std::size_t c = 0; c < 6; ++c) {
      total += report.confusion[r][c];
      row_sum += report.confusion[r][c];
      if (c != 0) CHECK(report.confusion[r][c] == 0);  // all mass in column 0
    }
    CHECK(row_sum == 10);  // row sums = per-class test counts
  }
  CHECK(total == static_cast<std::int64_t>(report.n_test));
  CHECK(report.per_class_accuracy[0] == doctest::Approx(1.0));
  for (std::size_t k = 1; k < 6; ++k)
    CHECK(report.per_class_accuracy[k] == doctest::Approx(0.0));

  // repeated evaluation agrees exactly
  const auto again = eval::evaluate(m, s, test_set);
  CHECK(again.confusion == report.confusion);
  CHECK(again.to_json() == report.to_json());
}

TEST_CASE("evaluate: a trained model reaches a diagonal confusion matrix") {
  model::ModelConfig cfg;
  cfg.input_dim = 12;
  cfg.hidden_dims = {32, 16};
  cfg.n_classes = 4;
  cfg.dropout_rate = 0.1;
  cfg.batch_size = 32;
  cfg.max_epochs = 50;
  cfg.early_stop_patience = 10;
  cfg.rng_seed = 6;

  auto train_set = blob_dataset(60, 4, 12, 1);
  const auto val_set = blob_dataset(15, 4, 12, 2);
  const auto test_set = blob_dataset(15, 4, 12, 3);

  const auto standardizer = features::fit_standardizer(train_set);
  std::vector<features::FeatureVector> train_std, val_std;
  for (const auto& fv : train_set)
    train_std.push_back(features::apply_standardizer(standardizer, fv));
  for (const auto& fv : val_set)
    val_std.push_back(features::apply_standardizer(standardizer, fv));

  const auto result = model::train(train_std, val_std, cfg, {1, 1, 1, 1});
  const auto report = eval::evaluate(result.mlp, standardizer, test_set);
  CHECK(report.overall_accuracy >= 0.95);

  if (report.overall_accuracy == 1.0) {
    for (std::size_t r = 0; r < 4; ++r)
      CHECK(report.confusion[r][r] == 15);
  }
  CHECK(report.to_json().find("overall_accuracy") != std::string::npos);
  CHECK(report.render_text().find("overall accuracy") != std::string::npos);

  SUBCASE("empty test set is an error") {
    CHECK_THROWS_AS(eval::evaluate(result.mlp, standardizer, {}), Error);
  }
}

TEST_CASE("ablation: paired rows on a shared split") {
  eval::AblationInputs inputs;
  inputs.train = blob_dataset(50, 3, 9, 11);
  inputs.val = blob_dataset(12, 3, 9, 12);
  inputs.test = blob_dataset(12, 3, 9, 13);
  inputs.split_hash = 0xfeedULL;

  model::ModelConfig base;
  base.input_dim = 9;
  base.n_classes = 3;
  base.dropout_rate = 0.1;
  base.batch_size = 25;
  base.max_epochs = 30;
  base.early_stop_patience = 8;
  base.rng_seed = 21;

  std::vector<model::ModelConfig> configs;
  for (const auto& dims :
       std::vector<std::vector<int>>{{16, 8}, {32, 16}, {8, 8, 8}}) {
    auto cfg = base;
    cfg.hidden_dims = dims;
    configs.push_back(cfg);
  }

  const auto rows = eval::run_ablation(inputs, configs, {1, 1, 1});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].config == "16-8");
  CHECK(rows[1].config == "32-16");
  CHECK(rows[2].config == "8-8-8");
  for (const auto& row : rows) {
    CHECK(row.split_hash == 0xfeedULL);
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
  }

  const auto csv = eval::ablation_csv(rows);
  CHECK(csv.rfind("config,accuracy\n", 0) == 0);
  CHECK(csv.find("32-16,") != std::string::npos);

  SUBCASE("a single config row equals a direct evaluate") {
    const auto one = eval::run_ablation(inputs, {configs[0]}, {1, 1, 1});
    REQUIRE(one.size() == 1);
    CHECK(one[0].accuracy == rows[0].accuracy);
  }
  SUBCASE("empty config list is rejected") {
    CHECK_THROWS_AS(eval::run_ablation(inputs, {}, {1, 1, 1}), Error);
  }
}
