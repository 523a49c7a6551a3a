#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "earid/config.hpp"
#include "earid/error.hpp"
#include "earid/pipeline.hpp"

using namespace earid;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / "earid_test_pipeline" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return {std::istreambuf_iterator<char>(is), {}};
}

/// Small but real configuration: 6 subjects x 61 s -> 60 windows each.
pipeline::PipelineConfig small_config(std::uint64_t seed = 11) {
  auto cfg = pipeline::PipelineConfig::defaults(seed);
  cfg.synth.duration_s = 61.0;
  cfg.model.max_epochs = 30;
  cfg.model.early_stop_patience = 8;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config: defaults validate and round-trip through JSON") {
  const auto cfg = pipeline::PipelineConfig::defaults(123);
  cfg.validate();
  CHECK(cfg.derived_input_dim() == 272);
  CHECK(cfg.model.input_dim == 272);

  const auto doc = cfg.to_json();
  const auto back = pipeline::PipelineConfig::from_json(doc);
  CHECK(back.seed == cfg.seed);
  CHECK(back.augment.rng_seed == cfg.augment.rng_seed);
  CHECK(back.model.hidden_dims == cfg.model.hidden_dims);
}

TEST_CASE("config: master seed fans out to distinct stage seeds") {
  const auto cfg = pipeline::PipelineConfig::defaults(5);
  CHECK(cfg.augment.rng_seed != cfg.model.rng_seed);
  CHECK(cfg.model.rng_seed != cfg.split.rng_seed);

  // pinning a section seed wins over derivation
  nlohmann::json doc;
  doc["seed"] = 5;
  doc["model"] = {{"rng_seed", 777}};
  const auto pinned = pipeline::PipelineConfig::from_json(doc);
  CHECK(pinned.model.rng_seed == 777);
  CHECK(pinned.augment.rng_seed == cfg.augment.rng_seed);
}

TEST_CASE("config: unknown keys are rejected") {
  nlohmann::json doc;
  doc["sede"] = 42;
  CHECK_THROWS_WITH_AS(pipeline::PipelineConfig::from_json(doc),
                       doctest::Contains("unknown key 'sede'"), Error);

  nlohmann::json nested;
  nested["model"] = {{"hidden_dim", nlohmann::json::array({1, 2})}};
  CHECK_THROWS_WITH_AS(pipeline::PipelineConfig::from_json(nested),
                       doctest::Contains("unknown key 'hidden_dim'"), Error);
}

TEST_CASE("config: validation names the failing section") {
  nlohmann::json doc;
  doc["split"] = {{"ratios", nlohmann::json::array({0.7, 0.2, 0.2})}};
  try {
    pipeline::PipelineConfig::from_json(doc);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.status() == Status::invalid_config);
    CHECK(std::string(e.what()).find("split") != std::string::npos);
  }

  nlohmann::json dim;
  dim["model"] = {{"input_dim", 100}};
  CHECK_THROWS_WITH_AS(pipeline::PipelineConfig::from_json(dim),
                       doctest::Contains("input_dim"), Error);
}

TEST_CASE("cmd_synth: manifest, file count, byte determinism") {
  auto cfg = small_config();
  cfg.synth.duration_s = 5.0;

  const auto dir_a = temp_dir("synth_a");
  const auto files_a = pipeline::cmd_synth(cfg, dir_a);
  REQUIRE(files_a.size() == 6);
  CHECK(fs::exists(fs::path(dir_a) / "manifest.json"));

  const auto dir_b = temp_dir("synth_b");
  const auto files_b = pipeline::cmd_synth(cfg, dir_b);
  for (std::size_t i = 0; i < files_a.size(); ++i)
    CHECK(read_file(files_a[i]) == read_file(files_b[i]));

  SUBCASE("single subject") {
    auto one = cfg;
    one.synth.n_subjects = 1;
    one.model.n_classes = 2;  // irrelevant for synth
    const auto dir = temp_dir("synth_one");
    CHECK(pipeline::cmd_synth(one, dir).size() == 1);
  }
}

TEST_CASE("full pipeline on a small cohort: artifacts, hygiene, determinism") {
  auto cfg = small_config();
  const auto data_dir = temp_dir("data");
  pipeline::cmd_synth(cfg, data_dir);

  const auto out1 = temp_dir("run1");
  const auto result = pipeline::cmd_pipeline(cfg, data_dir, out1);

  // small-scale sanity; the full-scale bar lives in the acceptance suite
  CHECK(result.report.overall_accuracy >= 0.7);
  CHECK(result.report.n_test == 36);  // 6 per subject at 60 windows each

  for (const char* name : {"model.json", "standardizer.json", "report.json",
                           "report.txt", "history.csv", "audit.json"})
    CHECK(fs::exists(fs::path(out1) / name));

  SUBCASE("augmentation and standardizer fitting never touch val/test") {
    CHECK(result.audit.augment_reads[pipeline::kTrain] == 288);  // 48 * 6
    CHECK(result.audit.augment_reads[pipeline::kVal] == 0);
    CHECK(result.audit.augment_reads[pipeline::kTest] == 0);
    CHECK(result.audit.standardizer_fit_reads[pipeline::kTrain] ==
          result.n_train_features);
    CHECK(result.audit.standardizer_fit_reads[pipeline::kVal] == 0);
    CHECK(result.audit.standardizer_fit_reads[pipeline::kTest] == 0);
    CHECK(result.n_train_features >= 6 * 288);
  }

  SUBCASE("rerun with the same config is byte-identical") {
    const auto out2 = temp_dir("run2");
    pipeline::cmd_pipeline(cfg, data_dir, out2);
    for (const char* name : {"report.json", "history.csv", "model.json",
                             "standardizer.json", "audit.json"})
      CHECK(read_file((fs::path(out1) / name).string()) ==
            read_file((fs::path(out2) / name).string()));
  }

  SUBCASE("a different seed produces a different model") {
    auto other = small_config(909);
    const auto out3 = temp_dir("run3");
    pipeline::cmd_pipeline(other, data_dir, out3);
    CHECK(read_file((fs::path(out1) / "model.json").string()) !=
          read_file((fs::path(out3) / "model.json").string()));
  }
}

TEST_CASE("stage-level commands chain together") {
  auto cfg = small_config(21);
  cfg.synth.duration_s = 31.0;  // 30 windows per subject
  cfg.augment.target_multiplier = 2.0;
  cfg.model.max_epochs = 15;

  const auto data_dir = temp_dir("chain_data");
  pipeline::cmd_synth(cfg, data_dir);

  SUBCASE("preprocess writes loadable filtered recordings") {
    const auto out = temp_dir("chain_prep");
    const auto files = pipeline::cmd_preprocess(cfg, data_dir, out);
    REQUIRE(files.size() == 6);
    const auto rec = dataio::load_recording(files[0]);
    CHECK(rec.n_channels() == 8);
    CHECK(rec.n_samples == 31000);
  }

  SUBCASE("extract writes one row per window") {
    const auto out = temp_dir("chain_extract");
    const std::string csv = out + "/features.csv";
    pipeline::cmd_extract(cfg, data_dir, csv);
    const auto rows = features::load_features_csv(csv);
    CHECK(rows.size() == 6 * 30);
    CHECK(rows[0].values.size() == 272);
  }

  SUBCASE("augment -> train -> eval round trip") {
    const auto aug_dir = temp_dir("chain_aug");
    pipeline::cmd_augment(cfg, data_dir, aug_dir);
    for (const char* name : {"features_train.csv", "features_val.csv",
                             "features_test.csv", "split.json"})
      CHECK(fs::exists(fs::path(aug_dir) / name));

    const auto train_dir = temp_dir("chain_train");
    const auto history = pipeline::cmd_train(
        cfg, aug_dir + "/features_train.csv", aug_dir + "/features_val.csv",
        train_dir);
    CHECK(!history.epochs.empty());

    const std::string report_path = train_dir + "/report.json";
    const auto report = pipeline::cmd_eval(
        cfg, train_dir + "/model.json", train_dir + "/standardizer.json",
        aug_dir + "/features_test.csv", report_path);
    CHECK(report.n_test == 18);  // 3 per subject at 30 windows
    CHECK(fs::exists(report_path));
  }
}

TEST_CASE("errors carry the stage name and the right category") {
  auto cfg = small_config();
  const auto empty = temp_dir("empty_inputs");
  try {
    pipeline::cmd_pipeline(cfg, empty, temp_dir("never"));
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.status() == Status::data_error);
    CHECK(std::string(e.what()).find("[preprocess]") != std::string::npos);
  }
}

TEST_CASE("CSV recordings: subject from file stem, fs from config") {
  auto cfg = small_config();
  cfg.io.csv_fs = 500.0;
  const auto dir = temp_dir("csv_in");
  const std::string path = dir + "/subject_03.csv";
  {
    std::ofstream os(path);
    os << "LF,LB\n";
    for (int i = 0; i < 100; ++i) os << i * 0.5 << "," << i * 0.25 << "\n";
  }
  const auto rec = pipeline::load_input_recording(cfg, path);
  CHECK(rec.subject_id == 3);
  CHECK(rec.sampling_rate_hz == 500.0);
  CHECK(rec.n_samples == 100);

  const std::string unnamed = dir + "/mystery.csv";
  std::ofstream(unnamed) << "LF\n1.0\n";
  CHECK_THROWS_WITH_AS(pipeline::load_input_recording(cfg, unnamed),
                       doctest::Contains("subject id"), Error);
}

TEST_CASE("ablation harness emits measured and reference accuracies") {
  auto cfg = small_config(31);
  cfg.synth.duration_s = 41.0;
  cfg.augment.target_multiplier = 1.0;  // keep the unit test fast
  cfg.model.max_epochs = 12;
  cfg.model.early_stop_patience = 4;
  cfg.ablation.hidden_dims = {{256, 128, 64, 32}, {32, 16}};
  cfg.ablation.split_strategies = {"random_segment", "block_contiguous"};

  const auto data_dir = temp_dir("ablate_data");
  pipeline::cmd_synth(cfg, data_dir);
  const auto out_dir = temp_dir("ablate_out");
  pipeline::cmd_ablate(cfg, data_dir, out_dir + "/ablation.csv");

  CHECK(fs::exists(out_dir + "/ablation_random_segment.csv"));
  CHECK(fs::exists(out_dir + "/ablation_block_contiguous.csv"));
  const auto comparison = read_file(out_dir + "/ablation_comparison.csv");
  CHECK(comparison.find("256-128-64-32") != std::string::npos);
  CHECK(comparison.find("81.0") != std::string::npos);  // published reference
  CHECK(comparison.find("block_contiguous") != std::string::npos);

  const auto table = read_file(out_dir + "/ablation_random_segment.csv");
  CHECK(table.rfind("config,accuracy\n", 0) == 0);
}
