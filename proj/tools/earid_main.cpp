// earid command-line front end. Parses arguments, assembles the run
// configuration, and drives everything through the shared-library C API.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "earid/earid.h"

namespace {

struct ConfigDeleter {
  void operator()(earid_config* cfg) const { earid_config_free(cfg); }
};
using ConfigHandle = std::unique_ptr<earid_config, ConfigDeleter>;

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double fs = 0.0;
  bool fs_set = false;
  unsigned threads = 0;
  bool threads_set = false;
  bool verbose = false;
  bool skip_filter = false;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* config_opt =
      cmd->add_option("--config", opts.config_path, "JSON config file");
  if (config_required) config_opt->required();
  cmd->add_option("--seed", opts.seed, "master RNG seed (overrides config)")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--fs", opts.fs, "sampling rate for CSV recordings, Hz")
      ->each([&opts](const std::string&) { opts.fs_set = true; });
  cmd->add_option("--threads", opts.threads,
                  "worker threads (0 = all processors)")
      ->each([&opts](const std::string&) { opts.threads_set = true; });
  cmd->add_flag("--verbose", opts.verbose, "chatty progress output");
}

int fail(earid_status status) {
  std::fprintf(stderr, "error: %s\n", earid_last_error());
  return static_cast<int>(status);
}

ConfigHandle make_config(const CommonOpts& opts, earid_status& status) {
  earid_config* raw = nullptr;
  status = opts.config_path.empty() ? earid_config_default(&raw)
                                    : earid_config_load(opts.config_path.c_str(), &raw);
  ConfigHandle cfg(raw);
  if (status != EARID_OK) return cfg;

  char buf[32];
  if (opts.seed_set) {
    std::snprintf(buf, sizeof(buf), "%" PRIu64, opts.seed);
    if ((status = earid_config_set(cfg.get(), "seed", buf)) != EARID_OK)
      return cfg;
  }
  if (opts.fs_set) {
    std::snprintf(buf, sizeof(buf), "%.17g", opts.fs);
    if ((status = earid_config_set(cfg.get(), "io.csv_fs", buf)) != EARID_OK)
      return cfg;
  }
  if (opts.threads_set) {
    std::snprintf(buf, sizeof(buf), "%u", opts.threads);
    if ((status = earid_config_set(cfg.get(), "threads", buf)) != EARID_OK)
      return cfg;
  }
  if (opts.verbose &&
      (status = earid_config_set(cfg.get(), "verbose", "true")) != EARID_OK)
    return cfg;
  if (opts.skip_filter &&
      (status = earid_config_set(cfg.get(), "io.skip_filter", "true")) !=
          EARID_OK)
    return cfg;

  if (opts.verbose) {
    char* dump = nullptr;
    if (earid_config_dump(cfg.get(), &dump) == EARID_OK) {
      std::fprintf(stderr, "effective config:\n%s\n", dump);
      earid_string_free(dump);
    }
  }
  status = EARID_OK;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"earid: ear-EEG biometric identification toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  std::string synth_out;
  add_common_flags(synth, opts, false);
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* prep = app.add_subcommand("preprocess",
                                  "select channels and filter recordings");
  std::string prep_in, prep_out;
  add_common_flags(prep, opts, false);
  prep->add_option("--in", prep_in, "recording file or directory")->required();
  prep->add_option("--out", prep_out, "output directory")->required();

  auto* extract = app.add_subcommand("extract", "recordings -> feature CSV");
  std::string extract_in, extract_out;
  add_common_flags(extract, opts, false);
  extract->add_option("--in", extract_in, "recording file or directory")
      ->required();
  extract->add_option("--out", extract_out, "output CSV path")->required();
  extract->add_flag("--skip-filter", opts.skip_filter,
                    "input recordings are already filtered");

  auto* aug = app.add_subcommand(
      "augment", "split and write augmented train / untouched val+test CSVs");
  std::string aug_in, aug_out;
  add_common_flags(aug, opts, false);
  aug->add_option("--in", aug_in, "recording file or directory")->required();
  aug->add_option("--out", aug_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the classifier from CSVs");
  std::string train_csv, val_csv, train_out;
  add_common_flags(train, opts, false);
  train->add_option("--train", train_csv, "training features CSV")->required();
  train->add_option("--val", val_csv, "validation features CSV")->required();
  train->add_option("--out", train_out, "output directory")->required();

  auto* evalc = app.add_subcommand("eval", "score a model on test features");
  std::string model_path, standardizer_path, test_csv, report_path;
  add_common_flags(evalc, opts, false);
  evalc->add_option("--model", model_path, "model JSON")->required();
  evalc->add_option("--standardizer", standardizer_path, "standardizer JSON")
      ->required();
  evalc->add_option("--test", test_csv, "test features CSV")->required();
  evalc->add_option("--out", report_path, "report JSON path")->required();

  auto* ablate = app.add_subcommand("ablate",
                                    "architecture comparison on a shared split");
  std::string ablate_in, ablate_out;
  add_common_flags(ablate, opts, true);
  ablate->add_option("--in", ablate_in, "recording file or directory")
      ->required();
  ablate->add_option("--out", ablate_out, "ablation CSV path")->required();

  auto* pipe = app.add_subcommand("pipeline", "full end-to-end run");
  std::string pipe_in, pipe_out;
  add_common_flags(pipe, opts, true);
  pipe->add_option("--in", pipe_in, "recording file or directory")->required();
  pipe->add_option("--out", pipe_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  earid_status status = EARID_OK;
  ConfigHandle cfg = make_config(opts, status);
  if (status != EARID_OK) return fail(status);

  if (synth->parsed()) {
    status = earid_cmd_synth(cfg.get(), synth_out.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("synthetic cohort written to %s\n", synth_out.c_str());
  } else if (prep->parsed()) {
    status = earid_cmd_preprocess(cfg.get(), prep_in.c_str(), prep_out.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("filtered recordings written to %s\n", prep_out.c_str());
  } else if (extract->parsed()) {
    status = earid_cmd_extract(cfg.get(), extract_in.c_str(),
                               extract_out.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("features written to %s\n", extract_out.c_str());
  } else if (aug->parsed()) {
    status = earid_cmd_augment(cfg.get(), aug_in.c_str(), aug_out.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("feature splits written to %s\n", aug_out.c_str());
  } else if (train->parsed()) {
    status = earid_cmd_train(cfg.get(), train_csv.c_str(), val_csv.c_str(),
                             train_out.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("model written to %s\n", train_out.c_str());
  } else if (evalc->parsed()) {
    status = earid_cmd_eval(cfg.get(), model_path.c_str(),
                            standardizer_path.c_str(), test_csv.c_str(),
                            report_path.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("report written to %s\n", report_path.c_str());
  } else if (ablate->parsed()) {
    status = earid_cmd_ablate(cfg.get(), ablate_in.c_str(), ablate_out.c_str());
    if (status != EARID_OK) return fail(status);
    std::printf("ablation table written to %s\n", ablate_out.c_str());
  } else if (pipe->parsed()) {
    status = earid_cmd_pipeline(cfg.get(), pipe_in.c_str(), pipe_out.c_str(),
                                nullptr);
    if (status != EARID_OK) return fail(status);
    std::ifstream rendered(pipe_out + "/report.txt");
    std::printf("%s", std::string(std::istreambuf_iterator<char>(rendered),
                                  std::istreambuf_iterator<char>())
                          .c_str());
    std::printf("artifacts written to %s\n", pipe_out.c_str());
  }
  return 0;
}
