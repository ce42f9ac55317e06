#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "srl/common.hpp"
#include "srl/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUnexpected = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;
constexpr int kExitCurriculumExhausted = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Experiment config file")
      ->required();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed,
                  "Override the seed of the stanza this subcommand uses");
}

void print_written(const srl::CommandResult& result) {
  for (const std::string& path : result.written) {
    std::printf("wrote %s\n", path.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stepwise-reward reinforcement learning lab"};
  app.require_subcommand(1);

  CommonArgs datagen_args;
  CLI::App* datagen = app.add_subcommand("datagen", "Generate a dataset file");
  add_common(datagen, datagen_args);

  CommonArgs rm_train_args;
  CLI::App* rm_train =
      app.add_subcommand("rm-train", "Train the step verifier");
  add_common(rm_train, rm_train_args);

  CommonArgs select_args;
  CLI::App* select =
      app.add_subcommand("select-data", "Filter a dataset file");
  add_common(select, select_args);

  CommonArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run RL training");
  add_common(train, train_args);

  CommonArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  add_common(eval, eval_args);

  CommonArgs compare_args;
  std::string config_b_path;
  CLI::App* compare =
      app.add_subcommand("compare", "Paired-seed comparison of two configs");
  add_common(compare, compare_args);
  compare->add_option("--config-b", config_b_path, "Second experiment config")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (datagen->parsed()) {
      print_written(srl::cmd_datagen(srl::load_config(datagen_args.config_path),
                                     datagen_args.out_dir, datagen_args.seed));
    } else if (rm_train->parsed()) {
      print_written(srl::cmd_rm_train(srl::load_config(rm_train_args.config_path),
                                      rm_train_args.out_dir,
                                      rm_train_args.seed));
    } else if (select->parsed()) {
      print_written(srl::cmd_select(srl::load_config(select_args.config_path),
                                    select_args.out_dir, select_args.seed));
    } else if (train->parsed()) {
      print_written(srl::cmd_train(srl::load_config(train_args.config_path),
                                   train_args.out_dir, train_args.seed));
    } else if (eval->parsed()) {
      print_written(srl::cmd_eval(srl::load_config(eval_args.config_path),
                                  eval_args.out_dir, eval_args.seed));
    } else if (compare->parsed()) {
      print_written(srl::cmd_compare(srl::load_config(compare_args.config_path),
                                     srl::load_config(config_b_path),
                                     compare_args.out_dir));
    }
  } catch (const srl::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfigError;
  } catch (const srl::CurriculumExhausted& e) {
    std::fprintf(stderr, "curriculum exhausted: %s\n", e.what());
    return kExitCurriculumExhausted;
  } catch (const srl::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitDataError;
  } catch (const srl::TrainingError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return kExitDataError;
  } catch (const srl::SelectionError& e) {
    std::fprintf(stderr, "selection error: %s\n", e.what());
    return kExitDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUnexpected;
  }
  return kExitOk;
}
