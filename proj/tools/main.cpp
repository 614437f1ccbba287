#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lrva/config.hpp"
#include "lrva/metrics.hpp"
#include "lrva/train.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment config file (key=value lines)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args->out_dir, "output directory for artifacts");
  cmd->add_option("--override", args->overrides, "config override key=value (repeatable)");
  cmd->add_option("--seed", args->seed, "seed override (applied after --override)");
}

lrva::ExperimentConfig resolve_config(const CommonArgs& args) {
  lrva::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = lrva::load_config_file(args.config_path);
  for (const std::string& o : args.overrides) lrva::apply_override(cfg, o);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frozen-backbone adaptation experiments"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "write synthetic datasets as a directory tree");
  add_common(gen, &gen_args);

  CommonArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train and write checkpoint + metrics CSV");
  add_common(train_cmd, &train_args);

  CommonArgs eval_args;
  std::string checkpoint_path;
  std::vector<std::string> splits;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, &eval_args);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file to evaluate")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", splits, "split to evaluate (repeatable; default val and test)");

  CommonArgs sweep_args;
  std::string axis;
  std::vector<std::string> sweep_values;
  std::vector<std::uint64_t> sweep_seeds{0};
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train over one config axis");
  add_common(sweep_cmd, &sweep_args);
  sweep_cmd->add_option("--axis", axis, "config key to sweep")->required();
  sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_seeds, "seed set (default 0)")->delimiter(',');

  CommonArgs ladder_args;
  std::vector<std::uint64_t> ladder_seeds{0};
  CLI::App* ladder_cmd =
      app.add_subcommand("ablation-ladder", "host-only, each baseline, and the full combination");
  add_common(ladder_cmd, &ladder_args);
  ladder_cmd->add_option("--seeds", ladder_seeds, "seed set (default 0)")->delimiter(',');

  int gc_seeds = 20;
  double gc_tol = 1e-4;
  std::string gc_out;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every pathway");
  gc_cmd->add_option("--seeds", gc_seeds, "number of seeds (default 20)")
      ->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tol", gc_tol, "max relative error (default 1e-4)");
  gc_cmd->add_option("--out", gc_out, "output directory for the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      if (gen_args.out_dir.empty()) {
        std::cerr << "gen-data: --out is required\n";
        return 1;
      }
      lrva::write_dataset_tree(resolve_config(gen_args), gen_args.out_dir);
      std::cout << "wrote dataset tree to " << gen_args.out_dir << "\n";
    } else if (train_cmd->parsed()) {
      lrva::TrainResult res = lrva::train(resolve_config(train_args), train_args.out_dir);
      std::cout << res.csv;
    } else if (eval_cmd->parsed()) {
      lrva::EvalOutput out = lrva::evaluate_checkpoint_file(checkpoint_path, eval_args.overrides,
                                                            splits, eval_args.out_dir);
      std::cout << out.csv;
    } else if (sweep_cmd->parsed()) {
      lrva::ExperimentConfig base = resolve_config(sweep_args);
      std::vector<lrva::CsvRow> rows =
          lrva::sweep(base, axis, sweep_values, sweep_seeds, sweep_args.out_dir);
      std::cout << lrva::metrics_csv(rows, lrva::serialize_config(base));
    } else if (ladder_cmd->parsed()) {
      lrva::ExperimentConfig base = resolve_config(ladder_args);
      std::vector<lrva::CsvRow> rows =
          lrva::ablation_ladder(base, ladder_seeds, ladder_args.out_dir);
      std::cout << lrva::metrics_csv(rows, lrva::serialize_config(base));
    } else if (gc_cmd->parsed()) {
      std::vector<lrva::PathwayReport> reports = lrva::gradcheck_suite(gc_seeds, gc_tol);
      const std::string text = lrva::gradcheck_report_text(reports);
      std::cout << text;
      if (!gc_out.empty()) {
        std::filesystem::create_directories(gc_out);
        lrva::write_text_file(std::filesystem::path(gc_out) / "gradcheck.txt", text);
      }
      for (const lrva::PathwayReport& r : reports) {
        if (!r.pass) return 2;
      }
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
