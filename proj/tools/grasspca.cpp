// grasspca: federated PCA (ADMM consensus, Euclidean or Grassmann local
// solves) with reconstruction-error anomaly detection on network-traffic
// CSVs. Subcommands follow the pipeline: partition | train | evaluate |
// report.

#include <optional>
#include <string>

#include <CLI11.hpp>

#include "grasspca/commands.hpp"
#include "grasspca/config.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  grasspca::ConfigOverrides overrides;
  std::string out_dir;
};

void add_override_flags(CLI::App* cmd, grasspca::ConfigOverrides& o) {
  cmd->add_option("--train", o.train, "training CSV (overrides config)");
  cmd->add_option("--test", o.test, "labeled test CSV (overrides config)");
  cmd->add_option("--label-column", o.label_column, "label column name");
  cmd->add_option("--rho", o.rho, "ADMM penalty");
  cmd->add_option("--eta", o.eta, "local step size");
  cmd->add_option("--rounds", o.rounds, "communication rounds");
  cmd->add_option("--local-iters", o.local_iters, "local iterations per round");
  cmd->add_option("--sample-fraction", o.sample_fraction, "client fraction per round");
  cmd->add_option("--algorithm", o.algorithm, "fedpe|fedpg");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--threads", o.threads, "parallel local solves per round");
  cmd->add_option("--k", o.k, "subspace rank");
  cmd->add_option("--n-clients", o.n_clients, "simulated client count");
  cmd->add_option("--group-feature", o.group_feature, "feature for grouped partitioning");
  cmd->add_option("--strategy", o.strategy, "grouped_quantile|uniform_shards");
  cmd->add_option("--threshold", o.threshold, "fixed detection threshold");
}

grasspca::ExperimentConfig build_config(const CommonFlags& flags) {
  std::optional<std::string> path;
  if (!flags.config_path.empty()) path = flags.config_path;
  grasspca::ExperimentConfig cfg = grasspca::parse_config(path, flags.overrides);
  cfg.out_dir = flags.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated PCA anomaly detection"};
  app.require_subcommand(1);

  CommonFlags partition_flags, train_flags, eval_flags;
  std::string basis_path, history_path, report_out;
  std::optional<double> holdout, assert_monotone;

  CLI::App* cmd_part = app.add_subcommand("partition", "split a training CSV into client shards");
  cmd_part->add_option("--config", partition_flags.config_path, "experiment config JSON");
  cmd_part->add_option("--out", partition_flags.out_dir, "output directory")->required();
  add_override_flags(cmd_part, partition_flags.overrides);

  CLI::App* cmd_tr = app.add_subcommand("train", "run federated training");
  cmd_tr->add_option("--config", train_flags.config_path, "experiment config JSON");
  cmd_tr->add_option("--out", train_flags.out_dir, "output directory")->required();
  add_override_flags(cmd_tr, train_flags.overrides);

  CLI::App* cmd_ev = app.add_subcommand("evaluate", "score a labeled test set with a basis");
  cmd_ev->add_option("--config", eval_flags.config_path, "experiment config JSON");
  cmd_ev->add_option("--basis", basis_path, "basis CSV from train")->required();
  cmd_ev->add_option("--holdout", holdout, "threshold carve-out fraction");
  cmd_ev->add_option("--out", eval_flags.out_dir, "output directory")->required();
  add_override_flags(cmd_ev, eval_flags.overrides);

  CLI::App* cmd_rep = app.add_subcommand("report", "flatten a round history to CSV");
  cmd_rep->add_option("--history", history_path, "history JSONL from train")->required();
  cmd_rep->add_option("--assert-monotone", assert_monotone,
                      "fail unless the lagrangian is non-increasing after round 2");
  cmd_rep->add_option("--out", report_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_part->parsed()) return grasspca::cmd_partition(build_config(partition_flags));
    if (cmd_tr->parsed()) return grasspca::cmd_train(build_config(train_flags));
    if (cmd_ev->parsed()) {
      grasspca::ExperimentConfig cfg = build_config(eval_flags);
      if (holdout) cfg.holdout = *holdout;
      return grasspca::cmd_evaluate(cfg, basis_path);
    }
    if (cmd_rep->parsed()) return grasspca::cmd_report(history_path, report_out, assert_monotone);
  } catch (const grasspca::Error& e) {
    std::cerr << "{\"error\": \"" << e.what() << "\"}" << std::endl;
    return 1;
  }
  return 1;
}
