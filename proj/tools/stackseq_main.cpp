// Command line front end: synthetic data generation, schedule training,
// stacking transforms, ranking evaluation and the block-similarity probe.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "stackseq/checkpoint.h"
#include "stackseq/config.h"
#include "stackseq/data.h"
#include "stackseq/eval.h"
#include "stackseq/probe.h"
#include "stackseq/stacking.h"
#include "stackseq/training.h"

namespace {

using namespace stackseq;

struct GenSynthArgs {
  int64_t items = 0;
  int64_t sessions = 0;
  int64_t max_len = 20;
  int order = 1;
  int64_t concentration = 4;
  uint64_t seed = 1;
  std::string out;
};

int cmd_gen_synth(const GenSynthArgs& args) {
  MarkovSpec spec;
  spec.num_items = args.items;
  spec.num_sessions = args.sessions;
  spec.max_len = args.max_len;
  spec.order = args.order;
  spec.concentration = args.concentration;
  spec.seed = args.seed;
  SessionDataset ds = gen_markov(spec);
  save_sessions(ds, args.out);
  std::cout << "wrote " << ds.size() << " sessions (vocab " << ds.vocab_size << ", t "
            << ds.max_len << ") to " << args.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config_path;
  std::string resume;
  std::string out;
};

void write_stage_logs(const std::string& out, const std::vector<StageResult>& stages) {
  for (size_t i = 0; i < stages.size(); ++i) {
    std::string path = out + ".stage" + std::to_string(i) + ".log";
    std::ofstream log(path);
    if (!log) throw std::runtime_error("cannot write stage log: " + path);
    log << "# depth=" << stages[i].depth << " iterations=" << stages[i].iterations
        << " wall_ms=" << stages[i].wall_ms << "\n";
    for (const TrainRecord& r : stages[i].history) log << train_record_line(r) << "\n";
  }
}

StopRule stop_from_schedule(const Schedule& schedule) {
  if (!schedule.budgets.empty() && !schedule.final_until_converged)
    return StopRule::budget(schedule.budgets[0]);
  return StopRule::converged();
}

int cmd_train(const TrainArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::parse_file(args.config_path);
  if (cfg.data.path.empty() && cfg.schedule.kind != Schedule::Kind::tf)
    throw ConfigError("config: [data] path is required");

  std::cout << "# resolved configuration\n" << cfg.resolved() << "# end configuration\n";

  // tf reads its own pair-format data; every other kind reads sessions.
  if (cfg.schedule.kind == Schedule::Kind::tf) {
    if (args.resume.empty())
      throw ConfigError("schedule kind tf needs --resume with the source checkpoint");
    if (cfg.data.target_path.empty())
      throw ConfigError("config: [data] target_path is required for tf");
    Model source = load_checkpoint(args.resume);
    TransferDataset all = load_transfer(cfg.data.target_path, source.config.max_len);
    if (all.contexts.vocab_size > source.config.vocab_size)
      throw ConfigError("transfer contexts use ids outside the source model vocabulary");
    auto [tf_train, tf_eval] = split_transfer(all, cfg.data.split_ratio, cfg.data.split_seed);
    TFResult r = run_tf(source, tf_train, tf_eval, all.target_vocab, cfg.train,
                        stop_from_schedule(cfg.schedule), 0, &std::cout);
    save_checkpoint(r.params, args.out);
    StageResult stage;
    stage.depth = r.params.num_blocks();
    stage.iterations = r.iterations;
    stage.wall_ms = r.wall_ms;
    stage.history = r.history;
    write_stage_logs(args.out, {stage});
    std::cout << "wrote checkpoint " << args.out << "\n";
    return 0;
  }

  SessionDataset all = load_sessions(cfg.data.path, cfg.model.max_len, cfg.data.overlap);
  if (cfg.model.vocab_size == 0) cfg.model.vocab_size = all.vocab_size;
  if (all.vocab_size > cfg.model.vocab_size)
    throw ConfigError("config: data contains ids beyond [model] vocab_size");
  auto [train_data, eval_data] = split_train_test(all, cfg.data.split_ratio, cfg.data.split_seed);

  switch (cfg.schedule.kind) {
    case Schedule::Kind::plain: {
      Model start = args.resume.empty() ? init_model<float>(cfg.model, cfg.train.seed)
                                        : load_checkpoint(args.resume);
      if (start.config.vocab_size < all.vocab_size)
        throw ConfigError("resumed checkpoint vocabulary is smaller than the data");
      TrainResult r = train(start, train_data, eval_data, cfg.train,
                            stop_from_schedule(cfg.schedule), &std::cout);
      save_checkpoint(r.params, args.out);
      StageResult stage;
      stage.depth = r.params.num_blocks();
      stage.iterations = r.iterations;
      stage.wall_ms = r.wall_ms;
      stage.history = r.history;
      write_stage_logs(args.out, {stage});
      break;
    }
    case Schedule::Kind::cl: {
      if (!args.resume.empty())
        throw ConfigError("cl schedules initialize their own model; --resume is not supported");
      std::vector<double> fractions = cfg.data.fractions;
      if (fractions.empty()) fractions = {1.0};
      if (static_cast<int64_t>(fractions.size()) != cfg.schedule.stack_times + 1)
        throw ConfigError("config: cl needs stack_times+1 fractions (one snapshot per stage)");
      SnapshotSpec snap;
      snap.fractions = fractions;
      snap.seed = cfg.data.split_seed;
      std::vector<SessionDataset> snapshots;
      for (size_t i = 0; i < fractions.size(); ++i)
        snapshots.push_back(snapshot(train_data, snap, i));
      ScheduleResult r = run_cl(cfg.model, cfg.schedule, snapshots, eval_data, cfg.train,
                                &std::cout);
      save_checkpoint(r.final, args.out);
      write_stage_logs(args.out, r.stages);
      break;
    }
    case Schedule::Kind::ts: {
      if (!args.resume.empty())
        throw ConfigError("ts schedules initialize their own model; --resume is not supported");
      ScheduleResult r = run_ts(cfg.model, cfg.schedule, train_data, eval_data, cfg.train,
                                &std::cout);
      save_checkpoint(r.final, args.out);
      write_stage_logs(args.out, r.stages);
      break;
    }
    case Schedule::Kind::tf:
      break;  // handled above
  }
  std::cout << "wrote checkpoint " << args.out << "\n";
  return 0;
}

struct StackArgs {
  std::string in;
  std::string mode = "adjacent";
  int64_t blocks = 0;
  uint64_t seed = 1;
  bool reassign_dilations = false;
  std::string out;
};

int cmd_stack(const StackArgs& args) {
  Model src = load_checkpoint(args.in);
  StackMode mode = stack_mode_from_name(args.mode);
  Model dst;
  switch (mode) {
    case StackMode::adjacent:
    case StackMode::cross:
      dst = partial_stack(src, mode, args.blocks, args.reassign_dilations);
      break;
    case StackMode::random_top:
      dst = random_top_stack(src, args.blocks, args.seed);
      break;
    case StackMode::embed_only:
      dst = embed_only_stack(src, src.num_blocks() + args.blocks, args.seed);
      break;
  }
  StackReport report = verify_stack(src, dst, {mode, args.blocks});
  if (args.reassign_dilations) {
    std::cout << "verify: skipped (dilations reassigned to the base pattern)\n";
  } else {
    std::cout << report.str() << "\n";
    if (!report.ok) throw std::runtime_error("stacking produced a pattern mismatch");
  }
  save_checkpoint(dst, args.out);
  std::cout << "wrote " << dst.num_blocks() << "-block checkpoint to " << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string data;
  int64_t n = 5;
};

int cmd_eval(const EvalArgs& args) {
  Model model = load_checkpoint(args.ckpt);
  SessionDataset data = load_sessions(args.data, model.config.max_len);
  if (data.vocab_size > model.config.vocab_size)
    throw ConfigError("eval: data vocabulary exceeds the checkpoint (" +
                      std::to_string(data.vocab_size) + " > " +
                      std::to_string(model.config.vocab_size) + ")");
  Metrics m = metrics_at(rank_last_item(model, data), args.n);
  std::cout << m.line() << "\n";
  return 0;
}

struct ProbeArgs {
  std::string ckpt;
  std::string data;
  int64_t sequences = 100;
  uint64_t seed = 0;
};

int cmd_probe(const ProbeArgs& args) {
  Model model = load_checkpoint(args.ckpt);
  SessionDataset data = load_sessions(args.data, model.config.max_len);
  SimilarityMatrix sim = block_similarity(model, data, args.sequences, args.seed);
  std::cout << sim.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"training framework for deep dilated-convolutional sequential recommenders "
               "with progressive block stacking"};
  app.require_subcommand(1);

  GenSynthArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic Markov session file");
  gen->add_option("--items", gen_args.items, "number of items V (>= 10)")->required();
  gen->add_option("--sessions", gen_args.sessions, "number of sessions")->required();
  gen->add_option("--max-len", gen_args.max_len, "maximum session length t");
  gen->add_option("--order", gen_args.order, "Markov order (1 or 2)");
  gen->add_option("--concentration", gen_args.concentration, "successors per state");
  gen->add_option("--seed", gen_args.seed, "generator seed");
  gen->add_option("--out", gen_args.out, "output session file")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run a training schedule from a config file");
  train->add_option("--config", train_args.config_path, "experiment config path")->required();
  train->add_option("--resume", train_args.resume, "checkpoint to start from (plain) or source model (tf)");
  train->add_option("--out", train_args.out, "output checkpoint path")->required();

  StackArgs stack_args;
  CLI::App* stack = app.add_subcommand("stack", "grow a checkpoint by stacking blocks");
  stack->add_option("--in", stack_args.in, "input checkpoint")->required();
  stack->add_option("--mode", stack_args.mode, "adjacent|cross|random-top|embed-only");
  stack->add_option("--blocks", stack_args.blocks, "blocks to add")->required();
  stack->add_option("--seed", stack_args.seed, "seed for randomly initialized blocks");
  stack->add_flag("--reassign-dilations", stack_args.reassign_dilations,
                  "rewrite dilations to the base cyclic pattern instead of keeping them with their blocks");
  stack->add_option("--out", stack_args.out, "output checkpoint")->required();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "last-item ranking metrics for a checkpoint");
  eval->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_args.data, "session file")->required();
  eval->add_option("--n", eval_args.n, "metric cutoff N");

  ProbeArgs probe_args;
  CLI::App* probe = app.add_subcommand("probe", "block-output cosine similarity matrix");
  probe->add_option("--ckpt", probe_args.ckpt, "checkpoint path")->required();
  probe->add_option("--data", probe_args.data, "session file to sample sequences from")->required();
  probe->add_option("--sequences", probe_args.sequences, "sequences to average over");
  probe->add_option("--seed", probe_args.seed, "sampling seed");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_synth(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (stack->parsed()) return cmd_stack(stack_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (probe->parsed()) return cmd_probe(probe_args);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::invalid_argument& e) {  // config and precondition errors
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
