#include "pearl/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "json.hpp"
#include "pearl/common.hpp"
#include "pearl/dataset.hpp"
#include "pearl/eval.hpp"
#include "pearl/synthetic.hpp"
#include "pearl/text_key.hpp"
#include "pearl/train.hpp"

namespace pearl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values gathered by CLI11; empty strings / unset optionals mean the
// flag was not given and the config file or defaults win.
struct Options {
  std::string config_path;
  std::string dataset_path;
  std::string embeddings_dir;
  std::string model_path;
  std::string out_path;
  std::string output_path;
  std::string report_path;
  std::string pairs_path;
  std::string grid_path;
  std::string pretrained_path;
  std::string setting = "auto";
  std::string filter;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;
  int n_refs = 4;
  int jobs = 1;
  bool deterministic = false;
};

cfg::RunConfig resolve_config(const Options& opt) {
  cfg::KvMap file;
  if (!opt.config_path.empty()) file = cfg::load_config_file(opt.config_path);
  cfg::KvMap flags;
  if (opt.seed) {
    const std::string s = fmt::format("{}", *opt.seed);
    flags["data.seed"] = s;
    flags["train.seed"] = s;
    flags["arsm.hadamard.seed"] = s;
  }
  if (opt.lambda) flags["scoring.lambda"] = fmt::format("{}", *opt.lambda);
  if (!opt.filter.empty()) flags["train.filter"] = opt.filter;
  if (opt.deterministic) flags["eval.include_timing"] = "false";
  return cfg::RunConfig::resolve(file, flags, true);
}

data::DatasetSplit load_split(const cfg::RunConfig& rc, const std::string& path) {
  std::vector<std::string> warnings;
  std::vector<data::CaptionRecord> records = data::load_dataset(path, &warnings);
  for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
  return data::split_dataset(records, rc.get_double("data.train_frac"),
                             rc.get_double("data.validation_frac"),
                             rc.get_double("data.test_frac"),
                             rc.get_uint("data.seed"));
}

// Keeps the loaded pretrain result alive next to the pointer handed out.
struct PretrainedHolder {
  std::optional<arsm::PretrainResult> result;
  const arsm::HadamardWeights* weights = nullptr;
};

PretrainedHolder load_pretrained(const std::string& path) {
  PretrainedHolder holder;
  if (!path.empty()) {
    holder.result = arsm::load_hadamard(path);
    holder.weights = &holder.result->weights;
  }
  return holder;
}

int run_embed_synthetic(const Options& opt) {
  cfg::RunConfig rc = resolve_config(opt);
  emb::SyntheticWorld world = emb::synthetic_world(
      rc.get_uint("data.seed"), Eigen::Index(rc.get_int("data.dim")),
      int(rc.get_int("data.n_images")), int(rc.get_int("data.captions_per_image")));

  const fs::path out(opt.out_path);
  fs::create_directories(out / "emb");
  data::save_dataset((out / "dataset.jsonl").string(), world.records);
  data::save_foil_pairs((out / "foils.jsonl").string(), world.foil_pairs);
  for (const auto& table : world.tables) {
    const std::string file = table.encoder.name + "-" +
                             emb::modality_name(table.encoder.modality) + ".pemb";
    emb::save_table((out / "emb" / file).string(), table);
  }

  const std::string echo = rc.echo();
  std::ofstream meta(out / "world.meta.json", std::ios::trunc);
  if (!meta) throw IoError("cannot write '" + (out / "world.meta.json").string() + "'");
  meta << json{{"type", "header"},
               {"format", "pearl-report"},
               {"version", 1},
               {"config_hash", emb::text_key(echo)},
               {"seed", rc.get_uint("data.seed")}}
              .dump()
       << "\n"
       << json{{"type", "synthetic_world"},
               {"records", world.records.size()},
               {"foil_pairs", world.foil_pairs.size()},
               {"tables", world.tables.size()}}
              .dump()
       << "\n";
  fmt::print("wrote {} records, {} foil pairs, {} tables under {}\n",
             world.records.size(), world.foil_pairs.size(), world.tables.size(),
             opt.out_path);
  return 0;
}

int run_pretrain_hadamard(const Options& opt) {
  cfg::RunConfig rc = resolve_config(opt);
  arsm::PretrainResult result = arsm::pretrain_hadamardnet(
      Eigen::Index(rc.get_int("arsm.hadamard.pretrain_dim")),
      cfg::hadamard_config_from(rc), int(rc.get_int("arsm.hadamard.n_samples")),
      rc.get_uint("arsm.hadamard.seed"), cfg::pretrain_budget_from(rc));
  arsm::save_hadamard(opt.out_path, result);
  fmt::print("heldout_mse = {}\nsteps = {}\nconverged = {}\nwrote {}\n",
             result.heldout_mse, result.steps, result.converged, opt.out_path);
  if (!result.converged) {
    throw ValidationError(fmt::format(
        "pretraining did not converge: held-out MSE {} > tolerance {}",
        result.heldout_mse, result.tolerance));
  }
  return 0;
}

int run_train(const Options& opt) {
  cfg::RunConfig rc = resolve_config(opt);
  data::DatasetSplit split = load_split(rc, opt.dataset_path);
  emb::ProviderSet providers = emb::load_providers(opt.embeddings_dir);
  PretrainedHolder pretrained = load_pretrained(opt.pretrained_path);

  train::TrainConfig tc = cfg::train_config_from(rc);
  scoring::PearlModel model(cfg::model_config_from(rc), tc.seed,
                            pretrained.weights);
  train::TrainResult result =
      train::train(model, split, providers, tc, rc.echo());
  ckpt::save_checkpoint(opt.out_path, result.best);

  fmt::print(
      "epochs_run = {}\nbest_epoch = {}\nbest_val_tau_c = {:.6f}\n"
      "stopped_early = {}\nfirst_epoch_loss = {}\nlast_epoch_loss = {}\nwrote {}\n",
      result.state.epoch, result.state.best_epoch, result.state.best_val_tau_c,
      result.state.stopped_early, result.epoch_mean_loss.front(),
      result.epoch_mean_loss.back(), opt.out_path);
  return 0;
}

int run_score(const Options& opt) {
  LoadedModel lm = load_model(opt.model_path, opt.lambda);
  std::vector<std::string> warnings;
  std::vector<data::CaptionRecord> records =
      data::load_dataset(opt.dataset_path, &warnings);
  for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
  emb::ProviderSet providers = emb::load_providers(opt.embeddings_dir);

  scoring::BatchOptions batch_opt;
  batch_opt.policy = scoring::parse_policy(opt.setting);
  scoring::BatchResult batch =
      lm.model->score_batch(records, providers, batch_opt);

  std::ofstream out(opt.output_path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + opt.output_path + "'");
  out << json{{"type", "header"},
              {"format", "pearl-report"},
              {"version", 1},
              {"config_hash", lm.checkpoint.config_hash},
              {"seed", lm.checkpoint.seed}}
             .dump()
      << "\n";
  for (std::size_t i = 0; i < batch.breakdowns.size(); ++i) {
    const auto& b = batch.breakdowns[i];
    json line{{"type", "score"},
              {"sample_id", records[i].sample_id},
              {"y_img", b.y_img},
              {"per_reference", b.per_reference},
              {"y_final", b.y_final},
              {"setting", scoring::setting_name(b.setting)}};
    if (b.y_ref) line["y_ref"] = *b.y_ref;
    out << line.dump() << "\n";
  }
  if (!out) throw IoError("cannot write '" + opt.output_path + "'");
  fmt::print("scored {} samples at {:.1f} samples/s, wrote {}\n",
             batch.breakdowns.size(), batch.samples_per_second, opt.output_path);
  return 0;
}

int run_evaluate(const Options& opt) {
  LoadedModel lm = load_model(opt.model_path, std::nullopt);
  std::vector<data::CaptionRecord> records = data::load_dataset(opt.dataset_path);
  emb::ProviderSet providers = emb::load_providers(opt.embeddings_dir);

  eval::BenchmarkResult result = eval::run_benchmark(
      *lm.model, records, providers, scoring::parse_policy(opt.setting));
  eval::write_benchmark_report(opt.report_path, result,
                               lm.checkpoint.config_echo, lm.checkpoint.seed,
                               !opt.deterministic);
  fmt::print("tau_b = {:.6f}\ntau_c = {:.6f}\nn = {}\nwall_clock_s = {:.3f}\nwrote {}\n",
             result.report.tau_b, result.report.tau_c, result.n_scored,
             result.wall_seconds, opt.report_path);
  return 0;
}

int run_foil(const Options& opt) {
  LoadedModel lm = load_model(opt.model_path, std::nullopt);
  std::vector<data::FoilPair> pairs = data::load_foil_pairs(opt.pairs_path);
  emb::ProviderSet providers = emb::load_providers(opt.embeddings_dir);

  const double accuracy = eval::foil_accuracy(
      *lm.model, pairs, providers, scoring::parse_policy(opt.setting), opt.n_refs);
  fmt::print("foil_accuracy_percent = {:.4f} (n_refs = {}, pairs = {})\n",
             accuracy, opt.n_refs, pairs.size());
  if (!opt.report_path.empty()) {
    std::ofstream out(opt.report_path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + opt.report_path + "'");
    out << json{{"type", "header"},
                {"format", "pearl-report"},
                {"version", 1},
                {"config_hash", lm.checkpoint.config_hash},
                {"seed", lm.checkpoint.seed}}
               .dump()
        << "\n"
        << json{{"type", "foil"},
                {"accuracy_percent", accuracy},
                {"n_refs", opt.n_refs},
                {"pairs", pairs.size()}}
               .dump()
        << "\n";
  }
  return 0;
}

eval::AblationAxes parse_grid(const std::string& path) {
  cfg::KvMap kv = cfg::load_config_file(path);
  eval::AblationAxes axes;
  for (const auto& [key, value] : kv) {
    if (key == "ablate.arsm_modes") {
      std::istringstream in(value);
      std::string item;
      while (std::getline(in, item, ',')) axes.arsm_modes.push_back(arsm::parse_mode(item));
    } else if (key == "ablate.encoder_subsets") {
      std::istringstream in(value);
      std::string subset;
      while (std::getline(in, subset, '|')) {
        std::istringstream names(subset);
        std::string name;
        std::vector<std::string> keep;
        while (std::getline(names, name, '+')) {
          if (!name.empty()) keep.push_back(name);
        }
        if (keep.empty()) throw ConfigError("empty encoder subset in '" + path + "'");
        axes.encoder_subsets.push_back(std::move(keep));
      }
    } else if (key == "ablate.dataset_filters") {
      std::istringstream in(value);
      std::string item;
      while (std::getline(in, item, ',')) {
        axes.dataset_filters.push_back(train::parse_filter(item));
      }
    } else {
      throw ConfigError("unknown grid key '" + key + "' (from " + path + ")");
    }
  }
  return axes;
}

int run_ablate(const Options& opt) {
  cfg::RunConfig rc = resolve_config(opt);
  eval::AblationAxes axes = parse_grid(opt.grid_path);
  data::DatasetSplit split = load_split(rc, opt.dataset_path);
  emb::ProviderSet providers = emb::load_providers(opt.embeddings_dir);
  PretrainedHolder pretrained = load_pretrained(opt.pretrained_path);

  train::TrainConfig tc = cfg::train_config_from(rc);
  std::vector<eval::AblationRow> rows =
      eval::run_ablation(cfg::model_config_from(rc), tc, pretrained.weights,
                         split, providers, axes);
  eval::write_ablation_report(opt.report_path, rows, rc.echo(), tc.seed,
                              !opt.deterministic);
  fmt::print("{:<28} {:>9} {:>9} {:>15}\n", "label", "tau_b", "tau_c",
             "best_val_tau_c");
  for (const auto& row : rows) {
    fmt::print("{:<28} {:>9.4f} {:>9.4f} {:>15.4f}\n", row.label,
               row.report.tau_b, row.report.tau_c, row.best_val_tau_c);
  }
  fmt::print("wrote {}\n", opt.report_path);
  return 0;
}

void add_common(CLI::App* sub, Options& opt, bool with_config = true) {
  if (with_config) {
    sub->add_option("--config", opt.config_path, "flat key = value config file");
  }
  sub->add_option("--seed", opt.seed,
                  "master seed; fans out to data.seed, train.seed, and "
                  "arsm.hadamard.seed");
  sub->add_option("--jobs", opt.jobs, "worker count (runs single-threaded today)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

LoadedModel load_model(const std::string& checkpoint_path,
                       std::optional<double> lambda_override) {
  LoadedModel lm;
  lm.checkpoint = ckpt::load_checkpoint(checkpoint_path);
  cfg::RunConfig rc = cfg::RunConfig::resolve(
      cfg::parse_config_text(lm.checkpoint.config_echo), {}, /*use_env=*/false);
  lm.model_config = cfg::model_config_from(rc);
  if (lambda_override) {
    if (*lambda_override < 0.0 || *lambda_override > 1.0) {
      throw ConfigError("lambda must lie in [0, 1]");
    }
    lm.model_config.lambda = *lambda_override;
  }
  lm.model = std::make_unique<scoring::PearlModel>(lm.model_config,
                                                   lm.checkpoint.seed, nullptr);
  ckpt::apply_params(lm.checkpoint, lm.model->registry());
  return lm;
}

int dispatch(int argc, const char* const* argv) {
  Options opt;
  CLI::App app{"pearl: supervised image-captioning metric"};
  app.set_version_flag("--version", "pearl 0.1.0");
  app.require_subcommand(1);

  CLI::App* embed = app.add_subcommand(
      "embed-synthetic", "generate the synthetic judged world and its tables");
  add_common(embed, opt);
  embed->add_option("--out", opt.out_path, "output directory")->required();

  CLI::App* pretrain = app.add_subcommand(
      "pretrain-hadamard", "pretrain the elementwise-product surrogate");
  add_common(pretrain, opt);
  pretrain->add_option("--out", opt.out_path, "weights file to write")->required();

  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model and write its checkpoint");
  add_common(train_cmd, opt);
  train_cmd->add_option("--dataset", opt.dataset_path, "judged records, one JSON per line")
      ->required();
  train_cmd->add_option("--embeddings", opt.embeddings_dir, "directory of .pemb tables")
      ->required();
  train_cmd->add_option("--out", opt.out_path, "checkpoint file to write")->required();
  train_cmd->add_option("--filter", opt.filter, "training subset")
      ->check(CLI::IsMember({"all", "ref-based", "ref-free"}));
  train_cmd->add_option("--pretrained", opt.pretrained_path,
                        "pretrained elementwise-product weights");

  CLI::App* score =
      app.add_subcommand("score", "score records with a trained checkpoint");
  add_common(score, opt, /*with_config=*/false);
  score->add_option("--model", opt.model_path, "checkpoint file")->required();
  score->add_option("--dataset", opt.dataset_path, "records to score")->required();
  score->add_option("--embeddings", opt.embeddings_dir, "directory of .pemb tables")
      ->required();
  score->add_option("--setting", opt.setting, "scoring setting")
      ->check(CLI::IsMember({"auto", "reference-based", "reference-free"}));
  score->add_option("--lambda", opt.lambda, "fusion weight override in [0, 1]");
  score->add_option("--output", opt.output_path, "per-sample breakdown file")
      ->required();

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "correlate scores against judgments");
  add_common(evaluate, opt, /*with_config=*/false);
  evaluate->add_option("--model", opt.model_path, "checkpoint file")->required();
  evaluate->add_option("--dataset", opt.dataset_path, "judged records")->required();
  evaluate->add_option("--embeddings", opt.embeddings_dir, "directory of .pemb tables")
      ->required();
  evaluate->add_option("--setting", opt.setting, "scoring setting")
      ->check(CLI::IsMember({"auto", "reference-based", "reference-free"}));
  evaluate->add_option("--report", opt.report_path, "report file to write")
      ->required();
  evaluate->add_flag("--deterministic", opt.deterministic,
                     "omit timing lines so identical runs match byte-for-byte");

  CLI::App* foil = app.add_subcommand(
      "foil", "accuracy on correct-vs-corrupted caption pairs");
  add_common(foil, opt, /*with_config=*/false);
  foil->add_option("--model", opt.model_path, "checkpoint file")->required();
  foil->add_option("--pairs", opt.pairs_path, "foil pairs, one JSON per line")
      ->required();
  foil->add_option("--embeddings", opt.embeddings_dir, "directory of .pemb tables")
      ->required();
  foil->add_option("--n-refs", opt.n_refs, "references per pair")
      ->check(CLI::IsMember({1, 4}));
  foil->add_option("--setting", opt.setting, "scoring setting")
      ->check(CLI::IsMember({"auto", "reference-based", "reference-free"}));
  foil->add_option("--report", opt.report_path, "optional report file");
  foil->add_flag("--deterministic", opt.deterministic,
                 "omit timing lines so identical runs match byte-for-byte");

  CLI::App* ablate =
      app.add_subcommand("ablate", "train and compare config variants");
  add_common(ablate, opt);
  ablate->add_option("--grid", opt.grid_path, "axis definitions, flat key = value")
      ->required();
  ablate->add_option("--dataset", opt.dataset_path, "judged records")->required();
  ablate->add_option("--embeddings", opt.embeddings_dir, "directory of .pemb tables")
      ->required();
  ablate->add_option("--report", opt.report_path, "report file to write")
      ->required();
  ablate->add_option("--pretrained", opt.pretrained_path,
                     "pretrained elementwise-product weights");
  ablate->add_flag("--deterministic", opt.deterministic,
                   "omit timing lines so identical runs match byte-for-byte");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fmt::print(stderr, "{}\n",
               json{{"error", "usage"}, {"message", e.what()}}.dump());
    if (app.get_subcommands().empty()) fmt::print(stderr, "{}", app.help());
    return 2;
  }

  try {
    if (app.got_subcommand(embed)) return run_embed_synthetic(opt);
    if (app.got_subcommand(pretrain)) return run_pretrain_hadamard(opt);
    if (app.got_subcommand(train_cmd)) return run_train(opt);
    if (app.got_subcommand(score)) return run_score(opt);
    if (app.got_subcommand(evaluate)) return run_evaluate(opt);
    if (app.got_subcommand(foil)) return run_foil(opt);
    if (app.got_subcommand(ablate)) return run_ablate(opt);
  } catch (const Error& e) {
    fmt::print(stderr, "{}\n",
               json{{"error", e.code}, {"message", e.what()}}.dump());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "{}\n",
               json{{"error", "internal"}, {"message", e.what()}}.dump());
    return 1;
  }
  return 2;
}

}  // namespace pearl::cli
