#include "relparcel/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "relparcel/checkpoint.hpp"
#include "relparcel/data.hpp"
#include "relparcel/errors.hpp"
#include "relparcel/gradcheck.hpp"
#include "relparcel/run_config.hpp"
#include "relparcel/training.hpp"
#include "relparcel/visualize.hpp"

namespace fs = std::filesystem;

namespace relparcel {

namespace {

constexpr double kGradCheckLimit = 1e-4;

// RELPARCEL_SEED wins over --seed; returns nullopt when neither is given.
std::optional<std::uint64_t> resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (const char* env = std::getenv("RELPARCEL_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || *env == '-') {
      throw ConfigError(std::string("RELPARCEL_SEED is not an unsigned integer: '") + env + "'");
    }
    return v;
  }
  return flag;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

std::string format_history(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,lr,val_mean_f1\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.train_loss, r.val_loss, r.lr,
                  r.val_mean_f1);
    out += buf;
  }
  return out;
}

std::string format_probabilities(const Dataset& ds, const Evaluation& ev) {
  std::string out = "image";
  for (const auto& name : ds.label_names) out += "," + name;
  out += "\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += ds.items[i].id;
    for (double p : ev.probabilities[i]) {
      std::snprintf(buf, sizeof buf, ",%.6f", p);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void check_labels(const Checkpoint& ck, const Dataset& ds) {
  if (ck.model.num_labels() != ds.num_labels()) {
    throw DataError("checkpoint has " + std::to_string(ck.model.num_labels()) + " labels, dataset has " +
                    std::to_string(ds.num_labels()));
  }
}

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string data;
  std::string ckpt;
  std::size_t n = 64;
  std::size_t limit = 0;
};

int run_gen_data(const Options& o, std::ostream& out) {
  SceneRecipe recipe = o.config.empty() ? default_recipe() : SceneRecipe::from_config(ConfigDocument::load(o.config));
  recipe.validate();
  const std::uint64_t seed = resolve_seed(o.seed).value_or(0);
  const Dataset ds = generate_dataset(recipe, o.n, seed);
  save_dataset(ds, o.out, &recipe);
  out << "wrote " << ds.size() << " images (" << ds.num_labels() << " labels, seed " << seed << ") to " << o.out
      << "\n";
  return kExitOk;
}

int run_train(const Options& o, std::ostream& out) {
  const Dataset ds = load_dataset(o.data);
  RunConfig cfg = run_config_for(ds, o.config);
  if (const auto seed = resolve_seed(o.seed)) cfg.train.seed = *seed;
  cfg.validate();

  TrainResult result = train(cfg.model, cfg.train, ds, cfg.train.seed, [&out](const EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu train_loss %.6f val_loss %.6f lr %.3g val_mean_f1 %.4f\n", r.epoch,
                  r.train_loss, r.val_loss, r.lr, r.val_mean_f1);
    out << buf << std::flush;
  });

  const fs::path dir(o.out);
  fs::create_directories(dir);
  save_checkpoint((dir / "model.ckpt").string(), cfg, result.model, result.optimizer, result.state.epoch);
  write_file(dir / "history.csv", format_history(result.state.history));
  write_file(dir / "train_metrics.txt", format_report(result.final_train_report, ds.label_names));
  write_file(dir / "config.toml", to_config(cfg).dump());
  out << "stopped after " << result.state.epoch << " epochs; wrote " << (dir / "model.ckpt").string() << "\n";
  return kExitOk;
}

int run_eval(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const Dataset ds = load_dataset(o.data);
  check_labels(ck, ds);
  const Evaluation ev = evaluate(ck.model, ds, ck.config.train.threshold);
  const std::string report = format_report(ev.report, ds.label_names);
  if (!o.out.empty()) write_file(o.out, report);
  out << report;
  return kExitOk;
}

int run_predict(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const Dataset ds = load_dataset(o.data);
  check_labels(ck, ds);
  const Evaluation ev = evaluate(ck.model, ds, ck.config.train.threshold);
  const std::string csv = format_probabilities(ds, ev);
  if (o.out.empty()) {
    out << csv;
  } else {
    write_file(o.out, csv);
    out << "wrote probabilities for " << ds.size() << " images to " << o.out << "\n";
  }
  return kExitOk;
}

int run_visualize(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  Dataset ds = load_dataset(o.data);
  check_labels(ck, ds);
  if (o.limit > 0 && o.limit < ds.size()) ds.items.resize(o.limit);
  const VisualizationSummary s = export_visualizations(ck.model, ds, o.out);
  out << "wrote " << s.files << " files for " << s.images << " images to " << o.out << "\n";
  return kExitOk;
}

int run_grad_check(const Options& o, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(o.seed).value_or(0);
  const auto entries = run_grad_check_suite(seed);
  std::string text;
  char buf[160];
  double worst = 0.0;
  bool all_passed = true;
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%-22s %.3e  (tol %.0e) %s\n", e.name.c_str(), e.max_rel_error, e.tolerance,
                  e.passed() ? "ok" : "FAIL");
    text += buf;
    worst = std::max(worst, e.max_rel_error);
    all_passed = all_passed && e.passed();
  }
  std::snprintf(buf, sizeof buf, "max relative error %.3e\n", worst);
  text += buf;
  if (!o.out.empty()) write_file(o.out, text);
  out << text;
  return all_passed && worst <= kGradCheckLimit ? kExitOk : kExitCheckFailed;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-label image classifier with label parcels, attention and relational reasoning", "relparcel"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_seed = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "master seed (RELPARCEL_SEED overrides)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--n", o.n, "number of images")->check(CLI::PositiveNumber);
  add_seed(gen);
  gen->add_option("--config", o.config, "recipe file (default recipe when omitted)")->check(CLI::ExistingFile);
  gen->add_option("--out", o.out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", o.data, "dataset directory")->required();
  tr->add_option("--config", o.config, "run config (TOML)");
  add_seed(tr);
  tr->add_option("--out", o.out, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "print the metrics report of a checkpoint on a dataset");
  ev->add_option("--data", o.data, "dataset directory")->required();
  ev->add_option("--ckpt", o.ckpt, "checkpoint file")->required();
  ev->add_option("--out", o.out, "also write the report here");

  auto* pr = app.add_subcommand("predict", "per-image label probabilities as CSV");
  pr->add_option("--data", o.data, "dataset directory")->required();
  pr->add_option("--ckpt", o.ckpt, "checkpoint file")->required();
  pr->add_option("--out", o.out, "CSV path (stdout when omitted)");

  auto* vis = app.add_subcommand("visualize", "export corners, relation matrices and parcel heatmaps");
  vis->add_option("--data", o.data, "dataset directory")->required();
  vis->add_option("--ckpt", o.ckpt, "checkpoint file")->required();
  vis->add_option("--out", o.out, "output directory")->required();
  vis->add_option("--limit", o.limit, "only the first N images (0 = all)");

  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient check of every op and the full model");
  add_seed(gc);
  gc->add_option("--out", o.out, "also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    if (e.get_exit_code() != 0) err << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return run_gen_data(o, out);
    if (*tr) return run_train(o, out);
    if (*ev) return run_eval(o, out);
    if (*pr) return run_predict(o, out);
    if (*vis) return run_visualize(o, out);
    if (*gc) return run_grad_check(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitDataOrConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitDataOrConfig;
  } catch (const DimensionError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitDataOrConfig;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitDataOrConfig;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace relparcel
