// Command-line front end: train / attack / eval / landscape / theory / export.
// Exit codes: 0 success, 1 usage error, 2 precondition violation, 3 numerical
// abort.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "jarn/attacks.hpp"
#include "jarn/checkpoint.hpp"
#include "jarn/config.hpp"
#include "jarn/data.hpp"
#include "jarn/errors.hpp"
#include "jarn/report.hpp"
#include "jarn/theory.hpp"
#include "jarn/trainers.hpp"

namespace {

using jarn::config::RunConfig;

// Flags observed on the command line, applied on top of the config file.
struct FlagSink {
  std::map<std::string, std::string> overrides;
  std::string config_path;

  void add_str(CLI::App* cmd, const std::string& flag, const std::string& key,
               const std::string& help) {
    cmd->add_option_function<std::string>(
           flag, [this, key](const std::string& v) { overrides[key] = v; }, help)
        ->expected(1);
  }
};

void add_common_flags(CLI::App* cmd, FlagSink& sink) {
  cmd->add_option("--config", sink.config_path, "flat key=value configuration file");
  sink.add_str(cmd, "--seed", "seed", "global seed; fans out per component");
  sink.add_str(cmd, "--out-dir", "out.dir", "output directory (default $JARN_OUT_DIR or .)");
  sink.add_str(cmd, "--data-source", "data.source", "mnist | glyphs | blobs");
  sink.add_str(cmd, "--mnist-images", "data.mnist_images", "IDX images file");
  sink.add_str(cmd, "--mnist-labels", "data.mnist_labels", "IDX labels file");
  sink.add_str(cmd, "--samples-per-class", "data.samples_per_class",
               "per-class sample count for generated corpora");
  sink.add_str(cmd, "--data-split", "data.split", "train | test (generated corpora)");
  sink.add_str(cmd, "--subset", "data.subset", "restrict to N samples (seeded shuffle)");
  sink.add_str(cmd, "--epsilon", "epsilon", "l-inf budget for noise and attacks");
}

void add_train_flags(CLI::App* cmd, FlagSink& sink) {
  sink.add_str(cmd, "--regime", "regime",
               "standard | uniform-noise | double-backprop | fgsm-at | pgd-at | jarn | jarn-at1");
  sink.add_str(cmd, "--epochs", "epochs", "training epochs");
  sink.add_str(cmd, "--batch-size", "batch_size", "minibatch size");
  sink.add_str(cmd, "--lambda-adv", "lambda_adv", "adversarial regularization weight");
  sink.add_str(cmd, "--lr-cls", "lr_cls", "classifier learning rate (alpha)");
  sink.add_str(cmd, "--lr-apt", "lr_apt", "adaptor learning rate (beta)");
  sink.add_str(cmd, "--lr-disc", "lr_disc", "discriminator learning rate (gamma)");
  sink.add_str(cmd, "--momentum", "momentum", "classifier sgd momentum");
  sink.add_str(cmd, "--disc-update-interval", "disc_update_interval",
               "classifier iterations per discriminator update");
  sink.add_str(cmd, "--jarn-start-fraction", "jarn_start_fraction",
               "final fraction of iterations with the adversarial regularizer");
  sink.add_str(cmd, "--at-iterations", "at_iterations", "inner attack steps for pgd-at");
  sink.add_str(cmd, "--at-eta", "at_eta", "inner attack step size (0 = 2.5 eps/iters)");
  sink.add_str(cmd, "--db-lambda", "db_lambda", "double-backprop penalty weight");
  sink.add_str(cmd, "--non-saturating", "non_saturating",
               "use -log D(J') as the generator objective");
  sink.add_str(cmd, "--out-checkpoint", "out.checkpoint", "checkpoint output path");
  sink.add_str(cmd, "--out-trace", "out.trace", "loss-trace CSV output path");
}

void add_attack_flags(CLI::App* cmd, FlagSink& sink) {
  sink.add_str(cmd, "--checkpoint", "checkpoint", "model checkpoint path");
  sink.add_str(cmd, "--attack-epsilon", "attack.epsilon", "attack budget (defaults to --epsilon)");
  sink.add_str(cmd, "--iterations", "attack.iterations", "attack iterations");
  sink.add_str(cmd, "--eta", "attack.eta", "attack step size (0 = 2.5 eps/iters)");
  sink.add_str(cmd, "--random-start", "attack.random_start", "uniform random start (pgd)");
  sink.add_str(cmd, "--limit", "eval.limit", "evaluate at most N samples");
  sink.add_str(cmd, "--out-csv", "out.csv", "per-sample results CSV path");
}

std::string out_path(const RunConfig& rc, const std::string& key, const std::string& fallback) {
  std::string dir = rc.get("out.dir", jarn::config::default_out_dir());
  std::string path = rc.get(key, "");
  if (!path.empty()) return path;
  return dir + "/" + fallback;
}

RunConfig resolve_config(const FlagSink& sink) {
  std::map<std::string, std::string> file_values;
  if (!sink.config_path.empty()) {
    file_values = jarn::config::parse_config_file(sink.config_path);
  }
  RunConfig rc = jarn::config::resolve(file_values, sink.overrides);
  std::printf("resolved configuration:\n");
  for (const auto& [k, v] : rc.echo()) std::printf("  %s = %s\n", k.c_str(), v.c_str());
  return rc;
}

jarn::data::DatasetHandle load_dataset(const RunConfig& rc, bool train_split) {
  const std::string source = rc.get("data.source", "glyphs");
  const uint64_t seed = rc.get_seed("seed", 0);
  jarn::data::DatasetHandle ds;
  if (source == "mnist") {
    const std::string images = rc.require("data.mnist_images");
    const std::string labels = rc.require("data.mnist_labels");
    ds = jarn::data::load_mnist_idx(images, labels);
    ds.split = rc.get("data.split", train_split ? "train" : "test");
    ds.shuffle_seed = jarn::seed_for(seed, "dataset-shuffle");
  } else if (source == "glyphs") {
    const std::string split = rc.get("data.split", train_split ? "train" : "test");
    const int64_t per_class =
        rc.get_int("data.samples_per_class", train_split ? 800 : 100);
    ds = jarn::data::glyph_digits_dataset(per_class, jarn::seed_for(seed, "glyph-corpus"), split);
    ds.shuffle_seed = jarn::seed_for(seed, "dataset-shuffle");
  } else if (source == "blobs") {
    ds = jarn::data::synthetic_dataset(rc.get_int("data.classes", 10),
                                       rc.get_int("data.image_size", 28),
                                       rc.get_int("data.samples_per_class", 100),
                                       jarn::seed_for(seed, "blob-corpus"));
    ds.shuffle_seed = jarn::seed_for(seed, "dataset-shuffle");
  } else {
    throw jarn::PreconditionError("config: data.source must be mnist, glyphs, or blobs");
  }
  const int64_t subset = rc.get_int("data.subset", -1);
  if (subset > 0) ds = jarn::data::subset(ds, subset, jarn::seed_for(seed, "subset"));
  return ds;
}

jarn::trainers::TrainConfig train_config(const RunConfig& rc) {
  jarn::trainers::TrainConfig cfg;
  cfg.lambda_adv = rc.get_real("lambda_adv", cfg.lambda_adv);
  cfg.lr_cls = rc.get_real("lr_cls", cfg.lr_cls);
  cfg.lr_apt = rc.get_real("lr_apt", cfg.lr_apt);
  cfg.lr_disc = rc.get_real("lr_disc", cfg.lr_disc);
  cfg.momentum = rc.get_real("momentum", cfg.momentum);
  cfg.disc_update_interval =
      static_cast<int>(rc.get_int("disc_update_interval", cfg.disc_update_interval));
  cfg.jarn_start_fraction = rc.get_real("jarn_start_fraction", cfg.jarn_start_fraction);
  cfg.epochs = static_cast<int>(rc.get_int("epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(rc.get_int("batch_size", cfg.batch_size));
  cfg.epsilon = rc.get_real("epsilon", cfg.epsilon);
  cfg.at_iterations = static_cast<int>(rc.get_int("at_iterations", cfg.at_iterations));
  cfg.at_eta = rc.get_real("at_eta", cfg.at_eta);
  cfg.db_lambda = rc.get_real("db_lambda", cfg.db_lambda);
  cfg.non_saturating = rc.get_flag("non_saturating", cfg.non_saturating);
  cfg.seed = rc.get_seed("seed", 0);
  return cfg;
}

jarn::attacks::AttackConfig attack_config(const RunConfig& rc) {
  jarn::attacks::AttackConfig cfg;
  cfg.epsilon = rc.get_real("attack.epsilon", rc.get_real("epsilon", 0.3));
  cfg.iterations = static_cast<int>(rc.get_int("attack.iterations", 40));
  cfg.eta = rc.get_real("attack.eta", 0.0);
  cfg.random_start = rc.get_flag("attack.random_start", true);
  cfg.validate();
  return cfg;
}

const jarn::nn::ParameterStore& classifier_of(const jarn::checkpoint::Checkpoint& ckpt) {
  return ckpt.store(jarn::nn::Owner::kClassifier);
}

int cmd_train(const RunConfig& rc) {
  const auto regime = jarn::trainers::regime_from_string(rc.require("regime"));
  jarn::data::DatasetHandle ds = load_dataset(rc, /*train_split=*/true);
  jarn::trainers::TrainConfig cfg = train_config(rc);
  jarn::trainers::TrainerState st = jarn::trainers::train(regime, ds, cfg);

  std::string meta;
  for (const auto& [k, v] : rc.echo()) meta += k + "=" + v + "\n";
  jarn::checkpoint::Checkpoint ckpt;
  ckpt.meta = meta;
  ckpt.stores.push_back(st.cls);
  if (!st.apt.params.empty()) {
    ckpt.stores.push_back(st.apt);
    ckpt.stores.push_back(st.disc);
  }
  const std::string ckpt_path = out_path(rc, "out.checkpoint", "model.ckpt");
  jarn::checkpoint::save(ckpt, ckpt_path);
  const std::string trace_path = out_path(rc, "out.trace", "trace.csv");
  jarn::trainers::write_trace_csv(st, trace_path, rc.echo());

  std::printf("trained %s for %d epochs (%.2f s/epoch mean)\n",
              jarn::trainers::regime_name(regime), cfg.epochs, jarn::trainers::epoch_timer(st));
  std::printf("checkpoint: %s\ntrace: %s\n", ckpt_path.c_str(), trace_path.c_str());
  return 0;
}

int cmd_attack(const RunConfig& rc) {
  jarn::checkpoint::Checkpoint ckpt = jarn::checkpoint::load(rc.require("checkpoint"));
  const jarn::nn::ParameterStore& model = classifier_of(ckpt);
  jarn::data::DatasetHandle ds = load_dataset(rc, /*train_split=*/false);
  jarn::attacks::AttackConfig cfg = attack_config(rc);
  const int64_t limit = rc.get_int("eval.limit", -1);
  const int64_t total = limit < 0 ? ds.count : std::min(limit, ds.count);
  const uint64_t seed = jarn::seed_for(rc.get_seed("seed", 0), "attack");

  const std::string csv_path = out_path(rc, "out.csv", "attack.csv");
  std::ofstream os(csv_path, std::ios::trunc);
  if (!os) throw jarn::IoError("attack: cannot open for writing: " + csv_path);
  for (const auto& [k, v] : rc.echo()) os << "# " << k << "=" << v << "\n";
  os << "sample,label,clean_pred,adv_pred,success,linf,loss_clean,loss_adv\n";

  int64_t hits = 0;
  std::vector<int64_t> order(static_cast<size_t>(total));
  for (int64_t i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
  char buf[64];
  for (int64_t off = 0; off < total; off += 250) {
    jarn::data::ImageBatch b = jarn::data::make_batch(ds, order, off, 250);
    jarn::attacks::AdvBatch adv =
        jarn::attacks::pgd(model, b, cfg, seed + static_cast<uint64_t>(off));
    for (int64_t i = 0; i < b.count(); ++i) {
      const auto ui = static_cast<size_t>(i);
      if (!adv.success[ui]) ++hits;
      os << (off + i) << ',' << jarn::data::label_of(b, i) << ',' << adv.clean_pred[ui] << ','
         << adv.adv_pred[ui] << ',' << int(adv.success[ui]) << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", adv.linf[ui]);
      os << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", adv.loss_clean[ui]);
      os << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", adv.loss_adv[ui]);
      os << buf << '\n';
    }
  }
  if (!os.flush()) throw jarn::IoError("attack: write failed: " + csv_path);
  std::printf("robust accuracy: %.2f%% over %lld samples (eps=%g, iters=%d)\n",
              100.0 * static_cast<double>(hits) / static_cast<double>(total),
              static_cast<long long>(total), cfg.epsilon, cfg.iterations);
  std::printf("per-sample results: %s\n", csv_path.c_str());
  return 0;
}

std::vector<jarn::report::NamedAttack> parse_attack_list(const std::string& list,
                                                         double epsilon) {
  std::vector<jarn::report::NamedAttack> out;
  std::istringstream is(list);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    jarn::attacks::AttackConfig cfg;
    cfg.epsilon = epsilon;
    if (tok == "fgsm") {
      cfg.iterations = 1;
      cfg.eta = epsilon;
      cfg.random_start = false;
    } else if (tok.rfind("pgd", 0) == 0) {
      cfg.iterations = std::stoi(tok.substr(3));
      cfg.random_start = true;
    } else {
      throw jarn::PreconditionError("eval: unknown attack '" + tok +
                                    "' (expected fgsm or pgd<N>)");
    }
    out.push_back({tok, cfg});
  }
  return out;
}

int cmd_eval(const RunConfig& rc) {
  jarn::checkpoint::Checkpoint ckpt = jarn::checkpoint::load(rc.require("checkpoint"));
  const jarn::nn::ParameterStore& model = classifier_of(ckpt);
  jarn::data::DatasetHandle ds = load_dataset(rc, /*train_split=*/false);

  const double eps = rc.get_real("attack.epsilon", rc.get_real("epsilon", 0.3));
  auto attack_list = parse_attack_list(rc.get("eval.attacks", "fgsm,pgd5,pgd40"), eps);
  jarn::report::EvalOptions opt;
  opt.limit = rc.get_int("eval.limit", -1);
  opt.seed = jarn::seed_for(rc.get_seed("seed", 0), "eval");
  opt.alignment_samples = rc.get_int("eval.alignment_samples", 1000);

  jarn::report::EvalReport rep = jarn::report::robust_accuracy(model, ds, attack_list, opt);
  rep.config_echo = rc.echo();
  const std::string format = rc.get("eval.format", "json");
  const std::string path = out_path(rc, "out.report", "eval_report." + format);
  jarn::report::emit_report(rep, format, path);

  std::printf("clean: %.2f%% (%lld samples)\n", rep.clean_accuracy,
              static_cast<long long>(rep.clean_samples));
  for (const auto& a : rep.attacks) {
    std::printf("%s: %.2f%% (eps=%g, iters=%d)\n", a.name.c_str(), a.accuracy, a.cfg.epsilon,
                a.cfg.iterations);
  }
  std::printf("alignment |cos(x,J)|: mean %.4f median %.4f\n", rep.alignment.mean_abs_cos,
              rep.alignment.median_abs_cos);
  std::printf("report: %s\n", path.c_str());
  return 0;
}

int cmd_landscape(const RunConfig& rc) {
  jarn::checkpoint::Checkpoint ckpt = jarn::checkpoint::load(rc.require("checkpoint"));
  const jarn::nn::ParameterStore& model = classifier_of(ckpt);
  jarn::data::DatasetHandle ds = load_dataset(rc, /*train_split=*/false);
  const int64_t index = rc.get_int("landscape.index", 0);
  if (index < 0 || index >= ds.count) {
    throw jarn::PreconditionError("landscape: sample index out of range");
  }
  std::vector<int64_t> one{index};
  jarn::data::ImageBatch b = jarn::data::make_batch(ds, one, 0, 1);

  jarn::report::GridSpec grid;
  grid.resolution = static_cast<int>(rc.get_int("landscape.resolution", 21));
  grid.a_extent = rc.get_real("landscape.extent", rc.get_real("epsilon", 0.3));
  grid.b_extent = grid.a_extent;
  jarn::report::LandscapeGrid lg = jarn::report::loss_landscape(
      model, b.images, b.labels, grid, jarn::seed_for(rc.get_seed("seed", 0), "landscape"));
  const std::string path = out_path(rc, "out.landscape", "landscape.csv");
  jarn::report::write_landscape_csv(lg, path, rc.echo());
  std::printf("landscape grid %dx%d written to %s%s\n", grid.resolution, grid.resolution,
              path.c_str(), lg.degenerate_gradient ? " (degenerate gradient)" : "");
  return 0;
}

int cmd_theory(const RunConfig& rc) {
  const int64_t trials = rc.get_int("theory.trials", 1000);
  const uint64_t seed = jarn::seed_for(rc.get_seed("seed", 0), "theory");
  jarn::Rng rng(seed);

  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  bool all_pass = true;
  auto record = [&](const std::string& name, double value, double tolerance, bool pass) {
    checks.push_back(
        {{"name", name}, {"value", value}, {"tolerance", tolerance}, {"pass", pass}});
    all_pass = all_pass && pass;
  };

  {
    std::vector<double> p(8, 0.125);
    jarn::theory::DiscreteDistributionPair eq{p, p};
    auto v = jarn::theory::adversarial_loss_value(eq);
    const double err = std::abs(v.checked() - (-std::log(4.0)));
    record("adversarial_loss_at_equality_vs_minus_log4", err, 1e-12, err <= 1e-12);
  }
  {
    double max_gap = 0.0, min_excess = 1e300;
    for (int64_t t = 0; t < trials; ++t) {
      const size_t n = 2 + static_cast<size_t>(rng.below(7));
      jarn::theory::DiscreteDistributionPair pair;
      pair.p_data.resize(n);
      pair.p_g.resize(n);
      double sd = 0.0, sg = 0.0;
      for (size_t i = 0; i < n; ++i) {
        pair.p_data[i] = -std::log(1.0 - rng.uniform01());
        pair.p_g[i] = -std::log(1.0 - rng.uniform01());
        sd += pair.p_data[i];
        sg += pair.p_g[i];
      }
      for (size_t i = 0; i < n; ++i) {
        pair.p_data[i] /= sd;
        pair.p_g[i] /= sg;
      }
      auto v = jarn::theory::adversarial_loss_value(pair);
      max_gap = std::max(max_gap, std::abs(v.direct - v.closed));
      min_excess = std::min(min_excess, v.direct - (-std::log(4.0)));
    }
    record("direct_vs_closed_max_gap", max_gap, 1e-12, max_gap <= 1e-12);
    record("loss_floor_min_excess", min_excess, 0.0, min_excess >= -1e-15);
  }
  {
    int64_t holds = 0, checked = 0;
    for (int64_t t = 0; t < trials; ++t) {
      const int64_t k = 3 + static_cast<int64_t>(rng.below(3));
      const int64_t d = 4 + static_cast<int64_t>(rng.below(4));
      jarn::theory::LinearModel m;
      m.k = k;
      m.d = d;
      m.weights.resize(static_cast<size_t>(k * d));
      m.bias.resize(static_cast<size_t>(k));
      for (auto& w : m.weights) w = rng.normal();
      for (auto& b : m.bias) b = 0.5 * rng.normal();
      std::vector<double> x(static_cast<size_t>(d));
      for (auto& v : x) v = rng.normal();
      try {
        auto b = jarn::theory::verify_bound(m, x);
        ++checked;
        if (b.holds) ++holds;
      } catch (const jarn::PreconditionError&) {
      }
    }
    record("robustness_bound_holds", static_cast<double>(holds),
           static_cast<double>(checked), holds == checked && checked > 0);
  }

  nlohmann::ordered_json j;
  j["schema"] = "jarn-theory-report/1";
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rc.echo()) cfg[k] = v;
  j["config"] = cfg;
  j["checks"] = checks;
  j["all_pass"] = all_pass;

  const std::string path = out_path(rc, "out.report", "theory_report.json");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw jarn::IoError("theory: cannot open for writing: " + path);
  os << j.dump(2) << '\n';
  os.flush();
  std::printf("%s\n", j.dump(2).c_str());
  std::printf("report: %s\n", path.c_str());
  return all_pass ? 0 : 2;
}

int cmd_export(const RunConfig& rc) {
  jarn::checkpoint::Checkpoint ckpt = jarn::checkpoint::load(rc.require("checkpoint"));
  const jarn::nn::ParameterStore& model = classifier_of(ckpt);
  jarn::data::DatasetHandle ds = load_dataset(rc, /*train_split=*/false);
  const int64_t count = std::min<int64_t>(rc.get_int("export.count", 16), ds.count);
  jarn::data::ImageBatch b = jarn::data::full_batch(ds, count);
  const std::string dir = rc.get("out.dir", jarn::config::default_out_dir());
  std::filesystem::create_directories(dir);
  auto result = jarn::report::jacobian_saliency_export(
      model, b, dir, rc.get("export.prefix", "jacobian"), rc.echo());
  std::printf("wrote %zu saliency images and raw dump %s\n", result.pgm_paths.size(),
              result.raw_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarially regularized Jacobian training laboratory"};
  app.require_subcommand(1);

  FlagSink sink;
  CLI::App* train = app.add_subcommand("train", "train a classifier under a chosen regime");
  add_common_flags(train, sink);
  add_train_flags(train, sink);
  CLI::App* attack = app.add_subcommand("attack", "run an l-inf attack against a checkpoint");
  add_common_flags(attack, sink);
  add_attack_flags(attack, sink);
  CLI::App* eval = app.add_subcommand("eval", "robust/clean accuracy report");
  add_common_flags(eval, sink);
  sink.add_str(eval, "--checkpoint", "checkpoint", "model checkpoint path");
  sink.add_str(eval, "--attacks", "eval.attacks", "comma list: fgsm,pgd5,pgd40");
  sink.add_str(eval, "--attack-epsilon", "attack.epsilon", "attack budget");
  sink.add_str(eval, "--limit", "eval.limit", "evaluate at most N samples");
  sink.add_str(eval, "--alignment-samples", "eval.alignment_samples",
               "samples for the |cos(x,J)| statistic");
  sink.add_str(eval, "--format", "eval.format", "json | csv");
  sink.add_str(eval, "--out-report", "out.report", "report output path");
  CLI::App* landscape = app.add_subcommand("landscape", "loss surface grid around one sample");
  add_common_flags(landscape, sink);
  sink.add_str(landscape, "--checkpoint", "checkpoint", "model checkpoint path");
  sink.add_str(landscape, "--index", "landscape.index", "sample index");
  sink.add_str(landscape, "--resolution", "landscape.resolution", "grid resolution (odd)");
  sink.add_str(landscape, "--extent", "landscape.extent", "axis half-range");
  sink.add_str(landscape, "--out-csv", "out.landscape", "grid CSV path");
  CLI::App* theory = app.add_subcommand("theory", "closed-form verifications as a JSON report");
  add_common_flags(theory, sink);
  sink.add_str(theory, "--trials", "theory.trials", "random instances per check");
  sink.add_str(theory, "--out-report", "out.report", "report output path");
  CLI::App* exp = app.add_subcommand("export", "Jacobian saliency images + raw dump");
  add_common_flags(exp, sink);
  sink.add_str(exp, "--checkpoint", "checkpoint", "model checkpoint path");
  sink.add_str(exp, "--count", "export.count", "number of samples to export");
  sink.add_str(exp, "--prefix", "export.prefix", "output filename prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // --help exits 0; anything else is usage error
  }

  try {
    RunConfig rc = resolve_config(sink);
    if (train->parsed()) return cmd_train(rc);
    if (attack->parsed()) return cmd_attack(rc);
    if (eval->parsed()) return cmd_eval(rc);
    if (landscape->parsed()) return cmd_landscape(rc);
    if (theory->parsed()) return cmd_theory(rc);
    if (exp->parsed()) return cmd_export(rc);
    std::fprintf(stderr, "no subcommand\n");
    return 1;
  } catch (const jarn::NumericalAbort& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const jarn::PreconditionError& e) {
    std::fprintf(stderr, "precondition violation: %s\n", e.what());
    return 2;
  } catch (const jarn::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
