#include "advw/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "advw/attack.hpp"
#include "advw/checkpoint.hpp"
#include "advw/data.hpp"
#include "advw/distill.hpp"
#include "advw/metrics.hpp"
#include "advw/model.hpp"
#include "advw/optim.hpp"
#include "advw/report.hpp"

namespace advw {

std::vector<double> parse_epsilon_list(const std::string& arg) {
  if (arg == "paper-fgsm") return paper_fgsm_epsilons();
  if (arg == "paper-distill") return paper_distillation_epsilons();
  std::vector<double> eps;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("epsilon list: '" + item + "' is not a fraction in [0, 1]");
    }
    eps.push_back(v);
  }
  if (eps.empty()) throw std::invalid_argument("epsilon list: no values in '" + arg + "'");
  return eps;
}

namespace {

struct DataOptions {
  std::string source = "synthetic";
  int classes = 10;
  int per_class = 300;
  int side = 16;
  std::uint64_t seed = 42;
};

void add_data_flags(CLI::App* cmd, DataOptions& data) {
  cmd->add_option("--data", data.source,
                  "dataset: 'synthetic' or 'idx:<images-path>,<labels-path>'");
  cmd->add_option("--classes", data.classes, "synthetic class count");
  cmd->add_option("--per-class", data.per_class, "synthetic images per class");
  cmd->add_option("--side", data.side, "synthetic image side length");
}

LabeledDataset load_data(const DataOptions& data) {
  if (data.source == "synthetic") {
    return generate_synthetic(data.classes, data.per_class, data.side, data.seed);
  }
  if (data.source.rfind("idx:", 0) == 0) {
    const std::string paths = data.source.substr(4);
    const auto comma = paths.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("--data idx: expects 'idx:<images-path>,<labels-path>'");
    }
    return load_idx(paths.substr(0, comma), paths.substr(comma + 1));
  }
  throw std::invalid_argument("--data must be 'synthetic' or 'idx:<images>,<labels>', got '" +
                              data.source + "'");
}

SplitSpec default_split(const LabeledDataset& ds, std::uint64_t seed) {
  SplitSpec s;
  s.train_count = ds.size() * 8 / 10;
  s.val_count = ds.size() / 10;
  s.test_count = ds.size() - s.train_count - s.val_count;
  s.shuffle_seed = seed;
  return s;
}

RunManifest make_manifest(const std::vector<std::string>& args, std::uint64_t seed,
                          const LabeledDataset& ds,
                          std::map<std::string, std::string> config) {
  RunManifest m;
  m.command = args;
  m.seed = seed;
  m.dataset_fingerprint = dataset_fingerprint(ds);
  m.config = std::move(config);
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

int run_train(const DataOptions& data, const std::string& model_name, const TrainConfig& tc,
              const std::string& out) {
  const LabeledDataset ds = load_data(data);
  const Splits splits = split(ds, default_split(ds, tc.seed));
  const ModelSpec spec = reference_spec(model_name, splits.train.item_shape(), ds.class_count);
  TrainResult result = train(init_params(spec, tc.seed), splits.train, splits.val, tc);
  for (std::size_t e = 0; e < result.history.train_loss.size(); ++e) {
    std::printf("epoch %2zu  train-loss %.6f  val-loss %.6f  lr %g\n", e + 1,
                result.history.train_loss[e], result.history.val_loss[e],
                result.history.learning_rate[e]);
  }
  std::printf("train accuracy %.4f\n", accuracy(result.model, splits.train));
  std::printf("test accuracy  %.4f\n", accuracy(result.model, splits.test));
  save_checkpoint(result.model, out);
  std::printf("checkpoint written to %s\n", out.c_str());
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"adversarial robustness workbench"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a classifier and save a checkpoint");
  DataOptions train_data;
  std::string train_model = "student-cnn";
  TrainConfig tc;
  tc.seed = 42;
  std::string train_out;
  train_cmd->add_option("--model", train_model, "teacher-cnn | student-cnn | mlp");
  add_data_flags(train_cmd, train_data);
  train_cmd->add_option("--epochs", tc.epochs, "training epochs");
  train_cmd->add_option("--lr", tc.initial_lr, "initial learning rate");
  train_cmd->add_option("--batch", tc.batch_size, "batch size");
  train_cmd->add_option("--temperature", tc.temperature, "loss softmax temperature");
  train_cmd->add_option("--seed", tc.seed, "seed for init, split and batch order");
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "run one attack and write a result row");
  DataOptions attack_data;
  std::string attack_ckpt, attack_kind = "fgsm", attack_out;
  double attack_eps = -1.0;
  CwConfig attack_cw;
  double attack_temp = 1.0;
  std::uint64_t attack_seed = 42;
  attack_cmd->add_option("--ckpt", attack_ckpt, "model checkpoint")->required();
  attack_cmd->add_option("--attack", attack_kind, "fgsm | cw");
  attack_cmd->add_option("--epsilon", attack_eps,
                         "fgsm step / cw L-inf cap; omit for uncapped cw");
  attack_cmd->add_option("--c", attack_cw.c, "cw misclassification-loss weight");
  attack_cmd->add_option("--kappa", attack_cw.kappa, "cw confidence margin");
  attack_cmd->add_option("--iters", attack_cw.max_iterations, "cw iteration budget");
  attack_cmd->add_option("--step", attack_cw.step_size, "cw optimizer step size");
  attack_cmd->add_option("--temperature", attack_temp, "fgsm loss temperature");
  add_data_flags(attack_cmd, attack_data);
  attack_cmd->add_option("--seed", attack_seed, "dataset/split seed");
  attack_cmd->add_option("--out", attack_out, "CSV output path")->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "attack across an epsilon grid and write a CSV");
  DataOptions sweep_data;
  std::string sweep_ckpt, sweep_kind, sweep_eps = "paper-fgsm", sweep_out, sweep_svg;
  CwConfig sweep_cw;
  double sweep_temp = 1.0;
  std::uint64_t sweep_seed = 42;
  sweep_cmd->add_option("--ckpt", sweep_ckpt, "model checkpoint")->required();
  sweep_cmd->add_option("--attack", sweep_kind, "fgsm | cw")->required();
  sweep_cmd->add_option("--epsilons", sweep_eps,
                        "comma list of fractions, 'paper-fgsm' or 'paper-distill'");
  sweep_cmd->add_option("--c", sweep_cw.c, "cw misclassification-loss weight");
  sweep_cmd->add_option("--kappa", sweep_cw.kappa, "cw confidence margin");
  sweep_cmd->add_option("--iters", sweep_cw.max_iterations, "cw iteration budget");
  sweep_cmd->add_option("--step", sweep_cw.step_size, "cw optimizer step size");
  sweep_cmd->add_option("--temperature", sweep_temp, "fgsm loss temperature");
  add_data_flags(sweep_cmd, sweep_data);
  sweep_cmd->add_option("--seed", sweep_seed, "dataset/split seed");
  sweep_cmd->add_option("--out", sweep_out, "CSV output path")->required();
  sweep_cmd->add_option("--svg", sweep_svg, "optional SVG output path");

  // distill
  auto* distill_cmd = app.add_subcommand("distill", "run the distillation pipeline");
  DataOptions distill_data;
  DistillConfig dc;
  std::string distill_prefix;
  distill_cmd->add_option("--temperature", dc.temperature, "softening temperature");
  distill_cmd->add_option("--lambda", dc.lambda, "distillation loss weight");
  distill_cmd->add_option("--epochs", dc.epochs, "training epochs per model");
  distill_cmd->add_option("--lr", dc.learning_rate, "initial learning rate");
  distill_cmd->add_option("--batch", dc.batch_size, "batch size");
  distill_cmd->add_option("--seed", dc.seed, "seed shared by teacher and students");
  distill_cmd->add_option("--attack-temperature", dc.attack_temperature,
                          "temperature of the attacked softmax");
  distill_cmd->add_option("--iters", dc.cw.max_iterations, "cw iteration budget");
  add_data_flags(distill_cmd, distill_data);
  distill_cmd->add_option("--out-prefix", distill_prefix, "output path prefix")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "render sweep CSVs into an SVG");
  std::vector<std::string> report_in;
  std::string report_svg, report_metric = "top1-error";
  report_cmd->add_option("--in", report_in, "sweep CSV inputs")->required()->expected(-1);
  report_cmd->add_option("--svg", report_svg, "SVG output path")->required();
  report_cmd->add_option("--metric", report_metric, "top1-error | top5-error | top1-accuracy");

  if (args.empty()) {
    std::cerr << app.help() << std::endl;
    return 1;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << std::endl;
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::endl;
    return 1;
  }

  try {
    if (train_cmd->parsed()) {
      train_data.seed = tc.seed;
      return run_train(train_data, train_model, tc, train_out);
    }

    if (attack_cmd->parsed()) {
      attack_data.seed = attack_seed;
      const LabeledDataset ds = load_data(attack_data);
      const Splits splits = split(ds, default_split(ds, attack_seed));
      const ModelState model = load_checkpoint(attack_ckpt);
      std::vector<SweepRecord> records;
      if (attack_kind == "fgsm") {
        if (attack_eps < 0.0) throw std::invalid_argument("attack: fgsm requires --epsilon");
        SweepOptions opts;
        opts.fgsm.temperature = attack_temp;
        const double eps[] = {attack_eps};
        records = epsilon_sweep(model, splits.test, AttackKind::kFgsm, eps, opts);
      } else if (attack_kind == "cw") {
        CwConfig cfg = attack_cw;
        if (attack_eps >= 0.0) cfg.epsilon_cap = attack_eps;
        const AttackResult res = cw_attack(model, splits.test.images, splits.test.labels, cfg);
        // an uncapped run is recorded under the trivial cap of 1.0
        const double eps[] = {attack_eps >= 0.0 ? attack_eps : 1.0};
        records = cw_sweep_from_base(model, splits.test, res, eps, cfg.target);
      } else {
        throw std::invalid_argument("attack: unknown attack '" + attack_kind + "'");
      }
      write_csv(records, attack_out);
      write_manifest(make_manifest(args, attack_seed, ds,
                                   {{"attack", attack_kind},
                                    {"epsilon", fmt(attack_eps)},
                                    {"c", fmt(attack_cw.c)},
                                    {"kappa", fmt(attack_cw.kappa)},
                                    {"iters", std::to_string(attack_cw.max_iterations)}}),
                     attack_out + ".manifest.json");
      std::printf("attack results written to %s\n", attack_out.c_str());
      return 0;
    }

    if (sweep_cmd->parsed()) {
      sweep_data.seed = sweep_seed;
      const LabeledDataset ds = load_data(sweep_data);
      const Splits splits = split(ds, default_split(ds, sweep_seed));
      const ModelState model = load_checkpoint(sweep_ckpt);
      const std::vector<double> eps = parse_epsilon_list(sweep_eps);
      AttackKind kind;
      if (sweep_kind == "fgsm") {
        kind = AttackKind::kFgsm;
      } else if (sweep_kind == "cw") {
        kind = AttackKind::kCw;
      } else {
        throw std::invalid_argument("sweep: unknown attack '" + sweep_kind + "'");
      }
      SweepOptions opts;
      opts.fgsm.temperature = sweep_temp;
      opts.cw = sweep_cw;
      const std::vector<SweepRecord> records = epsilon_sweep(model, splits.test, kind, eps, opts);
      write_csv(records, sweep_out);
      write_manifest(make_manifest(args, sweep_seed, ds,
                                   {{"attack", sweep_kind},
                                    {"epsilons", sweep_eps},
                                    {"ckpt", sweep_ckpt}}),
                     sweep_out + ".manifest.json");
      if (!sweep_svg.empty()) {
        const NamedCurve curve{sweep_kind, records};
        render_svg({&curve, 1}, sweep_svg);
      }
      const bool sorted = std::is_sorted(eps.begin(), eps.end());
      if (sorted) {
        const CurveSummary summary = robustness_curve(records);
        std::printf("peak top-1 error %.2f%%, peak top-5 error %.2f%%, saturation epsilon %.4f\n",
                    summary.peak_top1 * 100.0, summary.peak_top5 * 100.0,
                    summary.saturation_epsilon);
      }
      std::printf("sweep results written to %s\n", sweep_out.c_str());
      return 0;
    }

    if (distill_cmd->parsed()) {
      distill_data.seed = dc.seed;
      const LabeledDataset ds = load_data(distill_data);
      dc.teacher_spec = reference_spec("teacher-cnn", ds.item_shape(), ds.class_count);
      dc.student_spec = reference_spec("student-cnn", ds.item_shape(), ds.class_count);
      const DistillOutcome out = distill_pipeline(ds, default_split(ds, dc.seed), dc);

      save_checkpoint(out.teacher, distill_prefix + "-teacher.ckpt");
      save_checkpoint(out.distilled, distill_prefix + "-student-distilled.ckpt");
      save_checkpoint(out.baseline, distill_prefix + "-student-baseline.ckpt");
      write_csv(out.report.fgsm_distilled, distill_prefix + "-fgsm-distilled.csv");
      write_csv(out.report.fgsm_baseline, distill_prefix + "-fgsm-baseline.csv");
      write_csv(out.report.cw_distilled, distill_prefix + "-cw-distilled.csv");
      write_csv(out.report.cw_baseline, distill_prefix + "-cw-baseline.csv");
      const std::vector<NamedCurve> curves = {{"fgsm-baseline", out.report.fgsm_baseline},
                                              {"fgsm-distilled", out.report.fgsm_distilled},
                                              {"cw-baseline", out.report.cw_baseline},
                                              {"cw-distilled", out.report.cw_distilled}};
      render_svg(curves, distill_prefix + "-accuracy.svg", SvgMetric::kTop1Accuracy);
      write_manifest(make_manifest(args, dc.seed, ds,
                                   {{"temperature", fmt(dc.temperature)},
                                    {"lambda", fmt(dc.lambda)},
                                    {"epochs", std::to_string(dc.epochs)},
                                    {"lr", fmt(dc.learning_rate)}}),
                     distill_prefix + "-manifest.json");

      const auto print_history = [](const char* tag, const TrainHistory& h) {
        for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
          std::printf("%s epoch %2zu  train-loss %.6f  val-loss %.6f  lr %g\n", tag, e + 1,
                      h.train_loss[e], h.val_loss[e], h.learning_rate[e]);
        }
      };
      print_history("teacher  ", out.report.teacher_history);
      print_history("distilled", out.report.distilled_history);
      print_history("baseline ", out.report.baseline_history);
      std::printf("clean accuracy: teacher %.4f  distilled %.4f  baseline %.4f\n",
                  out.report.teacher_clean_accuracy, out.report.distilled_clean_accuracy,
                  out.report.baseline_clean_accuracy);
      std::printf("uncapped cw success: distilled %.4f  baseline %.4f\n",
                  out.report.cw_uncapped_distilled.success_rate,
                  out.report.cw_uncapped_baseline.success_rate);
      std::printf("reports written with prefix %s\n", distill_prefix.c_str());
      return 0;
    }

    if (report_cmd->parsed()) {
      SvgMetric metric;
      if (report_metric == "top1-error") {
        metric = SvgMetric::kTop1Error;
      } else if (report_metric == "top5-error") {
        metric = SvgMetric::kTop5Error;
      } else if (report_metric == "top1-accuracy") {
        metric = SvgMetric::kTop1Accuracy;
      } else {
        throw std::invalid_argument("report: unknown metric '" + report_metric + "'");
      }
      std::vector<NamedCurve> curves;
      for (const std::string& path : report_in) {
        curves.push_back({std::filesystem::path(path).stem().string(), read_sweep_csv(path)});
      }
      render_svg(curves, report_svg, metric);
      RunManifest manifest;
      manifest.command = args;
      manifest.config = {{"metric", report_metric}};
      write_manifest(manifest, report_svg + ".manifest.json");
      std::printf("svg written to %s\n", report_svg.c_str());
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}

}  // namespace advw
