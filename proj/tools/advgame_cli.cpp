// advgame: randomized adversarial attacks against sets of classifiers.
//
//   advgame attack   --model a.json --model b.json --dataset pts.csv --eps 1.2 --method mwu-exact
//   advgame margins  --model a.json --dataset pts.csv
//   advgame evaluate --model a.json --dataset pts.csv --results run/results.json
//   advgame report   results/
//   advgame generate --out demo/synthetic --seed 7

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

#include "advgame/advgame.hpp"

using namespace advgame;

namespace {

struct CommonFlags {
  std::vector<std::string> models;
  std::string dataset;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--model", f.models, "model JSON file (repeatable, order defines the set)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--dataset", f.dataset, "CSV with columns f0..f{d-1},label")
      ->required()
      ->check(CLI::ExistingFile);
}

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

void print_report(const AttackReport& r, std::ostream& out) {
  out << std::fixed << std::setprecision(2);
  out << "method " << r.method << "  " << to_string(r.budget.norm) << " eps " << r.budget.eps << "\n";
  out << "mean accuracy " << 100.0 * r.mean_accuracy << "%  max accuracy " << 100.0 * r.max_accuracy
      << "%  min accuracy " << 100.0 * r.min_accuracy << "%\n";
  for (std::size_t i = 0; i < r.classifier_accuracy.size(); ++i) {
    out << "  member " << i << ": " << 100.0 * r.classifier_accuracy[i] << "%\n";
  }
  out.unsetf(std::ios::floatfield);
}

int run_margins(const CommonFlags& f) {
  const ClassifierSet set = load_model_set(as_paths(f.models));
  const Dataset data = load_dataset(f.dataset);
  std::cout << "point,label";
  for (const auto& l : set.labels()) std::cout << "," << l;
  std::cout << ",min\n";
  for (std::size_t j = 0; j < data.size(); ++j) {
    std::cout << j << "," << data[j].label;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.size(); ++i) {
      std::cout << ",";
      if (!set[i].is_linear()) {
        std::cout << "nonlinear";
        continue;
      }
      if (set[i].predict(data[j].x) != data[j].label) {
        std::cout << "misclassified";
        lowest = 0.0;
        continue;
      }
      const double m = margin(set[i].linear(), data[j].x, data[j].label);
      lowest = std::min(lowest, m);
      std::cout << format_double(m);
    }
    std::cout << "," << (std::isfinite(lowest) ? format_double(lowest) : "n/a") << "\n";
  }
  return 0;
}

int run_generate(const SyntheticSpec& spec, const fs::path& out) {
  const SyntheticInstance inst = generate_synthetic_sparse_set(spec);
  fs::create_directories(out);
  for (std::size_t i = 0; i < inst.set.size(); ++i) {
    save_model(inst.set[i], out / ("model" + std::to_string(i) + ".json"));
  }
  save_dataset(inst.data, spec.dim, out / "points.csv");
  std::cout << "wrote " << inst.set.size() << " models and " << inst.data.size() << " points to "
            << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized adversarial attacks on classifier sets"};
  app.require_subcommand(1);

  // attack
  CommonFlags attack_flags;
  ExperimentConfig exp;
  std::string method = "mwu-exact";
  std::string norm = "l2";
  double eps = 1.0;
  std::optional<double> beta;
  std::string out_dir = "results";
  double slack = exp.mwu.geometry.strict_slack;
  std::size_t max_regions = exp.mwu.geometry.max_regions;
  auto* attack = app.add_subcommand("attack", "run one attack method over a dataset");
  add_common(attack, attack_flags);
  attack->add_option("--method", method, "mwu-exact | mwu-pgd | oracle | ensemble | best-individual")
      ->capture_default_str();
  attack->add_option("--norm", norm, "l2 | linf")->capture_default_str();
  attack->add_option("--eps", eps, "noise budget")->capture_default_str();
  attack->add_option("--rounds", exp.mwu.rounds, "MWU rounds T")->capture_default_str();
  attack->add_option("--beta", beta, "MWU update parameter (default sqrt(ln n / T))");
  attack->add_option("--pgd-iters", exp.mwu.pgd_iterations, "PGD iterations per best response")
      ->capture_default_str();
  attack->add_option("--seed", exp.mwu.seed, "seed recorded with the run")->capture_default_str();
  attack->add_flag("--pixel-box", exp.mwu.pixel_box, "keep x+v inside [0,1]^d");
  attack->add_option("--threads", exp.threads, "worker threads")->capture_default_str();
  attack->add_option("--slack", slack, "strict inequality slack for region programs")->capture_default_str();
  attack->add_option("--max-regions", max_regions, "cap on enumerated regions")->capture_default_str();
  attack->add_option("--out", out_dir, "results root")->capture_default_str();

  // margins
  CommonFlags margin_flags;
  auto* margins = app.add_subcommand("margins", "distance from each point to each linear decision boundary");
  add_common(margins, margin_flags);

  // evaluate
  CommonFlags eval_flags;
  std::string results_path;
  auto* evaluate = app.add_subcommand("evaluate", "score the attacks stored in a results.json");
  add_common(evaluate, eval_flags);
  evaluate->add_option("--results", results_path, "results.json written by attack")
      ->required()
      ->check(CLI::ExistingFile);

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "summary table and convergence_all.csv for a results root");
  report->add_option("dir", report_dir, "results root or single run directory")->required();

  // generate
  SyntheticSpec spec;
  std::string gen_out = "synthetic";
  auto* generate = app.add_subcommand("generate", "write a synthetic sparse linear set and dataset");
  generate->add_option("--dim", spec.dim)->capture_default_str();
  generate->add_option("--classes", spec.classes)->capture_default_str();
  generate->add_option("--classifiers", spec.classifiers)->capture_default_str();
  generate->add_option("--sparsity", spec.sparsity)->capture_default_str();
  generate->add_option("--points", spec.points)->capture_default_str();
  generate->add_option("--seed", spec.seed)->capture_default_str();
  generate->add_option("--out", gen_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*attack) {
      exp.model_paths = as_paths(attack_flags.models);
      exp.dataset_path = attack_flags.dataset;
      exp.method = parse_method(method);
      exp.mwu.budget = AttackBudget(parse_norm(norm), eps);
      exp.mwu.beta = beta;
      exp.mwu.geometry.strict_slack = slack;
      exp.mwu.geometry.max_regions = max_regions;
      exp.mwu.geometry.validate();
      exp.output_dir = out_dir;
      const ExperimentResult r = run_experiment(exp);
      print_report(r.report, std::cout);
      std::cout << "results in " << r.directory.string() << "\n";
      return 0;
    }
    if (*margins) return run_margins(margin_flags);
    if (*evaluate) {
      const ClassifierSet set = load_model_set(as_paths(eval_flags.models));
      const Dataset data = load_dataset(eval_flags.dataset);
      const json doc = detail::parse_json(detail::read_file(results_path), results_path);
      const detail::Field cfg(doc.at("config"), "config", results_path);
      const AttackBudget budget(parse_norm(cfg.at("norm").string()), cfg.at("eps").number());
      const auto attacks = load_attacks(results_path, budget);
      print_report(evaluate_attack(set, attacks, data, budget, cfg.at("method").string()), std::cout);
      return 0;
    }
    if (*report) {
      emit_report(report_dir, std::cout);
      return 0;
    }
    if (*generate) return run_generate(spec, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
