#pragma once

// File formats and experiment orchestration.
//
// Models are JSON objects tagged by "kind":
//   linear       {"weights": [[..] x k], "biases": [..]}
//   mlp          {"layers": [{"weights": [[..]], "biases": [..], "activation": "relu"|"identity"}]}
//   all_pairs    {"pairs": [{"i": 0, "j": 1, "weights": [..], "bias": b}]}
//   multivector  {"weights": [w_0.., b_0, w_1.., b_1, ...]}
//   set          {"members": [<model>, ...], "labels": [..]}
// plus "num_classes" and "dim" on every single model. all_pairs and
// multivector are converted to one-vs-all on load.
//
// Datasets are CSV with header f0,...,f{d-1},label.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgame/bench.hpp"

namespace advgame {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace detail {

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

// Field access with the dotted path in every error message.
class Field {
 public:
  Field(const json& node, std::string path, std::string source)
      : node_(&node), path_(std::move(path)), source_(std::move(source)) {}

  const json& node() const { return *node_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(source_ + ": field '" + path_ + "': " + what);
  }

  Field at(const std::string& key) const {
    if (!node_->is_object()) fail("expected an object");
    auto it = node_->find(key);
    if (it == node_->end()) {
      throw ParseError(source_ + ": missing field '" + join(key) + "'");
    }
    return {*it, join(key), source_};
  }

  bool has(const std::string& key) const {
    return node_->is_object() && node_->contains(key);
  }

  Field at(std::size_t i) const {
    return {(*node_)[i], path_ + "[" + std::to_string(i) + "]", source_};
  }

  std::size_t size() const {
    if (!node_->is_array()) fail("expected an array");
    return node_->size();
  }

  double number() const {
    if (!node_->is_number()) fail("expected a number, got " + std::string(node_->type_name()));
    const double value = node_->get<double>();
    if (!std::isfinite(value)) fail("non-finite value");
    return value;
  }

  int integer() const {
    if (!node_->is_number_integer()) fail("expected an integer");
    return node_->get<int>();
  }

  std::string string() const {
    if (!node_->is_string()) fail("expected a string");
    return node_->get<std::string>();
  }

  Vector vector(std::optional<int> expected = std::nullopt) const {
    const std::size_t n = size();
    if (expected && static_cast<int>(n) != *expected) {
      fail("expected " + std::to_string(*expected) + " entries, got " + std::to_string(n));
    }
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = at(i).number();
    return v;
  }

  Matrix matrix(std::optional<int> rows, std::optional<int> cols) const {
    const std::size_t r = size();
    if (rows && static_cast<int>(r) != *rows) {
      fail("expected " + std::to_string(*rows) + " rows, got " + std::to_string(r));
    }
    if (r == 0) fail("empty matrix");
    const Vector first = at(0).vector(cols);
    Matrix m(static_cast<Eigen::Index>(r), first.size());
    m.row(0) = first.transpose();
    for (std::size_t i = 1; i < r; ++i) {
      m.row(static_cast<Eigen::Index>(i)) =
          at(i).vector(static_cast<int>(first.size())).transpose();
    }
    return m;
  }

 private:
  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* node_;
  std::string path_;
  std::string source_;
};

inline json vector_json(const Vector& v) { return json(to_std(v)); }

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

inline Classifier parse_single_model(const Field& f) {
  const std::string kind = f.at("kind").string();
  const int k = f.at("num_classes").integer();
  const int d = f.at("dim").integer();
  if (k < 2) f.at("num_classes").fail("must be >= 2");
  if (d < 1) f.at("dim").fail("must be >= 1");
  try {
    if (kind == "linear") {
      return LinearClassifier(f.at("weights").matrix(k, d), f.at("biases").vector(k));
    }
    if (kind == "mlp") {
      const Field layers = f.at("layers");
      std::vector<DenseLayer> parsed;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const Field layer = layers.at(l);
        const std::string act = layer.has("activation")
                                    ? layer.at("activation").string()
                                    : std::string("identity");
        if (act != "relu" && act != "identity") {
          layer.at("activation").fail("expected relu or identity");
        }
        parsed.push_back({layer.at("weights").matrix(std::nullopt, std::nullopt),
                          layer.at("biases").vector(),
                          act == "relu" ? Activation::relu : Activation::identity});
      }
      MlpClassifier mlp(std::move(parsed));
      if (mlp.dim() != d || mlp.num_classes() != k) {
        f.fail("mlp shape " + std::to_string(mlp.dim()) + " -> " +
               std::to_string(mlp.num_classes()) + " does not match dim/num_classes");
      }
      return mlp;
    }
    if (kind == "all_pairs") {
      const Field pairs = f.at("pairs");
      std::map<std::pair<int, int>, PairwisePredictor> table;
      for (std::size_t e = 0; e < pairs.size(); ++e) {
        const Field p = pairs.at(e);
        const int i = p.at("i").integer();
        const int j = p.at("j").integer();
        if (!table.emplace(std::make_pair(i, j),
                           PairwisePredictor{p.at("weights").vector(d), p.at("bias").number()})
                 .second) {
          p.fail("duplicate pair");
        }
      }
      return convert_all_pairs(AllPairsClassifier(k, std::move(table)));
    }
    if (kind == "multivector") {
      const Vector w = f.at("weights").vector(k * (d + 1));
      return convert_multivector(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), k, d);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const InputError& e) {
    f.fail(e.what());
  }
  f.at("kind").fail("unknown model kind '" + kind + "'");
}

}  // namespace detail

inline json model_to_json(const Classifier& c) {
  if (c.is_linear()) {
    const auto& lin = c.linear();
    return {{"kind", "linear"},
            {"num_classes", lin.num_classes()},
            {"dim", lin.dim()},
            {"weights", detail::matrix_json(lin.weights())},
            {"biases", detail::vector_json(lin.biases())}};
  }
  if (const auto* mlp = std::get_if<MlpClassifier>(&c.model())) {
    json layers = json::array();
    for (const auto& layer : mlp->layers()) {
      layers.push_back({{"weights", detail::matrix_json(layer.weights)},
                        {"biases", detail::vector_json(layer.biases)},
                        {"activation", layer.activation == Activation::relu ? "relu" : "identity"}});
    }
    return {{"kind", "mlp"},
            {"num_classes", mlp->num_classes()},
            {"dim", mlp->dim()},
            {"layers", std::move(layers)}};
  }
  throw ContractError("model_to_json: ensembles are not serialisable");
}

inline void save_model(const Classifier& c, const fs::path& path) {
  detail::write_file(path, model_to_json(c).dump(2) + "\n");
}

inline void save_model_set(const ClassifierSet& set, const fs::path& path) {
  json members = json::array();
  for (const auto& c : set.members()) members.push_back(model_to_json(c));
  detail::write_file(path, json{{"kind", "set"}, {"members", members}, {"labels", set.labels()}}
                                   .dump(2) + "\n");
}

// Members of one model file: a single model or a "set".
inline std::vector<std::pair<std::string, Classifier>> load_models(const fs::path& path) {
  const std::string source = path.string();
  const json doc = detail::parse_json(detail::read_file(path), source);
  const detail::Field root(doc, "", source);
  std::vector<std::pair<std::string, Classifier>> out;
  if (root.has("kind") && root.at("kind").node() == "set") {
    const detail::Field members = root.at("members");
    std::vector<std::string> labels;
    if (root.has("labels")) {
      const detail::Field l = root.at("labels");
      for (std::size_t i = 0; i < l.size(); ++i) labels.push_back(l.at(i).string());
      if (labels.size() != members.size()) root.at("labels").fail("one label per member required");
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      out.emplace_back(labels.empty() ? path.stem().string() + "#" + std::to_string(i) : labels[i],
                       detail::parse_single_model(members.at(i)));
    }
    return out;
  }
  out.emplace_back(path.stem().string(), detail::parse_single_model(root));
  return out;
}

inline Classifier load_model(const fs::path& path) {
  auto models = load_models(path);
  if (models.size() != 1) {
    throw ParseError(path.string() + ": expected a single model, found a set of " +
                     std::to_string(models.size()));
  }
  return std::move(models.front().second);
}

inline ClassifierSet load_model_set(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw InputError("no model files given");
  std::vector<Classifier> members;
  std::vector<std::string> labels;
  for (const auto& p : paths) {
    for (auto& [label, c] : load_models(p)) {
      labels.push_back(label);
      members.push_back(std::move(c));
    }
  }
  return ClassifierSet(std::move(members), std::move(labels));
}

inline Dataset load_dataset(const fs::path& path, std::ostream* warn = &std::cerr) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  const std::string source = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError(source + ": header must be f0,...,f{d-1},label");
  }
  const int d = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < d; ++i) {
    if (header[static_cast<std::size_t>(i)] != "f" + std::to_string(i)) {
      throw ParseError(source + ": header column " + std::to_string(i + 1) +
                       " must be f" + std::to_string(i));
    }
  }

  Dataset data;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != d + 1) {
      throw ParseError(source + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " columns, expected " +
                       std::to_string(d + 1));
    }
    LabeledPoint pt{Vector(d), 0};
    for (int i = 0; i <= d; ++i) {
      const std::string& text = cells[static_cast<std::size_t>(i)];
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
      if (used != text.size() || text.empty() || !std::isfinite(value)) {
        throw ParseError(source + ": row " + std::to_string(row) + ", column '" +
                         header[static_cast<std::size_t>(i)] + "': bad number '" + text + "'");
      }
      if (i < d) {
        pt.x[i] = value;
      } else {
        if (value != std::floor(value) || value < 0.0 || value > 1e9) {
          throw ParseError(source + ": row " + std::to_string(row) +
                           ": label must be a nonnegative integer");
        }
        pt.label = static_cast<int>(value);
      }
    }
    data.push_back(std::move(pt));
  }
  if (data.empty() && warn) *warn << "warning: " << source << " contains no data rows\n";
  return data;
}

inline void save_dataset(const Dataset& data, int dim, const fs::path& path) {
  std::ostringstream out;
  for (int i = 0; i < dim; ++i) out << 'f' << i << ',';
  out << "label\n";
  char buf[64];
  for (const auto& pt : data) {
    require_dim(pt.x, dim, "save_dataset");
    for (int i = 0; i < dim; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", pt.x[i]);
      out << buf;
    }
    out << pt.label << '\n';
  }
  detail::write_file(path, out.str());
}

struct ExperimentConfig {
  std::vector<fs::path> model_paths;
  fs::path dataset_path;
  Method method = Method::mwu_exact;
  MwuConfig mwu;          // budget, rounds, beta, pgd iterations, pixel box, seed
  fs::path output_dir = "results";
  unsigned threads = 1;

  // Everything that affects the results; paths and thread count excluded.
  json to_json() const {
    json j = {{"method", to_string(method)},
              {"norm", to_string(mwu.budget.norm)},
              {"eps", mwu.budget.eps},
              {"rounds", mwu.rounds},
              {"pgd_iterations", mwu.pgd_iterations},
              {"pixel_box", mwu.pixel_box},
              {"strict_slack", mwu.geometry.strict_slack},
              {"qp_tolerance", mwu.geometry.qp_tolerance},
              {"max_regions", mwu.geometry.max_regions},
              {"seed", mwu.seed}};
    j["beta"] = mwu.beta ? json(*mwu.beta) : json(nullptr);
    return j;
  }
};

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ExperimentResult {
  AttackReport report;
  fs::path directory;
};

// Runs the configured method on every point and writes results.json,
// summary.csv and, for MWU methods, convergence.csv into
// <output_dir>/<method>-<hash>-seed<seed>.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       std::ostream* warn = &std::cerr) {
  const ClassifierSet set = load_model_set(cfg.model_paths);
  const Dataset data = load_dataset(cfg.dataset_path, warn);
  check_method(cfg.method, set);
  if (cfg.method == Method::mwu_exact || cfg.method == Method::oracle) {
    if (set.all_linear()) {
      // Region count check before any work.
      RegionEnumerator probe(set.num_classes(), static_cast<int>(set.size()), 0,
                             MixedStrategy::uniform(set.size()),
                             cfg.mwu.geometry.max_regions);
      (void)probe;
    }
  }
  cfg.mwu.validate(set.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (data[j].x.size() != set.dim()) {
      throw InputError("dataset row " + std::to_string(j + 2) + " has " +
                       std::to_string(data[j].x.size()) + " features, models expect " +
                       std::to_string(set.dim()));
    }
    if (data[j].label >= set.num_classes()) {
      throw InputError("dataset row " + std::to_string(j + 2) + ": label " +
                       std::to_string(data[j].label) + " outside [0, " +
                       std::to_string(set.num_classes()) + ")");
    }
    if (cfg.mwu.pixel_box) require_unit_box(data[j].x);
  }

  const std::vector<PointAttack> runs =
      attack_dataset(cfg.method, set, data, cfg.mwu, cfg.threads);
  AttackReport report = evaluate_attack(set, attacks_of(runs), data, cfg.mwu.budget,
                                        to_string(cfg.method));

  const json config_json = cfg.to_json();
  std::uint64_t h = fnv1a(config_json.dump());
  for (const auto& p : cfg.model_paths) h = fnv1a(detail::read_file(p), h);
  h = fnv1a(detail::read_file(cfg.dataset_path), h);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  const fs::path dir = cfg.output_dir / (std::string(to_string(cfg.method)) + "-" + hex +
                                         "-seed" + std::to_string(cfg.mwu.seed));
  fs::create_directories(dir);

  json points = json::array();
  for (std::size_t j = 0; j < runs.size(); ++j) {
    json atoms = json::array();
    const RandomizedAttack& q = runs[j].attack;
    for (std::size_t a = 0; a < q.size(); ++a) {
      atoms.push_back({{"v", detail::vector_json(q.vectors()[a])}, {"p", q.probs()[a]}});
    }
    json pt = {{"index", j}, {"label", data[j].label}, {"atoms", std::move(atoms)},
               {"loss", report.point_losses[j]}};
    if (runs[j].trace) {
      const GameTrace& tr = *runs[j].trace;
      std::vector<double> running;
      double sum = 0.0;
      for (std::size_t t = 0; t < tr.round_payoffs.size(); ++t) {
        sum += tr.round_payoffs[t];
        running.push_back(sum / static_cast<double>(t + 1));
      }
      pt["value_trace"] = running;
      pt["value_estimate"] = tr.value_estimate;
      pt["p_star"] = tr.p_star.probs();
    }
    points.push_back(std::move(pt));
  }
  const json results = {
      {"config", config_json},
      {"models", set.labels()},
      {"report",
       {{"method", report.method},
        {"mean_accuracy", report.mean_accuracy},
        {"max_accuracy", report.max_accuracy},
        {"min_accuracy", report.min_accuracy},
        {"classifier_accuracy", report.classifier_accuracy}}},
      {"points", std::move(points)}};
  detail::write_file(dir / "results.json", results.dump(2) + "\n");

  detail::write_file(dir / "summary.csv",
                     "method,norm,eps,mean_accuracy,max_accuracy\n" + report.method + "," +
                         to_string(cfg.mwu.budget.norm) + "," +
                         format_double(cfg.mwu.budget.eps) + "," +
                         format_double(report.mean_accuracy) + "," +
                         format_double(report.max_accuracy) + "\n");

  const auto series = convergence_series(set, runs, data);
  if (!series.empty()) {
    std::string csv = "round,max_accuracy,mean_accuracy,min_accuracy\n";
    for (const auto& pt : series) {
      csv += std::to_string(pt.round) + "," + format_double(pt.max_accuracy) + "," +
             format_double(pt.mean_accuracy) + "," + format_double(pt.min_accuracy) + "\n";
    }
    detail::write_file(dir / "convergence.csv", csv);
  }
  return {std::move(report), dir};
}

// Reads a results.json back and re-validates every atom against its budget.
inline std::vector<RandomizedAttack> load_attacks(const fs::path& path,
                                                  std::optional<AttackBudget> budget = std::nullopt) {
  const std::string source = path.string();
  const json doc = detail::parse_json(detail::read_file(path), source);
  const detail::Field root(doc, "", source);
  if (!budget) {
    const detail::Field c = root.at("config");
    budget = AttackBudget(parse_norm(c.at("norm").string()), c.at("eps").number());
  }
  const detail::Field points = root.at("points");
  std::vector<RandomizedAttack> out;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const detail::Field atoms = points.at(j).at("atoms");
    std::vector<Vector> vs;
    std::vector<double> ps;
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      vs.push_back(atoms.at(a).at("v").vector());
      ps.push_back(atoms.at(a).at("p").number());
    }
    try {
      RandomizedAttack q(std::move(vs), MixedStrategy::normalized(std::move(ps)));
      q.validate(*budget);
      out.push_back(std::move(q));
    } catch (const Error& e) {
      throw ParseError(source + ": point " + std::to_string(j) + ": " + e.what());
    }
  }
  return out;
}

struct ReportRow {
  std::string run;
  std::string method;
  double mean_accuracy = 0.0;
  double max_accuracy = 0.0;
  std::vector<std::vector<std::string>> convergence;  // rows after the header
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

inline double parse_cell(const std::string& text, const fs::path& file) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ParseError(file.string() + ": bad number '" + text + "'");
  }
  return v;
}

inline ReportRow read_run(const fs::path& dir) {
  const fs::path summary = dir / "summary.csv";
  std::istringstream in(read_file(summary));
  std::string header, line;
  if (!std::getline(in, header) || header != "method,norm,eps,mean_accuracy,max_accuracy" ||
      !std::getline(in, line)) {
    throw ParseError(summary.string() + ": corrupt summary");
  }
  const auto cells = split_csv(line);
  if (cells.size() != 5) throw ParseError(summary.string() + ": corrupt summary row");
  ReportRow row{dir.filename().string(), cells[0], parse_cell(cells[3], summary),
                parse_cell(cells[4], summary), {}};
  const fs::path conv = dir / "convergence.csv";
  if (fs::exists(conv)) {
    std::istringstream cin(read_file(conv));
    if (!std::getline(cin, header) || header != "round,max_accuracy,mean_accuracy,min_accuracy") {
      throw ParseError(conv.string() + ": corrupt convergence series");
    }
    while (std::getline(cin, line)) {
      if (line.empty()) continue;
      auto c = split_csv(line);
      if (c.size() != 4) throw ParseError(conv.string() + ": corrupt convergence row");
      for (const auto& cell : c) parse_cell(cell, conv);
      row.convergence.push_back(std::move(c));
    }
  }
  return row;
}

}  // namespace detail

// Collects every run below `dir` (or `dir` itself), prints a table sorted by
// max accuracy and writes convergence_all.csv for plotting. Nothing is written
// unless every run parses.
inline std::vector<ReportRow> emit_report(const fs::path& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw InputError(dir.string() + " is not a directory");
  std::vector<fs::path> runs;
  if (fs::exists(dir / "summary.csv")) {
    runs.push_back(dir);
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "summary.csv")) {
        runs.push_back(entry.path());
      }
    }
  }
  if (runs.empty()) throw InputError("no results found in " + dir.string());
  std::sort(runs.begin(), runs.end());

  std::vector<ReportRow> rows;
  for (const auto& r : runs) rows.push_back(detail::read_run(r));
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return a.max_accuracy < b.max_accuracy;
  });

  std::string csv = "run,method,round,max_accuracy,mean_accuracy,min_accuracy\n";
  for (const auto& row : rows) {
    for (const auto& c : row.convergence) {
      csv += row.run + "," + row.method + "," + c[0] + "," + c[1] + "," + c[2] + "," + c[3] + "\n";
    }
  }
  detail::write_file(dir / "convergence_all.csv", csv);

  out << std::left << std::setw(18) << "method" << std::right << std::setw(10) << "mean"
      << std::setw(10) << "max" << "\n";
  for (const auto& row : rows) {
    out << std::left << std::setw(18) << row.method << std::right << std::fixed
        << std::setprecision(1) << std::setw(9) << 100.0 * row.mean_accuracy << "%"
        << std::setw(9) << 100.0 * row.max_accuracy << "%\n";
  }
  out.unsetf(std::ios::floatfield);
  return rows;
}

}  // namespace advgame
