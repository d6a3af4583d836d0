#include "ivtlab/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "ivt/checkpoint.hpp"
#include "ivt/geometry.hpp"
#include "ivt/metrics.hpp"
#include "ivt/quadlab.hpp"
#include "ivt/rng.hpp"
#include "ivtlab/config.hpp"

#ifndef IVTLAB_VERSION
#define IVTLAB_VERSION "dev"
#endif

namespace ivtlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IoError : public ivt::Error {
 public:
  using ivt::Error::Error;
};

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

fs::path output_root() {
  if (const char* root = std::getenv("IVTLAB_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
    return root;
  }
  return ".";
}

// --out wins; then the config's output.dir (relative to the output root);
// then <root>/<config stem>.
fs::path resolve_output(const ExperimentConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (cfg.output_dir) {
    const fs::path p(*cfg.output_dir);
    return p.is_absolute() ? p : output_root() / p;
  }
  const std::string stem = cfg.source.empty() ? "run" : cfg.source.stem().string();
  return output_root() / stem;
}

fs::path default_dir(const std::string& flag, const std::string& name) {
  return flag.empty() ? output_root() / name : fs::path(flag);
}

bool is_bundle_dir(const fs::path& dir) {
  return fs::exists(dir / "bundle.json") || fs::exists(dir / "partial.json") ||
         fs::exists(dir / "config.json");
}

// ---------------------------------------------------------------- run

std::string accuracy_csv(const ivt::AccuracyMatrix& m, const std::string& digest,
                         std::uint64_t seed) {
  std::ostringstream out;
  out << "config_digest,seed,after_task,scope,accuracy\n";
  for (std::size_t t = 0; t < m.tasks(); ++t) {
    for (std::size_t i = 0; i < m.a[t].size(); ++i) {
      out << digest << ',' << seed << ',' << t + 1 << ",task_" << i + 1 << ',' << g17(m.a[t][i])
          << '\n';
    }
    out << digest << ',' << seed << ',' << t + 1 << ",all," << g17(m.overall[t]) << '\n';
  }
  return out.str();
}

std::string ivt_log_csv(const std::vector<ivt::IvtFiring>& log, const std::string& digest,
                        std::uint64_t seed) {
  std::ostringstream out;
  out << "config_digest,seed,task,epoch,mean_coefficient,displacement_norm\n";
  for (const auto& f : log) {
    out << digest << ',' << seed << ',' << f.task_id << ',' << f.epoch << ','
        << g17(f.mean_coefficient) << ',' << g17(f.displacement_norm) << '\n';
  }
  return out.str();
}

void write_seed_artifacts(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t seed,
                          const ivt::RunRecord& record, bool partial) {
  make_dirs(dir);
  write_text(dir / "accuracy_matrix.csv", accuracy_csv(record.accuracy, cfg.digest, seed));
  write_text(dir / "ivt_log.csv", ivt_log_csv(record.ivt_log, cfg.digest, seed));
  json run = {{"config_digest", cfg.digest},
              {"seed", seed},
              {"complete", !partial},
              {"accuracy", ivt::to_json(record.accuracy)},
              {"seconds_per_task", record.seconds_per_task}};
  if (record.accuracy.tasks() > 0) run["metrics"] = ivt::to_json(ivt::compute_metrics(record.accuracy));
  write_text(dir / "run.json", run.dump(2) + "\n");
  if (!cfg.write_checkpoints) return;
  make_dirs(dir / "checkpoints");
  for (const auto& ck : record.checkpoints) {
    ivt::Checkpoint c{ck.params, ck.optimizer, ck.ledger,
                      {static_cast<std::uint64_t>(ck.task_id), seed, cfg.digest,
                       {{"dataset_digest", cfg.dataset_digest}, {"method", cfg.label()}}}};
    try {
      ivt::write_checkpoint(dir / "checkpoints" / ("task_" + std::to_string(ck.task_id) + ".ckpt"), c);
    } catch (const ivt::Error& e) {
      throw IoError(e.what());
    }
  }
}

struct RunOptions {
  std::string config;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = load_config(opt.config);
  if (opt.seed) override_seeds(cfg, {*opt.seed});
  const fs::path dir = resolve_output(cfg, opt.out);

  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!opt.force) {
      err << "ivtlab run: " << dir.string()
          << " already holds results; pass --force to overwrite\n";
      return kUsageError;
    }
    if (!is_bundle_dir(dir)) {
      err << "ivtlab run: refusing to overwrite " << dir.string()
          << ", which does not look like a results bundle\n";
      return kUsageError;
    }
    fs::remove_all(dir);
  }

  const ivt::TaskStream stream = build_stream(cfg);
  make_dirs(dir);
  write_text(dir / "config.json", cfg.canonical.dump(2) + "\n");

  std::vector<ivt::MetricsReport> reports;
  json runs = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    ivt::MethodSpec method = cfg.method;
    method.train.seed = seed;
    const fs::path seed_dir = dir / ("seed_" + std::to_string(seed));
    try {
      const ivt::RunRecord record = ivt::run_sequence(stream, method, cfg.digest);
      write_seed_artifacts(seed_dir, cfg, seed, record, false);
      reports.push_back(ivt::compute_metrics(record.accuracy));
      runs.push_back({{"seed", seed}, {"metrics", ivt::to_json(reports.back())}});
    } catch (const ivt::RunFailure& failure) {
      write_seed_artifacts(seed_dir, cfg, seed, failure.partial(), true);
      const json note = {
          {"config_digest", cfg.digest},
          {"failed_seed", seed},
          {"completed_tasks", failure.partial().accuracy.tasks()},
          {"error", failure.what()},
          {"recovery",
           "completed seeds and the failed seed's finished tasks are kept; fix the cause and "
           "rerun with --force"}};
      write_text(dir / "partial.json", note.dump(2) + "\n");
      err << "ivtlab run: seed " << seed << " failed: " << failure.what() << "\n"
          << "partial results kept in " << dir.string() << "\n";
      return kPartialRun;
    }
  }

  const ivt::AggregatedMetrics agg = ivt::aggregate(reports);
  const json bundle = {{"tool", "ivtlab"},
                       {"version", IVTLAB_VERSION},
                       {"config_digest", cfg.digest},
                       {"dataset_digest", cfg.dataset_digest},
                       {"label", cfg.label()},
                       {"seeds", cfg.seeds},
                       {"stream", ivt::stream_manifest(stream)},
                       {"runs", runs},
                       {"aggregate", ivt::to_json(agg)}};
  write_text(dir / "bundle.json", bundle.dump(2) + "\n");
  const std::string table = ivt::metrics_table({{cfg.label(), agg}});
  write_text(dir / "metrics.txt", "# config_digest " + cfg.digest + "\n" + table);
  out << table;
  out << "results: " << dir.string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- eval / lmc / landscape

struct Scopes {
  std::vector<std::string> names;
  std::vector<ivt::LabeledDataset> data;
  ivt::LabeledDataset pooled;
};

// Test sets of every task whose classes all have a head column in `layout`.
Scopes scopes_for(const ivt::TaskStream& stream, const ivt::ParamLayout& layout) {
  Scopes s;
  std::vector<const ivt::LabeledDataset*> parts;
  for (const auto& task : stream.tasks) {
    const bool covered = std::all_of(task.class_ids.begin(), task.class_ids.end(),
                                     [&](int c) { return layout.has_class(c); });
    if (!covered) continue;
    s.names.push_back("task_" + std::to_string(task.task_id));
    s.data.push_back(task.test);
  }
  for (const auto& d : s.data) parts.push_back(&d);
  if (parts.empty()) throw ivt::PreconditionError("checkpoint head covers no complete task");
  s.pooled = ivt::concatenate(parts, ivt::Split::test);
  return s;
}

std::vector<int> sorted_classes(const ivt::ParamLayout& layout) {
  std::vector<int> c = layout.class_ids();
  std::sort(c.begin(), c.end());
  return c;
}

struct EvalOptions {
  std::string checkpoint;
  std::string config;
  std::string head_from;
  std::string out;
};

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream&) {
  const ExperimentConfig cfg = load_config(opt.config);
  const ivt::TaskStream stream = build_stream(cfg);
  const ivt::Checkpoint ck = ivt::read_checkpoint(opt.checkpoint);
  ivt::ParamVector params = ck.params;
  if (!opt.head_from.empty()) {
    const ivt::Checkpoint other = ivt::read_checkpoint(opt.head_from);
    params = ivt::reconcile(params, other.params.layout_ptr(), 0.0);
  }
  const Scopes scopes = scopes_for(stream, params.layout());
  const std::vector<int> classes = sorted_classes(params.layout());
  std::ostringstream csv;
  csv << "config_digest,scope,correct,total,accuracy,loss\n";
  auto row = [&](const std::string& name, const ivt::LabeledDataset& data) {
    const ivt::ScopeResult r = ivt::evaluate_scope(params, data, classes);
    csv << ck.meta.config_digest << ',' << name << ',' << r.count.correct << ',' << r.count.total
        << ',' << g17(r.accuracy) << ',' << g17(r.loss) << '\n';
  };
  for (std::size_t i = 0; i < scopes.names.size(); ++i) row(scopes.names[i], scopes.data[i]);
  row("seen", scopes.pooled);
  if (opt.out.empty()) {
    out << csv.str();
  } else {
    write_text(opt.out, csv.str());
  }
  return kSuccess;
}

struct LmcOptions {
  std::string anchor;
  std::string target;
  std::string config;
  std::string out;
  std::size_t points = 41;
};

int cmd_lmc(const LmcOptions& opt, std::ostream& out, std::ostream&) {
  const ExperimentConfig cfg = load_config(opt.config);
  const ivt::TaskStream stream = build_stream(cfg);
  const ivt::Checkpoint a = ivt::read_checkpoint(opt.anchor);
  const ivt::Checkpoint b = ivt::read_checkpoint(opt.target);
  if (!ivt::extends(b.params.layout(), a.params.layout())) {
    throw ivt::ShapeError("checkpoint layouts are not reconcilable (target must extend anchor)");
  }
  const Scopes scopes = scopes_for(stream, b.params.layout());
  std::vector<ivt::EvalScope> eval;
  for (std::size_t i = 0; i < scopes.names.size(); ++i) eval.push_back({scopes.names[i], &scopes.data[i]});

  const ivt::Direction probe = ivt::build_direction(a.params, b.params);
  const auto grid = ivt::default_lambda_grid(probe.lambda_hat, opt.points);
  const ivt::InterpolationScan scan = ivt::lmc_scan(a.params, b.params, grid, eval);

  const fs::path dir = default_dir(opt.out, "lmc");
  make_dirs(dir);
  std::ostringstream csv;
  ivt::write_scan_csv(csv, scan, b.meta.config_digest);
  write_text(dir / "scan.csv", csv.str());
  json manifest = ivt::scan_manifest(scan);
  manifest["config_digest"] = b.meta.config_digest;
  manifest["endpoints"]["anchor"]["checkpoint"] = opt.anchor;
  manifest["endpoints"]["target"]["checkpoint"] = opt.target;
  write_text(dir / "scan.json", manifest.dump(2) + "\n");
  out << "scan: " << scan.lambda_grid.size() << " lambdas x " << scan.scopes.size()
      << " scopes -> " << (dir / "scan.csv").string() << "\n";
  return kSuccess;
}

struct LandscapeOptions {
  std::string origin, dir_a, dir_b, config, out;
  std::vector<double> extents{-0.5, 1.5, -0.5, 1.5};
  std::string resolution = "21x21";
  std::vector<std::string> project;
};

int cmd_landscape(const LandscapeOptions& opt, std::ostream& out, std::ostream&) {
  const ExperimentConfig cfg = load_config(opt.config);
  const ivt::TaskStream stream = build_stream(cfg);
  if (opt.origin == opt.dir_a || opt.origin == opt.dir_b || opt.dir_a == opt.dir_b) {
    throw ivt::PreconditionError("landscape needs three distinct checkpoints");
  }
  if (opt.extents.size() != 4) throw ConfigError("--extents takes a_min,a_max,b_min,b_max");
  std::size_t ra = 0, rb = 0;
  {
    char x = 0;
    std::istringstream in(opt.resolution);
    if (!(in >> ra >> x >> rb) || x != 'x' || ra == 0 || rb == 0) {
      throw ConfigError("--resolution takes AxB, e.g. 21x21");
    }
  }
  const ivt::Checkpoint o = ivt::read_checkpoint(opt.origin);
  const ivt::Checkpoint ca = ivt::read_checkpoint(opt.dir_a);
  const ivt::Checkpoint cb = ivt::read_checkpoint(opt.dir_b);

  // Work in the widest head among the three.
  ivt::LayoutPtr layout = o.params.layout_ptr();
  for (const auto* c : {&ca, &cb}) {
    if (c->params.layout().num_classes() > layout->num_classes()) layout = c->params.layout_ptr();
  }
  const ivt::ParamVector origin = ivt::reconcile(o.params, layout);
  const ivt::ParamVector pa = ivt::reconcile(ca.params, layout);
  const ivt::ParamVector pb = ivt::reconcile(cb.params, layout);
  const ivt::ParamVector da(layout, pa.values() - origin.values());
  const ivt::ParamVector db(layout, pb.values() - origin.values());

  const Scopes scopes = scopes_for(stream, *layout);
  ivt::LandscapeGrid grid = ivt::landscape_grid(
      origin, da, db, {opt.extents[0], opt.extents[1], opt.extents[2], opt.extents[3]}, {ra, rb},
      scopes.pooled);
  grid.projections.push_back(ivt::project_onto(grid, "origin", origin));
  grid.projections.push_back(ivt::project_onto(grid, "dir_a", pa));
  grid.projections.push_back(ivt::project_onto(grid, "dir_b", pb));
  for (const std::string& spec : opt.project) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--project takes name=checkpoint");
    const ivt::Checkpoint extra = ivt::read_checkpoint(spec.substr(eq + 1));
    grid.projections.push_back(ivt::project_onto(grid, spec.substr(0, eq), extra.params));
  }

  const fs::path dir = default_dir(opt.out, "landscape");
  make_dirs(dir);
  std::ostringstream csv;
  ivt::write_grid_csv(csv, grid, o.meta.config_digest);
  write_text(dir / "grid.csv", csv.str());
  json manifest = ivt::grid_manifest(grid);
  manifest["config_digest"] = o.meta.config_digest;
  manifest["checkpoints"] = {{"origin", opt.origin}, {"dir_a", opt.dir_a}, {"dir_b", opt.dir_b}};
  write_text(dir / "grid.json", manifest.dump(2) + "\n");
  out << "grid: " << grid.points.size() << " points -> " << (dir / "grid.csv").string() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- quadcheck

struct QuadOptions {
  std::size_t trials = 100;
  std::size_t gap_trials = 50;
  std::size_t bound_trials = 50;
  std::uint64_t seed = 7;
  std::size_t max_dim = 20;
  bool inject_negative = false;
  std::string out;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

int cmd_quadcheck(const QuadOptions& opt, std::ostream& out, std::ostream& err) {
  namespace q = ivt::quad;
  const fs::path dir = default_dir(opt.out, "quadcheck");
  make_dirs(dir);
  std::vector<Check> checks;
  json report = json::object();
  const fs::path csv_path = dir / "gaps.csv";
  report["csv"] = csv_path.string();

  q::GeneratorConfig gen;
  gen.seed = opt.seed;
  gen.max_dim = opt.max_dim;
  gen.inject_negative_eigenvalue = opt.inject_negative;

  try {
    const q::GapStudy t2 = q::proposition1_gap(gen, 2, opt.trials);
    q::GeneratorConfig gen3 = gen;
    gen3.seed = ivt::mix_seed(opt.seed, 3);
    const q::GapStudy t3 = q::proposition1_gap(gen3, 3, opt.gap_trials);

    std::ostringstream csv;
    csv << "trial,t,dim,gap_full,gap_diag\n";
    for (const auto* study : {&t2, &t3}) {
      for (const auto& tr : study->trials) {
        csv << tr.trial << ',' << tr.t << ',' << tr.dim << ',' << g17(tr.gap_full) << ','
            << g17(tr.gap_diag) << '\n';
      }
    }
    write_text(csv_path, csv.str());

    checks.push_back({"t2_exactness", t2.max_gap_full <= 1e-10, "max gap " + g17(t2.max_gap_full)});
    const double max_res = std::max(t2.max_residual, t3.max_residual);
    checks.push_back({"stationarity_residuals", max_res <= 1e-10, "max residual " + g17(max_res)});
    report["t2"] = {{"trials", opt.trials},
                    {"max_gap_full", t2.max_gap_full},
                    {"median_gap_full", t2.median_gap_full},
                    {"max_gap_diag", t2.max_gap_diag}};
    report["t3"] = {{"trials", opt.gap_trials},
                    {"max_gap_full", t3.max_gap_full},
                    {"median_gap_full", t3.median_gap_full},
                    {"median_gap_diag", t3.median_gap_diag}};

    // Non-converged anchors: the gap should grow with the anchor gradient.
    {
      const q::Instance inst = q::generate_instance(gen, 0, 2);
      ivt::Rng rng(ivt::mix_seed(opt.seed, 11));
      Eigen::VectorXd dir_vec(static_cast<Eigen::Index>(inst.dim()));
      for (auto& v : dir_vec) v = rng.normal();
      std::vector<double> gaps, grads;
      bool increasing = true;
      for (double scale : {1e-3, 1e-2, 1e-1, 1.0}) {
        const Eigen::VectorXd offset = scale * dir_vec;
        const q::StepComparison s = q::compare_step(inst, 2, &offset);
        if (!gaps.empty() && !(s.gap_full > gaps.back())) increasing = false;
        gaps.push_back(s.gap_full);
        grads.push_back(s.anchor_gradient_norm);
      }
      checks.push_back({"perturbed_anchor_gap_grows", increasing && gaps.front() > 0.0,
                        "gaps " + g17(gaps.front()) + " .. " + g17(gaps.back())});
      report["perturbation"] = {{"anchor_gradient_norm", grads}, {"gap_full", gaps}};
    }

    // Diagonal approximation: exact on diagonal curvature, worse on correlated curvature.
    {
      q::Instance diag_inst;
      q::Instance corr_inst;
      const Eigen::Index d = 4;
      for (int k = 0; k < 2; ++k) {
        q::QuadraticTask a;
        a.A = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) a.A(i, i) = 1.0 + static_cast<double>(i + k);
        a.mu = Eigen::VectorXd::LinSpaced(d, static_cast<double>(k), static_cast<double>(k + 1));
        diag_inst.tasks.push_back(a);
        q::QuadraticTask c = a;
        c.A = Eigen::MatrixXd::Constant(d, d, 0.9) + 0.1 * Eigen::MatrixXd::Identity(d, d);
        if (k == 1) c.A(0, 0) += 1.0;
        corr_inst.tasks.push_back(c);
      }
      const q::DiagonalComparison dg = q::diagonalized_comparison(diag_inst, 2);
      const q::DiagonalComparison cr = q::diagonalized_comparison(corr_inst, 2);
      checks.push_back({"diagonal_curvature_matches",
                        std::abs(dg.gap_full - dg.gap_diag) <= 1e-12,
                        "full " + g17(dg.gap_full) + " diag " + g17(dg.gap_diag)});
      checks.push_back({"correlated_curvature_diag_worse", cr.gap_diag > cr.gap_full,
                        "full " + g17(cr.gap_full) + " diag " + g17(cr.gap_diag)});
      report["diagonalized"] = {{"diagonal", {{"gap_full", dg.gap_full}, {"gap_diag", dg.gap_diag}}},
                                {"correlated", {{"gap_full", cr.gap_full}, {"gap_diag", cr.gap_diag}}}};
    }

    // Forgetting bound.
    {
      bool dominated = true, equality = true;
      double worst_ratio = 0.0;
      for (std::size_t k = 0; k < opt.bound_trials; ++k) {
        const q::Instance inst = q::generate_instance(gen, 1000 + k, 1);
        const auto& task = inst.tasks.front();
        ivt::Rng rng(ivt::mix_seed(opt.seed, 2000 + k));
        Eigen::VectorXd theta(task.mu.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = task.mu[i] + rng.normal();
        const q::ForgettingReport r = q::forgetting_and_bound(task.A, theta, task.mu);
        if (r.forgetting > r.bound.bound_value * (1.0 + 1e-9)) dominated = false;
        if (r.bound.bound_value > 0.0) worst_ratio = std::max(worst_ratio, r.forgetting / r.bound.bound_value);
        const Eigen::VectorXd top = task.mu + r.bound.attained_direction;
        const q::ForgettingReport e = q::forgetting_and_bound(task.A, top, task.mu);
        if (std::abs(e.forgetting - e.bound.bound_value) > 1e-9 * e.bound.bound_value) equality = false;
      }
      checks.push_back({"forgetting_bound", dominated, "max forgetting/bound " + g17(worst_ratio)});
      checks.push_back({"bound_equality_on_top_eigenvector", equality, ""});
    }
  } catch (const ivt::PreconditionError& e) {
    checks.push_back({"preconditions", false, std::string("precondition failure: ") + e.what()});
  } catch (const ivt::NumericError& e) {
    checks.push_back({"numerics", false, std::string("numeric failure: ") + e.what()});
  }

  bool ok = true;
  json list = json::array();
  for (const auto& c : checks) {
    ok = ok && c.passed;
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    (c.passed ? out : err) << (c.passed ? "PASS " : "FAIL ") << c.name
                           << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
  }
  report["checks"] = list;
  report["passed"] = ok;
  write_text(dir / "report.json", report.dump(2) + "\n");
  out << "report: " << (dir / "report.json").string() << "\n";
  return ok ? kSuccess : kAssertionFailure;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::vector<std::string> bundles;
  std::vector<std::string> pairs;
  std::string out;
  bool per_task_mean = false;
};

struct LoadedBundle {
  std::string label;
  std::string dataset_digest;
  std::vector<std::uint64_t> seeds;
  std::vector<ivt::MetricsReport> runs;
  ivt::AggregatedMetrics agg;
};

// With `per_task_mean`, metrics are recomputed from each seed's accuracy
// matrix using the mean of per-task accuracies as the overall accuracy.
LoadedBundle load_bundle(const std::string& arg, bool per_task_mean) {
  fs::path p(arg);
  if (fs::is_directory(p)) p /= "bundle.json";
  const json j = read_json_file(p);
  LoadedBundle b;
  try {
    b.label = j.at("label").get<std::string>();
    b.dataset_digest = j.at("dataset_digest").get<std::string>();
    for (const auto& r : j.at("runs")) {
      const auto seed = r.at("seed").get<std::uint64_t>();
      b.seeds.push_back(seed);
      if (!per_task_mean) {
        b.runs.push_back(ivt::metrics_report_from_json(r.at("metrics")));
        continue;
      }
      const fs::path run = p.parent_path() / ("seed_" + std::to_string(seed)) / "run.json";
      ivt::AccuracyMatrix m = ivt::accuracy_matrix_from_json(read_json_file(run).at("accuracy"));
      m.overall = ivt::per_task_mean_overall(m);
      b.runs.push_back(ivt::compute_metrics(m));
    }
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
  b.agg = ivt::aggregate(b.runs);
  return b;
}

int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err) {
  std::vector<LoadedBundle> bundles;
  for (const auto& arg : opt.bundles) bundles.push_back(load_bundle(arg, opt.per_task_mean));
  for (const auto& b : bundles) {
    if (b.dataset_digest != bundles.front().dataset_digest) {
      err << "ivtlab report: bundles were produced on different datasets ("
          << bundles.front().dataset_digest << " vs " << b.dataset_digest << ")\n";
      return kUsageError;
    }
  }
  std::vector<std::pair<std::string, ivt::AggregatedMetrics>> rows;
  for (const auto& b : bundles) rows.emplace_back(b.label, b.agg);

  std::vector<std::pair<std::string, ivt::MetricDelta>> imps;
  for (const std::string& spec : opt.pairs) {
    std::size_t before = 0, after = 0;
    char comma = 0;
    std::istringstream in(spec);
    if (!(in >> before >> comma >> after) || comma != ',') {
      err << "ivtlab report: --pair takes BEFORE,AFTER bundle indices\n";
      return kUsageError;
    }
    if (before >= bundles.size() || after >= bundles.size()) {
      err << "ivtlab report: --pair " << spec << " refers to a missing bundle\n";
      return kUsageError;
    }
    if (bundles[before].seeds != bundles[after].seeds) {
      err << "ivtlab report: --pair " << spec << " bundles were run on different seeds\n";
      return kUsageError;
    }
    imps.emplace_back("Avg. Imp. (" + bundles[after].label + " vs " + bundles[before].label + ")",
                      ivt::avg_improvement(bundles[before].runs, bundles[after].runs));
  }
  const std::string table = ivt::metrics_table(rows, imps);
  out << table;
  if (!opt.out.empty()) {
    write_text(opt.out, "# dataset_digest " + bundles.front().dataset_digest + "\n" + table);
  }
  return kSuccess;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ivtlab: class-incremental experiments with increment vector transformation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IVTLAB_VERSION);

  RunOptions run;
  auto* c_run = app.add_subcommand("run", "train every configured seed and write a results bundle");
  c_run->add_option("config", run.config, "experiment config (JSON, comments allowed)")->required();
  c_run->add_option("--out", run.out, "output directory");
  c_run->add_flag("--force", run.force, "overwrite an existing bundle");
  c_run->add_option("--seed", run.seed, "run only this seed");

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured test sets");
  c_eval->add_option("checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--config", ev.config)->required();
  c_eval->add_option("--head-from", ev.head_from, "reconcile into this checkpoint's head first");
  c_eval->add_option("--out", ev.out, "CSV file (stdout when omitted)");

  LmcOptions lmc;
  auto* c_lmc = app.add_subcommand("lmc", "scan accuracy along the segment between two checkpoints");
  c_lmc->add_option("anchor", lmc.anchor)->required();
  c_lmc->add_option("target", lmc.target)->required();
  c_lmc->add_option("--config", lmc.config)->required();
  c_lmc->add_option("--out", lmc.out, "output directory");
  c_lmc->add_option("--points", lmc.points, "evenly spaced lambdas before adding endpoints")
      ->check(CLI::Range(2, 100000));

  LandscapeOptions ls;
  auto* c_ls = app.add_subcommand("landscape", "loss on the plane through three checkpoints");
  c_ls->add_option("origin", ls.origin)->required();
  c_ls->add_option("dir_a", ls.dir_a)->required();
  c_ls->add_option("dir_b", ls.dir_b)->required();
  c_ls->add_option("--config", ls.config)->required();
  c_ls->add_option("--extents", ls.extents, "a_min,a_max,b_min,b_max")->delimiter(',');
  c_ls->add_option("--resolution", ls.resolution, "AxB grid points");
  c_ls->add_option("--project", ls.project, "name=checkpoint to project onto the plane");
  c_ls->add_option("--out", ls.out, "output directory");

  QuadOptions qc;
  auto* c_q = app.add_subcommand("quadcheck", "closed-form checks on random quadratic tasks");
  c_q->add_option("--trials", qc.trials, "two-task exactness trials");
  c_q->add_option("--gap-trials", qc.gap_trials, "three-task gap trials");
  c_q->add_option("--bound-trials", qc.bound_trials, "forgetting bound trials");
  c_q->add_option("--seed", qc.seed);
  c_q->add_option("--max-dim", qc.max_dim)->check(CLI::Range(2, 64));
  c_q->add_flag("--inject-negative-eigenvalue", qc.inject_negative,
                "corrupt the generator (the precondition check must fire)");
  c_q->add_option("--out", qc.out, "output directory");

  ReportOptions rep;
  auto* c_rep = app.add_subcommand("report", "compare results bundles");
  c_rep->add_option("bundles", rep.bundles, "bundle directories")->required();
  c_rep->add_option("--pair", rep.pairs, "BEFORE,AFTER bundle indices for an Avg. Imp. row");
  c_rep->add_option("--out", rep.out, "also write the table to this file");
  c_rep->add_flag("--per-task-mean", rep.per_task_mean,
                  "overall accuracy as the mean of per-task accuracies instead of pooled");

  std::vector<std::string> argv_store{"ivtlab"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (c_run->parsed()) return cmd_run(run, out, err);
    if (c_eval->parsed()) return cmd_eval(ev, out, err);
    if (c_lmc->parsed()) return cmd_lmc(lmc, out, err);
    if (c_ls->parsed()) return cmd_landscape(ls, out, err);
    if (c_q->parsed()) return cmd_quadcheck(qc, out, err);
    if (c_rep->parsed()) return cmd_report(rep, out, err);
  } catch (const IoError& e) {
    err << "ivtlab: I/O failure: " << e.what() << "\n";
    return kPartialRun;
  } catch (const ivt::Error& e) {
    err << "ivtlab: " << e.what() << "\n";
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "ivtlab: " << e.what() << "\n";
    return kPartialRun;
  }
  return kUsageError;
}

}  // namespace ivtlab
