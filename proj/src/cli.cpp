#include "gramridge/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gramridge/bench.hpp"
#include "gramridge/cv.hpp"
#include "gramridge/io.hpp"
#include "gramridge/marglik.hpp"
#include "gramridge/numeric.hpp"
#include "gramridge/sim.hpp"
#include "gramridge/tune.hpp"
#include "gramridge/vb.hpp"

namespace gramridge {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<int> repeats;
  std::optional<std::string> criterion;
  std::optional<std::string> method;
  std::vector<std::string> preferred;
  std::vector<std::string> paired;
  std::optional<int> workers;
  std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "run configuration file (JSON)")
      ->required();
  cmd->add_option("--seed", f.seed, "fold/tuner seed");
  cmd->add_option("--folds", f.folds, "inner CV fold count");
  cmd->add_option("--repeats", f.repeats, "CV repeats");
  cmd->add_option("--criterion", f.criterion, "cvl|auc|cindex|mse");
  cmd->add_option("--method", f.method, "cv|ml|vb");
  cmd->add_option("--preferred", f.preferred, "preferred block names")
      ->delimiter(',');
  cmd->add_option("--paired", f.paired, "two paired block names")
      ->delimiter(',');
  cmd->add_option("--workers", f.workers, "fold-level worker threads");
  cmd->add_option("--output-dir", f.output_dir, "output directory");
}

// Flags win over config-file values.
RunConfig load_config(const CommonFlags& f) {
  RunConfig c = RunConfig::from_file(f.config_path);
  if (f.seed) {
    c.seed = *f.seed;
    c.tuner.seed = *f.seed;
  }
  if (f.folds) c.folds_k = *f.folds;
  if (f.repeats) c.repeats = *f.repeats;
  if (f.criterion) c.criterion = criterion_from_string(*f.criterion);
  if (f.method) c.method = *f.method;
  if (!f.preferred.empty()) c.preferred = f.preferred;
  if (!f.paired.empty()) {
    if (f.paired.size() != 2)
      throw ConfigError("--paired needs exactly two block names");
    c.paired = {f.paired[0], f.paired[1]};
  }
  if (f.workers) c.workers = *f.workers;
  if (f.output_dir) c.output_dir = *f.output_dir;
  c.validate();
  return c;
}

std::vector<Index> preferred_indices(const RunConfig& cfg,
                                     const BlockedDesign& design) {
  std::vector<Index> out;
  for (const auto& name : cfg.preferred) out.push_back(design.block_index(name));
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir);
}

void write_trace(const std::string& path, const std::vector<EvalRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write trace file: " + path);
  char buf[40];
  for (const auto& r : trace) {
    for (Index b = 0; b < r.lambdas.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.lambdas(b));
      out << buf << '\t';
    }
    if (r.lambda3 != 0.0) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.lambda3);
      out << buf << '\t';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", r.utility);
    out << buf << '\n';
  }
}

void write_penalties(const std::string& path, const PenaltyConfig& pc,
                     const std::vector<std::string>& names) {
  json j;
  json jl = json::object();
  for (Index b = 0; b < pc.num_blocks(); ++b)
    jl[names[static_cast<std::size_t>(b)]] = pc.lambda(b);
  j["lambdas"] = jl;
  if (pc.has_paired()) j["lambda3"] = pc.paired().lambda3;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write penalties file: " + path);
  out << j.dump(2) << '\n';
}

PenaltyConfig load_penalties(const std::string& path,
                             const BlockedDesign& design) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open penalties file: " + path);
  json j;
  in >> j;
  Vector lambdas(design.num_blocks());
  for (Index b = 0; b < design.num_blocks(); ++b)
    lambdas(b) = j.at("lambdas")
                     .at(design.block_names()[static_cast<std::size_t>(b)])
                     .get<double>();
  std::optional<PairedTriple> triple;
  if (design.paired()) {
    const double l3 = j.value("lambda3", 0.0);
    triple = PairedTriple{lambdas(design.paired()->block_a),
                          lambdas(design.paired()->block_b), l3};
  }
  return PenaltyConfig(std::move(lambdas), {}, triple, design.paired());
}

TuneResult dispatch_tune(const RunConfig& cfg, const BlockedDesign& design,
                         const GramSet& grams, const ResponseSpec& response) {
  CvOptions opts;
  opts.workers = cfg.workers;
  opts.log = [](const std::string& msg) { std::cerr << "gramridge: " << msg << '\n'; };
  UtilitySpec utility;
  utility.criterion = cfg.criterion;
  const std::vector<Index> pref = preferred_indices(cfg, design);

  if (cfg.method == "cv") {
    const FoldPlan plan = make_folds(response, cfg.folds_k, cfg.repeats, cfg.seed);
    for (const auto& w : plan.warnings) std::cerr << "gramridge: " << w << '\n';
    if (pref.empty())
      return tune(design, grams, response, plan, utility, cfg.tuner, {}, opts);
    return tune_preferential(design, grams, response, plan, utility, cfg.tuner,
                             pref, opts);
  }
  if (cfg.method == "ml") {
    MlOptions mlopts;
    if (!pref.empty()) mlopts.preferred = pref;
    return tune_ml(design, grams, response, cfg.tuner, mlopts);
  }
  // vb
  if (!pref.empty())
    throw ConfigError("preferential tuning is not available for the vb method");
  return tune_elbo(grams, response.y(), cfg.tuner);
}

FitArtifact build_artifact(const RunConfig& cfg, const BlockedDesign& design,
                           const GramSet& grams, const ResponseSpec& response,
                           const TuneResult& tuned) {
  FitArtifact art;
  art.config_fingerprint = cfg.fingerprint();
  art.method = cfg.method;
  art.family = cfg.family;
  art.block_names = design.block_names();
  art.lambdas = tuned.penalties.lambdas();
  if (tuned.penalties.has_paired()) art.lambda3 = tuned.penalties.paired().lambda3;
  art.trace = tuned.trace;

  Vector beta;
  if (cfg.method == "vb") {
    const Matrix gamma = assemble_gamma(grams, tuned.penalties);
    const VbState st = vb_fit(gamma, response.y());
    // Posterior coefficient means share the linear back-map with the
    // frequentist fit: beta = Omega X' M mu_a with unit weights.
    FitState fs;
    fs.converged = true;
    const HatFactors hat = hat_matrix(gamma, Vector::Ones(response.n()));
    fs.mvec = hat.M * st.mu_a;
    fs.beta_unpen = Vector(0);
    fs.eta = st.mu_eta;
    beta = recover_coefficients(fs, design, tuned.penalties);
    art.eta = st.mu_eta;
  } else {
    const FitState fit = fit_ridge(design, grams, tuned.penalties, response);
    if (!fit.converged) throw NumericError("final fit did not converge");
    beta = recover_coefficients(fit, design, tuned.penalties);
    art.eta = fit.eta;
    if (fit.baseline) art.baseline = fit.baseline;
  }

  const Index p1 = design.unpenalized_cols();
  art.beta_unpen = beta.head(p1);
  Index at = p1;
  for (Index b = 0; b < design.num_blocks(); ++b) {
    art.beta_blocks.push_back(beta.segment(at, design.block(b).cols()));
    at += design.block(b).cols();
  }
  return art;
}

int cmd_tune(const CommonFlags& flags) {
  const RunConfig cfg = load_config(flags);
  ensure_dir(cfg.output_dir);
  const IngestResult data = ingest(cfg);
  const GramSet grams = precompute_grams(data.design);
  const TuneResult tuned = dispatch_tune(cfg, data.design, grams, data.response);
  write_penalties(cfg.output_dir + "/penalties.json", tuned.penalties,
                  data.design.block_names());
  write_trace(cfg.output_dir + "/trace.tsv", tuned.trace);
  std::cout << "tuned penalties written to " << cfg.output_dir
            << "/penalties.json (" << tuned.evaluations << " evaluations)\n";
  return 0;
}

int cmd_fit(const CommonFlags& flags, const std::string& penalties_path) {
  const RunConfig cfg = load_config(flags);
  ensure_dir(cfg.output_dir);
  const IngestResult data = ingest(cfg);
  const GramSet grams = precompute_grams(data.design);

  TuneResult tuned{PenaltyConfig(Vector::Ones(data.design.num_blocks())), {}, 0, 0.0};
  if (penalties_path.empty()) {
    tuned = dispatch_tune(cfg, data.design, grams, data.response);
  } else {
    tuned.penalties = load_penalties(penalties_path, data.design);
  }
  const FitArtifact art =
      build_artifact(cfg, data.design, grams, data.response, tuned);
  art.save(cfg.output_dir + "/fit.json");
  write_trace(cfg.output_dir + "/trace.tsv", tuned.trace);
  std::cout << "fit artifact written to " << cfg.output_dir << "/fit.json\n";
  return 0;
}

int cmd_predict(const std::string& artifact_path, const std::string& config_path,
                const std::string& out_path) {
  const FitArtifact art = FitArtifact::load(artifact_path);
  RunConfig cfg = RunConfig::from_file(config_path);

  // Read blocks by name; response file not needed for prediction.
  std::vector<Matrix> blocks(art.block_names.size());
  std::vector<bool> found(art.block_names.size(), false);
  std::optional<Matrix> unpen;
  std::vector<std::string> ids;
  for (const auto& b : cfg.blocks) {
    const TableData t = read_table(b.path);
    if (ids.empty()) ids = t.ids;
    if (b.role == "unpenalized") {
      if (!unpen)
        unpen = t.values;
      else {
        Matrix merged(t.values.rows(), unpen->cols() + t.values.cols());
        merged << *unpen, t.values;
        unpen = std::move(merged);
      }
      continue;
    }
    for (std::size_t k = 0; k < art.block_names.size(); ++k)
      if (art.block_names[k] == b.name) {
        blocks[k] = t.values;
        found[k] = true;
      }
  }
  for (std::size_t k = 0; k < found.size(); ++k)
    if (!found[k])
      throw ConfigError("prediction data is missing block '" +
                        art.block_names[k] + "'");

  const Vector eta = art.predict(blocks, unpen ? &*unpen : nullptr);
  TableData out;
  out.ids = ids;
  out.columns = {"eta", "prediction"};
  out.values.resize(eta.size(), 2);
  for (Index i = 0; i < eta.size(); ++i) {
    out.values(i, 0) = eta(i);
    out.values(i, 1) = art.response_scale(eta(i));
  }
  write_table(out_path, out);
  std::cout << "predictions written to " << out_path << '\n';
  return 0;
}

int cmd_perf(const CommonFlags& flags, int outer_k_flag) {
  RunConfig cfg = load_config(flags);
  if (outer_k_flag > 0) cfg.outer_k = outer_k_flag;
  ensure_dir(cfg.output_dir);
  const IngestResult data = ingest(cfg);
  const GramSet grams = precompute_grams(data.design);
  CvOptions opts;
  opts.workers = cfg.workers;
  UtilitySpec utility;
  utility.criterion = cfg.criterion;

  std::vector<SplitReport> reports;
  if (cfg.method == "ml") {
    auto tuner = [&](const BlockedDesign& d, const GramSet& g,
                     const ResponseSpec& r, int split) {
      TunerConfig tc = cfg.tuner;
      tc.seed = cfg.seed + static_cast<std::uint64_t>(split);
      MlOptions mlopts;
      const auto pref = preferred_indices(cfg, data.design);
      if (!pref.empty()) mlopts.preferred = pref;
      return tune_ml(d, g, r, tc, mlopts);
    };
    reports = double_cv_with(data.design, grams, data.response, cfg.outer_k,
                             tuner, utility, opts, cfg.seed);
  } else if (cfg.method == "cv") {
    reports = double_cv(data.design, grams, data.response, cfg.outer_k,
                        cfg.folds_k, cfg.repeats, cfg.tuner, utility, opts,
                        cfg.seed);
  } else {
    throw ConfigError("perf supports methods cv and ml (vb has cpo)");
  }

  const std::string path = cfg.output_dir + "/perf.tsv";
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report: " + path);
  out << "split\t" << criterion_name(cfg.criterion);
  for (const auto& name : data.design.block_names()) out << "\tlambda_" << name;
  out << '\n';
  char buf[40];
  for (const auto& r : reports) {
    out << r.split;
    std::snprintf(buf, sizeof(buf), "%.17g", r.criterion_value);
    out << '\t' << buf;
    for (Index b = 0; b < r.lambdas.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.lambdas(b));
      out << '\t' << buf;
    }
    out << '\n';
  }
  std::cout << "per-split report written to " << path << '\n';
  return 0;
}

int cmd_simulate(Index n, const std::vector<Index>& block_cols,
                 const std::string& family, const std::vector<double>& lambdas,
                 double censoring, std::uint64_t seed, const std::string& dir) {
  SimSpec spec;
  spec.n = n;
  spec.block_cols = block_cols;
  spec.family = family_from_string(family);
  spec.true_lambdas = Eigen::Map<const Vector>(lambdas.data(),
                                               static_cast<Index>(lambdas.size()));
  spec.censoring_rate = censoring;
  spec.seed = seed;
  const SimData data = simulate(spec);
  ensure_dir(dir);

  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));

  json config;
  json jblocks = json::array();
  for (Index b = 0; b < data.design.num_blocks(); ++b) {
    TableData t;
    t.ids = ids;
    const Matrix& x = data.design.block(b);
    for (Index j = 0; j < x.cols(); ++j)
      t.columns.push_back("x" + std::to_string(b) + "_" + std::to_string(j));
    t.values = x;
    const std::string name = "block" + std::to_string(b);
    const std::string path = dir + "/" + name + ".tsv";
    write_table(path, t);
    jblocks.push_back({{"name", name}, {"path", path}, {"role", "penalized"}});
  }

  TableData resp;
  resp.ids = ids;
  if (spec.family == Family::cox) {
    resp.columns = {"time", "status"};
    resp.values.resize(n, 2);
    resp.values.col(0) = data.response.time();
    resp.values.col(1) = data.response.event();
  } else {
    resp.columns = {"y"};
    resp.values = data.response.y();
  }
  write_table(dir + "/response.tsv", resp);

  TableData beta;
  beta.columns = {"beta_true"};
  for (Index j = 0; j < data.beta_true.size(); ++j)
    beta.ids.push_back("c" + std::to_string(j));
  beta.values = data.beta_true;
  write_table(dir + "/beta_true.tsv", beta);

  config["blocks"] = jblocks;
  config["response"] = {{"path", dir + "/response.tsv"},
                        {"family", family_name(spec.family)}};
  config["folds"] = {{"k", 10}, {"repeats", 1}, {"seed", seed}};
  config["output_dir"] = dir;
  std::ofstream out(dir + "/config.json");
  out << config.dump(2) << '\n';
  std::cout << "synthetic dataset written to " << dir << '\n';
  return 0;
}

int cmd_bench(Index n, const std::vector<Index>& p_list, Index blocks_per_p,
              int budget, const std::vector<std::string>& backends,
              std::uint64_t seed, const std::string& dir) {
  ensure_dir(dir);
  json jreports = json::array();
  std::ostringstream table;
  table << "p\t";
  for (const auto& b : backends) table << b << "_seconds\t";
  table << "speedup_vs_naive\n";

  for (Index p_per_block : p_list) {
    SimSpec spec;
    spec.n = n;
    spec.block_cols.assign(static_cast<std::size_t>(blocks_per_p), p_per_block);
    spec.family = Family::linear;
    spec.true_lambdas = Vector::Constant(blocks_per_p, 50.0);
    spec.seed = seed;
    const BenchReport rep = benchmark(spec, budget, backends);

    json jr;
    jr["n"] = rep.n;
    jr["p"] = rep.p;
    jr["budget"] = rep.budget;
    jr["max_eta_residual"] = rep.max_eta_residual;
    json jb = json::array();
    for (const auto& b : rep.backends)
      jb.push_back({{"name", b.name},
                    {"measured_evals", b.measured_evals},
                    {"precompute_seconds", b.precompute_seconds},
                    {"measured_seconds", b.measured_seconds},
                    {"per_eval_seconds", b.per_eval_seconds},
                    {"total_seconds", b.total_seconds}});
    jr["backends"] = jb;
    jreports.push_back(jr);

    table << rep.p << '\t';
    for (const auto& name : backends)
      table << rep.backend(name).total_seconds << '\t';
    bool has_naive = false;
    for (const auto& name : backends) has_naive |= name == "naive";
    table << (has_naive ? rep.speedup("naive") : 0.0) << '\n';
  }

  std::ofstream jout(dir + "/bench.json");
  jout << jreports.dump(2) << '\n';
  std::ofstream tout(dir + "/bench.txt");
  tout << table.str();
  std::cout << table.str();
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"multi-penalty ridge regression with Gram-cached cross-validation"};
  app.require_subcommand(1);

  CommonFlags tune_flags, fit_flags, perf_flags;
  std::string fit_penalties;
  std::string predict_artifact, predict_config, predict_out = "predictions.tsv";
  int perf_outer_k = 0;

  auto* tune_cmd = app.add_subcommand("tune", "tune penalties");
  add_common(tune_cmd, tune_flags);

  auto* fit_cmd = app.add_subcommand("fit", "tune (or load) penalties and fit");
  add_common(fit_cmd, fit_flags);
  fit_cmd->add_option("--penalties", fit_penalties,
                      "penalties.json from a previous tune (skips tuning)");

  auto* predict_cmd = app.add_subcommand("predict", "predict new samples");
  predict_cmd->add_option("--artifact", predict_artifact, "fit.json")->required();
  predict_cmd->add_option("--config", predict_config,
                          "config listing the new data block files")->required();
  predict_cmd->add_option("--out", predict_out, "output table path");

  auto* perf_cmd = app.add_subcommand("perf", "double-CV performance report");
  add_common(perf_cmd, perf_flags);
  perf_cmd->add_option("--outer-k", perf_outer_k, "outer fold count");

  Index sim_n = 100;
  std::vector<Index> sim_blocks{50, 50};
  std::string sim_family = "logistic";
  std::vector<double> sim_lambdas{20.0, 1000.0};
  double sim_censoring = 0.3;
  std::uint64_t sim_seed = 1;
  std::string sim_dir = "simdata";
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset");
  sim_cmd->add_option("--n", sim_n, "sample count");
  sim_cmd->add_option("--blocks", sim_blocks, "columns per block")->delimiter(',');
  sim_cmd->add_option("--family", sim_family, "linear|logistic|cox");
  sim_cmd->add_option("--lambdas", sim_lambdas, "true penalty per block")
      ->delimiter(',');
  sim_cmd->add_option("--censoring", sim_censoring, "cox censoring rate");
  sim_cmd->add_option("--seed", sim_seed, "generator seed");
  sim_cmd->add_option("--out", sim_dir, "output directory");

  Index bench_n = 100;
  std::vector<Index> bench_p{5000};
  Index bench_blocks = 2;
  int bench_budget = 1000;
  std::vector<std::string> bench_backends{"gram", "woodbury", "naive"};
  std::uint64_t bench_seed = 1;
  std::string bench_dir = "benchout";
  auto* bench_cmd = app.add_subcommand("bench", "timing comparison of backends");
  bench_cmd->add_option("--n", bench_n, "sample count");
  bench_cmd->add_option("--p-list", bench_p, "columns per block, one run each")
      ->delimiter(',');
  bench_cmd->add_option("--blocks", bench_blocks, "number of blocks");
  bench_cmd->add_option("--budget", bench_budget, "evaluation count");
  bench_cmd->add_option("--backends", bench_backends, "gram,woodbury,naive")
      ->delimiter(',');
  bench_cmd->add_option("--seed", bench_seed, "generator seed");
  bench_cmd->add_option("--out", bench_dir, "output directory");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "gramridge: error code=2 msg=\"" << e.what() << "\"\n";
    return 2;
  }

  try {
    if (tune_cmd->parsed()) return cmd_tune(tune_flags);
    if (fit_cmd->parsed()) return cmd_fit(fit_flags, fit_penalties);
    if (predict_cmd->parsed())
      return cmd_predict(predict_artifact, predict_config, predict_out);
    if (perf_cmd->parsed()) return cmd_perf(perf_flags, perf_outer_k);
    if (sim_cmd->parsed())
      return cmd_simulate(sim_n, sim_blocks, sim_family, sim_lambdas,
                          sim_censoring, sim_seed, sim_dir);
    if (bench_cmd->parsed())
      return cmd_bench(bench_n, bench_p, bench_blocks, bench_budget,
                       bench_backends, bench_seed, bench_dir);
  } catch (const ConfigError& e) {
    std::cerr << "gramridge: error code=2 msg=\"" << e.what() << "\"\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "gramridge: error code=3 msg=\"" << e.what() << "\"\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "gramridge: error code=3 msg=\"" << e.what() << "\"\n";
    return 3;
  }
  return 0;
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace gramridge
