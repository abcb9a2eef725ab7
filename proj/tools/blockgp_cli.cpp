// Command-line driver: design generation, simulation, fitting, prediction and
// the three reproduction studies. Exit codes: 0 ok, 2 validation error, 3
// numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blockgp/blockgp.hpp"

namespace {

using namespace blockgp;

std::vector<int> parse_order(const std::string& s) {
  std::vector<int> order;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) order.push_back(std::stoi(tok) - 1);
  return order;
}

// flat `key = value` config mirroring StudyConfig; CLI flags win on conflict
std::map<std::string, std::string> load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

Partition choose_partition(const Dataset& ds, int k, const std::string& strategy,
                           std::uint64_t seed) {
  std::string s = strategy;
  if (s == "auto") s = ds.has_slices() ? "slices" : "random";
  return partition_dataset(ds, k, partition_strategy_from_name(s), seed);
}

struct GlobalOpts {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
};

int run(int argc, char** argv) {
  CLI::App app{"Gaussian-process estimation and prediction with block composite likelihoods"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::string config_path;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str();
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--config", config_path, "flat key=value config file (study settings)");
  app.fallthrough();

  // ---- slhd ----
  auto* slhd = app.add_subcommand("slhd", "generate a sliced Latin hypercube design");
  int slhd_k = 4, slhd_m = 4, slhd_p = 1;
  slhd->add_option("--k", slhd_k, "slices")->capture_default_str();
  slhd->add_option("--m", slhd_m, "points per slice")->capture_default_str();
  slhd->add_option("--p", slhd_p, "dimensions")->capture_default_str();

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "sample GP responses on a design");
  std::string sim_design;
  std::vector<double> sim_phi{1.0};
  double sim_sigma2 = 1.0, sim_beta = 0.0;
  std::string sim_domain;
  sim->add_option("--design", sim_design, "design CSV (x1..xp,slice)")->required();
  sim->add_option("--phi", sim_phi, "true roughness (one value per dimension)");
  sim->add_option("--sigma2", sim_sigma2, "process variance")->capture_default_str();
  sim->add_option("--beta", sim_beta, "constant trend")->capture_default_str();
  sim->add_option("--domain", sim_domain, "lo:hi scaling applied to the unit design");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "fit GP parameters");
  std::string fit_data, fit_method = "CI", fit_partition = "auto", fit_basis = "constant";
  std::string fit_order, fit_trace;
  int fit_k = 0, fit_multistarts = 5, fit_maxiter = 400;
  fit->add_option("--data", fit_data, "dataset CSV (x1..xp,y[,slice])")->required();
  fit->add_option("--method", fit_method, "ML | CI | CML | CCL")->capture_default_str();
  fit->add_option("--k", fit_k, "block count (block methods)");
  fit->add_option("--partition", fit_partition, "auto | slices | random | sorted")
      ->capture_default_str();
  fit->add_option("--basis", fit_basis, "constant | linear")->capture_default_str();
  fit->add_option("--block-order", fit_order, "comma-separated block order override");
  fit->add_option("--multistarts", fit_multistarts, "optimizer starts")->capture_default_str();
  fit->add_option("--max-iter", fit_maxiter, "simplex iteration cap")->capture_default_str();
  fit->add_option("--trace", fit_trace, "write per-iteration trace CSV");

  // ---- predict ----
  auto* pred = app.add_subcommand("predict", "predict at test points");
  std::string pred_model, pred_data, pred_points, pred_partition = "auto", pred_predictor = "auto";
  int pred_k = 0;
  pred->add_option("--model", pred_model, "fitted model JSON")->required();
  pred->add_option("--data", pred_data, "dataset CSV")->required();
  pred->add_option("--points", pred_points, "test points CSV (x1..xp)")->required();
  pred->add_option("--k", pred_k, "block count (block methods)");
  pred->add_option("--partition", pred_partition, "auto | slices | random | sorted")
      ->capture_default_str();
  pred->add_option("--predictor", pred_predictor, "auto | blup | blubp | cl")
      ->capture_default_str();

  // ---- studies ----
  StudyConfig scfg;
  auto add_study_opts = [&](CLI::App* s) {
    s->add_option("--n", scfg.n, "points");
    s->add_option("--k", scfg.k, "blocks");
    s->add_option("--reps", scfg.reps, "replications");
    s->add_option("--grid", scfg.grid, "test grid size");
    s->add_option("--multistarts", scfg.multistarts, "optimizer starts");
    s->add_option("--max-iter", scfg.max_iter, "simplex iteration cap");
    s->add_flag("--allow-full-scale", scfg.allow_full_scale,
                "permit the full-scale benchmark size (n=100000)");
  };
  auto* approx = app.add_subcommand("approx-study", "block predictors vs the dense predictor");
  add_study_opts(approx);
  auto* table = app.add_subcommand("table-study", "bias/MSE of estimates over replications");
  std::string table_scenario = "1d";
  table->add_option("--scenario", table_scenario, "1d | 2d")->capture_default_str();
  add_study_opts(table);
  auto* schwefel_cmd = app.add_subcommand("schwefel-study", "surrogate benchmark");
  add_study_opts(schwefel_cmd);

  // hidden debug verb: conditional moments vs the projection oracle
  auto* oracle = app.add_subcommand("oracle", "cross-check conditional moments");
  oracle->group("");  // hidden
  int oracle_trials = 10;
  oracle->add_option("--trials", oracle_trials);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help text or the parse error
    return rc == 0 ? 0 : 2;
  }

  if (!config_path.empty()) {
    const auto kv = load_flat_config(config_path);
    auto take = [&](const char* key, auto&& apply) {
      const auto it = kv.find(key);
      if (it != kv.end()) apply(it->second);
    };
    CLI::App* active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    auto unset = [&](const char* flag) {
      if (active == nullptr) return true;
      const CLI::Option* o = active->get_option_no_throw(flag);
      if (o == nullptr) o = app.get_option_no_throw(flag);
      return o == nullptr || o->count() == 0;
    };
    take("seed", [&](const std::string& v) { if (unset("--seed")) g.seed = std::stoull(v); });
    take("threads", [&](const std::string& v) { if (unset("--threads")) g.threads = std::stoi(v); });
    take("out", [&](const std::string& v) { if (unset("--out")) g.out = v; });
    take("scenario", [&](const std::string& v) { scfg.scenario = v; });
    take("n", [&](const std::string& v) { if (unset("--n")) scfg.n = std::stoi(v); });
    take("k", [&](const std::string& v) { if (unset("--k")) scfg.k = std::stoi(v); });
    take("p", [&](const std::string& v) { scfg.p = std::stoi(v); });
    take("reps", [&](const std::string& v) { if (unset("--reps")) scfg.reps = std::stoi(v); });
    take("grid", [&](const std::string& v) { if (unset("--grid")) scfg.grid = std::stoi(v); });
    take("multistarts",
         [&](const std::string& v) { if (unset("--multistarts")) scfg.multistarts = std::stoi(v); });
    take("max_iter",
         [&](const std::string& v) { if (unset("--max-iter")) scfg.max_iter = std::stoi(v); });
    take("opt_box_lo", [&](const std::string& v) { scfg.opt_box_lo = std::stod(v); });
    take("opt_box_hi", [&](const std::string& v) { scfg.opt_box_hi = std::stod(v); });
    take("sigma2", [&](const std::string& v) { scfg.sigma2 = std::stod(v); });
    take("beta", [&](const std::string& v) { scfg.beta0 = std::stod(v); });
    take("domain_lo", [&](const std::string& v) { scfg.domain_lo = std::stod(v); });
    take("domain_hi", [&](const std::string& v) { scfg.domain_hi = std::stod(v); });
    take("allow_full_scale",
         [&](const std::string& v) { scfg.allow_full_scale = (v == "1" || v == "true"); });
    take("methods", [&](const std::string& v) { scfg.methods = split_list(v); });
    take("phi", [&](const std::string& v) {
      const auto vals = split_list(v);
      scfg.phi.resize(static_cast<int>(vals.size()));
      for (std::size_t i = 0; i < vals.size(); ++i) scfg.phi(static_cast<int>(i)) = std::stod(vals[i]);
    });
  }

  if (slhd->parsed()) {
    const SlicedDesign d = generate_slhd(slhd_k, slhd_m, slhd_p, g.seed);
    const std::string path = g.out.empty() ? "design.csv" : g.out;
    write_design_csv(path, d);
    std::cerr << "wrote " << path << "\n";
    return 0;
  }

  if (sim->parsed()) {
    SlicedDesign d = read_design_csv(sim_design);
    Eigen::MatrixXd X = d.points;
    if (!sim_domain.empty()) {
      const auto colon = sim_domain.find(':');
      if (colon == std::string::npos) throw CLI::ValidationError("--domain", "expected lo:hi");
      const double lo = std::stod(sim_domain.substr(0, colon));
      const double hi = std::stod(sim_domain.substr(colon + 1));
      X = (X.array() * (hi - lo) + lo).matrix();
    }
    GpParams params;
    params.beta = Eigen::VectorXd::Constant(1, sim_beta);
    params.sigma2 = sim_sigma2;
    params.phi = RoughnessParams(Eigen::Map<const Eigen::VectorXd>(sim_phi.data(), sim_phi.size()));
    Dataset ds;
    ds.X = X;
    ds.y = sample_gp(X, params, BasisSpec::constant(), g.seed);
    ds.slice = d.slice_of;
    const std::string path = g.out.empty() ? "data.csv" : g.out;
    write_dataset_csv(path, ds);
    std::cerr << "wrote " << path << "\n";
    return 0;
  }

  if (fit->parsed()) {
    const Dataset ds = read_dataset_csv(fit_data);
    const BasisSpec basis = fit_basis == "linear" ? BasisSpec::linear() : BasisSpec::constant();
    FitOptions opts;
    opts.seed = g.seed;
    opts.threads = g.threads;
    opts.multistart.starts = fit_multistarts;
    opts.multistart.simplex.max_iter = fit_maxiter;
    std::ofstream trace_out;
    if (!fit_trace.empty()) {
      trace_out.open(fit_trace);
      trace_out << "iteration";
      for (int d = 0; d < ds.p(); ++d) trace_out << ",phi" << (d + 1);
      trace_out << ",objective\n";
      opts.trace = [&](int it, const Eigen::VectorXd& logphi, double obj) {
        trace_out << it;
        for (int d = 0; d < logphi.size(); ++d) trace_out << "," << fmt17(std::exp(logphi(d)));
        trace_out << "," << fmt17(obj) << "\n";
      };
    }
    FittedModel fm;
    if (fit_method == "ML") {
      fm = fit_mle(ds, basis, opts);
    } else {
      int k = fit_k;
      if (k == 0 && ds.has_slices()) {
        for (int lab : ds.slice) k = std::max(k, lab);
      }
      if (k == 0) throw CLI::ValidationError("--k", "block count required for block methods");
      Partition part = choose_partition(ds, k, fit_partition, g.seed);
      if (!fit_order.empty()) part = part.reordered(parse_order(fit_order));
      fm = fit_composite(ds, part, method_from_name(fit_method), basis, opts);
    }
    if (!fm.converged) std::cerr << "warning: optimizer hit the iteration cap\n";
    if (g.out.empty()) {
      std::cout << fitted_model_json(fm);
    } else {
      write_fitted_model_json(g.out, fm);
      std::cerr << "wrote " << g.out << "\n";
    }
    return 0;
  }

  if (pred->parsed()) {
    const Dataset ds = read_dataset_csv(pred_data);
    const FittedModel fm = read_fitted_model_json(pred_model);
    const Eigen::MatrixXd pts = read_points_csv(pred_points);
    if (pts.cols() != ds.p()) throw CLI::ValidationError("--points", "dimension mismatch");
    std::string predictor = pred_predictor;
    if (predictor == "auto") {
      predictor = fm.method == "ML" ? "blup" : (fm.method == "CI" ? "blubp" : "cl");
    }
    std::vector<PredictionResult> out(pts.rows());
    if (predictor == "blup") {
      const BlupModel model(ds, fm.params, fm.basis);
      parallel_for(static_cast<int>(pts.rows()), g.threads,
                   [&](int i) { out[i] = model.predict(pts.row(i).transpose()); });
    } else {
      int k = pred_k;
      if (k == 0 && ds.has_slices()) {
        for (int lab : ds.slice) k = std::max(k, lab);
      }
      if (k == 0) throw CLI::ValidationError("--k", "block count required for block predictors");
      const Partition part = choose_partition(ds, k, pred_partition, g.seed);
      const BlockCache cache(ds, part, fm.params.phi, fm.basis, {true, g.threads});
      parallel_for(static_cast<int>(pts.rows()), g.threads, [&](int i) {
        out[i] = predictor == "blubp" ? predict_blubp(cache, fm.params, pts.row(i).transpose())
                                      : predict_cl(cache, fm.params, pts.row(i).transpose());
      });
    }
    const std::string path = g.out.empty() ? "predictions.csv" : g.out;
    write_predictions_csv(path, pts, out);
    std::cerr << "wrote " << path << "\n";
    return 0;
  }

  scfg.seed = g.seed;
  scfg.threads = g.threads;
  scfg.outdir = g.out;

  if (approx->parsed()) {
    if (scfg.outdir.empty()) scfg.outdir = "approx-out";
    const ApproxResult r = run_approx_study(scfg);
    std::cout << "mean|blubp-blup| = " << fmt17(r.mad_blubp)
              << "  mean|cl-blup| = " << fmt17(r.mad_cl) << "\n";
    return 0;
  }
  if (table->parsed()) {
    if (table->count("--scenario") > 0) scfg.scenario = table_scenario;
    if (scfg.outdir.empty()) scfg.outdir = "table-out";
    const MetricsReport rep = run_table_study(scfg);
    for (const auto& m : rep.methods) {
      const auto& phi = rep.by_method.at(m).stats.at("phi1");
      std::cout << m << ": bias(phi1) = " << fmt17(phi.bias) << "  mse(phi1) = " << fmt17(phi.mse)
                << "  failures = " << rep.by_method.at(m).failures << "\n";
    }
    return 0;
  }
  if (schwefel_cmd->parsed()) {
    if (scfg.outdir.empty()) scfg.outdir = "schwefel-out";
    const SchwefelResult r = run_schwefel_study(scfg);
    for (const auto& [m, v] : r.mse) std::cout << "mse " << m << " = " << fmt17(v) << "\n";
    return 0;
  }

  if (oracle->parsed()) {
    Rng rng = Rng::keyed(g.seed, 0x0A0);
    // points on a shuffled jittered cell grid; near-duplicate points would
    // make the Gram matrices numerically singular
    auto spaced = [&rng](int n, int p) {
      int side = 1;
      while (std::pow(side, p) < 2 * n) ++side;
      std::vector<int> cells(static_cast<std::size_t>(std::pow(side, p)));
      for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
      rng.shuffle(cells);
      Eigen::MatrixXd X(n, p);
      for (int i = 0; i < n; ++i) {
        int c = cells[i];
        for (int d = 0; d < p; ++d) {
          X(i, d) = (c % side + 0.2 + 0.6 * rng.uniform()) * 0.5;
          c /= side;
        }
      }
      return X;
    };
    double worst = 0.0;
    for (int t = 0; t < oracle_trials; ++t) {
      const int p = 1 + rng.uniform_int(2);
      const int ni = 2 + rng.uniform_int(4);
      const int nj = 2 + rng.uniform_int(4);
      const Eigen::MatrixXd pts = spaced(ni + nj, p);
      const Eigen::MatrixXd Xi = pts.topRows(ni);
      const Eigen::MatrixXd Xj = pts.bottomRows(nj);
      Eigen::VectorXd x(p), yi(ni), yj(nj);
      for (int c = 0; c < p; ++c) x(c) = rng.uniform(0, pts.col(c).maxCoeff());
      for (int r = 0; r < ni; ++r) yi(r) = rng.normal();
      for (int r = 0; r < nj; ++r) yj(r) = rng.normal();
      const RoughnessParams phi(Eigen::VectorXd::Constant(p, rng.uniform(0.5, 2.0)));
      const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, rng.normal());

      Dataset ds;
      ds.X.resize(ni + nj, p);
      ds.X.topRows(ni) = Xi;
      ds.X.bottomRows(nj) = Xj;
      ds.y.resize(ni + nj);
      ds.y.head(ni) = yi;
      ds.y.tail(nj) = yj;
      Partition part;
      part.blocks.resize(2);
      for (int r = 0; r < ni; ++r) part.blocks[0].push_back(r);
      for (int r = 0; r < nj; ++r) part.blocks[1].push_back(ni + r);
      const BlockCache cache(ds, part, phi, BasisSpec::constant());
      const CondMoments cm = cond_cov_matrix(cache, {0, 1}, x);
      const auto po = projection_oracle(x, Xi, yi, Xj, yj, phi, BasisSpec::constant(), beta);
      worst = std::max(worst, std::abs(cm.K(0, 1) - po.cross_cov));
      worst = std::max(worst, std::abs(cm.K(0, 0) - po.var_i));
      worst = std::max(worst, std::abs(cm.mean(0, beta) - po.mean_i));
    }
    std::cout << "max |conditional - oracle| over " << oracle_trials << " trials: " << fmt17(worst)
              << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const blockgp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
