// mlkrig command line: data generation, estimation, kriging and the table studies.

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/harness.hpp"
#include "mlkrig/io.hpp"
#include "mlkrig/krige.hpp"
#include "mlkrig/mlcov.hpp"
#include "mlkrig/polynomial.hpp"
#include "mlkrig/reml.hpp"
#include "mlkrig/sparse_cholesky.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace mlkrig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string fmt(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Scalar> parse_list(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<Scalar> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError(what + ": '" + text + "' is not a comma-separated list of numbers");
    }
  }
  if (expected > 0 && out.size() != expected) {
    throw InputError(what + ": expected " + std::to_string(expected) + " values");
  }
  return out;
}

Vector to_vector(const std::vector<Scalar>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

struct Model {
  SpatialDataset data;
  DecompositionTree tree;
  MultiLevelBasis basis;
};

Model build_model(const std::string& path, int f, int f_tilde, Index threshold = 0) {
  Model m;
  m.data = load_dataset(path);
  const DesignSpec spec{m.data.dim(), f, f_tilde, PolynomialBasis::chebyshev};
  spec.validate();
  m.tree = build_tree(m.data, threshold > 0 ? threshold : spec.p_tilde());
  m.basis = build_basis(m.tree, m.data, spec);
  return m;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw InputError("cannot write '" + path + "'");
  return file;
}

ExperimentConfig study_config(const std::string& config_path, const std::string& preset, const std::string& study,
                              const std::string& out_dir) {
  ExperimentConfig c;
  if (!config_path.empty()) {
    c = ExperimentConfig::load(config_path);
  } else if (!preset.empty()) {
    c = ExperimentConfig::preset(preset);
  } else {
    throw InputError("give --config or --preset");
  }
  if (!study.empty() && c.study != study) {
    throw InputError("config '" + c.name + "' runs the " + c.study + " study, not " + study);
  }
  if (!out_dir.empty()) c.output_dir = out_dir;
  return c;
}

void print_outputs(const ExperimentOutputs& out) {
  std::ifstream in(out.table);
  std::cout << in.rdbuf();
  std::cerr << "wrote " << out.csv << ", " << out.timing << ", " << out.table;
  if (!out.summary.empty()) std::cerr << ", " << out.summary;
  std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-level REML estimation and kriging for scattered spatial data"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic location set");
  std::string gen_kind = "uniform2d";
  Index gen_n = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--kind", gen_kind, "uniform2d, uniform3d or carved_disks")->capture_default_str();
  gen->add_option("--n", gen_n, "Number of points (before carving)")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out, "Output file (.csv or .bin)")->required();

  // sample
  auto* smp = app.add_subcommand("sample", "Draw a Gaussian field realization at the locations");
  std::string smp_data, smp_out, smp_kernel = "matern:0.75,0.16666666666666666", smp_beta;
  int smp_f = 3;
  std::uint64_t smp_seed = 1, smp_rep = 0;
  smp->add_option("--data", smp_data)->required();
  smp->add_option("--kernel", smp_kernel)->capture_default_str();
  smp->add_option("--f", smp_f, "Trend degree")->capture_default_str();
  smp->add_option("--beta", smp_beta, "Trend coefficients, comma separated (default all ones)");
  smp->add_option("--seed", smp_seed)->capture_default_str();
  smp->add_option("--replicate", smp_rep)->capture_default_str();
  smp->add_option("--out", smp_out)->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "REML estimation of the covariance parameters");
  std::string est_data, est_family = "matern", est_min_level = "auto", est_nu_box = "0.5,1.25",
                        est_rho_box = "0.14285714285714285,0.2", est_trace, est_truth;
  int est_f = 3, est_ftilde = 4, est_tau = 1;
  Scalar est_tol = 1e-3;
  Index est_max_iter = 1000;
  std::optional<std::uint64_t> est_seed;
  est->add_option("--data", est_data, "Dataset; without values a field is sampled from --truth")->required();
  est->add_option("--family", est_family, "matern, exponential or gaussian")->capture_default_str();
  est->add_option("--f", est_f)->capture_default_str();
  est->add_option("--ftilde", est_ftilde)->capture_default_str();
  est->add_option("--tau", est_tau)->capture_default_str();
  est->add_option("--min-level", est_min_level, "Integer, t, t-k or auto (= t-1)")->capture_default_str();
  est->add_option("--nu-box", est_nu_box)->capture_default_str();
  est->add_option("--rho-box", est_rho_box)->capture_default_str();
  est->add_option("--tol", est_tol)->capture_default_str();
  est->add_option("--max-iter", est_max_iter)->capture_default_str();
  est->add_option("--truth", est_truth, "True kernel, e.g. matern:0.75,0.1667, for the error columns");
  est->add_option("--seed", est_seed, "Seed for sampling when the data carry no values");
  est->add_option("--trace", est_trace, "Write the optimizer trace CSV here");

  // krige
  auto* krg = app.add_subcommand("krige", "Best unbiased prediction at target locations");
  std::string krg_data, krg_targets, krg_kernel = "matern:0.75,0.16666666666666666", krg_out;
  int krg_f = 3, krg_ftilde = 3;
  Scalar krg_eps = 1e-5;
  bool krg_mse = false;
  krg->add_option("--data", krg_data, "Dataset with values")->required();
  krg->add_option("--targets", krg_targets, "Target locations")->required();
  krg->add_option("--kernel", krg_kernel)->capture_default_str();
  krg->add_option("--f", krg_f)->capture_default_str();
  krg->add_option("--ftilde", krg_ftilde)->capture_default_str();
  krg->add_option("--eps", krg_eps)->capture_default_str();
  krg->add_flag("--with-mse", krg_mse, "Also compute the mean squared error");
  krg->add_option("--out", krg_out, "Output CSV (default stdout)");

  // studies
  std::string st_config, st_preset, st_out;
  auto add_study = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", st_config, "JSON experiment config");
    sub->add_option("--preset", st_preset, "table1 .. table5");
    sub->add_option("--out-dir", st_out, "Override the output directory");
    return sub;
  };
  auto* lds = add_study("logdet-study", "Log-determinant error against the tapering parameter");
  auto* sls = add_study("solve-study", "PCG iterations on C_W against plain CG on C");
  auto* rep = add_study("report", "Run any experiment config, or render an existing CSV");
  std::string rep_csv;
  rep->add_option("--csv", rep_csv, "Render this CSV as a table and exit");

  // diagnostics
  std::string dg_data, dg_kernel = "matern:0.75,0.16666666666666666", dg_export, dg_min_level = "-1",
                       dg_triplets, dg_ordering = "amd", dg_dump;
  int dg_f = 3, dg_ftilde = 3, dg_tau = 1;
  Index dg_threshold = 0;
  auto* tst = app.add_subcommand("tree-stats", "Decomposition tree summary");
  tst->add_option("--data", dg_data)->required();
  tst->add_option("--threshold", dg_threshold, "Leaf threshold (default p)");
  tst->add_option("--f", dg_f)->capture_default_str();
  auto* bst = app.add_subcommand("basis-stats", "Rows per level, nnz(W) and annihilation residuals");
  bst->add_option("--data", dg_data)->required();
  bst->add_option("--f", dg_f)->capture_default_str();
  bst->add_option("--ftilde", dg_ftilde)->capture_default_str();
  bst->add_option("--dump", dg_dump, "Write the binary basis dump here");
  auto* cst = app.add_subcommand("cov-stats", "Tapered covariance density and diagonal range");
  auto* chb = app.add_subcommand("chol-bench", "Sparse Cholesky of a tapered covariance or a triplet file");
  for (auto* sub : {cst, chb}) {
    sub->add_option("--data", dg_data);
    sub->add_option("--kernel", dg_kernel)->capture_default_str();
    sub->add_option("--f", dg_f)->capture_default_str();
    sub->add_option("--ftilde", dg_ftilde)->capture_default_str();
    sub->add_option("--tau", dg_tau, "Tapering parameter (large values disable tapering)")->capture_default_str();
    sub->add_option("--min-level", dg_min_level)->capture_default_str();
  }
  cst->add_option("--export", dg_export, "Write the lower triangle as row col value triplets");
  chb->add_option("--triplets", dg_triplets, "Factor this symmetric matrix instead");
  chb->add_option("--ordering", dg_ordering, "natural, amd or nested_dissection")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) {
      DatasetSpec spec{parse_dataset_kind(gen_kind), gen_n, gen_seed};
      const SpatialDataset data = generate_dataset(spec);
      save_dataset(gen_out, data);
      std::cerr << "wrote " << data.size() << " points to " << gen_out << '\n';
    } else if (*smp) {
      SpatialDataset data = load_dataset(smp_data);
      const KernelModel kernel = KernelModel::parse(smp_kernel);
      const Vector beta = smp_beta.empty() ? Vector(Vector::Ones(monomial_count(data.dim(), smp_f)))
                                           : to_vector(parse_list(smp_beta, 0, "--beta"));
      data.values = sample_gp(data, kernel, smp_f, beta, smp_seed, smp_rep);
      save_dataset(smp_out, data);
      std::cerr << "wrote " << data.size() << " samples to " << smp_out << '\n';
    } else if (*est) {
      Model m = build_model(est_data, est_f, est_ftilde);
      std::optional<KernelModel> truth;
      if (!est_truth.empty()) truth = KernelModel::parse(est_truth);
      if (!m.data.values.has_value()) {
        if (!truth || !est_seed) throw InputError("the data carry no values; give --truth and --seed to sample them");
        m.data.values = sample_gp(m.data, *truth, est_f, Vector::Ones(monomial_count(m.data.dim(), est_f)), *est_seed);
      }
      RemlProblem problem;
      problem.data = &m.data;
      problem.tree = &m.tree;
      problem.basis = &m.basis;
      problem.family = parse_kernel_family(est_family);
      problem.tau = est_tau;
      problem.min_level = resolve_min_level(est_min_level, m.basis.finest_level());
      const std::vector<Scalar> rho_box = parse_list(est_rho_box, 2, "--rho-box");
      if (problem.family == KernelFamily::matern) {
        const std::vector<Scalar> nu_box = parse_list(est_nu_box, 2, "--nu-box");
        problem.box = Box{Vector{{nu_box[0], rho_box[0]}}, Vector{{nu_box[1], rho_box[1]}}};
      } else {
        problem.box = Box{Vector{{rho_box[0]}}, Vector{{rho_box[1]}}};
      }
      problem.optimizer.tol = est_tol;
      problem.optimizer.max_iter = est_max_iter;
      const RemlResult res = estimate(problem, *m.data.values);

      const bool matern = problem.family == KernelFamily::matern;
      if (!est_trace.empty()) {
        std::ofstream trace(est_trace);
        if (!trace) throw InputError("cannot write '" + est_trace + "'");
        trace << "evaluation," << (matern ? "nu," : "") << "rho,loglik,positive_definite,factor_nnz,t_cons,t_chol\n";
        for (const RemlTraceRow& row : res.trace) {
          trace << row.evaluation << ',';
          for (Index k = 0; k < row.theta.size(); ++k) trace << fmt(row.theta[k]) << ',';
          trace << fmt(row.loglik) << ',' << (row.positive_definite ? 1 : 0) << ',' << row.factor_nnz << ','
                << fmt(row.t_cons) << ',' << fmt(row.t_chol) << '\n';
        }
      }
      auto err = [&](Index k) -> std::string {
        if (!truth || truth->family() != problem.family) return "NA";
        return fmt(res.theta_hat[k] - truth->theta()[k]);
      };
      std::ostringstream csv;
      csv << "n,f_tilde,i,p_tilde,nu_hat,rho_hat,nu_err,rho_err,nnz_g_pct,size,t_cons,t_chol,loglik,evaluations,"
             "degenerate\n";
      csv << m.data.size() << ',' << est_ftilde << ',' << problem.min_level << ',' << m.basis.p_tilde() << ','
          << (matern ? fmt(res.theta_hat[0]) : "NA") << ',' << fmt(res.theta_hat[matern ? 1 : 0]) << ','
          << (matern ? err(0) : "NA") << ',' << err(matern ? 1 : 0) << ',' << fmt(res.factor_percent()) << ','
          << res.n_tilde << ',' << fmt(res.total_t_cons()) << ',' << fmt(res.total_t_chol()) << ','
          << fmt(res.loglik) << ',' << res.evaluations << ',' << (res.degenerate ? 1 : 0) << '\n';
      std::cout << csv.str() << '\n' << render_table(csv.str());
      if (res.hit_iteration_cap) std::cerr << "warning: optimizer hit the iteration cap\n";
    } else if (*krg) {
      Model m = build_model(krg_data, krg_f, krg_ftilde);
      if (!m.data.values.has_value()) throw InputError("kriging needs observed values in --data");
      const SpatialDataset targets = load_dataset(krg_targets);
      if (targets.dim() != m.data.dim()) throw InputError("targets and data differ in dimension");
      KrigingOptions opts;
      opts.eps = krg_eps;
      const KrigingContext ctx(m.basis, m.tree, m.data, KernelModel::parse(krg_kernel), opts);
      const KrigingSolution sol = solve_kriging_system(ctx);
      const Vector zhat = predict_many(sol, m.data, targets.locations);
      std::optional<MseWorkspace> ws;
      if (krg_mse) ws = build_mse_workspace(ctx);
      std::ofstream file;
      std::ostream& out = open_output(krg_out, file);
      static const char* axes[] = {"x", "y", "z"};
      out << "target_id";
      for (int k = 0; k < targets.dim(); ++k) out << ',' << axes[k];
      out << ",zhat" << (krg_mse ? ",mse" : "") << '\n';
      for (Index i = 0; i < targets.size(); ++i) {
        out << i;
        for (int k = 0; k < targets.dim(); ++k) out << ',' << fmt(targets.locations(k, i));
        out << ',' << fmt(zhat[i]);
        if (ws) out << ',' << fmt(mse(ctx, *ws, targets.locations.col(i)).value);
        out << '\n';
      }
      std::cerr << "PCG iterations " << sol.report.iterations << ", relative residual "
                << sol.report.relative_residual << '\n';
    } else if (*lds) {
      print_outputs(run_experiment(study_config(st_config, st_preset, "logdet", st_out)));
    } else if (*sls) {
      print_outputs(run_experiment(study_config(st_config, st_preset, "solve", st_out)));
    } else if (*rep) {
      if (!rep_csv.empty()) {
        std::ifstream in(rep_csv);
        if (!in) throw InputError("cannot open '" + rep_csv + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        std::cout << render_table(ss.str());
      } else {
        print_outputs(run_experiment(study_config(st_config, st_preset, "", st_out)));
      }
    } else if (*tst) {
      const SpatialDataset data = load_dataset(dg_data);
      const Index threshold = dg_threshold > 0 ? dg_threshold : monomial_count(data.dim(), dg_f);
      const TreeStats s = tree_stats(build_tree(data, threshold));
      std::cout << "n,t,cubes,leaves,max_leaf,min_leaf\n"
                << s.n << ',' << s.max_level << ',' << s.cube_count << ',' << s.leaf_count << ',' << s.max_leaf << ','
                << s.min_leaf << '\n';
    } else if (*bst) {
      const Model m = build_model(dg_data, dg_f, dg_ftilde);
      const BasisStats s = basis_stats(m.basis, m.data);
      std::cout << "level,rows\n";
      for (const auto& [level, rows] : s.rows_per_level) std::cout << level << ',' << rows << '\n';
      std::cout << "\nnnz_w,trend_residual,accuracy_residual\n"
                << s.nnz_w << ',' << fmt(s.trend_residual) << ',' << fmt(s.accuracy_residual) << '\n';
      if (!dg_dump.empty()) write_basis_dump(dg_dump, m.basis);
    } else if (*cst || *chb) {
      Eigen::SparseMatrix<Scalar> lower;
      std::optional<Model> m;
      std::optional<CovStats> stats;
      Scalar t_asm = 0.0;
      if (!dg_triplets.empty()) {
        lower = read_symmetric_triplets(dg_triplets).triangularView<Eigen::Lower>();
      } else {
        if (dg_data.empty()) throw InputError("give --data" + std::string(*chb ? " or --triplets" : ""));
        m = build_model(dg_data, dg_f, dg_ftilde);
        const int min_level = resolve_min_level(dg_min_level, m->basis.finest_level());
        const auto t0 = std::chrono::steady_clock::now();
        const TaperedCovariance cov = assemble(m->basis, m->tree, CovarianceFunction::accelerated(KernelModel::parse(dg_kernel)),
                                               {dg_tau, min_level});
        t_asm = std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
        stats = cov_stats(cov, m->basis);
        lower = cov.lower();
      }
      if (*cst) {
        std::cout << "size,stored,density_pct,half_density_pct,min_diagonal,max_diagonal,t_assembly\n"
                  << stats->size << ',' << stats->stored << ',' << fmt(100.0 * stats->density) << ','
                  << fmt(100.0 * stats->half_density) << ',' << fmt(stats->min_diagonal) << ','
                  << fmt(stats->max_diagonal) << ',' << fmt(t_asm) << "\n\nlevel,rows\n";
        for (const auto& [level, rows] : stats->rows_per_level) std::cout << level << ',' << rows << '\n';
        if (!dg_export.empty()) write_triplets(dg_export, lower);
      } else {
        CholeskyOptions opts;
        opts.ordering = parse_ordering(dg_ordering);
        Matrix centers;
        if (opts.ordering == OrderingMethod::nested_dissection) {
          if (!m) throw InputError("nested dissection needs --data for row coordinates");
          centers = row_centers(m->basis, m->tree, resolve_min_level(dg_min_level, m->basis.finest_level()));
        }
        const auto t0 = std::chrono::steady_clock::now();
        const CholFactor g = analyze_and_factor(lower, opts, centers.size() ? &centers : nullptr);
        const Scalar t_chol = std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
        const Scalar size = static_cast<Scalar>(g.size());
        std::cout << "size,nnz_g,nnz_g_pct,dense,t_chol,logdet\n"
                  << g.size() << ',' << g.nnz() << ',' << fmt(100.0 * g.nnz() / (size * (size + 1) / 2)) << ','
                  << (g.is_dense() ? 1 : 0) << ',' << fmt(t_chol) << ',' << fmt(log_det(g)) << '\n';
      }
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
