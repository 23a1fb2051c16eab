// Acceptance checks. Each criterion prints one PASS/FAIL line.

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/harness.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/krige.hpp"
#include "mlkrig/lemma1.hpp"
#include "mlkrig/mlcov.hpp"
#include "mlkrig/polynomial.hpp"
#include "mlkrig/random.hpp"
#include "mlkrig/reml.hpp"
#include "mlkrig/sparse_cholesky.hpp"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace mlkrig;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Setup {
  SpatialDataset data;
  DecompositionTree tree;
  MultiLevelBasis basis;
};

Setup make_setup(DatasetKind kind, Index n, int f, int f_tilde, std::uint64_t seed) {
  Setup s;
  s.data = generate_dataset({kind, n, seed});
  const DesignSpec spec{s.data.dim(), f, f_tilde, PolynomialBasis::chebyshev};
  s.tree = build_tree(s.data, spec.p_tilde());
  s.basis = build_basis(s.tree, s.data, spec);
  return s;
}

Scalar max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Scalar eigen_log_det(const Matrix& a) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().array().log().sum();
}

Scalar condition_number(const Matrix& a) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

Outcome basis_correctness() {
  Scalar worst_orth = 0.0, worst_moment = 0.0;
  for (int dim : {2, 3}) {
    for (Index n : {100, 1000, 4096}) {
      const int f = dim == 2 ? 3 : 2;
      const Setup s = make_setup(dim == 2 ? DatasetKind::uniform2d : DatasetKind::uniform3d, n, f, f, 100 + n);
      // Rows of P = [W; L] in original order: apply W and L to the identity.
      const Matrix id = Matrix::Identity(n, n);
      Matrix p(n, n);
      p.topRows(s.basis.contrast_count()) = apply_W_block(s.basis, id);
      p.bottomRows(n - s.basis.contrast_count()) = apply_L_block(s.basis, id);
      worst_orth = std::max(worst_orth, max_abs(p * p.transpose() - id));
      Matrix m = trend_matrix(s.data.locations, f);
      m = m.array().rowwise() / m.colwise().norm().array();
      worst_moment = std::max(worst_moment, max_abs(apply_W_block(s.basis, m)));
    }
  }
  return {worst_orth <= 1e-10 && worst_moment <= 1e-10,
          fmt("max |P P^T - I| = %.2e, max |W M_f| = %.2e", worst_orth, worst_moment)};
}

Outcome congruence() {
  const Setup s = make_setup(DatasetKind::uniform2d, 1000, 2, 2, 2);
  const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
  const CovarianceFunction phi(k);
  const TaperedCovariance cov = assemble(s.basis, s.tree, phi, {kTauInfinity, kExtraLevel});
  const Matrix w = Matrix(w_matrix(s.basis));
  const Matrix ref = w * kernel_matrix(phi, s.data.locations, s.data.locations) * w.transpose();
  const Scalar entry_err = max_abs(cov.to_dense() - ref);
  const CholFactor g = analyze_and_factor(cov.lower());
  const Scalar ld = log_det(g);
  const Scalar ld_ref = eigen_log_det(ref);
  const Scalar rel = std::abs(ld - ld_ref) / std::abs(ld_ref);
  return {entry_err <= 1e-10 && rel <= 1e-8,
          fmt("max entry error %.2e, log det %.10g vs %.10g (rel %.2e)", entry_err, ld, ld_ref, rel)};
}

Outcome tapering_logdet() {
  const Setup s = make_setup(DatasetKind::uniform3d, 8000, 3, 3, 1);
  const CovarianceFunction phi(KernelModel::exponential(1.0));
  const CholeskyOptions chol;
  const Matrix centers = row_centers(s.basis, s.tree, kExtraLevel);
  const auto logdet_at = [&](int tau) {
    const TaperedCovariance cov = assemble(s.basis, s.tree, phi, {tau, kExtraLevel});
    return log_det(analyze_and_factor(cov.lower(), chol, &centers));
  };
  bool tau0_not_pd = false;
  std::string tau0 = "tau=0 unexpectedly PD";
  try {
    logdet_at(0);
  } catch (const NotPositiveDefinite& e) {
    tau0_not_pd = true;
    tau0 = fmt("tau=0 not PD (pivot %ld)", static_cast<long>(e.pivot()));
  }
  const Scalar ref = logdet_at(kTauInfinity);
  Scalar e1 = std::nan(""), e2 = std::nan("");
  bool pd1 = true;
  try {
    e1 = std::abs(logdet_at(1) - ref) / std::abs(ref);
  } catch (const NotPositiveDefinite&) {
    pd1 = false;
  }
  e2 = std::abs(logdet_at(2) - ref) / std::abs(ref);
  const bool pass = tau0_not_pd && pd1 && e1 <= 1e-4 && e2 <= e1 / 10.0;
  return {pass, fmt("%s, eps_rel(tau=1) = %.3e, eps_rel(tau=2) = %.3e", tau0.c_str(), e1, e2)};
}

Outcome conditioning() {
  Index violations = 0;
  Scalar worst_ratio = 0.0;
  const KernelModel kernels[] = {KernelModel::matern(0.75, 1.0 / 6.0), KernelModel::matern(1.0, 0.2),
                                 KernelModel::exponential(0.3), KernelModel::matern(1.5, 0.1)};
  try {
    for (int inst = 0; inst < 20; ++inst) {
      const int dim = inst % 2 == 0 ? 2 : 3;
      const int f = 1 + inst % 3;
      const Setup s = make_setup(dim == 2 ? DatasetKind::uniform2d : DatasetKind::uniform3d, 300, f, f, 500 + inst);
      const CovarianceFunction phi(kernels[inst % 4]);
      const Matrix c = kernel_matrix(phi, s.data.locations, s.data.locations);
      const Matrix w = Matrix(w_matrix(s.basis));
      const Scalar kc = condition_number(c);
      const Scalar kw = condition_number(w * c * w.transpose());
      worst_ratio = std::max(worst_ratio, kw / kc);
      if (!(kw <= kc)) ++violations;
    }
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
  return {violations == 0, fmt("%ld violations over 20 instances, max kappa(C_W)/kappa(C) = %.3g",
                               static_cast<long>(violations), worst_ratio)};
}

Outcome lemma1_domination() {
  const Setup s = make_setup(DatasetKind::uniform2d, 500, 1, 1, 1);
  const KernelModel k = KernelModel::matern(1.5, 1.0 / 6.0);
  const CovarianceFunction phi(k);
  const auto pairs = separated_group_pairs(s.basis, s.tree, 1.0);
  if (pairs.size() < 100) return {false, fmt("only %zu separated pairs", pairs.size())};
  const std::size_t stride = pairs.size() / 100;
  Index violations = 0;
  Scalar worst = 0.0;
  for (std::size_t q = 0; q < 100; ++q) {
    const auto [a, b] = pairs[q * stride];
    const Matrix block = contrast_block(s.basis, s.tree, phi, a, b);
    const Lemma1Bound bound = lemma1_bound(s.tree, k, 1, s.basis.groups()[a].cube, s.basis.groups()[b].cube);
    const Scalar ratio = max_abs(block) / bound.value;
    worst = std::max(worst, ratio);
    if (ratio > 1.0) ++violations;
  }
  return {violations == 0,
          fmt("%ld of 100 pairs exceed the bound, max |psi^T C psi| / bound = %.3g", static_cast<long>(violations), worst)};
}

Matrix uniform_targets(int dim, Index count, std::uint64_t seed) {
  const CounterRng rng(seed, 1ULL << 32);
  Matrix t(dim, count);
  for (Index i = 0; i < count; ++i) {
    for (int k = 0; k < dim; ++k) t(k, i) = rng.uniform(static_cast<std::uint64_t>(i * dim + k));
  }
  return t;
}

Outcome kriging_accuracy() {
  const KernelModel k = KernelModel::exponential(1.0 / 5.9915);
  Setup s = make_setup(DatasetKind::uniform3d, 1000, 3, 3, 1);
  s.data.values = sample_gp(s.data, k, 3, Vector::Ones(20), 1);
  KrigingOptions ko;
  ko.eps = 1e-5;
  const KrigingContext ctx(s.basis, s.tree, s.data, k, ko);
  const KrigingSolution sol = solve_kriging_system(ctx);
  const Matrix targets = uniform_targets(3, 1000, 1);
  const Vector ours = predict_many(sol, s.data, targets);
  const DenseKriging ref(s.data, k, 3);
  Vector dense(targets.cols());
  for (Index j = 0; j < targets.cols(); ++j) dense[j] = ref.predict(targets.col(j));
  const Scalar err = (ours - dense).norm() / dense.norm();
  return {err <= 1e-4, fmt("relative l2 error %.3e over 1000 targets (%ld PCG iterations)", err,
                           static_cast<long>(sol.report.iterations))};
}

Outcome blup_identities() {
  const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
  Setup s = make_setup(DatasetKind::uniform2d, 300, 2, 3, 4);
  s.data.values = sample_gp(s.data, k, 2, Vector::Ones(6), 4);
  const Scalar eps = 1e-8;
  KrigingOptions ko;
  ko.eps = eps;
  const KrigingContext ctx(s.basis, s.tree, s.data, k, ko);
  const KrigingSolution sol = solve_kriging_system(ctx);
  const DenseKriging ref(s.data, k, 2);

  const Vector at_sites = predict_many(sol, s.data, s.data.locations);
  const Scalar interp = (at_sites - *s.data.values).cwiseAbs().maxCoeff();
  const Scalar beta_err = (sol.beta_hat - ref.beta_hat).norm() / ref.beta_hat.norm();

  const MseWorkspace ws = build_mse_workspace(ctx);
  Scalar mse_sites = 0.0;
  for (Index i = 0; i < s.data.size(); i += 10) mse_sites = std::max(mse_sites, std::abs(mse(ctx, ws, s.data.locations.col(i)).value));
  const Matrix targets = uniform_targets(2, 50, 4);
  Scalar mse_rel = 0.0;
  for (Index j = 0; j < targets.cols(); ++j) {
    const Scalar d = ref.mse(targets.col(j));
    mse_rel = std::max(mse_rel, std::abs(mse(ctx, ws, targets.col(j)).value - d) / std::abs(d));
  }
  const bool pass = interp <= 1e-5 && beta_err <= 10 * eps && mse_sites <= 1e-5 && mse_rel <= 1e-5;
  return {pass, fmt("interpolation %.2e, beta rel %.2e, MSE at sites %.2e, MSE rel %.2e", interp, beta_err,
                    mse_sites, mse_rel)};
}

Outcome parameter_recovery() {
  const ExperimentConfig c = ExperimentConfig::preset("table3");
  const KernelModel truth = c.kernel;
  const Setup s = make_setup(c.dataset.kind, c.dataset.n, c.f, c.f_tilde, c.dataset.seed);
  const GaussianSampler sampler(s.data, truth, c.f, Vector::Ones(monomial_count(2, c.f)));
  RemlProblem problem;
  problem.data = &s.data;
  problem.tree = &s.tree;
  problem.basis = &s.basis;
  problem.family = KernelFamily::matern;
  problem.tau = c.tau;
  problem.box = Box{Vector{{0.5, 1.0 / 7.0}}, Vector{{1.25, 0.2}}};
  problem.optimizer.tol = c.tol;
  problem.optimizer.max_iter = c.max_iter;
  const int t = s.basis.finest_level();
  const int levels[2] = {resolve_min_level("t", t), resolve_min_level("t-1", t)};
  std::vector<Vector> est[2];
  for (Index rep = 0; rep < c.replicates; ++rep) {
    const Vector z = sampler.sample(c.dataset.seed, static_cast<std::uint64_t>(rep));
    for (int l = 0; l < 2; ++l) {
      problem.min_level = levels[l];
      est[l].push_back(estimate(problem, z).theta_hat);
    }
  }
  Vector mean[2], sd[2];
  for (int l = 0; l < 2; ++l) {
    mean[l] = Vector::Zero(2);
    for (const Vector& e : est[l]) mean[l] += e;
    mean[l] /= static_cast<Scalar>(est[l].size());
    sd[l] = Vector::Zero(2);
    for (const Vector& e : est[l]) sd[l] += (e - mean[l]).cwiseAbs2();
    sd[l] = (sd[l] / static_cast<Scalar>(est[l].size() - 1)).cwiseSqrt();
  }
  const Scalar dnu = std::abs(mean[1][0] - 0.75);
  const Scalar drho = std::abs(mean[1][1] - 1.0 / 6.0);
  const bool pass = dnu <= 0.03 && drho <= 0.02 && sd[1][0] < sd[0][0];
  return {pass, fmt("M=%ld, i=t-1: mean nu %.4f, mean rho %.4f; std nu %.4f (t-1) vs %.4f (t)",
                    static_cast<long>(c.replicates), mean[1][0], mean[1][1], sd[1][0], sd[0][0])};
}

Outcome pcg_benefit() {
  const ExperimentConfig c = ExperimentConfig::preset("table4");
  Setup s = make_setup(c.dataset.kind, 4000, c.f, c.f_tilde, c.dataset.seed);
  const Vector z = sample_gp(s.data, c.kernel, c.f, Vector::Ones(monomial_count(2, c.f)), c.dataset.seed);
  s.data.values = z;
  KrigingOptions ko;
  ko.eps = c.eps;
  ko.max_iter = c.solver_max_iter;
  ko.use_spline = c.use_spline;
  const KrigingContext ctx(s.basis, s.tree, s.data, c.kernel, ko);
  const PcgResult pre = ctx.solve(apply_W(s.basis, z), c.eps);
  const KernelOperator& kop = ctx.op().kernel();
  PcgOptions po;
  po.eps = c.eps;
  po.max_iter = c.solver_max_iter;
  Index plain = 0;
  try {
    plain = pcg([&kop](const Vector& v) { return kop.apply(v); }, Vector::Ones(4000), z, po).report.iterations;
  } catch (const PcgFailure& e) {
    plain = e.best().report.iterations;
  }
  const Index ours = pre.report.iterations;
  const bool pass = pre.report.converged && 3 * ours <= plain;
  return {pass, fmt("PCG on C_W %ld iterations, CG on C %ld (ratio %.1f)", static_cast<long>(ours),
                    static_cast<long>(plain), static_cast<Scalar>(plain) / static_cast<Scalar>(ours))};
}

Outcome spline_accuracy() {
  const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
  const SplineInterpolant s(k, 5e-9, 2.5);
  Scalar worst = 0.0;
  const Index samples = 1000000;
  for (Index j = 1; j <= samples; ++j) {
    const Scalar r = 2.5 * static_cast<Scalar>(j) / static_cast<Scalar>(samples);
    worst = std::max(worst, std::abs(s(r) - k(r)));
  }
  const std::size_t nodes = s.node_count();
  return {worst <= 5e-9 && nodes < 200, fmt("%zu nodes, max abs error %.2e on 1e6 points", nodes, worst)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "mlkrig_acceptance_determinism";
  std::vector<std::string> checked;
  bool same = true;
  for (const std::string& name : {std::string("table2"), std::string("table4")}) {
    ExperimentConfig c = ExperimentConfig::preset(name);
    if (name == "table2") {
      c.dataset.n = 1000;
      c.replicates = 2;
    } else {
      c.sizes = {1000};
    }
    std::string first;
    for (const char* run : {"a", "b"}) {
      const auto dir = root / (name + "_" + run);
      std::filesystem::remove_all(dir);
      std::filesystem::create_directories(dir);
      c.output_dir = dir.string();
      const std::string csv = slurp(run_experiment(c).csv);
      if (*run == 'a') {
        first = csv;
      } else if (csv != first || csv.empty()) {
        same = false;
      }
    }
    checked.push_back(name);
  }
  std::filesystem::remove_all(root);
  return {same, fmt("%zu presets run twice with equal seeds, CSVs %s", checked.size(),
                    same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlkrig acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"basis correctness", basis_correctness},
      {"congruence oracle", congruence},
      {"log-det tapering", tapering_logdet},
      {"conditioning", conditioning},
      {"decay bound domination", lemma1_domination},
      {"kriging accuracy", kriging_accuracy},
      {"BLUP/GLS identities", blup_identities},
      {"parameter recovery", parameter_recovery},
      {"PCG benefit", pcg_benefit},
      {"spline accelerator", spline_accuracy},
      {"determinism", determinism},
  };

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s: %s (%s; %.1fs)\n", id, out.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
