#include "mlkrig/harness.hpp"

#include "mlkrig/basis.hpp"
#include "mlkrig/krige.hpp"
#include "mlkrig/mlcov.hpp"
#include "mlkrig/polynomial.hpp"
#include "mlkrig/random.hpp"
#include "mlkrig/reml.hpp"
#include "mlkrig/sparse_cholesky.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mlkrig {

using nlohmann::json;

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::uniform2d: return "uniform2d";
    case DatasetKind::uniform3d: return "uniform3d";
    case DatasetKind::carved_disks: return "carved_disks";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "uniform2d") return DatasetKind::uniform2d;
  if (name == "uniform3d") return DatasetKind::uniform3d;
  if (name == "carved_disks" || name == "carved") return DatasetKind::carved_disks;
  throw InputError("unknown dataset kind '" + std::string(name) + "'");
}

bool inside_carved_disk(Scalar x, Scalar y) {
  auto inside = [](Scalar dx, Scalar dy) { return dx * dx + dy * dy < 0.0625; };
  return inside(x - 0.25, y - 0.25) || inside(x - 0.75, y - 0.75);
}

SpatialDataset generate_dataset(const DatasetSpec& spec) {
  if (spec.n < 1) throw InputError("dataset: n must be positive");
  const int d = spec.kind == DatasetKind::uniform3d ? 3 : 2;
  const CounterRng rng(spec.seed, 0);
  Matrix pts(d, spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    for (int k = 0; k < d; ++k) pts(k, i) = rng.uniform(static_cast<std::uint64_t>(i * d + k));
  }
  SpatialDataset data;
  if (spec.kind != DatasetKind::carved_disks) {
    data.locations = std::move(pts);
    return data;
  }
  std::vector<Index> keep;
  for (Index i = 0; i < spec.n; ++i) {
    if (!inside_carved_disk(pts(0, i), pts(1, i))) keep.push_back(i);
  }
  if (keep.empty()) throw InputError("dataset: carving removed every point");
  data.locations.resize(2, static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) data.locations.col(static_cast<Index>(j)) = pts.col(keep[j]);
  return data;
}

GaussianSampler::GaussianSampler(const SpatialDataset& data, const KernelModel& kernel, int f, Vector beta)
    : beta_(std::move(beta)), n_(data.size()) {
  const Matrix mf = trend_matrix(data.locations, f);
  if (beta_.size() != mf.cols()) throw InputError("sample: beta must have p = " + std::to_string(mf.cols()) + " entries");
  trend_ = mf * beta_;
  Matrix c = kernel_matrix(CovarianceFunction(kernel), data.locations, data.locations);
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) {
    std::cerr << "warning: covariance factorization failed; retrying with 1e-12 jitter\n";
    c.diagonal().array() += 1e-12;
    llt.compute(c);
    if (llt.info() != Eigen::Success) throw NumericalError("sample: covariance is not positive definite even with jitter");
    jittered_ = true;
  }
  factor_ = llt.matrixL();
}

GaussianSampler GaussianSampler::identity(const SpatialDataset& data, int f, Vector beta) {
  GaussianSampler s;
  const Matrix mf = trend_matrix(data.locations, f);
  if (beta.size() != mf.cols()) throw InputError("sample: beta has the wrong length");
  s.beta_ = std::move(beta);
  s.trend_ = mf * s.beta_;
  s.n_ = data.size();
  return s;
}

Vector GaussianSampler::noise(std::uint64_t seed, std::uint64_t replicate) const {
  const CounterRng rng(seed, 1 + replicate);
  Vector xi(n_);
  for (Index i = 0; i < n_; ++i) xi[i] = rng.normal(static_cast<std::uint64_t>(i));
  return xi;
}

Vector GaussianSampler::sample(std::uint64_t seed, std::uint64_t replicate) const {
  const Vector xi = noise(seed, replicate);
  if (factor_.size() == 0) return trend_ + xi;
  return trend_ + factor_.triangularView<Eigen::Lower>() * xi;
}

Vector sample_gp(const SpatialDataset& data, const KernelModel& kernel, int f, const Vector& beta,
                 std::uint64_t seed, std::uint64_t replicate) {
  return GaussianSampler(data, kernel, f, beta).sample(seed, replicate);
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

Box default_box(const KernelModel& kernel) {
  if (kernel.family() == KernelFamily::matern) return Box{Vector{{0.5, 1.0 / 7.0}}, Vector{{1.25, 0.2}}};
  return Box{Vector{{0.5 * kernel.rho()}}, Vector{{2.0 * kernel.rho()}}};
}

json kernel_json(const KernelModel& k) {
  json j = {{"family", std::string(to_string(k.family()))}, {"rho", k.rho()}};
  if (k.family() == KernelFamily::matern) j["nu"] = k.nu();
  return j;
}

KernelModel kernel_from_json(const json& j) {
  if (j.is_string()) return KernelModel::parse(j.get<std::string>());
  if (!j.is_object()) throw InputError("config: kernel must be an object or a string");
  const KernelFamily family = parse_kernel_family(j.at("family").get<std::string>());
  const Scalar rho = j.at("rho").get<Scalar>();
  if (family == KernelFamily::matern) return KernelModel::matern(j.at("nu").get<Scalar>(), rho);
  return family == KernelFamily::gaussian ? KernelModel::gaussian(rho) : KernelModel::exponential(rho);
}

json tau_json(int tau) { return tau >= kTauInfinity ? json("inf") : json(tau); }

int tau_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kTauInfinity;
    throw InputError("config: tau must be an integer or \"inf\"");
  }
  const int t = j.get<int>();
  if (t < 0) throw InputError("config: tau must be non-negative");
  return t;
}

json vector_json(const Vector& v) { return json(std::vector<Scalar>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<Scalar>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

std::string tau_text(int tau) { return tau >= kTauInfinity ? "inf" : std::to_string(tau); }

std::string num(Scalar v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(Scalar v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<std::string> preset_names() { return {"table1", "table2", "table3", "table4", "table5"}; }

ExperimentConfig ExperimentConfig::preset(std::string_view name) {
  ExperimentConfig c;
  c.name = std::string(name);
  if (name == "table1") {
    c.study = "logdet";
    c.dataset = {DatasetKind::uniform3d, 8000, 1};
    c.kernel = KernelModel::exponential(1.0);
    c.f = 3;
    c.f_tilde = 3;
    c.taus = {0, 1, 2, kTauInfinity};
  } else if (name == "table2") {
    c.study = "estimate";
    c.dataset = {DatasetKind::uniform2d, 4000, 1};
    c.kernel = KernelModel::matern(0.75, 1.0 / 6.0);
    c.f = 3;
    c.f_tilde = 4;
    c.tau = 1;
    c.min_levels = {"t-1"};
    c.replicates = 1;
  } else if (name == "table3") {
    c.study = "estimate";
    c.dataset = {DatasetKind::uniform2d, 4000, 1};
    c.kernel = KernelModel::matern(0.75, 1.0 / 6.0);
    c.f = 3;
    c.f_tilde = 4;
    c.tau = 1;
    c.min_levels = {"t", "t-1"};
    c.replicates = 20;
  } else if (name == "table4") {
    c.study = "solve";
    c.dataset = {DatasetKind::uniform2d, 4000, 1};
    c.sizes = {1000, 2000, 4000};
    c.kernel = KernelModel::matern(1.0, 1.0 / 6.0);
    c.f = 3;
    c.f_tilde = 3;
    c.eps = 1e-3;
  } else if (name == "table5") {
    c.study = "krige";
    c.dataset = {DatasetKind::uniform3d, 4000, 1};
    c.sizes = {1000, 2000, 4000};
    c.kernel = KernelModel::exponential(1.0 / 5.9915);
    c.f = 3;
    c.f_tilde = 3;
    c.eps = 1e-5;
  } else {
    throw InputError("unknown preset '" + std::string(name) + "'");
  }
  c.output_dir = ".";
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["study"] = study;
  j["dataset"] = {{"kind", std::string(to_string(dataset.kind))}, {"n", dataset.n}, {"seed", dataset.seed}};
  j["sizes"] = sizes;
  j["kernel"] = kernel_json(kernel);
  j["f"] = f;
  j["f_tilde"] = f_tilde;
  j["beta"] = vector_json(beta);
  json taus_j = json::array();
  for (int t : taus) taus_j.push_back(tau_json(t));
  j["taus"] = taus_j;
  j["tau"] = tau_json(tau);
  j["min_levels"] = min_levels;
  j["replicates"] = replicates;
  j["box"] = {{"lower", vector_json(box.lower)}, {"upper", vector_json(box.upper)}};
  j["tol"] = tol;
  j["max_iter"] = max_iter;
  j["eps"] = eps;
  j["solver_max_iter"] = solver_max_iter;
  j["baseline"] = baseline;
  j["targets"] = targets;
  j["dense_limit"] = dense_limit;
  j["use_spline"] = use_spline;
  j["output_dir"] = output_dir;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw InputError("config: top level must be an object");
  try {
    ExperimentConfig c;
    if (j.contains("preset")) c = preset(j.at("preset").get<std::string>());
    static const std::vector<std::string> known = {
        "preset", "name", "study", "dataset", "sizes", "kernel", "f", "f_tilde", "beta", "taus", "tau",
        "min_levels", "replicates", "box", "tol", "max_iter", "eps", "solver_max_iter", "baseline",
        "targets", "dense_limit", "use_spline", "output_dir"};
    for (const auto& item : j.items()) {
      if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
        throw InputError("config: unknown key '" + item.key() + "'");
      }
    }
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("study")) c.study = j["study"].get<std::string>();
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      if (d.contains("kind")) c.dataset.kind = parse_dataset_kind(d["kind"].get<std::string>());
      if (d.contains("n")) c.dataset.n = d["n"].get<Index>();
      if (d.contains("seed")) c.dataset.seed = d["seed"].get<std::uint64_t>();
    }
    if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<Index>>();
    if (j.contains("kernel")) c.kernel = kernel_from_json(j["kernel"]);
    if (j.contains("f")) c.f = j["f"].get<int>();
    if (j.contains("f_tilde")) c.f_tilde = j["f_tilde"].get<int>();
    if (j.contains("beta")) c.beta = vector_from_json(j["beta"]);
    if (j.contains("taus")) {
      c.taus.clear();
      for (const json& t : j["taus"]) c.taus.push_back(tau_from_json(t));
    }
    if (j.contains("tau")) c.tau = tau_from_json(j["tau"]);
    if (j.contains("min_levels")) {
      c.min_levels.clear();
      for (const json& m : j["min_levels"]) c.min_levels.push_back(m.is_string() ? m.get<std::string>() : std::to_string(m.get<int>()));
    }
    if (j.contains("replicates")) c.replicates = j["replicates"].get<Index>();
    if (j.contains("box")) c.box = Box{vector_from_json(j["box"].at("lower")), vector_from_json(j["box"].at("upper"))};
    if (j.contains("tol")) c.tol = j["tol"].get<Scalar>();
    if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<Index>();
    if (j.contains("eps")) c.eps = j["eps"].get<Scalar>();
    if (j.contains("solver_max_iter")) c.solver_max_iter = j["solver_max_iter"].get<Index>();
    if (j.contains("baseline")) c.baseline = j["baseline"].get<bool>();
    if (j.contains("targets")) c.targets = j["targets"].get<Index>();
    if (j.contains("dense_limit")) c.dense_limit = j["dense_limit"].get<Index>();
    if (j.contains("use_spline")) c.use_spline = j["use_spline"].get<bool>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  return from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  json j = to_json();
  j.erase("output_dir");
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

void ExperimentConfig::validate() const {
  if (study != "logdet" && study != "estimate" && study != "solve" && study != "krige") {
    throw InputError("config: study must be logdet, estimate, solve or krige");
  }
  if (name.empty() || name.find('/') != std::string::npos) throw InputError("config: name must be a plain file stem");
  if (dataset.n < 1) throw InputError("config: dataset.n must be positive");
  for (Index n : sizes) {
    if (n < 1) throw InputError("config: sizes must be positive");
  }
  if (f < 0 || f_tilde < f) throw InputError("config: need 0 <= f <= f_tilde");
  if (replicates < 0) throw InputError("config: replicates must be non-negative");
  if (!(tol > 0.0) || !(eps > 0.0)) throw InputError("config: tolerances must be positive");
  if (targets < 0) throw InputError("config: targets must be non-negative");
  if (taus.empty() && study == "logdet") throw InputError("config: taus must not be empty");
  if (box.size() > 0) box.validate();
  for (const std::string& m : min_levels) resolve_min_level(m, 100);
}

int resolve_min_level(std::string_view token, int t) {
  int level = 0;
  if (token == "t") {
    level = t;
  } else if (token == "auto") {
    level = t - 1;
  } else if (token.size() > 2 && token.substr(0, 2) == "t-") {
    try {
      level = t - std::stoi(std::string(token.substr(2)));
    } catch (const std::exception&) {
      throw InputError("min level '" + std::string(token) + "' is not t, t-k, auto or an integer");
    }
  } else {
    std::size_t used = 0;
    try {
      level = std::stoi(std::string(token), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != token.size()) {
      throw InputError("min level '" + std::string(token) + "' is not t, t-k, auto or an integer");
    }
    if (level < kExtraLevel) throw InputError("min level must be at least -1");
    return std::min(level, t);
  }
  return std::max(level, kExtraLevel);
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

using Clock = std::chrono::steady_clock;

Scalar elapsed(Clock::time_point t0) { return std::chrono::duration<Scalar>(Clock::now() - t0).count(); }

template <typename F>
auto stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    throw InputError(name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(name + ": " + e.what());
  }
}

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw InputError("cannot write '" + path + "'");
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
    out_.flush();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

struct Setup {
  SpatialDataset data;
  DecompositionTree tree;
  MultiLevelBasis basis;
};

Setup prepare(const ExperimentConfig& c, Index n) {
  Setup s;
  DatasetSpec spec = c.dataset;
  spec.n = n;
  s.data = stage("generate", [&] { return generate_dataset(spec); });
  const DesignSpec design{s.data.dim(), c.f, c.f_tilde, PolynomialBasis::chebyshev};
  s.tree = stage("tree", [&] { return build_tree(s.data, design.p_tilde()); });
  s.basis = stage("basis", [&] { return build_basis(s.tree, s.data, design); });
  return s;
}

Vector true_beta(const ExperimentConfig& c, int dim) {
  if (c.beta.size() > 0) return c.beta;
  return Vector::Ones(monomial_count(dim, c.f));
}

std::vector<Index> study_sizes(const ExperimentConfig& c) {
  return c.sizes.empty() ? std::vector<Index>{c.dataset.n} : c.sizes;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void run_logdet(const ExperimentConfig& c, const std::string& hash, CsvFile& csv, CsvFile& timing) {
  for (Index n : study_sizes(c)) {
    Setup s = prepare(c, n);
    const CovarianceFunction phi = c.use_spline ? CovarianceFunction::accelerated(c.kernel) : CovarianceFunction(c.kernel);
    std::vector<int> order = c.taus;
    // The untapered value is the reference, so compute it first.
    std::stable_partition(order.begin(), order.end(), [](int t) { return t >= kTauInfinity; });
    bool have_ref = false;
    Scalar ref = 0.0;
    if (order.front() < kTauInfinity) {
      const TaperedCovariance cov = stage("assemble", [&] { return assemble(s.basis, s.tree, phi, {kTauInfinity, kExtraLevel}); });
      ref = stage("factor", [&] { return log_det(analyze_and_factor(cov.lower())); });
      have_ref = true;
    }
    std::vector<std::vector<std::string>> rows;
    for (int tau : order) {
      const auto t0 = Clock::now();
      const TaperedCovariance cov = stage("assemble", [&] { return assemble(s.basis, s.tree, phi, {tau, kExtraLevel}); });
      const Scalar t_asm = elapsed(t0);
      const auto t1 = Clock::now();
      std::string status = "pd";
      Scalar ld = std::nan("");
      try {
        ld = log_det(analyze_and_factor(cov.lower()));
      } catch (const NotPositiveDefinite&) {
        status = "not_pd";
      }
      const Scalar t_chol = elapsed(t1);
      if (tau >= kTauInfinity && status == "pd") {
        ref = ld;
        have_ref = true;
      }
      const Scalar abs_err = status == "pd" && have_ref ? std::abs(ld - ref) : std::nan("");
      rows.push_back({hash, std::to_string(n), tau_text(tau), std::to_string(cov.size()), num(100.0 * cov.density()),
                      status, num(ld), num(abs_err), num(abs_err / std::abs(ref))});
      timing.row({hash, std::to_string(n), tau_text(tau), num(t_asm), num(t_chol)});
    }
    // Report in the configured tau order.
    for (int tau : c.taus) {
      for (const auto& r : rows) {
        if (r[2] == tau_text(tau)) {
          csv.row(r);
          break;
        }
      }
    }
  }
}

struct EstimateRecord {
  int level;
  Vector error;
};

void run_estimate(const ExperimentConfig& c, const std::string& hash, CsvFile& csv, CsvFile& timing,
                  CsvFile& summary) {
  Setup s = prepare(c, c.dataset.n);
  const Vector theta = c.kernel.theta();
  const Vector beta = true_beta(c, s.data.dim());
  std::vector<EstimateRecord> records;
  std::vector<int> levels;
  for (const std::string& token : c.min_levels) levels.push_back(resolve_min_level(token, s.basis.finest_level()));

  if (c.replicates > 0) {
    const GaussianSampler sampler = stage("sample", [&] { return GaussianSampler(s.data, c.kernel, c.f, beta); });
    RemlProblem problem;
    problem.data = &s.data;
    problem.tree = &s.tree;
    problem.basis = &s.basis;
    problem.family = c.kernel.family();
    problem.tau = c.tau;
    problem.box = c.box.size() > 0 ? c.box : default_box(c.kernel);
    problem.optimizer.tol = c.tol;
    problem.optimizer.max_iter = c.max_iter;
    problem.use_spline = c.use_spline;
    for (Index rep = 0; rep < c.replicates; ++rep) {
      const Vector z = sampler.sample(c.dataset.seed, static_cast<std::uint64_t>(rep));
      for (int level : levels) {
        problem.min_level = level;
        const RemlResult res = stage("estimate", [&] { return estimate(problem, z); });
        const Vector err = res.theta_hat - theta;
        records.push_back({level, err});
        std::vector<std::string> row{hash, std::to_string(rep), std::to_string(s.data.size()), std::to_string(c.f_tilde),
                                     std::to_string(level), std::to_string(s.basis.p_tilde())};
        for (Index k = 0; k < 2; ++k) row.push_back(k < res.theta_hat.size() ? num(res.theta_hat[k]) : "NA");
        for (Index k = 0; k < 2; ++k) row.push_back(k < err.size() ? num(err[k]) : "NA");
        row.insert(row.end(), {num(res.loglik), std::to_string(res.iterations), std::to_string(res.evaluations),
                               num(res.factor_percent()), std::to_string(res.n_tilde), std::to_string(res.non_pd_count),
                               res.hit_iteration_cap ? "1" : "0", res.degenerate ? "1" : "0"});
        if (theta.size() == 1) {
          // Single-parameter families report rho in the second slot.
          std::swap(row[6], row[7]);
          std::swap(row[8], row[9]);
        }
        csv.row(row);
        timing.row({hash, std::to_string(rep), std::to_string(level), num(res.total_t_cons()), num(res.total_t_chol())});
      }
    }
  }
  for (int level : levels) {
    std::vector<Vector> errs;
    for (const EstimateRecord& r : records) {
      if (r.level == level) errs.push_back(r.error);
    }
    std::vector<std::string> row{hash, std::to_string(level), std::to_string(errs.size())};
    for (Index k = 0; k < theta.size(); ++k) {
      Scalar mean = 0.0;
      for (const Vector& e : errs) mean += e[k];
      mean = errs.empty() ? std::nan("") : mean / static_cast<Scalar>(errs.size());
      Scalar var = 0.0;
      for (const Vector& e : errs) var += (e[k] - mean) * (e[k] - mean);
      const Scalar sd = errs.size() > 1 ? std::sqrt(var / static_cast<Scalar>(errs.size() - 1)) : std::nan("");
      row.push_back(num(mean));
      row.push_back(num(sd));
    }
    if (theta.size() == 1) row.insert(row.begin() + 3, {"NA", "NA"});
    if (c.replicates > 0) summary.row(row);
  }
}

void run_solve(const ExperimentConfig& c, const std::string& hash, CsvFile& csv, CsvFile& timing) {
  for (Index n : study_sizes(c)) {
    Setup s = prepare(c, n);
    const Vector z = stage("sample", [&] { return sample_gp(s.data, c.kernel, c.f, true_beta(c, s.data.dim()), c.dataset.seed); });
    s.data.values = z;
    KrigingOptions ko;
    ko.eps = c.eps;
    ko.max_iter = c.solver_max_iter;
    ko.use_spline = c.use_spline;
    ko.dense_limit = c.dense_limit;
    const auto t0 = Clock::now();
    const KrigingContext ctx = stage("preconditioner", [&] { return KrigingContext(s.basis, s.tree, s.data, c.kernel, ko); });
    const Scalar t_diag = elapsed(t0);
    const auto t1 = Clock::now();
    const PcgResult res = stage("pcg", [&] { return ctx.solve(apply_W(s.basis, z), c.eps); });
    const Scalar t_itr = elapsed(t1);

    std::string itr_c = "NA";
    std::string res_c = "NA";
    Scalar t_base = std::nan("");
    if (c.baseline) {
      const auto t2 = Clock::now();
      const KernelOperator& kop = ctx.op().kernel();
      PcgOptions po;
      po.eps = c.eps;
      po.max_iter = c.solver_max_iter;
      try {
        const PcgResult base = pcg([&kop](const Vector& v) { return kop.apply(v); }, Vector::Ones(n), z, po);
        itr_c = std::to_string(base.report.iterations);
        res_c = num(base.report.relative_residual);
      } catch (const PcgFailure& e) {
        itr_c = ">" + std::to_string(e.best().report.iterations);
        res_c = num(e.best().report.relative_residual);
      }
      t_base = elapsed(t2);
    }
    const Scalar eps_pcg = res.report.preconditioned_history.empty() ? 0.0 : res.report.preconditioned_history.back();
    csv.row({hash, std::to_string(n), std::to_string(res.report.iterations), itr_c, num(eps_pcg),
             num(res.report.relative_residual), res_c});
    timing.row({hash, std::to_string(n), num(t_diag), num(t_itr), num(t_diag + t_itr), num(t_base)});
  }
}

void run_krige(const ExperimentConfig& c, const std::string& hash, CsvFile& csv, CsvFile& timing) {
  for (Index n : study_sizes(c)) {
    Setup s = prepare(c, n);
    s.data.values = stage("sample", [&] { return sample_gp(s.data, c.kernel, c.f, true_beta(c, s.data.dim()), c.dataset.seed); });
    const CounterRng rng(c.dataset.seed, 1ULL << 32);
    Matrix targets(s.data.dim(), c.targets);
    for (Index i = 0; i < c.targets; ++i) {
      for (int k = 0; k < s.data.dim(); ++k) targets(k, i) = rng.uniform(static_cast<std::uint64_t>(i * s.data.dim() + k));
    }
    KrigingOptions ko;
    ko.eps = c.eps;
    ko.max_iter = c.solver_max_iter;
    ko.use_spline = c.use_spline;
    ko.dense_limit = c.dense_limit;
    const auto t0 = Clock::now();
    const KrigingSolution sol = stage("solve", [&] {
      const KrigingContext ctx(s.basis, s.tree, s.data, c.kernel, ko);
      return solve_kriging_system(ctx);
    });
    const Scalar t_solve = elapsed(t0);
    const auto t1 = Clock::now();
    const Vector zhat = stage("predict", [&] { return predict_many(sol, s.data, targets); });
    const Scalar t_pred = elapsed(t1);
    Scalar rel = std::nan("");
    Scalar beta_rel = std::nan("");
    Scalar t_dense = std::nan("");
    if (n <= c.dense_limit && c.targets > 0) {
      const auto t2 = Clock::now();
      const DenseKriging ref = stage("dense reference", [&] { return DenseKriging(s.data, c.kernel, c.f); });
      Vector zref(c.targets);
      for (Index i = 0; i < c.targets; ++i) zref[i] = ref.predict(targets.col(i));
      rel = (zhat - zref).norm() / zref.norm();
      beta_rel = (sol.beta_hat - ref.beta_hat).norm() / ref.beta_hat.norm();
      t_dense = elapsed(t2);
    }
    csv.row({hash, std::to_string(n), std::to_string(c.targets), std::to_string(sol.report.iterations), num(rel),
             num(beta_rel)});
    timing.row({hash, std::to_string(n), num(t_solve), num(t_pred), num(t_dense)});
  }
}

}  // namespace

ExperimentOutputs run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::string hash = config.hash();
  std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path dir(config.output_dir);
  ExperimentOutputs out;
  out.csv = (dir / (config.name + ".csv")).string();
  out.timing = (dir / (config.name + ".timing.csv")).string();
  out.table = (dir / (config.name + ".txt")).string();

  if (config.study == "logdet") {
    CsvFile csv(out.csv, {"config_hash", "n", "tau", "size", "nnz_pct", "status", "logdet", "eps_abs", "eps_rel"});
    CsvFile timing(out.timing, {"config_hash", "n", "tau", "t_assembly", "t_chol"});
    run_logdet(config, hash, csv, timing);
  } else if (config.study == "estimate") {
    out.summary = (dir / (config.name + ".summary.csv")).string();
    CsvFile csv(out.csv, {"config_hash", "replicate", "n", "f_tilde", "i", "p_tilde", "nu_hat", "rho_hat", "nu_err",
                          "rho_err", "loglik", "iterations", "evaluations", "nnz_g_pct", "size", "non_pd",
                          "hit_cap", "degenerate"});
    CsvFile timing(out.timing, {"config_hash", "replicate", "i", "t_cons", "t_chol"});
    CsvFile summary(out.summary, {"config_hash", "i", "count", "mean_nu_err", "std_nu_err", "mean_rho_err", "std_rho_err"});
    run_estimate(config, hash, csv, timing, summary);
  } else if (config.study == "solve") {
    CsvFile csv(out.csv, {"config_hash", "n", "itr_cw", "itr_c", "eps_pcg", "residual_cw", "residual_c"});
    CsvFile timing(out.timing, {"config_hash", "n", "t_diag", "t_itr", "t_total", "t_baseline"});
    run_solve(config, hash, csv, timing);
  } else {
    CsvFile csv(out.csv, {"config_hash", "n", "targets", "iterations", "rel_l2_error", "beta_rel_error"});
    CsvFile timing(out.timing, {"config_hash", "n", "t_solve", "t_predict", "t_dense"});
    run_krige(config, hash, csv, timing);
  }

  std::ofstream table(out.table);
  if (!table) throw InputError("cannot write '" + out.table + "'");
  table << config.name << " (" << config.study << " study, config " << hash << ")\n\n";
  table << render_table(read_file(out.csv));
  if (!out.summary.empty()) table << '\n' << render_table(read_file(out.summary));
  return out;
}

std::string render_table(const std::string& csv_text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv_text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      // Long numbers are shortened for reading; the CSV keeps full precision.
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (!rows.empty() && end != cell.c_str() && *end == '\0' && cell.find_first_of(".eE") != std::string::npos) {
        cell = short_num(v);
      }
      cells.push_back(cell);
    }
    rows.push_back(std::move(cells));
  }
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t k = 0; k < r.size(); ++k) width[k] = std::max(width[k], r[k].size());
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      os << (k ? "  " : "") << std::string(width[k] - rows[i][k].size(), ' ') << rows[i][k];
    }
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t k = 0; k < width.size(); ++k) total += width[k] + (k ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace mlkrig
