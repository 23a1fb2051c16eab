#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlkrig;
using namespace mlkrig::testing;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mlkrig_tests_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Index line_count(const std::string& text) {
  return static_cast<Index>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("uniform datasets") {
    const SpatialDataset a = uniform_points(1000, 2, 5);
    CHECK(a.size() == 1000);
    CHECK(a.dim() == 2);
    CHECK(a.locations.minCoeff() >= 0.0);
    CHECK(a.locations.maxCoeff() <= 1.0);
    CHECK_FALSE(a.values.has_value());
    const SpatialDataset b = uniform_points(300, 2, 5);
    CHECK(b.locations == a.locations.leftCols(300));
    const SpatialDataset c = uniform_points(300, 2, 6);
    CHECK(c.locations != b.locations);
    CHECK(uniform_points(10, 3, 1).dim() == 3);
  }

  TEST_CASE("carved disks") {
    const SpatialDataset base = uniform_points(10000, 2, 9);
    const SpatialDataset carved = generate_dataset({DatasetKind::carved_disks, 10000, 9});
    Index kept = 0;
    for (Index i = 0; i < base.size(); ++i) {
      const Scalar x = base.locations(0, i), y = base.locations(1, i);
      const bool in_disk = std::pow(x - 0.25, 2) + std::pow(y - 0.25, 2) < 0.0625 ||
                           std::pow(x - 0.75, 2) + std::pow(y - 0.75, 2) < 0.0625;
      CHECK(in_disk == inside_carved_disk(x, y));
      if (!in_disk) {
        REQUIRE(kept < carved.size());
        CHECK(carved.locations.col(kept) == base.locations.col(i));
        ++kept;
      }
    }
    CHECK(kept == carved.size());
    CHECK(static_cast<Scalar>(kept) / 10000.0 == doctest::Approx(1.0 - std::acos(-1.0) / 8.0).epsilon(0.03));
    CHECK(parse_dataset_kind(to_string(DatasetKind::carved_disks)) == DatasetKind::carved_disks);
    CHECK_THROWS_AS(parse_dataset_kind("sphere"), InputError);
  }

  TEST_CASE("identity sampler") {
    const SpatialDataset d = uniform_points(40, 2, 2);
    const Vector beta{{1.0, 2.0, -1.0}};
    const GaussianSampler s = GaussianSampler::identity(d, 1, beta);
    const Vector z = s.sample(11, 3);
    CHECK(max_abs(z - trend_matrix(d.locations, 1) * beta - s.noise(11, 3)) <= 1e-14);
    const CounterRng rng(11, 4);
    CHECK(s.noise(11, 3)[5] == rng.normal(5));
  }

  TEST_CASE("sampler covariance") {
    const SpatialDataset d = uniform_points(30, 2, 3);
    const KernelModel k = KernelModel::matern(0.75, 1.0 / 6.0);
    const GaussianSampler s(d, k, 0, Vector::Zero(1));
    const Index reps = 2000;
    Matrix samples(d.size(), reps);
    for (Index r = 0; r < reps; ++r) samples.col(r) = s.sample(21, static_cast<std::uint64_t>(r));
    const Matrix emp = samples * samples.transpose() / static_cast<Scalar>(reps);
    const Matrix c = kernel_matrix(CovarianceFunction(k), d.locations, d.locations);
    for (Index i = 0; i < 5; ++i) {
      for (Index j = 0; j < 5; ++j) {
        const Scalar sd = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / static_cast<Scalar>(reps));
        CHECK(std::abs(emp(i, j) - c(i, j)) <= 5.0 * sd);
      }
    }
    CHECK(s.sample(21, 4) == s.sample(21, 4));
    CHECK(s.sample(21, 4) != s.sample(21, 5));
    CHECK(s.sample(21, 4) == sample_gp(d, k, 0, Vector::Zero(1), 21, 4));
  }

  TEST_CASE("min level tokens") {
    CHECK(resolve_min_level("t", 4) == 4);
    CHECK(resolve_min_level("auto", 4) == 3);
    CHECK(resolve_min_level("t-1", 4) == 3);
    CHECK(resolve_min_level("t-3", 4) == 1);
    CHECK(resolve_min_level("t-9", 4) == -1);
    CHECK(resolve_min_level("2", 4) == 2);
    CHECK(resolve_min_level("-1", 4) == -1);
    CHECK(resolve_min_level("7", 4) == 4);
    CHECK_THROWS_AS(resolve_min_level("t+1", 4), InputError);
    CHECK_THROWS_AS(resolve_min_level("", 4), InputError);
  }

  TEST_CASE("config json") {
    ExperimentConfig c = ExperimentConfig::preset("table2");
    const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());
    CHECK(c.hash().size() == 16);
    ExperimentConfig moved = c;
    moved.output_dir = "/elsewhere";
    CHECK(moved.hash() == c.hash());
    moved.replicates = 7;
    CHECK(moved.hash() != c.hash());

    const auto j = nlohmann::json::parse(R"({"preset": "table4", "sizes": [500], "eps": 1e-4})");
    const ExperimentConfig o = ExperimentConfig::from_json(j);
    CHECK(o.study == "solve");
    CHECK(o.sizes == std::vector<Index>{500});
    CHECK(o.eps == 1e-4);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"sizez": [1]})")), InputError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"f": "three"})")), InputError);
    CHECK_THROWS_AS(ExperimentConfig::preset("table9"), InputError);
    const auto taus = ExperimentConfig::from_json(nlohmann::json::parse(R"({"taus": [0, "inf"]})")).taus;
    CHECK(taus == std::vector<int>{0, kTauInfinity});
  }

  TEST_CASE("presets") {
    for (const std::string& name : preset_names()) {
      const ExperimentConfig c = ExperimentConfig::preset(name);
      CHECK_NOTHROW(c.validate());
    }
    const ExperimentConfig t1 = ExperimentConfig::preset("table1");
    CHECK(t1.dataset.kind == DatasetKind::uniform3d);
    CHECK(t1.dataset.n == 8000);
    CHECK(t1.taus == std::vector<int>{0, 1, 2, kTauInfinity});
    const ExperimentConfig t3 = ExperimentConfig::preset("table3");
    CHECK(t3.replicates == 20);
    CHECK(t3.min_levels == std::vector<std::string>{"t", "t-1"});
    CHECK(ExperimentConfig::preset("table5").kernel.rho() == doctest::Approx(1.0 / 5.9915));
  }

  TEST_CASE("fnv1a") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("render table") {
    const std::string t = render_table("a,bb\n1.23456789012,x\n10,yy\n");
    CHECK(t == "      a  bb\n-----------\n1.23457   x\n     10  yy\n");
  }

  TEST_CASE("zero replicates write only headers") {
    const auto dir = scratch_dir("zero");
    ExperimentConfig c = ExperimentConfig::preset("table2");
    c.dataset.n = 300;
    c.replicates = 0;
    c.output_dir = dir.string();
    const ExperimentOutputs out = run_experiment(c);
    CHECK(line_count(slurp(out.csv)) == 1);
    CHECK(std::filesystem::exists(out.timing));
    CHECK(std::filesystem::exists(out.table));
  }

  TEST_CASE("runs are reproducible") {
    ExperimentConfig c = ExperimentConfig::preset("table3");
    c.dataset.n = 400;
    c.replicates = 2;
    c.f = 1;
    c.f_tilde = 2;
    c.max_iter = 40;
    const auto a = scratch_dir("repro_a");
    const auto b = scratch_dir("repro_b");
    c.output_dir = a.string();
    const ExperimentOutputs oa = run_experiment(c);
    c.output_dir = b.string();
    const ExperimentOutputs ob = run_experiment(c);
    CHECK(slurp(oa.csv) == slurp(ob.csv));
    CHECK(slurp(oa.summary) == slurp(ob.summary));
    CHECK(line_count(slurp(oa.csv)) == 1 + 2 * 2);
  }

  TEST_CASE("logdet study at small size") {
    ExperimentConfig c = ExperimentConfig::preset("table1");
    c.dataset.n = 600;
    c.taus = {1, 2};
    c.output_dir = scratch_dir("logdet").string();
    const std::string csv = slurp(run_experiment(c).csv);
    CHECK(line_count(csv) == 3);
    CHECK(csv.find(",not_pd,") == std::string::npos);
  }
}
