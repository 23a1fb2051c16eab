#ifndef MLKRIG_HARNESS_HPP
#define MLKRIG_HARNESS_HPP

#include "mlkrig/geometry.hpp"
#include "mlkrig/kernels.hpp"
#include "mlkrig/nelder_mead.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mlkrig {

enum class DatasetKind { uniform2d, uniform3d, carved_disks };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

/// For carved_disks, n is the size of the uniform base set before carving.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::uniform2d;
  Index n = 1000;
  std::uint64_t seed = 1;
};

/// Point i, coordinate k is uniform draw i d + k of stream 0, so a smaller n
/// under the same seed is a prefix of a larger one.
SpatialDataset generate_dataset(const DatasetSpec& spec);

/// Strictly inside the disk of radius 1/4 around (1/4, 1/4) or (3/4, 3/4).
bool inside_carved_disk(Scalar x, Scalar y);

/// Draws Z = M_f beta + G xi with G the dense Cholesky factor of C(theta).
/// The factor is computed once; each replicate uses its own stream.
class GaussianSampler {
 public:
  GaussianSampler(const SpatialDataset& data, const KernelModel& kernel, int f, Vector beta);
  /// Test hook: G = I.
  static GaussianSampler identity(const SpatialDataset& data, int f, Vector beta);

  Vector sample(std::uint64_t seed, std::uint64_t replicate = 0) const;
  /// Standard normals used for one replicate.
  Vector noise(std::uint64_t seed, std::uint64_t replicate = 0) const;
  bool jittered() const { return jittered_; }
  const Vector& beta() const { return beta_; }

 private:
  GaussianSampler() = default;
  Matrix factor_;  // empty for the identity hook
  Vector trend_;
  Vector beta_;
  Index n_ = 0;
  bool jittered_ = false;
};

Vector sample_gp(const SpatialDataset& data, const KernelModel& kernel, int f, const Vector& beta,
                 std::uint64_t seed, std::uint64_t replicate = 0);

/// Everything one experiment needs. JSON keys mirror the field names; a
/// "preset" key loads defaults that the remaining keys override.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string study = "logdet";  // logdet | estimate | solve | krige
  DatasetSpec dataset;
  std::vector<Index> sizes;      // n values for logdet, solve and krige studies; empty means dataset.n
  KernelModel kernel = KernelModel::matern(0.75, 1.0 / 6.0);
  int f = 3;
  int f_tilde = 3;
  Vector beta;                   // empty means all ones
  std::vector<int> taus{kTauInfinity};
  int tau = 1;
  std::vector<std::string> min_levels{"t-1"};  // integers, "t", "t-k" or "auto"
  Index replicates = 1;
  Box box;                       // empty means the kernel's default search box
  Scalar tol = 1e-3;
  Index max_iter = 1000;         // Nelder-Mead iterations
  Scalar eps = 1e-5;
  Index solver_max_iter = 100000;
  bool baseline = true;          // plain CG on C next to PCG on C_W
  Index targets = 1000;
  Index dense_limit = 8000;      // largest n with a dense reference
  bool use_spline = true;
  std::string output_dir = ".";

  static ExperimentConfig preset(std::string_view name);
  static ExperimentConfig from_json(const nlohmann::json& json);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical JSON dump without output_dir, as 16 hex digits.
  std::string hash() const;
  void validate() const;
};

std::vector<std::string> preset_names();

/// Resolves a min-level token; t is the finest contrast level of the basis.
/// Results below -1 clamp to -1.
int resolve_min_level(std::string_view token, int t);

struct ExperimentOutputs {
  std::string csv;       // deterministic results
  std::string timing;    // wall-clock sidecar
  std::string table;     // rendered text
  std::string summary;   // estimate study only
};

/// Runs the study and writes <output_dir>/<name>.csv, .timing.csv, .txt (and
/// .summary.csv for estimation). Stage failures are rethrown with the stage name.
ExperimentOutputs run_experiment(const ExperimentConfig& config);

/// Aligned plain-text rendering of a CSV document.
std::string render_table(const std::string& csv_text);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mlkrig

#endif  // MLKRIG_HARNESS_HPP
