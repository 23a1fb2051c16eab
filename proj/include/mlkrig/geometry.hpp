#ifndef MLKRIG_GEOMETRY_HPP
#define MLKRIG_GEOMETRY_HPP

#include "mlkrig/common.hpp"

#include <array>
#include <optional>
#include <vector>

namespace mlkrig {

/// Observation locations (d x n, one column per point) and optional values.
struct SpatialDataset {
  Matrix locations;
  std::optional<Vector> values;

  int dim() const { return static_cast<int>(locations.rows()); }
  Index size() const { return locations.cols(); }

  /// Throws InputError unless d is 2 or 3, n >= 1, all coordinates lie in
  /// [0, 1] and values (when present) are finite with length n.
  void validate() const;
};

/// Sentinel cube id standing for the level -1 group.
inline constexpr Index kExtraCube = -1;

struct Cube {
  int level = 0;
  std::uint64_t morton = 0;          // bit-interleaved grid coordinates within the level
  std::array<std::uint32_t, 3> coords{};
  Index parent = -1;
  Index first_child = -1;            // children are contiguous ids
  int child_count = 0;
  Index begin = 0;                   // point range in tree order
  Index end = 0;

  bool is_leaf() const { return child_count == 0; }
  Index count() const { return end - begin; }
};

/// Adaptive 2^d tree. Points are permuted into depth-first order so every
/// cube owns the contiguous range [begin, end) of `sorted_points()`.
class DecompositionTree {
 public:
  int dim() const { return dim_; }
  int max_level() const { return max_level_; }
  Index leaf_threshold() const { return leaf_threshold_; }
  Index num_points() const { return permutation_.size(); }

  const std::vector<Cube>& cubes() const { return cubes_; }
  const Cube& cube(Index id) const { return cubes_.at(static_cast<std::size_t>(id)); }
  Index root() const { return 0; }

  /// Cube ids of one level, ascending by Morton code.
  const std::vector<Index>& level_cubes(int level) const;
  std::vector<Index> leaves() const;

  /// permutation()[pos] = original index of the point at tree position pos.
  const IndexVector& permutation() const { return permutation_; }
  const IndexVector& inverse_permutation() const { return inverse_; }
  const Matrix& sorted_points() const { return sorted_points_; }

  /// Cube id for (level, morton), or -1 when that cube is empty.
  Index find(int level, std::uint64_t morton) const;

  Vector lower_corner(Index id) const;
  Scalar side_length(Index id) const;
  Vector center(Index id) const;

  /// Grid coordinates of the level-`level` ancestor of cube `id` (level <= cube level).
  std::array<std::uint32_t, 3> ancestor_coords(Index id, int level) const;

  static int max_depth(int dim) { return dim == 2 ? 30 : 20; }

 private:
  friend DecompositionTree build_tree(const SpatialDataset& data, Index leaf_threshold);

  int dim_ = 0;
  int max_level_ = 0;
  Index leaf_threshold_ = 0;
  std::vector<Cube> cubes_;
  std::vector<std::vector<Index>> levels_;
  IndexVector permutation_;
  IndexVector inverse_;
  Matrix sorted_points_;
};

/// Splits every cube holding more than `leaf_threshold` points into its
/// non-empty 2^d children. Points on a splitting plane go to the upper child.
DecompositionTree build_tree(const SpatialDataset& data, Index leaf_threshold);

std::uint64_t morton_encode(const std::array<std::uint32_t, 3>& coords, int dim);
std::array<std::uint32_t, 3> morton_decode(std::uint64_t code, int dim);

/// Non-empty level-i cubes within Chebyshev grid distance tau of cube `id`
/// (the tau-fold face/edge/corner dilation), ascending by Morton code.
std::vector<Index> expanded_cube(const DecompositionTree& tree, Index id, int tau);

/// Level-dependent tapering criterion between cubes a and b. Either id may be
/// kExtraCube, in which case the answer is always true.
bool taper_predicate(const DecompositionTree& tree, Index a, Index b, int tau);

struct TreeStats {
  Index n = 0;
  int max_level = 0;
  Index cube_count = 0;
  Index leaf_count = 0;
  Index max_leaf = 0;
  Index min_leaf = 0;
};
TreeStats tree_stats(const DecompositionTree& tree);

}  // namespace mlkrig

#endif  // MLKRIG_GEOMETRY_HPP
