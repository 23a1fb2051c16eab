#ifndef MLKRIG_LEMMA1_HPP
#define MLKRIG_LEMMA1_HPP

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"
#include "mlkrig/kernels.hpp"

#include <vector>

namespace mlkrig {

struct Lemma1Options {
  int samples_per_axis = 0;  // grid over the difference box; 0 picks 65 / 9 / 5 for d = 1 / 2 / 3
};

/// Decay bound for psi_a^T C psi_b when psi_a, psi_b annihilate polynomials of
/// degree f~ on boxes center +- radius:
///   sum_{|alpha| = |beta| = f~+1} r_a^alpha/alpha! r_b^beta/beta! sup |D^alpha_x D^beta_y phi|.
struct Lemma1Bound {
  Vector center_a, radius_a;
  Vector center_b, radius_b;
  int order = 0;          // f~ + 1
  Scalar value = 0;
  Scalar l1_factor = 1;   // ||psi_a||_1 ||psi_b||_1 when known

  /// value times l1_factor: what the Taylor argument guarantees entrywise.
  Scalar weighted() const { return value * l1_factor; }
};

/// Throws InputError when the boxes overlap (the sup is unbounded at r = 0).
Lemma1Bound lemma1_bound(const KernelModel& kernel, const Eigen::Ref<const Vector>& center_a,
                         const Eigen::Ref<const Vector>& radius_a, const Eigen::Ref<const Vector>& center_b,
                         const Eigen::Ref<const Vector>& radius_b, int f_tilde,
                         const Lemma1Options& options = {});

/// Same for two cubes of a tree.
Lemma1Bound lemma1_bound(const DecompositionTree& tree, const KernelModel& kernel, int f_tilde, Index cube_a,
                         Index cube_b, const Lemma1Options& options = {});

/// sup |D^gamma phi(|z|)| over a grid of the box [lower, upper] plus its point
/// nearest the origin, by tensor central differences.
Scalar derivative_sup(const KernelModel& kernel, const Eigen::Ref<const Vector>& lower,
                      const Eigen::Ref<const Vector>& upper, const std::vector<int>& gamma,
                      int samples_per_axis);

/// psi_a^T C psi_b for two contrast groups (rows of group a by rows of group b).
Matrix contrast_block(const MultiLevelBasis& basis, const DecompositionTree& tree, const CovarianceFunction& phi,
                      Index group_a, Index group_b);

/// Pairs of level >= 0 groups whose cubes are separated by at least
/// `separation` times the larger side, ordered by (group_a, group_b).
std::vector<std::pair<Index, Index>> separated_group_pairs(const MultiLevelBasis& basis,
                                                           const DecompositionTree& tree, Scalar separation);

}  // namespace mlkrig

#endif  // MLKRIG_LEMMA1_HPP
