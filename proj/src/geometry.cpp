#include "mlkrig/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mlkrig {

void SpatialDataset::validate() const {
  if (dim() != 2 && dim() != 3) throw InputError("dataset dimension must be 2 or 3");
  if (size() < 1) throw InputError("dataset is empty");
  for (Index i = 0; i < size(); ++i) {
    for (int k = 0; k < dim(); ++k) {
      const Scalar x = locations(k, i);
      if (!(x >= 0.0 && x <= 1.0)) {
        std::ostringstream os;
        os << "location " << i << " lies outside [0,1]^" << dim();
        throw InputError(os.str());
      }
    }
  }
  if (values) {
    if (values->size() != size()) throw InputError("dataset: values length differs from n");
    if (!values->allFinite()) throw InputError("dataset: values must be finite");
  }
}

std::uint64_t morton_encode(const std::array<std::uint32_t, 3>& coords, int dim) {
  std::uint64_t code = 0;
  const int bits = DecompositionTree::max_depth(dim);
  for (int b = 0; b < bits; ++b) {
    for (int k = 0; k < dim; ++k) {
      code |= static_cast<std::uint64_t>((coords[k] >> b) & 1u) << (b * dim + k);
    }
  }
  return code;
}

std::array<std::uint32_t, 3> morton_decode(std::uint64_t code, int dim) {
  std::array<std::uint32_t, 3> coords{};
  const int bits = DecompositionTree::max_depth(dim);
  for (int b = 0; b < bits; ++b) {
    for (int k = 0; k < dim; ++k) {
      coords[k] |= static_cast<std::uint32_t>((code >> (b * dim + k)) & 1u) << b;
    }
  }
  return coords;
}

namespace {

void reject_duplicates(const SpatialDataset& data) {
  const Index n = data.size();
  const int d = data.dim();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto less = [&](Index a, Index b) {
    for (int k = 0; k < d; ++k) {
      if (data.locations(k, a) != data.locations(k, b)) return data.locations(k, a) < data.locations(k, b);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (data.locations.col(order[i]) == data.locations.col(order[i - 1])) {
      std::ostringstream os;
      os << "duplicate locations " << std::min(order[i], order[i - 1]) << " and "
         << std::max(order[i], order[i - 1]);
      throw InputError(os.str());
    }
  }
}

}  // namespace

DecompositionTree build_tree(const SpatialDataset& data, Index leaf_threshold) {
  if (leaf_threshold < 1) throw InputError("leaf_threshold must be at least 1");
  data.validate();
  reject_duplicates(data);

  const int d = data.dim();
  const Index n = data.size();
  const int nchild = 1 << d;
  const int depth_cap = DecompositionTree::max_depth(d);

  DecompositionTree tree;
  tree.dim_ = d;
  tree.leaf_threshold_ = leaf_threshold;

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::vector<Index> scratch(perm.size());
  std::vector<int> bits(perm.size());

  Cube root;
  root.begin = 0;
  root.end = n;
  tree.cubes_.push_back(root);

  // Explicit stack keeps the point ranges in depth-first order.
  std::vector<Index> stack{0};
  while (!stack.empty()) {
    const Index id = stack.back();
    stack.pop_back();
    const Cube c = tree.cubes_[static_cast<std::size_t>(id)];
    tree.max_level_ = std::max(tree.max_level_, c.level);
    if (c.count() <= leaf_threshold) continue;
    if (c.level >= depth_cap) {
      std::ostringstream os;
      os << "cannot separate " << c.count() << " points at depth " << c.level
         << "; locations are too close";
      throw InputError(os.str());
    }
    const Scalar half = std::ldexp(1.0, -(c.level + 1));
    std::array<Index, 8> counts{};
    for (Index pos = c.begin; pos < c.end; ++pos) {
      int b = 0;
      for (int k = 0; k < d; ++k) {
        const Scalar mid = (2.0 * c.coords[k] + 1.0) * half;
        if (data.locations(k, perm[pos]) >= mid) b |= 1 << k;
      }
      bits[pos] = b;
      ++counts[b];
    }
    std::array<Index, 8> offset{};
    Index run = c.begin;
    for (int b = 0; b < nchild; ++b) {
      offset[b] = run;
      run += counts[b];
    }
    std::array<Index, 8> start = offset;
    for (Index pos = c.begin; pos < c.end; ++pos) scratch[offset[bits[pos]]++] = perm[pos];
    std::copy(scratch.begin() + c.begin, scratch.begin() + c.end, perm.begin() + c.begin);

    const Index first = static_cast<Index>(tree.cubes_.size());
    int made = 0;
    for (int b = 0; b < nchild; ++b) {
      if (counts[b] == 0) continue;
      Cube child;
      child.level = c.level + 1;
      for (int k = 0; k < d; ++k) child.coords[k] = 2 * c.coords[k] + ((b >> k) & 1);
      child.morton = (c.morton << d) | static_cast<std::uint64_t>(b);
      child.parent = id;
      child.begin = start[b];
      child.end = start[b] + counts[b];
      tree.cubes_.push_back(child);
      ++made;
    }
    tree.cubes_[static_cast<std::size_t>(id)].first_child = first;
    tree.cubes_[static_cast<std::size_t>(id)].child_count = made;
    for (int c2 = made - 1; c2 >= 0; --c2) stack.push_back(first + c2);
  }

  tree.levels_.assign(static_cast<std::size_t>(tree.max_level_ + 1), {});
  for (Index id = 0; id < static_cast<Index>(tree.cubes_.size()); ++id) {
    tree.levels_[static_cast<std::size_t>(tree.cubes_[id].level)].push_back(id);
  }
  for (auto& list : tree.levels_) {
    std::sort(list.begin(), list.end(),
              [&](Index a, Index b) { return tree.cubes_[a].morton < tree.cubes_[b].morton; });
  }

  tree.permutation_.resize(n);
  tree.inverse_.resize(n);
  tree.sorted_points_.resize(d, n);
  for (Index pos = 0; pos < n; ++pos) {
    tree.permutation_[pos] = perm[pos];
    tree.inverse_[perm[pos]] = pos;
    tree.sorted_points_.col(pos) = data.locations.col(perm[pos]);
  }
  return tree;
}

const std::vector<Index>& DecompositionTree::level_cubes(int level) const {
  if (level < 0 || level > max_level_) throw InputError("level out of range");
  return levels_[static_cast<std::size_t>(level)];
}

std::vector<Index> DecompositionTree::leaves() const {
  std::vector<Index> out;
  for (Index id = 0; id < static_cast<Index>(cubes_.size()); ++id) {
    if (cubes_[id].is_leaf()) out.push_back(id);
  }
  std::sort(out.begin(), out.end(), [&](Index a, Index b) { return cubes_[a].begin < cubes_[b].begin; });
  return out;
}

Index DecompositionTree::find(int level, std::uint64_t morton) const {
  if (level < 0 || level > max_level_) return -1;
  const auto& list = levels_[static_cast<std::size_t>(level)];
  auto it = std::lower_bound(list.begin(), list.end(), morton,
                             [&](Index id, std::uint64_t m) { return cubes_[id].morton < m; });
  if (it == list.end() || cubes_[*it].morton != morton) return -1;
  return *it;
}

Vector DecompositionTree::lower_corner(Index id) const {
  const Cube& c = cube(id);
  Vector lo(dim_);
  for (int k = 0; k < dim_; ++k) lo[k] = std::ldexp(static_cast<Scalar>(c.coords[k]), -c.level);
  return lo;
}

Scalar DecompositionTree::side_length(Index id) const { return std::ldexp(1.0, -cube(id).level); }

Vector DecompositionTree::center(Index id) const {
  return lower_corner(id).array() + 0.5 * side_length(id);
}

std::array<std::uint32_t, 3> DecompositionTree::ancestor_coords(Index id, int level) const {
  const Cube& c = cube(id);
  if (level > c.level || level < 0) throw InputError("ancestor level out of range");
  std::array<std::uint32_t, 3> out{};
  for (int k = 0; k < dim_; ++k) out[k] = c.coords[k] >> (c.level - level);
  return out;
}

namespace {

bool within(const std::array<std::uint32_t, 3>& a, const std::array<std::uint32_t, 3>& b, int dim,
            int tau) {
  for (int k = 0; k < dim; ++k) {
    const std::int64_t diff = static_cast<std::int64_t>(a[k]) - static_cast<std::int64_t>(b[k]);
    if (diff > tau || -diff > tau) return false;
  }
  return true;
}

}  // namespace

std::vector<Index> expanded_cube(const DecompositionTree& tree, Index id, int tau) {
  if (id < 0 || id >= static_cast<Index>(tree.cubes().size())) throw InputError("expanded_cube: unknown cube");
  if (tau < 0) throw InputError("expanded_cube: tau must be non-negative");
  const Cube& c = tree.cube(id);
  const int d = tree.dim();
  const auto& level = tree.level_cubes(c.level);
  std::vector<Index> out;

  const double window = std::pow(2.0 * tau + 1.0, d);
  if (window >= static_cast<double>(level.size())) {
    for (Index other : level) {
      if (within(tree.cube(other).coords, c.coords, d, tau)) out.push_back(other);
    }
    return out;
  }
  const std::int64_t limit = std::int64_t{1} << c.level;
  std::array<std::int64_t, 3> lo{}, hi{};
  for (int k = 0; k < 3; ++k) {
    lo[k] = k < d ? std::max<std::int64_t>(0, std::int64_t{c.coords[k]} - tau) : 0;
    hi[k] = k < d ? std::min<std::int64_t>(limit - 1, std::int64_t{c.coords[k]} + tau) : 0;
  }
  for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y) {
      for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
        const std::array<std::uint32_t, 3> g{static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y),
                                             static_cast<std::uint32_t>(z)};
        const Index hit = tree.find(c.level, morton_encode(g, d));
        if (hit >= 0) out.push_back(hit);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [&](Index a, Index b) { return tree.cube(a).morton < tree.cube(b).morton; });
  return out;
}

bool taper_predicate(const DecompositionTree& tree, Index a, Index b, int tau) {
  if (a == kExtraCube || b == kExtraCube) return true;
  const Index ncubes = static_cast<Index>(tree.cubes().size());
  if (a < 0 || a >= ncubes || b < 0 || b >= ncubes) throw InputError("taper_predicate: unknown cube");
  if (tau < 0) throw InputError("taper_predicate: tau must be non-negative");
  const Cube& ca = tree.cube(a);
  const Cube& cb = tree.cube(b);
  // Compare on the coarser of the two levels.
  if (cb.level >= ca.level) return within(tree.ancestor_coords(b, ca.level), ca.coords, tree.dim(), tau);
  return within(tree.ancestor_coords(a, cb.level), cb.coords, tree.dim(), tau);
}

TreeStats tree_stats(const DecompositionTree& tree) {
  TreeStats s;
  s.n = tree.num_points();
  s.max_level = tree.max_level();
  s.cube_count = static_cast<Index>(tree.cubes().size());
  s.min_leaf = s.n;
  for (const Cube& c : tree.cubes()) {
    if (!c.is_leaf()) continue;
    ++s.leaf_count;
    s.max_leaf = std::max(s.max_leaf, c.count());
    s.min_leaf = std::min(s.min_leaf, c.count());
  }
  return s;
}

}  // namespace mlkrig
