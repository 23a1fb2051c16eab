#include "mlkrig/ordering.hpp"

#include <Eigen/OrderingMethods>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace mlkrig {

std::string_view to_string(OrderingMethod method) {
  switch (method) {
    case OrderingMethod::natural: return "natural";
    case OrderingMethod::amd: return "amd";
    case OrderingMethod::nested_dissection: return "nd";
  }
  return "unknown";
}

OrderingMethod parse_ordering(std::string_view name) {
  if (name == "natural") return OrderingMethod::natural;
  if (name == "amd") return OrderingMethod::amd;
  if (name == "nd" || name == "nested_dissection") return OrderingMethod::nested_dissection;
  throw InputError("unknown ordering '" + std::string(name) + "'");
}

namespace {

// Adjacency lists of the symmetric pattern, diagonal excluded.
std::vector<std::vector<Index>> adjacency(const Eigen::SparseMatrix<Scalar>& lower) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(lower.rows()));
  for (Index j = 0; j < lower.outerSize(); ++j) {
    for (Eigen::SparseMatrix<Scalar>::InnerIterator it(lower, j); it; ++it) {
      if (it.row() == j) continue;
      adj[static_cast<std::size_t>(it.row())].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(it.row());
    }
  }
  return adj;
}

class Dissector {
 public:
  Dissector(const std::vector<std::vector<Index>>& adj, const Matrix& coords, Index leaf)
      : adj_(adj), coords_(coords), leaf_(leaf), side_(adj.size(), 0) {}

  void order(std::vector<Index> nodes, std::vector<Index>& out) {
    if (static_cast<Index>(nodes.size()) <= leaf_) {
      std::sort(nodes.begin(), nodes.end());
      out.insert(out.end(), nodes.begin(), nodes.end());
      return;
    }
    const int d = static_cast<int>(coords_.rows());
    int axis = 0;
    Scalar widest = -1.0;
    for (int k = 0; k < d; ++k) {
      Scalar lo = coords_(k, nodes.front());
      Scalar hi = lo;
      for (Index v : nodes) {
        lo = std::min(lo, coords_(k, v));
        hi = std::max(hi, coords_(k, v));
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis = k;
      }
    }
    const std::size_t half = nodes.size() / 2;
    std::nth_element(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(half), nodes.end(),
                     [&](Index a, Index b) {
                       const Scalar ca = coords_(axis, a);
                       const Scalar cb = coords_(axis, b);
                       return ca < cb || (ca == cb && a < b);
                     });
    // side_: 1 = left, 2 = right, 3 = separator; 0 = outside this subproblem.
    for (std::size_t q = 0; q < nodes.size(); ++q) side_[nodes[q]] = q < half ? 1 : 2;
    std::vector<Index> left, right, sep;
    for (std::size_t q = 0; q < half; ++q) {
      const Index v = nodes[q];
      bool touches = false;
      for (Index w : adj_[v]) {
        if (side_[w] == 2) {
          touches = true;
          break;
        }
      }
      if (touches) {
        sep.push_back(v);
      } else {
        left.push_back(v);
      }
    }
    for (std::size_t q = half; q < nodes.size(); ++q) right.push_back(nodes[q]);
    for (Index v : nodes) side_[v] = 0;
    if (left.empty() || right.empty()) {
      std::sort(nodes.begin(), nodes.end());
      out.insert(out.end(), nodes.begin(), nodes.end());
      return;
    }
    order(std::move(left), out);
    order(std::move(right), out);
    std::sort(sep.begin(), sep.end());
    out.insert(out.end(), sep.begin(), sep.end());
  }

 private:
  const std::vector<std::vector<Index>>& adj_;
  const Matrix& coords_;
  Index leaf_;
  std::vector<int> side_;
};

}  // namespace

IndexVector nested_dissection(const Eigen::SparseMatrix<Scalar>& lower, const Matrix& coordinates,
                              Index leaf_size) {
  if (coordinates.cols() != lower.rows()) throw InputError("nested_dissection: one coordinate per row required");
  const auto adj = adjacency(lower);
  std::vector<Index> nodes(static_cast<std::size_t>(lower.rows()));
  std::iota(nodes.begin(), nodes.end(), Index{0});
  std::vector<Index> out;
  out.reserve(nodes.size());
  Dissector(adj, coordinates, std::max<Index>(leaf_size, 1)).order(std::move(nodes), out);
  IndexVector perm(lower.rows());
  for (Index k = 0; k < perm.size(); ++k) perm[k] = out[static_cast<std::size_t>(k)];
  return perm;
}

IndexVector fill_reducing_ordering(const Eigen::SparseMatrix<Scalar>& lower, OrderingMethod method,
                                   const Matrix* coordinates) {
  const Index n = lower.rows();
  if (lower.cols() != n) throw InputError("ordering: matrix must be square");
  if (method == OrderingMethod::natural) {
    IndexVector perm(n);
    std::iota(perm.data(), perm.data() + n, Index{0});
    return perm;
  }
  if (method == OrderingMethod::nested_dissection) {
    if (coordinates == nullptr) throw InputError("nested dissection needs row coordinates");
    return nested_dissection(lower, *coordinates);
  }
  const Eigen::SparseMatrix<Scalar> full = lower.selfadjointView<Eigen::Lower>();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
  Eigen::AMDOrdering<int> amd;
  amd(full, p);
  // Eigen's ordering functor yields the inverse permutation: indices()[new] = old.
  IndexVector perm(n);
  for (Index k = 0; k < n; ++k) perm[k] = p.indices()[k];
  return perm;
}

}  // namespace mlkrig
