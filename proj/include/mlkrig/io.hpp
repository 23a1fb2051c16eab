#ifndef MLKRIG_IO_HPP
#define MLKRIG_IO_HPP

#include "mlkrig/basis.hpp"
#include "mlkrig/geometry.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <string>

namespace mlkrig {

/// CSV with header x,y[,z][,value].
SpatialDataset read_csv_dataset(std::istream& in);
SpatialDataset read_csv_dataset(const std::string& path);
void write_csv_dataset(std::ostream& out, const SpatialDataset& data);
void write_csv_dataset(const std::string& path, const SpatialDataset& data);

/// Little-endian binary: u64 n, u32 d, n*d f64 coordinates (point-major),
/// then n f64 values when present.
SpatialDataset read_binary_dataset(const std::string& path);
void write_binary_dataset(const std::string& path, const SpatialDataset& data);

/// Binary when the path ends in ".bin", CSV otherwise.
SpatialDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const SpatialDataset& data);

/// "row col value" per line with 17 significant digits, zero-based indices.
void write_triplets(std::ostream& out, const Eigen::SparseMatrix<Scalar>& matrix);
void write_triplets(const std::string& path, const Eigen::SparseMatrix<Scalar>& matrix);

/// Reads a symmetric matrix written as triplets into its lower triangle.
/// Entries above the diagonal are mirrored; the size is the largest index + 1
/// unless `size` is given.
Eigen::SparseMatrix<Scalar> read_symmetric_triplets(std::istream& in, Index size = -1);
Eigen::SparseMatrix<Scalar> read_symmetric_triplets(const std::string& path, Index size = -1);

/// Section-tagged binary dump: the magic "MLBASIS1", then sections of
/// (4-byte tag, u64 byte length, payload). HEAD holds n, p, d, f, f~, t;
/// WTRP and LTRP hold u64 count then (u64 row, u64 col, f64 value) triplets
/// over original point order.
void write_basis_dump(const std::string& path, const MultiLevelBasis& basis);

struct BasisDump {
  std::uint64_t n = 0, p = 0, dim = 0, f = 0, f_tilde = 0;
  std::int64_t max_level = 0;
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> w;
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> l;
};
BasisDump read_basis_dump(const std::string& path);

}  // namespace mlkrig

#endif  // MLKRIG_IO_HPP
