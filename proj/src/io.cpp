#include "mlkrig/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace mlkrig {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Scalar parse_number(const std::string& s, Index line) {
  std::size_t used = 0;
  Scalar v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw InputError("line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  }
  return v;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  return out;
}

std::string format17(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw InputError(std::string("truncated binary file while reading ") + what);
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

SpatialDataset read_csv_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV: empty input");
  const std::vector<std::string> header = split_csv(line);
  int dim = 0;
  bool has_values = false;
  if (header.size() >= 2 && header[0] == "x" && header[1] == "y") {
    dim = 2;
    std::size_t next = 2;
    if (header.size() > 2 && header[2] == "z") {
      dim = 3;
      next = 3;
    }
    if (header.size() == next + 1 && header[next] == "value") {
      has_values = true;
    } else if (header.size() != next) {
      throw InputError("CSV: header must be x,y[,z][,value], got '" + trim(line) + "'");
    }
  } else {
    throw InputError("CSV: header must be x,y[,z][,value], got '" + trim(line) + "'");
  }
  const std::size_t cols = static_cast<std::size_t>(dim) + (has_values ? 1 : 0);

  std::vector<Scalar> coords;
  std::vector<Scalar> values;
  Index lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != cols) {
      throw InputError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(cols) + " fields");
    }
    for (int k = 0; k < dim; ++k) coords.push_back(parse_number(fields[static_cast<std::size_t>(k)], lineno));
    if (has_values) values.push_back(parse_number(fields.back(), lineno));
  }
  SpatialDataset data;
  const Index n = static_cast<Index>(coords.size()) / dim;
  data.locations = Eigen::Map<const Matrix>(coords.data(), dim, n);
  if (has_values) data.values = Eigen::Map<const Vector>(values.data(), n);
  data.validate();
  return data;
}

SpatialDataset read_csv_dataset(const std::string& path) {
  std::ifstream in = open_in(path);
  return read_csv_dataset(in);
}

void write_csv_dataset(std::ostream& out, const SpatialDataset& data) {
  out << (data.dim() == 3 ? "x,y,z" : "x,y") << (data.values ? ",value" : "") << '\n';
  for (Index i = 0; i < data.size(); ++i) {
    for (int k = 0; k < data.dim(); ++k) out << (k ? "," : "") << format17(data.locations(k, i));
    if (data.values) out << ',' << format17((*data.values)[i]);
    out << '\n';
  }
}

void write_csv_dataset(const std::string& path, const SpatialDataset& data) {
  std::ofstream out = open_out(path);
  write_csv_dataset(out, data);
}

SpatialDataset read_binary_dataset(const std::string& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  const auto n = get<std::uint64_t>(in, "n");
  const auto d = get<std::uint32_t>(in, "d");
  if (d != 2 && d != 3) throw InputError("binary dataset: dimension must be 2 or 3");
  in.seekg(0, std::ios::end);
  const auto total = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t header = sizeof(std::uint64_t) + sizeof(std::uint32_t);
  const std::uint64_t coord_bytes = n * d * sizeof(double);
  if (total != header + coord_bytes && total != header + coord_bytes + n * sizeof(double)) {
    throw InputError("binary dataset: file size does not match n and d");
  }
  in.seekg(static_cast<std::streamoff>(header));
  SpatialDataset data;
  data.locations.resize(d, static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(data.locations.data()), static_cast<std::streamsize>(coord_bytes));
  if (total > header + coord_bytes) {
    Vector v(static_cast<Index>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    data.values = std::move(v);
  }
  if (!in) throw InputError("binary dataset: read failed");
  data.validate();
  return data;
}

void write_binary_dataset(const std::string& path, const SpatialDataset& data) {
  std::ofstream out = open_out(path, std::ios::binary);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(data.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.dim()));
  out.write(reinterpret_cast<const char*>(data.locations.data()),
            static_cast<std::streamsize>(data.locations.size() * sizeof(double)));
  if (data.values) {
    out.write(reinterpret_cast<const char*>(data.values->data()),
              static_cast<std::streamsize>(data.values->size() * sizeof(double)));
  }
}

SpatialDataset load_dataset(const std::string& path) {
  return ends_with(path, ".bin") ? read_binary_dataset(path) : read_csv_dataset(path);
}

void save_dataset(const std::string& path, const SpatialDataset& data) {
  if (ends_with(path, ".bin")) {
    write_binary_dataset(path, data);
  } else {
    write_csv_dataset(path, data);
  }
}

void write_triplets(std::ostream& out, const Eigen::SparseMatrix<Scalar>& matrix) {
  for (Index j = 0; j < matrix.outerSize(); ++j) {
    for (Eigen::SparseMatrix<Scalar>::InnerIterator it(matrix, j); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << format17(it.value()) << '\n';
    }
  }
}

void write_triplets(const std::string& path, const Eigen::SparseMatrix<Scalar>& matrix) {
  std::ofstream out = open_out(path);
  write_triplets(out, matrix);
}

Eigen::SparseMatrix<Scalar> read_symmetric_triplets(std::istream& in, Index size) {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  Index max_index = -1;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line)[0] == '%' || trim(line)[0] == '#') continue;
    std::istringstream ls(line);
    long long r = 0;
    long long c = 0;
    Scalar v = 0;
    if (!(ls >> r >> c >> v) || r < 0 || c < 0) {
      throw InputError("triplets line " + std::to_string(lineno) + ": expected 'row col value'");
    }
    if (r < c) std::swap(r, c);
    max_index = std::max<Index>(max_index, static_cast<Index>(r));
    triplets.emplace_back(static_cast<Index>(r), static_cast<Index>(c), v);
  }
  const Index n = size >= 0 ? size : max_index + 1;
  if (max_index >= n) throw InputError("triplets: index exceeds the declared size");
  Eigen::SparseMatrix<Scalar> lower(n, n);
  lower.setFromTriplets(triplets.begin(), triplets.end(), [](Scalar, Scalar b) { return b; });
  return lower;
}

Eigen::SparseMatrix<Scalar> read_symmetric_triplets(const std::string& path, Index size) {
  std::ifstream in = open_in(path);
  return read_symmetric_triplets(in, size);
}

namespace {

constexpr char kMagic[8] = {'M', 'L', 'B', 'A', 'S', 'I', 'S', '1'};

template <typename Sparse>
std::string triplet_section(const Sparse& m) {
  std::ostringstream os;
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.nonZeros()));
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (typename Sparse::InnerIterator it(m, r); it; ++it) {
      put<std::uint64_t>(os, static_cast<std::uint64_t>(it.row()));
      put<std::uint64_t>(os, static_cast<std::uint64_t>(it.col()));
      put<double>(os, it.value());
    }
  }
  return os.str();
}

void write_section(std::ostream& out, const char (&tag)[5], const std::string& payload) {
  out.write(tag, 4);
  put<std::uint64_t>(out, payload.size());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

Eigen::SparseMatrix<Scalar, Eigen::RowMajor> parse_triplets(const std::string& payload, Index rows, Index cols) {
  std::istringstream in(payload);
  const auto count = get<std::uint64_t>(in, "triplet count");
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto r = get<std::uint64_t>(in, "row");
    const auto c = get<std::uint64_t>(in, "col");
    const auto v = get<double>(in, "value");
    if (r >= static_cast<std::uint64_t>(rows) || c >= static_cast<std::uint64_t>(cols)) {
      throw InputError("basis dump: triplet index out of range");
    }
    t.emplace_back(static_cast<Index>(r), static_cast<Index>(c), v);
  }
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

void write_basis_dump(const std::string& path, const MultiLevelBasis& basis) {
  std::ofstream out = open_out(path, std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  std::ostringstream head;
  put<std::uint64_t>(head, static_cast<std::uint64_t>(basis.n()));
  put<std::uint64_t>(head, static_cast<std::uint64_t>(basis.p()));
  put<std::uint64_t>(head, static_cast<std::uint64_t>(basis.spec().dim));
  put<std::uint64_t>(head, static_cast<std::uint64_t>(basis.spec().f));
  put<std::uint64_t>(head, static_cast<std::uint64_t>(basis.spec().f_tilde));
  put<std::int64_t>(head, basis.max_level());
  write_section(out, "HEAD", head.str());
  write_section(out, "WTRP", triplet_section(w_matrix(basis)));
  const SparseRowMatrix l = l_matrix(basis).sparseView();
  write_section(out, "LTRP", triplet_section(l));
}

BasisDump read_basis_dump(const std::string& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw InputError("basis dump: bad magic");
  BasisDump dump;
  bool have_head = false;
  for (;;) {
    char tag[4];
    in.read(tag, 4);
    if (in.gcount() == 0) break;
    if (!in) throw InputError("basis dump: truncated section tag");
    const auto len = get<std::uint64_t>(in, "section length");
    std::string payload(len, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(len));
    if (!in) throw InputError("basis dump: truncated section");
    const std::string name(tag, 4);
    if (name == "HEAD") {
      std::istringstream hs(payload);
      dump.n = get<std::uint64_t>(hs, "n");
      dump.p = get<std::uint64_t>(hs, "p");
      dump.dim = get<std::uint64_t>(hs, "d");
      dump.f = get<std::uint64_t>(hs, "f");
      dump.f_tilde = get<std::uint64_t>(hs, "f_tilde");
      dump.max_level = get<std::int64_t>(hs, "t");
      have_head = true;
    } else if (!have_head) {
      throw InputError("basis dump: HEAD must come first");
    } else if (name == "WTRP") {
      dump.w = parse_triplets(payload, static_cast<Index>(dump.n - dump.p), static_cast<Index>(dump.n));
    } else if (name == "LTRP") {
      dump.l = parse_triplets(payload, static_cast<Index>(dump.p), static_cast<Index>(dump.n));
    }
  }
  if (!have_head) throw InputError("basis dump: missing HEAD section");
  return dump;
}

}  // namespace mlkrig
