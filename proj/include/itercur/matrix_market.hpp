#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "itercur/matrix.hpp"

namespace itercur {

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline ingest_error parse_error(const std::string& path, long line, const std::string& msg) {
  return ingest_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

// Reads the Matrix Market exchange format, coordinate or array, field real or
// integer, symmetry general or symmetric. 1-based file indices become 0-based;
// symmetric storage is expanded to the full matrix. Coordinate files produce
// sparse matrices, array files dense ones.
inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ingest_error(path + ": cannot open file");

  long lineno = 0;
  std::string line;
  if (!std::getline(in, line)) throw detail::parse_error(path, 1, "empty file");
  ++lineno;

  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket")
    throw detail::parse_error(path, lineno, "missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw detail::parse_error(path, lineno, "unsupported object '" + object + "'");
  if (format != "coordinate" && format != "array")
    throw detail::parse_error(path, lineno, "unsupported format '" + format + "'");
  if (field == "complex" || field == "pattern")
    throw detail::parse_error(path, lineno,
                              "unsupported field type '" + field + "' (only real data is supported)");
  if (field != "real" && field != "integer")
    throw detail::parse_error(path, lineno, "unknown field type '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw detail::parse_error(path, lineno, "unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&](std::string& out) -> bool {
    while (std::getline(in, out)) {
      ++lineno;
      std::size_t pos = out.find_first_not_of(" \t\r\n");
      if (pos == std::string::npos) continue;
      if (out[pos] == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_data_line(line)) throw detail::parse_error(path, lineno, "missing size line");

  if (format == "coordinate") {
    std::istringstream sizes(line);
    long long m = 0, n = 0, nnz = 0;
    if (!(sizes >> m >> n >> nnz) || m < 1 || n < 1 || nnz < 0)
      throw detail::parse_error(path, lineno, "invalid coordinate size line '" + line + "'");
    if (symmetric && m != n)
      throw detail::parse_error(path, lineno, "symmetric matrix must be square");

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
    for (long long e = 0; e < nnz; ++e) {
      if (!next_data_line(line))
        throw detail::parse_error(path, lineno, "unexpected end of file, expected " +
                                                    std::to_string(nnz) + " entries");
      std::istringstream entry(line);
      long long i = 0, j = 0;
      double v = 0.0;
      if (!(entry >> i >> j >> v))
        throw detail::parse_error(path, lineno, "malformed entry '" + line + "'");
      if (i < 1 || i > m || j < 1 || j > n)
        throw detail::parse_error(path, lineno, "entry index out of range");
      entries.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), v);
      if (symmetric && i != j)
        entries.emplace_back(static_cast<Index>(j - 1), static_cast<Index>(i - 1), v);
    }
    return Matrix::from_triplets(static_cast<Index>(m), static_cast<Index>(n), entries);
  }

  // array format
  std::istringstream sizes(line);
  long long m = 0, n = 0;
  if (!(sizes >> m >> n) || m < 1 || n < 1)
    throw detail::parse_error(path, lineno, "invalid array size line '" + line + "'");
  if (symmetric && m != n) throw detail::parse_error(path, lineno, "symmetric matrix must be square");

  Eigen::MatrixXd a(m, n);
  auto read_value = [&]() {
    if (!next_data_line(line)) throw detail::parse_error(path, lineno, "unexpected end of file");
    std::istringstream entry(line);
    double v = 0.0;
    if (!(entry >> v)) throw detail::parse_error(path, lineno, "malformed value '" + line + "'");
    return v;
  };
  if (symmetric) {
    for (long long j = 0; j < n; ++j)
      for (long long i = j; i < m; ++i) {
        const double v = read_value();
        a(i, j) = v;
        a(j, i) = v;
      }
  } else {
    for (long long j = 0; j < n; ++j)
      for (long long i = 0; i < m; ++i) a(i, j) = read_value();
  }
  return Matrix::dense(std::move(a));
}

// Writes a Matrix: sparse as coordinate, dense as array, field real, symmetry
// general, 1-based indices. %.17g keeps values bit-exact across a round trip,
// and the fixed CSR iteration order makes output byte-identical across runs.
inline void write_matrix_market(const Matrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ingest_error(path + ": cannot open file for writing");
  char buf[64];
  if (a.is_sparse()) {
    const SparseCsr& s = a.csr();
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << s.rows() << " " << s.cols() << " " << s.nonZeros() << "\n";
    for (Index i = 0; i < s.rows(); ++i)
      for (SparseCsr::InnerIterator it(s, i); it; ++it) {
        std::snprintf(buf, sizeof(buf), "%.17g", it.value());
        out << (it.row() + 1) << " " << (it.col() + 1) << " " << buf << "\n";
      }
  } else {
    const Eigen::MatrixXd& d = a.dense_data();
    out << "%%MatrixMarket matrix array real general\n";
    out << d.rows() << " " << d.cols() << "\n";
    for (Index j = 0; j < d.cols(); ++j)
      for (Index i = 0; i < d.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", d(i, j));
        out << buf << "\n";
      }
  }
  if (!out) throw ingest_error(path + ": write failed");
}

}  // namespace itercur
