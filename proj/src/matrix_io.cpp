#include "branchnet/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "branchnet/errors.hpp"

namespace branchnet {

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << buf << (c + 1 < m.cols() ? "," : "");
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      double v = 0.0;
      const char* b = line.data() + pos;
      const char* e = line.data() + next;
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || ptr != e)
        throw DataError("bad numeric cell in " + path + " at row " +
                        std::to_string(rows.size() + 1));
      row.push_back(v);
      pos = next + 1;
      if (next == line.size()) break;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError("ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

void write_pgm(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  const Eigen::MatrixXd a = m.cwiseAbs();
  const double lo = a.size() ? a.minCoeff() : 0.0;
  const double hi = a.size() ? a.maxCoeff() : 0.0;
  char header[160];
  std::snprintf(header, sizeof header, "P5\n# abs range min %.17g max %.17g\n%ld %ld\n255\n",
                lo, hi, static_cast<long>(m.cols()), static_cast<long>(m.rows()));
  out << header;
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = (a(r, c) - lo) * scale;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
    }
}

}  // namespace branchnet
