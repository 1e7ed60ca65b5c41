#pragma once

#include <Eigen/Dense>
#include <string>

namespace branchnet {

/// Plain CSV matrix dump, no header, full round-trip precision (%.17g).
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);

Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Binary (P5) graymap of |m|, linearly rescaled to 0..255. The true
/// min/max of |m| are recorded in a comment line so the scaling is
/// invertible up to quantization.
void write_pgm(const Eigen::MatrixXd& m, const std::string& path);

}  // namespace branchnet
