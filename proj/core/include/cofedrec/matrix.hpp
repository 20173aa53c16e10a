#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>

namespace cofedrec {

// Item-embedding matrices are |I| x d, one row per item. Row-major so a
// row maps onto a contiguous span and the binary dump format below is a
// straight memcpy of the storage.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Binary dump format: 8-byte magic "CFREMB01", uint64 rows, uint64 cols,
// then rows*cols little-endian IEEE doubles in row-major order.
void write_matrix(std::ostream& out, const Mat& m);
Mat read_matrix(std::istream& in);

void save_matrix(const std::filesystem::path& path, const Mat& m);
Mat load_matrix(const std::filesystem::path& path);

// Multi-matrix streams (e.g. one record per client) are just repeated
// single-matrix records; read until EOF.
std::vector<Mat> load_matrix_stream(const std::filesystem::path& path);

}  // namespace cofedrec
