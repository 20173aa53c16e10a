#include "cofedrec/matrix.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace cofedrec {

namespace {
constexpr char kMagic[8] = {'C', 'F', 'R', 'E', 'M', 'B', '0', '1'};
}

void write_matrix(std::ostream& out, const Mat& m) {
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!out) throw std::runtime_error("matrix write failed");
}

Mat read_matrix(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad matrix magic");
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in) throw std::runtime_error("truncated matrix header");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) throw std::runtime_error("truncated matrix payload");
  return m;
}

void save_matrix(const std::filesystem::path& path, const Mat& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_matrix(out, m);
}

Mat load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_matrix(in);
}

std::vector<Mat> load_matrix_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Mat> out;
  while (in.peek() != std::char_traits<char>::eof()) {
    out.push_back(read_matrix(in));
  }
  return out;
}

}  // namespace cofedrec
