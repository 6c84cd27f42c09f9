#pragma once

#include <bit>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace dc2ac::binio {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_vec(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) put_f64(out, v[k]);
}

/// Little-endian cursor over bytes_[pos, end). Throws Error on overrun.
template <class Error>
class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos, std::size_t end) : bytes_(bytes), pos_(pos), end_(end) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(byte(b)) << (8 * b);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(byte(b)) << (8 * b);
    pos_ += 4;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Eigen::VectorXd vec(std::size_t n) {
    if (n > remaining() / 8) need(n * 8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) v[static_cast<Eigen::Index>(k)] = f64();
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  unsigned char byte(int b) const { return static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(b)]); }
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw Error("payload is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_;
  std::size_t end_;
};

}  // namespace dc2ac::binio
