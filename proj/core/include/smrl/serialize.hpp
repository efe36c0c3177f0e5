#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace smrl {

// One error type with a machine-checkable kind so tests can tell a bad
// magic from a truncated payload from a dimension mismatch.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kTruncated, kDimMismatch, kBadHeader };

  FormatError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_bytes(os, &v, 4); }

inline void write_f64_array(std::ostream& os, const double* p, std::size_t n) {
  write_bytes(os, p, n * sizeof(double));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw FormatError(FormatError::Kind::kTruncated,
                      std::string("truncated file while reading ") + what);
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  read_bytes(is, &v, 4, what);
  return v;
}

inline void expect_magic(std::istream& is, const char magic[4], const std::string& format) {
  char buf[4] = {0, 0, 0, 0};
  is.read(buf, 4);
  if (is.gcount() != 4)
    throw FormatError(FormatError::Kind::kTruncated, "truncated file while reading magic");
  if (std::memcmp(buf, magic, 4) != 0)
    throw FormatError(FormatError::Kind::kBadMagic,
                      "bad magic: expected " + format + " file");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

}  // namespace smrl
