#include "softguide/gridio.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "softguide/errors.hpp"

namespace softguide {

namespace {

void put_u32(std::string& b, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_u64(std::string& b, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) b.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& b, double x) {
  std::uint64_t v;
  std::memcpy(&v, &x, 8);
  put_u64(b, v);
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
  return v;
}

double get_f64(const unsigned char* p) {
  const std::uint64_t v = get_u64(p);
  double x;
  std::memcpy(&x, &v, 8);
  return x;
}

}  // namespace

void write_field_csv(const std::filesystem::path& path, const Grid2D& g,
                     std::span<const double> values) {
  if (values.size() != g.size())
    throw std::invalid_argument("write_field_csv: value count does not match grid");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("write_field_csv: cannot open " + path.string());
  std::fputs("x,y,value\n", f);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      std::fprintf(f, "%.17g,%.17g,%.17g\n", g.x(i), g.y(j), values[g.node(i, j)]);
  if (std::fclose(f) != 0) throw IoError("write_field_csv: close failed for " + path.string());
}

void write_sgw1(const std::filesystem::path& path, const Grid2D& g,
                std::span<const double> values) {
  if (values.size() != g.size())
    throw std::invalid_argument("write_sgw1: value count does not match grid");
  std::string buf;
  buf.reserve(64 + 8 * values.size());
  buf.append("SGW1");
  put_u32(buf, 1);
  put_u64(buf, static_cast<std::uint64_t>(g.nx));
  put_u64(buf, static_cast<std::uint64_t>(g.ny));
  put_f64(buf, g.xmin);
  put_f64(buf, g.xmax);
  put_f64(buf, g.ymin);
  put_f64(buf, g.ymax);
  put_u64(buf, 0);  // reserved
  for (double v : values) put_f64(buf, v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_sgw1: cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write_sgw1: write failed for " + path.string());
}

FieldDump read_sgw1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_sgw1: cannot open " + path.string());
  unsigned char header[64];
  in.read(reinterpret_cast<char*>(header), 64);
  if (!in) throw IoError("read_sgw1: short header in " + path.string());
  if (std::memcmp(header, "SGW1", 4) != 0)
    throw IoError("read_sgw1: bad magic in " + path.string());
  if (get_u32(header + 4) != 1)
    throw IoError("read_sgw1: unsupported version in " + path.string());

  FieldDump d;
  const std::uint64_t nx = get_u64(header + 8);
  const std::uint64_t ny = get_u64(header + 16);
  if (nx < 2 || ny < 2 || nx * ny > (1ull << 32))
    throw IoError("read_sgw1: implausible dimensions in " + path.string());
  d.grid.nx = static_cast<int>(nx);
  d.grid.ny = static_cast<int>(ny);
  d.grid.xmin = get_f64(header + 24);
  d.grid.xmax = get_f64(header + 32);
  d.grid.ymin = get_f64(header + 40);
  d.grid.ymax = get_f64(header + 48);

  d.values.resize(nx * ny);
  std::vector<unsigned char> raw(8 * d.values.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("read_sgw1: truncated payload in " + path.string());
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = get_f64(raw.data() + 8 * i);
  return d;
}

}  // namespace softguide
