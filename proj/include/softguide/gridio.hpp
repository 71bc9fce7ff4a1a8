#pragma once

// Field export/import.
//
// CSV: header "x,y,value", one row per node in node order (x fastest),
// numbers with 17 significant digits, LF line endings.
//
// SGW1 binary: a 64-byte header followed by nx*ny little-endian float64
// values in row-major node order (x fastest).  Header layout (offsets in
// bytes): 0 magic "SGW1"; 4 uint32 version = 1; 8 uint64 nx; 16 uint64 ny;
// 24..55 float64 xmin, xmax, ymin, ymax; 56..63 reserved zeros.

#include <filesystem>
#include <span>
#include <vector>

#include "softguide/operator2d.hpp"

namespace softguide {

void write_field_csv(const std::filesystem::path& path, const Grid2D& g,
                     std::span<const double> values);

void write_sgw1(const std::filesystem::path& path, const Grid2D& g,
                std::span<const double> values);

struct FieldDump {
  Grid2D grid;
  std::vector<double> values;
};

FieldDump read_sgw1(const std::filesystem::path& path);

}  // namespace softguide
