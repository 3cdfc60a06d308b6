#include "sarl/export.hpp"

#include <cmath>

namespace sarl {

std::vector<std::uint8_t> normalize_to_bytes(const Vector<double>& values) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(values.size()), 0);
  if (values.size() == 0) return out;
  if (!values.allFinite()) throw DimensionError("heatmap: non-finite value");
  const double lo = values.minCoeff(), range = values.maxCoeff() - lo;
  if (!(range > 0)) return out;
  for (Index i = 0; i < values.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - lo) / range));
  }
  return out;
}

std::vector<std::uint8_t> pgm_bytes(Index width, Index height, const std::vector<std::uint8_t>& pixels) {
  if (width < 1 || height < 1) throw DimensionError("pgm: width and height must be >= 1");
  if (static_cast<Index>(pixels.size()) != width * height) throw DimensionError("pgm: pixel count differs from width * height");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> heatmap_pgm(const Vector<double>& values, Index height, Index width) {
  if (values.size() != height * width) throw DimensionError("heatmap: value count differs from H * W");
  return pgm_bytes(width, height, normalize_to_bytes(values));
}

}  // namespace sarl
