#ifndef SARL_EXPORT_HPP_
#define SARL_EXPORT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sarl/tensor.hpp"

namespace sarl {

/// Min-max scales to 0..255 (rounded). A constant input maps to all zeros.
std::vector<std::uint8_t> normalize_to_bytes(const Vector<double>& values);

/// Binary PGM: "P5\n<width> <height>\n255\n" then height*width row-major bytes.
std::vector<std::uint8_t> pgm_bytes(Index width, Index height, const std::vector<std::uint8_t>& pixels);

/// Normalizes an H x W map (row-major values) and encodes it as PGM.
std::vector<std::uint8_t> heatmap_pgm(const Vector<double>& values, Index height, Index width);

}  // namespace sarl

#endif  // SARL_EXPORT_HPP_
