#include "ppwarp/rng.hpp"

#include <cmath>
#include <numbers>

namespace ppw::rng {

double gaussian(std::uint64_t seed, std::uint64_t purpose, std::uint64_t frame,
                std::uint64_t counter) {
  // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
  const double u1 =
      (static_cast<double>(draw(seed, purpose, frame, 2 * counter) >> 11) +
       1.0) *
      0x1.0p-53;
  const double u2 =
      static_cast<double>(draw(seed, purpose, frame, 2 * counter + 1) >> 11) *
      0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ppw::rng
