#pragma once

#include <span>

#include "oamfso/raster.hpp"

namespace oamfso::fft {

// In-place 2-D transforms of an n x n row-major array. The forward transform
// is unnormalised; the inverse carries the 1/n^2 factor, so
// inverse(forward(a)) == a up to rounding.
void forward(std::span<Complex> data, int n);
void inverse(std::span<Complex> data, int n);

}  // namespace oamfso::fft
