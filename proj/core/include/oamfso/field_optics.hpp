#pragma once

#include <vector>

#include "oamfso/raster.hpp"

namespace oamfso::optics {

/// Transmitter power used throughout: the summed intensity at the SLM plane.
inline constexpr double kTransmitPower = 226955.0;

/// Gaussian amplitude exp(-r^2 / w0^2) centred on the grid.
/// Throws Errc::beam_too_large unless 2*w0 < n*pitch.
ComplexField gaussian_beam(const GridSpec& grid, double w0);

/// SLM phase for the superposition of OAM orders l1 and l2:
///   angle[exp(-i l1 phi) + gamma(r) exp(-i l2 phi)],
///   gamma(r) = sqrt(|l1|! / |l2|!) * (r sqrt(2) / w0)^(|l2| - |l1|).
/// The origin pixel uses phi = 0 and r = 0. Values lie in (-pi, pi].
PhaseScreen superposition_phase_mask(const GridSpec& grid, int l1, int l2, double w0);

/// Superposition weight gamma(r, l1, l2) from the mask above.
double superposition_weight(double r, int l1, int l2, double w0);

/// |l|! in double precision (exact up to 20).
double factorial(int value);

ComplexField apply_phase(const ComplexField& field, const PhaseScreen& mask);

/// Paraxial transfer function exp(-i (kx^2 + ky^2) z / (2k)) on the FFT lattice,
/// with the piston exp(ikz) dropped. Throws Errc::sampling_violation when
/// pitch < lambda z / (n pitch).
std::vector<Complex> fresnel_transfer(const GridSpec& grid, double z);

/// True when the transfer-function sampling criterion holds for distance z.
bool sampling_ok(const GridSpec& grid, double z) noexcept;

/// Multiplies the spectrum of `field` by `transfer` in place.
void apply_transfer(ComplexField& field, const std::vector<Complex>& transfer);

ComplexField propagate(const ComplexField& field, double z);

IntensityImage intensity(const ComplexField& field);

double total_power(const ComplexField& field) noexcept;

ComplexField normalize_power(const ComplexField& field, double target);

/// 1/e^2 intensity radius from the second moment about the centroid:
/// w = sqrt(2 <r^2>), exact for a Gaussian profile.
double second_moment_radius(const IntensityImage& image);

/// Connected regions (4-neighbour) whose intensity exceeds
/// `fraction` * max. A superposition of +l and -l shows 2l such lobes.
int count_lobes(const IntensityImage& image, double fraction = 0.5);

}  // namespace oamfso::optics
