#pragma once

#include <complex>
#include <vector>

namespace sflab::spectral {

/// In-place unnormalized forward DFT of an n^dim cube (row-major).
void forward(int dim, int n, std::complex<double>* data);

/// In-place inverse DFT, normalized by n^dim.
void inverse(int dim, int n, std::complex<double>* data);

} // namespace sflab::spectral
