#pragma once

#include <Eigen/Core>

namespace scov {

// Unnormalized 2-D DFT of a complex matrix (FFTW). Plan creation is
// serialized internally, so concurrent calls are safe.
Eigen::MatrixXcd fft2(const Eigen::MatrixXcd& x);
// Inverse DFT including the 1/(rows*cols) factor.
Eigen::MatrixXcd ifft2(const Eigen::MatrixXcd& x);

}  // namespace scov
