#include "scov/fft.h"

#include <mutex>

#include <fftw3.h>

namespace scov {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

Eigen::MatrixXcd transform(const Eigen::MatrixXcd& x, int sign) {
  // Column-major (rows, cols) is row-major (cols, rows) for FFTW.
  Eigen::MatrixXcd in = x;
  Eigen::MatrixXcd out(x.rows(), x.cols());
  auto* pin = reinterpret_cast<fftw_complex*>(in.data());
  auto* pout = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(x.cols()), static_cast<int>(x.rows()), pin, pout, sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace

Eigen::MatrixXcd fft2(const Eigen::MatrixXcd& x) { return transform(x, FFTW_FORWARD); }

Eigen::MatrixXcd ifft2(const Eigen::MatrixXcd& x) {
  return transform(x, FFTW_BACKWARD) / static_cast<double>(x.size());
}

}  // namespace scov
