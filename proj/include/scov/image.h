#pragma once

#include <Eigen/Core>

namespace scov {

// Real L x L pixel grid. data(i, j): i is the x index, j the y index; the
// column-major layout puts x fastest, matching the MRC section order.
struct Image {
  Eigen::MatrixXd data;
  double pixel_size = 1.0;  // Angstrom per pixel

  Image() = default;
  Image(int size, double pixel_size_a)
      : data(Eigen::MatrixXd::Zero(size, size)), pixel_size(pixel_size_a) {}

  int size() const { return static_cast<int>(data.rows()); }
  double& operator()(int i, int j) { return data(i, j); }
  double operator()(int i, int j) const { return data(i, j); }
};

}  // namespace scov
