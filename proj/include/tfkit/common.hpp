#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <stdexcept>
#include <string>

namespace tfkit {

using vec2 = Eigen::Vector2d;
using vec3 = Eigen::Vector3d;
using vec3f = Eigen::Vector3f;
using rgb = Eigen::Vector3d;

// Bad input: unreadable files, invalid meshes, invalid configuration.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thread count used by every OpenMP kernel. 1 runs each kernel serially;
// n <= 0 restores the OpenMP default.
void set_threads(int threads);
int threads();

}  // namespace tfkit
