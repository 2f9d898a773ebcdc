#pragma once

#include <stdexcept>
#include <string>

namespace shprobe {

struct ArgumentError : std::invalid_argument {
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

struct ResourceError : std::runtime_error {
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// Frame atoms are collinear (or nearly so); carries the offending Gram
// singular value in A^2.
struct DegenerateFrameError : std::runtime_error {
  double sigma_min;
  explicit DegenerateFrameError(double sigma)
      : std::runtime_error("degenerate body frame: sigma_min(G) = " +
                           std::to_string(sigma) + " A^2"),
        sigma_min(sigma) {}
};

// Anchor atom sits at (or too close to) the centroid.
struct DegenerateAnchorError : std::runtime_error {
  double norm;
  explicit DegenerateAnchorError(double n)
      : std::runtime_error("degenerate anchor: |r_a - centroid| = " +
                           std::to_string(n) + " A"),
        norm(n) {}
};

struct TrainingError : std::runtime_error {
  int epoch;
  double loss;
  TrainingError(int ep, double l, const std::string& what)
      : std::runtime_error(what), epoch(ep), loss(l) {}
};

}  // namespace shprobe
