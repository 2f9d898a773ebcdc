#pragma once

#include <string>
#include <vector>

#include "shprobe/inject.hpp"

namespace shprobe::xyz {

// One extended-XYZ frame: atom count line, comment line carrying an
// `energy=<real>` key, then `symbol x y z fx fy fz` per atom.
struct Frame {
  std::vector<std::string> symbols;
  inject::Configuration config;
};

std::vector<Frame> read_trajectory(const std::string& path);

// Floats are written with 10 significant digits so reruns are byte-identical.
void write_trajectory(const std::string& path, const std::vector<Frame>& frames);

std::string format_real(double v);

// Minimal point-cloud format: one atom per line, `element x y z`; blank lines
// separate molecules.  A plain XYZ/extended-XYZ file is also accepted.
struct PointCloud {
  std::vector<std::string> symbols;
  inject::Positions positions;
};

std::vector<PointCloud> read_point_clouds(const std::string& path);

}  // namespace shprobe::xyz
