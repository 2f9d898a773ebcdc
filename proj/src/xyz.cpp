#include "shprobe/xyz.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "shprobe/errors.hpp"

namespace shprobe::xyz {

namespace {

double parse_energy(const std::string& comment, std::size_t frame_idx) {
  const std::string key = "energy=";
  const auto pos = comment.find(key);
  if (pos == std::string::npos)
    throw ArgumentError("xyz: frame " + std::to_string(frame_idx) +
                        " comment line has no energy= key");
  std::istringstream in(comment.substr(pos + key.size()));
  double e = 0.0;
  if (!(in >> e))
    throw ArgumentError("xyz: frame " + std::to_string(frame_idx) +
                        " has unparseable energy value");
  return e;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::vector<Frame> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("xyz: cannot open " + path);
  std::vector<Frame> frames;
  std::string line;
  while (std::getline(in, line)) {
    // Skip blank separators between frames.
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    int n_atoms = 0;
    try {
      n_atoms = std::stoi(line);
    } catch (...) {
      throw ArgumentError("xyz: expected atom count, got '" + line + "'");
    }
    if (n_atoms <= 0) throw ArgumentError("xyz: non-positive atom count");
    std::string comment;
    if (!std::getline(in, comment))
      throw ArgumentError("xyz: truncated frame header");
    Frame frame;
    frame.config.energy = parse_energy(comment, frames.size());
    frame.config.positions.resize(n_atoms, 3);
    frame.config.forces.resize(n_atoms, 3);
    frame.symbols.resize(n_atoms);
    for (int i = 0; i < n_atoms; ++i) {
      if (!std::getline(in, line))
        throw ArgumentError("xyz: truncated frame body at frame " +
                            std::to_string(frames.size()));
      std::istringstream ls(line);
      double x, y, z, fx, fy, fz;
      if (!(ls >> frame.symbols[i] >> x >> y >> z >> fx >> fy >> fz))
        throw ArgumentError("xyz: bad atom line '" + line + "'");
      frame.config.positions.row(i) << x, y, z;
      frame.config.forces.row(i) << fx, fy, fz;
    }
    frames.push_back(std::move(frame));
  }
  if (frames.empty()) throw ArgumentError("xyz: no frames in " + path);
  return frames;
}

void write_trajectory(const std::string& path, const std::vector<Frame>& frames) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("xyz: cannot write " + path);
  for (const auto& frame : frames) {
    const auto& cfg = frame.config;
    out << cfg.positions.rows() << "\n";
    out << "energy=" << format_real(cfg.energy) << "\n";
    for (Eigen::Index i = 0; i < cfg.positions.rows(); ++i) {
      out << frame.symbols[static_cast<std::size_t>(i)];
      for (int c = 0; c < 3; ++c) out << ' ' << format_real(cfg.positions(i, c));
      for (int c = 0; c < 3; ++c) out << ' ' << format_real(cfg.forces(i, c));
      out << "\n";
    }
  }
}

std::vector<PointCloud> read_point_clouds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("point cloud: cannot open " + path);
  std::vector<PointCloud> clouds;
  std::vector<std::string> symbols;
  std::vector<std::array<double, 3>> rows;
  auto flush = [&]() {
    if (rows.empty()) return;
    PointCloud pc;
    pc.symbols = symbols;
    pc.positions.resize(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i)
      pc.positions.row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1],
          rows[i][2];
    clouds.push_back(std::move(pc));
    symbols.clear();
    rows.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      flush();
      continue;
    }
    std::istringstream ls(line);
    std::string sym;
    double x, y, z;
    if (!(ls >> sym >> x >> y >> z)) {
      // Tolerate XYZ headers: a bare atom count or a comment line.
      std::istringstream count(line);
      int n = 0;
      if (count >> n && !(count >> sym)) {
        flush();
        std::getline(in, line);  // comment line
        continue;
      }
      throw ArgumentError("point cloud: bad line '" + line + "'");
    }
    symbols.push_back(sym);
    rows.push_back({x, y, z});
  }
  flush();
  if (clouds.empty()) throw ArgumentError("point cloud: no atoms in " + path);
  return clouds;
}

}  // namespace shprobe::xyz
