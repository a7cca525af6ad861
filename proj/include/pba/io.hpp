#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/pipeline.hpp"
#include "pba/stereo.hpp"

namespace pba::io {

namespace fs = std::filesystem;

/// Malformed or inconsistent input data.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// PGM (binary P5, 8 or 16 bit)
// ---------------------------------------------------------------------------

struct PgmData {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

namespace detail {

inline std::string read_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

inline int parse_header_int(const std::string& tok, const fs::path& path, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw DatasetError(path.string() + ": invalid PGM " + what + " '" + tok + "'");
  }
}

}  // namespace detail

inline PgmData read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open image " + path.string());
  if (detail::read_token(in) != "P5") throw DatasetError(path.string() + ": not a binary PGM (P5)");
  PgmData d;
  d.width = detail::parse_header_int(detail::read_token(in), path, "width");
  d.height = detail::parse_header_int(detail::read_token(in), path, "height");
  d.maxval = detail::parse_header_int(detail::read_token(in), path, "maxval");
  if (d.maxval > 65535) throw DatasetError(path.string() + ": PGM maxval out of range");
  const std::size_t n = static_cast<std::size_t>(d.width) * static_cast<std::size_t>(d.height);
  const int bytes = d.maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw DatasetError(path.string() + ": truncated PGM data");
  }
  d.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.samples[i] = bytes == 1 ? raw[i]
                              : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return d;
}

inline void write_pgm(const fs::path& path, int width, int height, int maxval,
                      const std::vector<std::uint16_t>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
  for (std::uint16_t v : samples) {
    if (maxval < 256) {
      out.put(static_cast<char>(v & 0xff));
    } else {
      out.put(static_cast<char>(v >> 8));
      out.put(static_cast<char>(v & 0xff));
    }
  }
}

/// Loads a grayscale PGM with intensities scaled to [0, 1] by maxval.
inline GrayImage load_image(const fs::path& path) {
  const PgmData d = read_pgm(path);
  GrayImage img(d.width, d.height);
  auto px = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(d.samples[i]) / d.maxval;
  return img;
}

/// Writes an 8-bit PGM, rounding intensities in [0, 1] to 0..255.
inline void save_image(const fs::path& path, const GrayImage& img) {
  std::vector<std::uint16_t> s(img.size());
  auto px = img.data();
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<std::uint16_t>(std::lround(std::clamp(px[i], 0.0, 1.0) * 255.0));
  }
  write_pgm(path, img.width(), img.height(), 255, s);
}

inline DisparityMap load_disparity(const fs::path& path) {
  const PgmData d = read_pgm(path);
  if (d.maxval < 256) throw DatasetError(path.string() + ": disparity raster must be 16-bit");
  return DisparityMap::from_u16(Raster<std::uint16_t>(d.width, d.height, d.samples));
}

inline void save_disparity(const fs::path& path, const DisparityMap& dm) {
  const auto raw = dm.to_u16();
  write_pgm(path, raw.width(), raw.height(), 65535,
            std::vector<std::uint16_t>(raw.data().begin(), raw.data().end()));
}

// ---------------------------------------------------------------------------
// Trajectories: one camera-to-world [R|t] per line, 12 floats row-major
// ---------------------------------------------------------------------------

inline std::vector<Pose> parse_trajectory(std::istream& in, const std::string& name) {
  std::vector<Pose> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    std::istringstream ls(line);
    double v[12];
    int n = 0;
    std::string tok;
    while (ls >> tok) {
      if (n == 12) {
        n = 13;
        break;
      }
      try {
        std::size_t used = 0;
        v[n] = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v[n])) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DatasetError(name + ":" + std::to_string(lineno) + ": invalid number '" + tok + "'");
      }
      ++n;
    }
    if (n != 12) {
      throw DatasetError(name + ":" + std::to_string(lineno) + ": expected 12 values");
    }
    Pose p;
    p.R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    p.t << v[3], v[7], v[11];
    if (!p.isValid(1e-6)) {
      throw DatasetError(name + ":" + std::to_string(lineno) + ": rotation is not orthonormal");
    }
    poses.push_back(p);
  }
  return poses;
}

inline std::vector<Pose> load_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open trajectory " + path.string());
  return parse_trajectory(in, path.string());
}

inline void write_trajectory(std::ostream& out, const std::vector<Pose>& poses) {
  out << std::setprecision(17);
  for (const Pose& p : poses) {
    for (int r = 0; r < 3; ++r) {
      out << p.R(r, 0) << ' ' << p.R(r, 1) << ' ' << p.R(r, 2) << ' ' << p.t(r);
      out << (r == 2 ? '\n' : ' ');
    }
  }
}

inline void save_trajectory(const fs::path& path, const std::vector<Pose>& poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trajectory(out, poses);
}

// ---------------------------------------------------------------------------
// Calibration: "fx= 718.8" style labeled values
// ---------------------------------------------------------------------------

inline Intrinsics parse_calib(std::istream& in, const std::string& name) {
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  std::replace(text.begin(), text.end(), '=', ' ');
  std::replace(text.begin(), text.end(), ':', ' ');
  std::istringstream ts(text);
  std::map<std::string, double> kv;
  std::string key, val;
  while (ts >> key) {
    if (!(ts >> val)) throw DatasetError(name + ": missing value for '" + key + "'");
    try {
      kv[key] = std::stod(val);
    } catch (const std::exception&) {
      throw DatasetError(name + ": invalid value '" + val + "' for '" + key + "'");
    }
  }
  auto need = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw DatasetError(name + ": missing '" + std::string(k) + "'");
    return it->second;
  };
  Intrinsics K;
  K.fx = need("fx");
  K.fy = need("fy");
  K.cx = need("cx");
  K.cy = need("cy");
  K.baseline = kv.count("baseline") ? kv["baseline"] : 0.0;
  if (!(K.fx > 0 && K.fy > 0)) throw DatasetError(name + ": focal lengths must be positive");
  return K;
}

inline Intrinsics load_calib(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open calibration " + path.string());
  return parse_calib(in, path.string());
}

inline void save_calib(const fs::path& path, const Intrinsics& K) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17) << "fx= " << K.fx << "\nfy= " << K.fy << "\ncx= " << K.cx
      << "\ncy= " << K.cy << "\nbaseline= " << K.baseline << '\n';
}

// ---------------------------------------------------------------------------
// Sequence directory
// ---------------------------------------------------------------------------

inline std::string frame_name(std::size_t index) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << ".pgm";
  return os.str();
}

/// Dataset layout: NNNNNN.pgm left images, poses.txt (camera-to-world),
/// calib.txt, and optionally right/NNNNNN.pgm or disparity/NNNNNN.pgm
/// (16-bit, value/256 = disparity). Frames are loaded on demand.
class Sequence {
 public:
  explicit Sequence(const fs::path& dir) : dir_(dir) {
    if (!fs::is_directory(dir)) throw DatasetError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      const auto stem = e.path().stem().string();
      if (e.path().extension() == ".pgm" && !stem.empty() &&
          std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
        images_.push_back(e.path());
      }
    }
    std::sort(images_.begin(), images_.end());
    if (images_.empty()) throw DatasetError(dir.string() + ": no NNNNNN.pgm images found");
    K_ = load_calib(dir / "calib.txt");
    poses_ = load_trajectory(dir / "poses.txt");
    if (poses_.size() != images_.size()) {
      throw DatasetError(dir.string() + ": poses.txt has " + std::to_string(poses_.size()) +
                         " poses but there are " + std::to_string(images_.size()) + " images");
    }
  }

  std::size_t size() const { return images_.size(); }
  const Intrinsics& intrinsics() const { return K_; }
  /// Camera-to-world initializations as stored in poses.txt.
  const std::vector<Pose>& initial_poses() const { return poses_; }
  const fs::path& image_path(std::size_t i) const { return images_.at(i); }

  FrameInput load(std::size_t i) const {
    FrameInput in;
    in.image = load_image(images_.at(i));
    in.pose_init = poses_.at(i).inverse();
    const auto name = images_[i].filename();
    if (const auto r = dir_ / "right" / name; fs::exists(r)) {
      in.right = load_image(r);
    } else if (const auto d = dir_ / "disparity" / name; fs::exists(d)) {
      in.disparity = load_disparity(d);
    }
    return in;
  }

 private:
  fs::path dir_;
  std::vector<fs::path> images_;
  std::vector<Pose> poses_;
  Intrinsics K_;
};

// ---------------------------------------------------------------------------
// Result writers
// ---------------------------------------------------------------------------

inline void write_points_csv(std::ostream& out, const std::vector<RetiredPoint>& points) {
  out << "id,x,y,z,ref_frame,n_visible\n" << std::setprecision(12);
  for (const auto& p : points) {
    out << p.id << ',' << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ','
        << p.ref_frame << ',' << p.n_visible << '\n';
  }
}

inline void write_iterations_csv(std::ostream& out, const std::vector<WindowResult>& windows) {
  out << "window,iteration,cost,damping,step_norm,observations,patch_dim,accepted\n"
      << std::setprecision(12);
  for (const auto& w : windows) {
    for (const auto& r : w.report.log) {
      out << w.index << ',' << r.iteration << ',' << r.cost << ',' << r.damping << ','
          << r.step_norm << ',' << r.observations << ',' << r.patch_dim << ','
          << (r.accepted ? 1 : 0) << '\n';
    }
  }
}

}  // namespace pba::io
