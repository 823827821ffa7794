#pragma once

#include "kinetrack/geometry.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kinetrack {

struct Detection {
  BBox box;
  double confidence = 1.0;
  int id = -1;  // ground-truth or track identity; -1 for raw detections
};

struct SequenceInfo {
  std::string name;
  int width = 1920;
  int height = 1080;
  double fps = 25.0;
  int length = 0;
};

/// Frame-indexed detections with optional identities. Boxes are normalized.
struct Scene {
  SequenceInfo info;
  std::map<int, std::vector<Detection>> frames;

  std::size_t detection_count() const;
  int last_frame() const;
  /// Identity -> (frame, box) observations in frame order. Skips id < 0.
  std::map<int, std::vector<std::pair<int, BBox>>> trajectories() const;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a MOTChallenge seqinfo.ini-style key=value file. imWidth and
/// imHeight are required.
SequenceInfo read_seqinfo(const std::filesystem::path& path);
void write_seqinfo(const std::filesystem::path& path, const SequenceInfo& info);

/// Parses "frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z" rows
/// (trailing columns optional from conf on) and normalizes by the image size.
Scene parse_mot(const std::filesystem::path& path, const SequenceInfo& info);

/// Writes rows ordered by (frame, id), no header.
void write_mot(const Scene& scene, const std::filesystem::path& path);

/// Shortest fixed-point rendering with at most six decimals.
std::string format_number(double v);

struct SequenceData {
  std::filesystem::path dir;
  SequenceInfo info;
  Scene gt;
  Scene det;
  bool has_gt = false;
  bool has_det = false;
};

/// Loads <dir>/seqinfo.ini plus gt/gt.txt and det/det.txt when present.
SequenceData load_sequence(const std::filesystem::path& dir);

/// <root> itself when it holds a seqinfo.ini, otherwise its immediate
/// subdirectories that do, sorted by name.
std::vector<std::filesystem::path> list_sequences(const std::filesystem::path& root);

/// Writes seqinfo.ini, gt/gt.txt and det/det.txt under <root>/<name>.
void write_sequence(const std::filesystem::path& root, const Scene& gt, const Scene& det);

}  // namespace kinetrack
