#pragma once

#include "kinetrack/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kinetrack {

enum class MotionKind { Linear, Sinusoidal, Circular, Turn, CrossingPair };

std::string to_string(MotionKind k);
MotionKind motion_kind_from_string(const std::string& s);

/// A group of objects sharing one motion kind. Distances are normalized
/// image units, times are frames. For CrossingPair, `count` is the number of
/// pairs.
struct ObjectGroup {
  MotionKind kind = MotionKind::Linear;
  int count = 1;
  double speed = 0.004;        // path speed per frame (width units)
  double amplitude = 0.04;     // sinusoid amplitude / circle radius
  double period = 40.0;        // sinusoid period in frames
  double turn_angle = 1.2;     // radians, Turn only
  double height_min = 0.06;    // box height range (height units)
  double height_max = 0.10;
};

struct SceneSpec {
  std::string name = "synth";
  int width = 1920;
  int height = 1080;
  double fps = 25.0;
  int frames = 200;
  double noise_std = 0.0;   // detection noise, relative to box size
  double drop_rate = 0.0;   // per-detection occlusion drop probability
  std::uint64_t seed = 0;
  std::vector<ObjectGroup> objects;

  /// Throws std::invalid_argument on a malformed spec.
  void validate() const;

  std::string to_json() const;
  static SceneSpec from_json(const std::string& text);
};

struct SynthScene {
  Scene gt;   // noise-free, with identities
  Scene det;  // noisy, dropped, identity-free
};

SynthScene synth_scene(const SceneSpec& spec);

/// Frame (1-based) at which a crossing pair meets; exposed so callers can
/// check the construction. Depends only on spec.frames and the pair's draw.
struct CrossingInfo {
  int frame = 0;
  int first_id = 0;
  int second_id = 0;
};
std::vector<CrossingInfo> crossing_frames(const SceneSpec& spec);

}  // namespace kinetrack
