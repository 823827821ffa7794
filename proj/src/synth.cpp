#include "kinetrack/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace kinetrack {

std::string to_string(MotionKind k) {
  switch (k) {
    case MotionKind::Linear: return "linear";
    case MotionKind::Sinusoidal: return "sinusoidal";
    case MotionKind::Circular: return "circular";
    case MotionKind::Turn: return "turn";
    case MotionKind::CrossingPair: return "crossing-pair";
  }
  return "unknown";
}

MotionKind motion_kind_from_string(const std::string& s) {
  if (s == "linear") return MotionKind::Linear;
  if (s == "sinusoidal") return MotionKind::Sinusoidal;
  if (s == "circular") return MotionKind::Circular;
  if (s == "turn") return MotionKind::Turn;
  if (s == "crossing-pair") return MotionKind::CrossingPair;
  throw std::invalid_argument("unknown motion kind '" + s + "'");
}

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("scene spec: image size must be positive");
  if (frames < 2) throw std::invalid_argument("scene spec: frames must be >= 2");
  if (!(fps > 0)) throw std::invalid_argument("scene spec: fps must be positive");
  if (noise_std < 0) throw std::invalid_argument("scene spec: noise_std must be >= 0");
  if (drop_rate < 0 || drop_rate >= 1) throw std::invalid_argument("scene spec: drop_rate must lie in [0, 1)");
  for (const auto& g : objects) {
    if (g.count < 0) throw std::invalid_argument("scene spec: object count must be >= 0");
    if (g.speed < 0) throw std::invalid_argument("scene spec: speed must be >= 0");
    if (!(g.height_min > 0) || g.height_max < g.height_min) {
      throw std::invalid_argument("scene spec: need 0 < height_min <= height_max");
    }
    if (g.kind == MotionKind::Sinusoidal && !(g.period > 0)) {
      throw std::invalid_argument("scene spec: sinusoidal period must be positive");
    }
    if (g.kind == MotionKind::Circular && !(g.amplitude > 0)) {
      throw std::invalid_argument("scene spec: circular radius (amplitude) must be positive");
    }
  }
}

std::string SceneSpec::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["width"] = width;
  j["height"] = height;
  j["fps"] = fps;
  j["frames"] = frames;
  j["noise_std"] = noise_std;
  j["drop_rate"] = drop_rate;
  j["seed"] = seed;
  auto& objs = j["objects"] = nlohmann::ordered_json::array();
  for (const auto& g : objects) {
    nlohmann::ordered_json o;
    o["kind"] = to_string(g.kind);
    o["count"] = g.count;
    o["speed"] = g.speed;
    o["amplitude"] = g.amplitude;
    o["period"] = g.period;
    o["turn_angle"] = g.turn_angle;
    o["height_min"] = g.height_min;
    o["height_max"] = g.height_max;
    objs.push_back(o);
  }
  return j.dump(2);
}

SceneSpec SceneSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SceneSpec s;
  s.name = j.value("name", s.name);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.fps = j.value("fps", s.fps);
  s.frames = j.value("frames", s.frames);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.drop_rate = j.value("drop_rate", s.drop_rate);
  s.seed = j.value("seed", s.seed);
  if (j.contains("objects")) {
    for (const auto& o : j.at("objects")) {
      ObjectGroup g;
      g.kind = motion_kind_from_string(o.at("kind").get<std::string>());
      g.count = o.value("count", g.count);
      g.speed = o.value("speed", g.speed);
      g.amplitude = o.value("amplitude", g.amplitude);
      g.period = o.value("period", g.period);
      g.turn_angle = o.value("turn_angle", g.turn_angle);
      g.height_min = o.value("height_min", g.height_min);
      g.height_max = o.value("height_max", g.height_max);
      s.objects.push_back(g);
    }
  }
  s.validate();
  return s;
}

namespace {

using Rng = std::mt19937_64;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0, y = 0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Trajectory of one object: center at frame t (1-based) in normalized units,
// where x is in width units and y in height units. Speeds are expressed in
// width units; y components are rescaled so motion is isotropic in pixels.
struct Path {
  MotionKind kind = MotionKind::Linear;
  Vec2 anchor;       // point visited at frame t0
  double t0 = 0;
  Vec2 velocity;     // pixels-isotropic, width units per frame
  Vec2 normal;       // unit normal to velocity
  double amplitude = 0, period = 1, phase = 0;
  double angular = 0;  // circular: rad/frame
  double turn_frame = 0, turn_angle = 0, turn_span = 10;
  int start = 1, end = 1;
  double h = 0.08, w = 0.03;

  Vec2 center(double t, double aspect_fix) const {
    const double dt = t - t0;
    Vec2 p;
    switch (kind) {
      case MotionKind::Linear:
        p = anchor + dt * velocity;
        break;
      case MotionKind::Sinusoidal:
      case MotionKind::CrossingPair:
        p = anchor + dt * velocity + (amplitude * std::sin(kTwoPi * dt / period + phase)) * normal;
        break;
      case MotionKind::Circular: {
        const double a = phase + angular * dt;
        p = anchor + Vec2{amplitude * std::cos(a), amplitude * std::sin(a)};
        break;
      }
      case MotionKind::Turn: {
        // heading rotates linearly over turn_span frames starting at turn_frame;
        // position is the integral of velocity along that heading profile.
        const double speed = std::hypot(velocity.x, velocity.y);
        const double heading = std::atan2(velocity.y, velocity.x);
        const double rate = turn_angle / turn_span;
        auto pos_at = [&](double s) -> Vec2 {
          // s measured from t0 == start of trajectory
          if (s <= turn_frame) return s * velocity;
          const Vec2 before = turn_frame * velocity;
          const double u = std::min(s - turn_frame, turn_span);
          Vec2 arc;
          if (std::abs(rate) < 1e-12) {
            arc = u * velocity;
          } else {
            arc = {speed / rate * (std::sin(heading + rate * u) - std::sin(heading)),
                   -speed / rate * (std::cos(heading + rate * u) - std::cos(heading))};
          }
          Vec2 after;
          if (s > turn_frame + turn_span) {
            const double h2 = heading + turn_angle;
            after = (s - turn_frame - turn_span) * Vec2{speed * std::cos(h2), speed * std::sin(h2)};
          }
          return before + arc + after;
        };
        p = anchor + pos_at(dt);
        break;
      }
    }
    // y was generated in width units; convert to height units.
    p.y = anchor.y + (p.y - anchor.y) * aspect_fix;
    return p;
  }
};

Vec2 random_direction(Rng& rng) {
  const double a = uniform(rng, 0.0, kTwoPi);
  return {std::cos(a), std::sin(a)};
}

void size_object(Path& p, const ObjectGroup& g, const SceneSpec& spec, Rng& rng) {
  p.h = uniform(rng, g.height_min, g.height_max);
  const double pixel_aspect = uniform(rng, 0.4, 0.6);
  p.w = p.h * spec.height * pixel_aspect / spec.width;
}

struct Plan {
  std::vector<Path> paths;
  std::vector<CrossingInfo> crossings;
};

Plan plan_paths(const SceneSpec& spec, Rng& rng) {
  Plan plan;
  const double T = spec.frames;
  for (const auto& g : spec.objects) {
    for (int k = 0; k < g.count; ++k) {
      if (g.kind == MotionKind::CrossingPair) {
        const Vec2 meet{uniform(rng, 0.35, 0.65), uniform(rng, 0.35, 0.65)};
        const double tc = std::round(uniform(rng, 0.3 * T, 0.7 * T));
        const Vec2 d0 = random_direction(rng);
        const double rel = uniform(rng, 0.5, 1.2) * (rng() % 2 == 0 ? 1.0 : -1.0);
        const double ang = std::atan2(d0.y, d0.x) + std::numbers::pi / 2 + rel;
        const Vec2 d1{std::cos(ang), std::sin(ang)};
        const double phase = 0.0;  // wiggle vanishes at the meeting frame
        const double h = uniform(rng, g.height_min, g.height_max);
        for (const Vec2& dir : {d0, d1}) {
          Path p;
          p.kind = MotionKind::CrossingPair;
          p.anchor = meet;
          p.t0 = tc;
          p.velocity = g.speed * dir;
          p.normal = {-dir.y, dir.x};
          p.amplitude = g.amplitude;
          p.period = g.period;
          p.phase = phase;
          p.start = 1;
          p.end = spec.frames;
          p.h = h * uniform(rng, 0.95, 1.05);
          p.w = p.h * spec.height * uniform(rng, 0.45, 0.55) / spec.width;
          plan.paths.push_back(p);
        }
        plan.crossings.push_back(CrossingInfo{static_cast<int>(tc), static_cast<int>(plan.paths.size()) - 1,
                                              static_cast<int>(plan.paths.size())});
        continue;
      }
      Path p;
      p.kind = g.kind;
      size_object(p, g, spec, rng);
      const Vec2 dir = random_direction(rng);
      p.velocity = g.speed * dir;
      p.normal = {-dir.y, dir.x};
      p.amplitude = g.amplitude;
      p.period = g.period;
      p.phase = uniform(rng, 0.0, kTwoPi);
      p.start = 1 + static_cast<int>(uniform(rng, 0.0, 0.2 * T));
      p.end = spec.frames;
      switch (g.kind) {
        case MotionKind::Linear:
        case MotionKind::Sinusoidal:
          p.anchor = {uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7)};
          p.t0 = 0.5 * (p.start + p.end);
          break;
        case MotionKind::Circular:
          p.anchor = {uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7)};
          p.angular = (rng() % 2 == 0 ? 1.0 : -1.0) * g.speed / g.amplitude;
          p.t0 = p.start;
          break;
        case MotionKind::Turn:
          p.anchor = {0.5 - 0.25 * g.speed / 0.004 * dir.x, 0.5 - 0.25 * g.speed / 0.004 * dir.y};
          p.anchor = {std::clamp(p.anchor.x, 0.15, 0.85), std::clamp(p.anchor.y, 0.15, 0.85)};
          p.t0 = p.start;
          p.turn_frame = uniform(rng, 0.3, 0.6) * (p.end - p.start);
          p.turn_angle = g.turn_angle * (rng() % 2 == 0 ? 1.0 : -1.0);
          p.turn_span = 10;
          break;
        case MotionKind::CrossingPair:
          break;
      }
      plan.paths.push_back(p);
    }
  }
  return plan;
}

}  // namespace

std::vector<CrossingInfo> crossing_frames(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  return plan_paths(spec, rng).crossings;
}

SynthScene synth_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Plan plan = plan_paths(spec, rng);
  SynthScene out;
  SequenceInfo info{spec.name, spec.width, spec.height, spec.fps, spec.frames};
  out.gt.info = info;
  out.det.info = info;
  const double aspect_fix = static_cast<double>(spec.width) / spec.height;

  for (std::size_t k = 0; k < plan.paths.size(); ++k) {
    const Path& p = plan.paths[k];
    const int id = static_cast<int>(k) + 1;
    // An object is visible over one contiguous run of in-image frames: the
    // first run, or for crossing pairs the run that contains the meeting.
    auto inside = [&](int t) {
      const Vec2 c = p.center(t, aspect_fix);
      return c.x > 0.02 && c.x < 0.98 && c.y > 0.02 && c.y < 0.98;
    };
    int first = p.start;
    if (p.kind == MotionKind::CrossingPair) {
      first = static_cast<int>(p.t0);
      while (first > p.start && inside(first - 1)) --first;
    } else {
      while (first <= p.end && !inside(first)) ++first;
    }
    for (int t = first; t <= p.end && inside(t); ++t) {
      const Vec2 c = p.center(t, aspect_fix);
      out.gt.frames[t].push_back(Detection{BBox{c.x, c.y, p.w, p.h}, 1.0, id});
    }
  }

  // Detection view: draw per gt box in (frame, id) order for reproducibility.
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution drop(spec.drop_rate);
  for (const auto& [frame, boxes] : out.gt.frames) {
    for (const auto& g : boxes) {
      const bool dropped = drop(rng);
      const double nx = gauss(rng), ny = gauss(rng), nw = gauss(rng), nh = gauss(rng);
      const double conf = uniform(rng, 0.7, 1.0);
      if (dropped) continue;
      BBox b = g.box;
      b.cx += spec.noise_std * b.w * nx;
      b.cy += spec.noise_std * b.h * ny;
      b.w *= std::exp(spec.noise_std * nw);
      b.h *= std::exp(spec.noise_std * nh);
      out.det.frames[frame].push_back(Detection{b, conf, -1});
    }
  }
  // Keep empty frames represented so the tracker steps through them.
  for (int t = 1; t <= spec.frames; ++t) {
    out.gt.frames[t];
    out.det.frames[t];
  }
  return out;
}

}  // namespace kinetrack
