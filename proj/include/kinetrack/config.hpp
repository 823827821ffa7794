#pragma once

#include "kinetrack/predictor.hpp"
#include "kinetrack/tracker.hpp"
#include "kinetrack/train.hpp"
#include "kinetrack/windows.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace kinetrack {

enum class MotionChoice { Learned, Kalman, None };

std::string to_string(MotionChoice m);
MotionChoice motion_choice_from_string(const std::string& s);

/// Which boxes training windows are cut from.
enum class TrainSource { GroundTruth, Detections };

std::string to_string(TrainSource s);
TrainSource train_source_from_string(const std::string& s);

/// Everything a subcommand needs besides its input/output directories. Output
/// directories are deliberately not part of it, so a run can be repeated into
/// a fresh directory from the saved file and produce identical files.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  PredictorConfig predictor = PredictorConfig::desk();
  TrackerConfig tracker;
  AugmentPolicy augment;
  TrainConfig train;
  TrainSource train_source = TrainSource::GroundTruth;
  MotionChoice motion = MotionChoice::Learned;

  static RunConfig from_preset(const std::string& name);

  /// Throws PreconditionError / std::invalid_argument on inconsistent values.
  void validate() const;

  std::string to_json() const;
  /// Starts from the preset named in the document (default "desk") and
  /// applies every key present.
  static RunConfig from_json(const std::string& text);
  /// Applies the keys present in `text` on top of `*this`.
  void merge_json(const std::string& text);
};

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes run_config.json into `dir`.
void save_run_config(const RunConfig& cfg, const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kinetrack
