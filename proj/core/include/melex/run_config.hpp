#pragma once

#include <filesystem>
#include <string>

#include "melex/audio_io.hpp"
#include "melex/cfp.hpp"
#include "melex/dsp.hpp"
#include "melex/models.hpp"
#include "melex/training.hpp"

namespace melex {

struct SpBaselineConfig {
  double f_min = 73.416;
  double f_max = 1760.0;
  double voicing_threshold = 0.4;
};

struct PatchDatasetConfig {
  double label_tolerance_cents = 50.0;
  double nonvocal_keep_rate = 0.1;  // fraction of non-vocal peaks kept for training
};

struct EvalSettings {
  double tolerance_cents = 50.0;
};

struct LabelSettings {
  LabelFormat format = LabelFormat::midi_semitone;
  double hop_seconds = 0.02;
  double start_seconds = 0.0;  // center time of the first label frame
};

/// Every module's knobs in one document. Defaults are valid out of the box;
/// a JSON config file overrides defaults and CLI flags override both.
struct RunConfig {
  StftConfig stft;
  CfpConfig cfp;
  QuantizerConfig quantizer;
  TrainConfig train;
  SpBaselineConfig sp;
  PatchDatasetConfig patches;
  EvalSettings eval;
  LabelSettings labels;

  /// Overlay values from a JSON file. Unknown sections or keys are rejected.
  void apply_file(const std::filesystem::path& path);
  void apply_json_text(const std::string& text, const std::string& origin);
};

}  // namespace melex
