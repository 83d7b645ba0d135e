#pragma once

#include <cstdint>
#include <filesystem>

#include "melex/cfp.hpp"
#include "melex/neural.hpp"

namespace melex {

/// 1/8-semitone pitch quantizer; class 0 is unvoiced, classes 1..441 span
/// ~4.59 octaves up from f_min.
struct QuantizerConfig {
  double f_min = 73.416;
  int bins_per_semitone = 8;
  int num_pitch_classes = 441;

  int num_classes() const { return num_pitch_classes + 1; }
  int bins_per_octave() const { return bins_per_semitone * 12; }
};

/// 0 for unvoiced, else round(bins_per_octave * log2(f / f_min)) + 1 clamped
/// to the voiced class range.
int hz_to_label(double f, const QuantizerConfig& q = {});
double label_to_hz(int label, const QuantizerConfig& q = {});

/// Two conv + three dense layers over a 25x25 patch; the two-logit head is
/// read as P(vocal) through a softmax.
class PatchCnn {
 public:
  explicit PatchCnn(std::uint64_t seed = 0);

  double predict_probability(const Tensor& input) const;  // [1,25,25]
  double predict_probability(const Patch& patch) const;
  bool is_vocal(const Patch& patch) const {
    return predict_probability(patch) > decision_threshold;
  }

  Network& network() { return net_; }
  const Network& network() const { return net_; }

  void save(const std::filesystem::path& path) const;
  static PatchCnn load(const std::filesystem::path& path);

  static Tensor patch_to_tensor(const Patch& patch);

  double decision_threshold = 0.5;
  static constexpr const char* kKind = "patch_cnn";

 private:
  Network net_;
};

/// Frame classifier over 31 consecutive spectrogram frames -> 442 logits
/// (class 0 unvoiced, 1..441 the 1/8-semitone grid). Stands in for the
/// reference recurrent architecture with the same input/output contract.
class FrameClassifier {
 public:
  static constexpr std::size_t kContextFrames = 31;
  static constexpr std::size_t kNumClasses = 442;
  static constexpr const char* kKind = "frame_classifier";

  explicit FrameClassifier(std::size_t spectrum_bins = 513, std::uint64_t seed = 0,
                           std::size_t conv_channels = 4, std::size_t hidden = 128);

  /// window must be [1, 31, spectrum_bins].
  Tensor predict_logits(const Tensor& window) const;

  std::size_t spectrum_bins() const { return spectrum_bins_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }

  void save(const std::filesystem::path& path) const;
  static FrameClassifier load(const std::filesystem::path& path);

 private:
  std::size_t spectrum_bins_;
  std::size_t conv_channels_;
  std::size_t hidden_;
  Network net_;
};

/// 31-frame slice centered on `frame`; clip edges replicate the first/last frame.
Tensor spectrogram_window(const TimeFrequencyMap& spec, std::size_t frame);
std::vector<Tensor> spectrogram_windows(const TimeFrequencyMap& spec);

/// Full patch-CNN pipeline: CFP -> per-frame peak patch -> classify;
/// voiced frames report the patch center frequency.
PitchContour extract_melody_patchcnn(const AudioClip& clip, const PatchCnn& model,
                                     const StftConfig& stft_cfg, const CfpConfig& cfp_cfg);

/// Frame-classifier pipeline: log spectrogram -> 31-frame windows -> argmax
/// label -> Hz.
PitchContour extract_melody_frame_classifier(const AudioClip& clip, const FrameClassifier& model,
                                             const StftConfig& stft_cfg,
                                             const QuantizerConfig& quantizer);

}  // namespace melex
