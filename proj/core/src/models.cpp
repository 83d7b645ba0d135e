#include "melex/models.hpp"

#include <algorithm>
#include <cmath>

#include "melex/errors.hpp"

namespace melex {

namespace {

AudioClip match_rate(const AudioClip& clip, const StftConfig& cfg) {
  if (clip.sample_rate == cfg.sample_rate) return clip;
  if (cfg.sample_rate == 8000) return resample_to_8k(clip);
  throw std::invalid_argument("clip sample rate does not match the analysis config");
}

void load_network_weights(Network& net, const Checkpoint& ckpt, const char* expected_kind) {
  if (ckpt.kind != expected_kind) {
    throw ModelError("checkpoint kind '" + ckpt.kind + "' where '" + expected_kind +
                     "' was expected");
  }
  for (Parameter* p : net.parameters()) {
    const Tensor& t = ckpt.tensor(p->name);
    if (t.shape != p->value.shape) {
      throw ModelError("checkpoint tensor shape mismatch for " + p->name);
    }
    p->value = t;
  }
}

std::vector<std::pair<std::string, Tensor>> snapshot_weights(const Network& net) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const Parameter* p : const_cast<Network&>(net).parameters()) {
    out.emplace_back(p->name, p->value);
  }
  return out;
}

}  // namespace

int hz_to_label(double f, const QuantizerConfig& q) {
  if (!std::isfinite(f) || f < 0.0) {
    throw std::invalid_argument("hz_to_label: frequency must be finite and >= 0");
  }
  if (f == 0.0) return 0;
  const auto raw = static_cast<long>(
      std::lround(q.bins_per_octave() * std::log2(f / q.f_min)));
  return static_cast<int>(std::clamp<long>(raw + 1, 1, q.num_pitch_classes));
}

double label_to_hz(int label, const QuantizerConfig& q) {
  if (label < 0 || label > q.num_pitch_classes) {
    throw std::invalid_argument("label_to_hz: label out of [0, " +
                                std::to_string(q.num_pitch_classes) + "]");
  }
  if (label == 0) return 0.0;
  return q.f_min * std::pow(2.0, static_cast<double>(label - 1) / q.bins_per_octave());
}

PatchCnn::PatchCnn(std::uint64_t seed) {
  // 25x25 -> conv 8@5x5 -> 21x21 -> conv 16@3x3 -> 19x19 -> 5776 -> 128 -> 64 -> 2
  net_.add(std::make_unique<Conv2d>(8, 1, 5, 5, "conv1"));
  net_.add(std::make_unique<Relu>());
  net_.add(std::make_unique<Conv2d>(16, 8, 3, 3, "conv2"));
  net_.add(std::make_unique<Relu>());
  net_.add(std::make_unique<Flatten>());
  net_.add(std::make_unique<Dense>(128, 16 * 19 * 19, "fc1"));
  net_.add(std::make_unique<Relu>());
  net_.add(std::make_unique<Dense>(64, 128, "fc2"));
  net_.add(std::make_unique<Relu>());
  net_.add(std::make_unique<Dense>(2, 64, "fc3"));
  net_.init(seed);
}

Tensor PatchCnn::patch_to_tensor(const Patch& patch) {
  Tensor t = Tensor::zeros({1, kPatchSize, kPatchSize});
  std::copy(patch.values.begin(), patch.values.end(), t.data.begin());
  return t;
}

double PatchCnn::predict_probability(const Tensor& input) const {
  if (input.shape != std::vector<std::size_t>{1, kPatchSize, kPatchSize}) {
    throw ShapeError("patch cnn: input must be [1,25,25]");
  }
  const Tensor probs = softmax(net_.forward(input));
  return probs[1];
}

double PatchCnn::predict_probability(const Patch& patch) const {
  return predict_probability(patch_to_tensor(patch));
}

void PatchCnn::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = kKind;
  ckpt.meta = {{"decision_threshold", decision_threshold}};
  ckpt.tensors = snapshot_weights(net_);
  write_checkpoint(ckpt, path);
}

PatchCnn PatchCnn::load(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  PatchCnn model(0);
  load_network_weights(model.net_, ckpt, kKind);
  model.decision_threshold = ckpt.meta_value("decision_threshold");
  return model;
}

FrameClassifier::FrameClassifier(std::size_t spectrum_bins, std::uint64_t seed,
                                 std::size_t conv_channels, std::size_t hidden)
    : spectrum_bins_(spectrum_bins), conv_channels_(conv_channels), hidden_(hidden) {
  if (spectrum_bins < 9) throw std::invalid_argument("frame classifier: need >= 9 bins");
  // [1,31,bins] -> conv C@31x9 -> [C,1,bins-8] -> hidden -> 442
  net_.add(std::make_unique<Conv2d>(conv_channels, 1, kContextFrames, 9, "conv"));
  net_.add(std::make_unique<Relu>());
  net_.add(std::make_unique<Flatten>());
  net_.add(std::make_unique<Dense>(hidden, conv_channels * (spectrum_bins - 8), "fc1"));
  net_.add(std::make_unique<Relu>());
  net_.add(std::make_unique<Dense>(kNumClasses, hidden, "fc2"));
  net_.init(seed);
}

Tensor FrameClassifier::predict_logits(const Tensor& window) const {
  if (window.shape != std::vector<std::size_t>{1, kContextFrames, spectrum_bins_}) {
    throw ShapeError("frame classifier: input must be [1,31,bins]");
  }
  return net_.forward(window);
}

void FrameClassifier::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = kKind;
  ckpt.meta = {{"spectrum_bins", static_cast<double>(spectrum_bins_)},
               {"conv_channels", static_cast<double>(conv_channels_)},
               {"hidden", static_cast<double>(hidden_)}};
  ckpt.tensors = snapshot_weights(net_);
  write_checkpoint(ckpt, path);
}

FrameClassifier FrameClassifier::load(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  FrameClassifier model(static_cast<std::size_t>(ckpt.meta_value("spectrum_bins")), 0,
                        static_cast<std::size_t>(ckpt.meta_value("conv_channels")),
                        static_cast<std::size_t>(ckpt.meta_value("hidden")));
  load_network_weights(model.net_, ckpt, kKind);
  return model;
}

Tensor spectrogram_window(const TimeFrequencyMap& spec, std::size_t frame) {
  if (spec.frames == 0) throw ShapeError("spectrogram_window: empty map");
  if (frame >= spec.frames) throw std::invalid_argument("spectrogram_window: frame out of range");
  constexpr auto ctx = static_cast<std::int64_t>(FrameClassifier::kContextFrames);
  const auto half = ctx / 2;
  Tensor out = Tensor::zeros({1, FrameClassifier::kContextFrames, spec.bins});
  for (std::int64_t r = 0; r < ctx; ++r) {
    auto src = static_cast<std::int64_t>(frame) + r - half;
    src = std::clamp<std::int64_t>(src, 0, static_cast<std::int64_t>(spec.frames) - 1);
    for (std::size_t b = 0; b < spec.bins; ++b) {
      out.at3(0, static_cast<std::size_t>(r), b) = spec.at(b, static_cast<std::size_t>(src));
    }
  }
  return out;
}

std::vector<Tensor> spectrogram_windows(const TimeFrequencyMap& spec) {
  std::vector<Tensor> out;
  out.reserve(spec.frames);
  for (std::size_t t = 0; t < spec.frames; ++t) out.push_back(spectrogram_window(spec, t));
  return out;
}

PitchContour extract_melody_patchcnn(const AudioClip& clip, const PatchCnn& model,
                                     const StftConfig& stft_cfg, const CfpConfig& cfp_cfg) {
  const AudioClip prepared = match_rate(clip, stft_cfg);
  const TimeFrequencyMap y = compute_cfp_map(prepared, stft_cfg, cfp_cfg);
  const std::vector<Patch> patches = select_patches(y, nullptr, 0.0);

  PitchContour contour;
  contour.hop_seconds = y.hop_seconds;
  contour.start_seconds = y.start_seconds;
  contour.f0.assign(y.frames, 0.0);
  for (const Patch& patch : patches) {
    // A zero peak means the frame has no salience at all; nothing to classify.
    if (y.at(patch.center_bin, patch.center_frame) <= 0.0) continue;
    if (model.is_vocal(patch)) contour.f0[patch.center_frame] = patch.center_hz;
  }
  return contour;
}

PitchContour extract_melody_frame_classifier(const AudioClip& clip, const FrameClassifier& model,
                                             const StftConfig& stft_cfg,
                                             const QuantizerConfig& quantizer) {
  const AudioClip prepared = match_rate(clip, stft_cfg);
  const TimeFrequencyMap spec =
      stft_magnitude(prepared, stft_cfg, SpectrogramScale::log_magnitude);
  if (spec.bins != model.spectrum_bins()) {
    throw ModelError("frame classifier expects " + std::to_string(model.spectrum_bins()) +
                     " spectrum bins, spectrogram has " + std::to_string(spec.bins));
  }

  PitchContour contour;
  contour.hop_seconds = spec.hop_seconds;
  contour.start_seconds = spec.start_seconds;
  contour.f0.assign(spec.frames, 0.0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const Tensor logits = model.predict_logits(spectrogram_window(spec, t));
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k) {
      if (logits[k] > logits[best]) best = k;
    }
    contour.f0[t] = label_to_hz(static_cast<int>(best), quantizer);
  }
  return contour;
}

}  // namespace melex
