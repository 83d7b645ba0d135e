#include "melex/commands.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>

#include "melex/errors.hpp"
#include "melex/eval.hpp"

namespace melex::cli {

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitModel;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitModel;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitModel;
  }
}

bool valid_method(const std::string& m) {
  return m == "sp" || m == "patch_cnn" || m == "frame_classifier";
}

AudioClip load_prepared(const std::string& path, const RunConfig& cfg) {
  AudioClip clip = load_wav(path);
  if (clip.sample_rate != cfg.stft.sample_rate) {
    if (cfg.stft.sample_rate != 8000) {
      throw std::invalid_argument("audio rate " + std::to_string(clip.sample_rate) +
                                  " does not match stft.sample_rate");
    }
    clip = resample_to_8k(clip);
  }
  return clip;
}

PitchContour load_truth(const ManifestEntry& entry, const RunConfig& cfg) {
  return load_pitch_labels(entry.label_path, cfg.labels.format, cfg.labels.hop_seconds,
                           cfg.labels.start_seconds);
}

std::function<PitchContour(const AudioClip&)> make_extractor(const std::string& method,
                                                             const std::string& checkpoint,
                                                             const RunConfig& cfg) {
  if (method == "sp") {
    return [&cfg](const AudioClip& clip) {
      return autocorr_pitch(clip, cfg.stft, cfg.sp.f_min, cfg.sp.f_max,
                            cfg.sp.voicing_threshold);
    };
  }
  if (method == "patch_cnn") {
    auto model = std::make_shared<PatchCnn>(PatchCnn::load(checkpoint));
    return [model, &cfg](const AudioClip& clip) {
      return extract_melody_patchcnn(clip, *model, cfg.stft, cfg.cfp);
    };
  }
  auto model = std::make_shared<FrameClassifier>(FrameClassifier::load(checkpoint));
  return [model, &cfg](const AudioClip& clip) {
    return extract_melody_frame_classifier(clip, *model, cfg.stft, cfg.quantizer);
  };
}

struct PatchData {
  std::vector<Tensor> inputs;
  std::vector<int> labels;  // empty when built without truth
};

PatchData build_patch_data(const std::vector<ManifestEntry>& entries, const RunConfig& cfg,
                           bool with_labels, bool subsample) {
  std::vector<Patch> all;
  for (const auto& entry : entries) {
    const AudioClip clip = load_prepared(entry.audio_path, cfg);
    const TimeFrequencyMap y = compute_cfp_map(clip, cfg.stft, cfg.cfp);
    if (with_labels) {
      const PitchContour truth = load_truth(entry, cfg);
      auto patches = select_patches(y, &truth, cfg.patches.label_tolerance_cents);
      all.insert(all.end(), patches.begin(), patches.end());
    } else {
      auto patches = select_patches(y, nullptr, 0.0);
      all.insert(all.end(), patches.begin(), patches.end());
    }
  }
  if (with_labels && subsample && cfg.patches.nonvocal_keep_rate < 1.0) {
    all = subsample_nonvocal(all, cfg.patches.nonvocal_keep_rate, cfg.train.seed);
  }

  PatchData data;
  data.inputs.reserve(all.size());
  for (const Patch& p : all) {
    data.inputs.push_back(PatchCnn::patch_to_tensor(p));
    if (with_labels) data.labels.push_back(p.label == PatchLabel::positive ? 1 : 0);
  }
  return data;
}

struct FrameData {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
};

FrameData build_frame_data(const std::vector<ManifestEntry>& entries, const RunConfig& cfg,
                           bool with_labels) {
  FrameData data;
  for (const auto& entry : entries) {
    const AudioClip clip = load_prepared(entry.audio_path, cfg);
    const TimeFrequencyMap spec =
        stft_magnitude(clip, cfg.stft, SpectrogramScale::log_magnitude);
    PitchContour truth;
    if (with_labels) truth = load_truth(entry, cfg);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      data.inputs.push_back(spectrogram_window(spec, t));
      if (with_labels) {
        const double hz = contour_value_at(truth, spec.frame_time(t));
        data.labels.push_back(hz_to_label(hz, cfg.quantizer));
      }
    }
  }
  return data;
}

Dataset zip_dataset(std::vector<Tensor> inputs, const std::vector<int>& labels) {
  Dataset data;
  data.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    data.push_back(Example{std::move(inputs[i]), labels[i]});
  }
  return data;
}

bool all_have_labels(const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    if (e.label_path.empty()) return false;
  }
  return !entries.empty();
}

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open report for writing: " + path.string());
  char buf[256];
  double rpa_sum = 0.0, rca_sum = 0.0;
  std::size_t voiced = 0, total = 0;
  for (const auto& [id, m] : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%zu,%zu\n", id.c_str(), m.rpa, m.rca,
                  m.voiced_frames, m.total_frames);
    os << buf;
    rpa_sum += m.rpa;
    rca_sum += m.rca;
    voiced += m.voiced_frames;
    total += m.total_frames;
  }
  const double n = static_cast<double>(rows.size());
  std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%zu,%zu\n", rpa_sum / n, rca_sum / n, voiced,
                total);
  os << buf;
  if (!os) throw IoError("report write failed: " + path.string());
}

}  // namespace

int cmd_extract(const ExtractArgs& args, const RunConfig& cfg) {
  if (!valid_method(args.method)) {
    std::cerr << "usage: extract --method sp|patch_cnn|frame_classifier\n";
    return kExitUsage;
  }
  if (args.method != "sp" && args.checkpoint.empty()) {
    std::cerr << "usage: extract --method " << args.method << " requires --checkpoint PATH\n";
    return kExitUsage;
  }
  return guarded([&] {
    const auto extractor = make_extractor(args.method, args.checkpoint, cfg);
    const AudioClip clip = load_prepared(args.audio_path, cfg);
    write_contour_csv(extractor(clip), args.out_csv);
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args, const RunConfig& cfg) {
  if (args.model != "patch_cnn" && args.model != "frame_classifier") {
    std::cerr << "usage: train --model patch_cnn|frame_classifier\n";
    return kExitUsage;
  }
  if (args.mode != "teacher" && args.mode != "student") {
    std::cerr << "usage: train --mode teacher|student\n";
    return kExitUsage;
  }
  if (args.mode == "student" && args.teacher_checkpoint.empty()) {
    std::cerr << "usage: train --mode student requires --teacher PATH\n";
    return kExitUsage;
  }
  return guarded([&] {
    const DatasetManifest manifest = load_manifest(args.manifest_path);
    const std::size_t spectrum_bins = cfg.stft.window_size / 2 + 1;
    LossReport report;

    if (args.mode == "teacher") {
      const auto entries = manifest.split(SplitTag::labeled);
      if (entries.empty()) {
        throw std::invalid_argument("manifest has no 'labeled' entries for teacher training");
      }
      if (args.model == "patch_cnn") {
        PatchData data = build_patch_data(entries, cfg, true, true);
        PatchCnn model(cfg.train.seed);
        report = train_supervised(model.network(),
                                  zip_dataset(std::move(data.inputs), data.labels), cfg.train);
        model.save(args.out_checkpoint);
      } else {
        FrameData data = build_frame_data(entries, cfg, true);
        FrameClassifier model(spectrum_bins, cfg.train.seed);
        report = train_supervised(model.network(),
                                  zip_dataset(std::move(data.inputs), data.labels), cfg.train);
        model.save(args.out_checkpoint);
      }
    } else {
      const auto entries = manifest.split(SplitTag::unlabeled);
      if (entries.empty()) {
        throw std::invalid_argument("manifest has no 'unlabeled' entries for student training");
      }
      const bool have_truth = all_have_labels(entries);
      if (args.model == "patch_cnn") {
        PatchCnn teacher = PatchCnn::load(args.teacher_checkpoint);
        PatchData data = build_patch_data(entries, cfg, have_truth, false);
        PseudoLabelSet pseudo =
            generate_pseudo_labels(teacher.network(), data.inputs, args.teacher_checkpoint);
        PatchCnn student(cfg.train.seed);
        report = train_student(student.network(), data.inputs, pseudo,
                               have_truth ? &data.labels : nullptr, cfg.train);
        student.save(args.out_checkpoint);
      } else {
        FrameClassifier teacher = FrameClassifier::load(args.teacher_checkpoint);
        FrameData data = build_frame_data(entries, cfg, have_truth);
        PseudoLabelSet pseudo =
            generate_pseudo_labels(teacher.network(), data.inputs, args.teacher_checkpoint);
        FrameClassifier student(spectrum_bins, cfg.train.seed);
        report = train_student(student.network(), data.inputs, pseudo,
                               have_truth ? &data.labels : nullptr, cfg.train);
        student.save(args.out_checkpoint);
      }
    }
    write_training_log(report, args.out_checkpoint + ".log");
    return kExitOk;
  });
}

int cmd_evaluate(const EvaluateArgs& args, const RunConfig& cfg) {
  if (!valid_method(args.method)) {
    std::cerr << "usage: evaluate --method sp|patch_cnn|frame_classifier\n";
    return kExitUsage;
  }
  if (args.method != "sp" && args.checkpoint.empty()) {
    std::cerr << "usage: evaluate --method " << args.method << " requires --checkpoint PATH\n";
    return kExitUsage;
  }
  return guarded([&] {
    const DatasetManifest manifest = load_manifest(args.manifest_path);
    const auto entries = manifest.split(SplitTag::eval);
    if (entries.empty()) throw std::invalid_argument("manifest has no 'eval' entries");
    for (const auto& e : entries) {
      if (e.label_path.empty()) {
        throw std::invalid_argument("eval entry without truth labels: " + e.audio_path);
      }
    }

    const auto extractor = make_extractor(args.method, args.checkpoint, cfg);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& entry : entries) {
      const AudioClip clip = load_prepared(entry.audio_path, cfg);
      const PitchContour est = extractor(clip);
      const PitchContour truth = load_truth(entry, cfg);
      rows.emplace_back(std::filesystem::path(entry.audio_path).stem().string(),
                        evaluate(est, truth, cfg.eval.tolerance_cents));
    }
    write_report_csv(args.report_csv, rows);

    double rpa = 0.0, rca = 0.0;
    for (const auto& [_, m] : rows) {
      rpa += m.rpa;
      rca += m.rca;
    }
    rpa /= static_cast<double>(rows.size());
    rca /= static_cast<double>(rows.size());
    char line[64];
    std::snprintf(line, sizeof(line), "RPA/RCA: %.2f/%.2f\n", 100.0 * rpa, 100.0 * rca);
    std::cout << line;
    return kExitOk;
  });
}

int cmd_cfp_dump(const CfpDumpArgs& args, const RunConfig& cfg) {
  return guarded([&] {
    const AudioClip clip = load_prepared(args.audio_path, cfg);
    const TimeFrequencyMap y = compute_cfp_map(clip, cfg.stft, cfg.cfp);

    std::ofstream os(args.out_csv);
    if (!os) throw IoError("cannot open for writing: " + args.out_csv);
    char buf[64];
    for (std::size_t b = 0; b < y.bins; ++b) {
      std::snprintf(buf, sizeof(buf), "%s%.6g", b == 0 ? "" : ",", y.axis_values[b]);
      os << buf;
    }
    os << '\n';
    for (std::size_t t = 0; t < y.frames; ++t) {
      for (std::size_t b = 0; b < y.bins; ++b) {
        std::snprintf(buf, sizeof(buf), "%s%.9g", b == 0 ? "" : ",", y.at(b, t));
        os << buf;
      }
      os << '\n';
    }
    if (!os) throw IoError("write failed: " + args.out_csv);
    return kExitOk;
  });
}

}  // namespace melex::cli
