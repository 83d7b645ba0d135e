#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace melex {

/// Mono audio in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Per-frame fundamental frequency; 0 means unvoiced.
struct PitchContour {
  std::vector<double> f0;
  double hop_seconds = 0.0;
  double start_seconds = 0.0;

  std::size_t frames() const { return f0.size(); }
  double frame_time(std::size_t i) const {
    return start_seconds + static_cast<double>(i) * hop_seconds;
  }
};

/// f0 at the frame whose center time is nearest to `time_sec`; 0 outside the contour.
double contour_value_at(const PitchContour& contour, double time_sec);

enum class WavEncoding { pcm16, float32 };

AudioClip load_wav(const std::filesystem::path& path);
void write_wav(const AudioClip& clip, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::pcm16);

/// Anti-aliased downsample to 8 kHz. Identity at 8 kHz; refuses rates below it.
AudioClip resample_to_8k(const AudioClip& clip);

enum class LabelFormat { hz, midi_semitone };

PitchContour load_pitch_labels(const std::filesystem::path& path, LabelFormat format,
                               double hop_seconds, double start_seconds = 0.0);

void write_contour_csv(const PitchContour& contour, const std::filesystem::path& path);
PitchContour read_contour_csv(const std::filesystem::path& path);

enum class SplitTag { labeled, unlabeled, eval };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

struct ManifestEntry {
  std::string audio_path;
  std::string label_path;  // empty or "-" for unlabeled entries
  SplitTag split = SplitTag::labeled;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<ManifestEntry> split(SplitTag tag) const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace melex
