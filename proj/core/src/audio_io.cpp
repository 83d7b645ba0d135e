#include "melex/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "melex/errors.hpp"

namespace melex {

namespace {

constexpr double kResampleCutoffFraction = 0.45;  // of the target rate
constexpr double kResampleKernelHalfSeconds = 2e-3;
constexpr double kResampleKaiserBeta = 2.5;

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void append_u32le(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_u16le(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

double bessel_i0(double x) {
  // series sum_k ((x^2/4)^k / (k!)^2)
  const double q = x * x / 4.0;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double normalized_sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

double contour_value_at(const PitchContour& contour, double time_sec) {
  if (contour.f0.empty() || contour.hop_seconds <= 0.0) return 0.0;
  const double pos = (time_sec - contour.start_seconds) / contour.hop_seconds;
  const auto idx = static_cast<std::int64_t>(std::llround(pos));
  if (idx < 0 || idx >= static_cast<std::int64_t>(contour.f0.size())) return 0.0;
  return contour.f0[static_cast<std::size_t>(idx)];
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw FormatError("malformed wav header (not RIFF/WAVE): " + path.string());
  }

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t off = 12;
  while (off + 8 <= size) {
    const unsigned char* id = p + off;
    const std::uint32_t chunk_size = read_u32le(p + off + 4);
    const std::size_t body = off + 8;
    if (body + chunk_size > size) throw FormatError("truncated wav chunk: " + path.string());
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("short fmt chunk: " + path.string());
      format_tag = read_u16le(p + body);
      channels = read_u16le(p + body + 2);
      rate = read_u32le(p + body + 4);
      bits = read_u16le(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = p + body;
      data_size = chunk_size;
    }
    off = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) {
    throw FormatError("wav missing fmt/data chunk: " + path.string());
  }
  if (channels != 1 && channels != 2) {
    throw UnsupportedError("unsupported wav channel count " + std::to_string(channels) + ": " +
                           path.string());
  }
  const bool pcm16 = (format_tag == 1 && bits == 16);
  const bool f32 = (format_tag == 3 && bits == 32);
  if (!pcm16 && !f32) {
    throw UnsupportedError("unsupported wav encoding (format " + std::to_string(format_tag) +
                           ", " + std::to_string(bits) + " bit): " + path.string());
  }
  if (rate == 0) throw FormatError("wav sample rate is zero: " + path.string());

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = data_size / frame_bytes;
  if (n_frames == 0) throw FormatError("wav has no samples: " + path.string());

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* sp = data + i * frame_bytes + c * bytes_per_sample;
      double v;
      if (pcm16) {
        const auto raw = static_cast<std::int16_t>(read_u16le(sp));
        v = static_cast<double>(raw) / 32768.0;
      } else {
        std::uint32_t u = read_u32le(sp);
        float f;
        std::memcpy(&f, &u, 4);
        v = std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
      acc += v;
    }
    clip.samples[i] = acc / static_cast<double>(channels);
  }
  for (double v : clip.samples) {
    if (!std::isfinite(v)) throw FormatError("non-finite sample in wav: " + path.string());
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
  const std::size_t n = clip.samples.size();
  const bool pcm = (encoding == WavEncoding::pcm16);
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(n * (pcm ? 2 : 4));

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  append_u32le(out, 36 + data_size);
  out += "WAVEfmt ";
  append_u32le(out, 16);
  append_u16le(out, pcm ? 1 : 3);
  append_u16le(out, 1);  // mono
  append_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
  append_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * bits / 8);
  append_u16le(out, bits / 8);
  append_u16le(out, bits);
  out += "data";
  append_u32le(out, data_size);
  for (double v : clip.samples) {
    const double x = std::clamp(v, -1.0, 1.0);
    if (pcm) {
      append_u16le(out, static_cast<std::uint16_t>(
                            static_cast<std::int16_t>(std::llround(x * 32767.0))));
    } else {
      const float f = static_cast<float>(x);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      append_u32le(out, u);
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

AudioClip resample_to_8k(const AudioClip& clip) {
  constexpr int kTarget = 8000;
  if (clip.sample_rate < kTarget) {
    throw std::invalid_argument("resample_to_8k: upsampling is out of contract (rate " +
                                std::to_string(clip.sample_rate) + ")");
  }
  if (clip.sample_rate == kTarget) return clip;

  const double rin = static_cast<double>(clip.sample_rate);
  const std::size_t n_in = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * kTarget / rin));

  const double half = kResampleKernelHalfSeconds * rin;  // kernel half-width, input samples
  const auto ihalf = static_cast<std::int64_t>(std::ceil(half));
  const double nu = kResampleCutoffFraction * kTarget / rin;  // cycles per input sample
  const double i0_beta = bessel_i0(kResampleKaiserBeta);
  const double step = rin / kTarget;

  AudioClip out;
  out.sample_rate = kTarget;
  out.samples.assign(n_out, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) * step;
    const auto n0 = static_cast<std::int64_t>(std::floor(t)) - ihalf;
    const auto n1 = static_cast<std::int64_t>(std::floor(t)) + ihalf + 1;
    double acc = 0.0;
    for (std::int64_t m = std::max<std::int64_t>(0, n0);
         m <= std::min<std::int64_t>(static_cast<std::int64_t>(n_in) - 1, n1); ++m) {
      const double d = static_cast<double>(m) - t;
      if (std::abs(d) > half) continue;
      const double r = d / half;
      const double w = bessel_i0(kResampleKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      acc += clip.samples[static_cast<std::size_t>(m)] * 2.0 * nu * normalized_sinc(2.0 * nu * d) * w;
    }
    out.samples[j] = acc;
  }
  return out;
}

PitchContour load_pitch_labels(const std::filesystem::path& path, LabelFormat format,
                               double hop_seconds, double start_seconds) {
  if (hop_seconds <= 0.0) throw std::invalid_argument("load_pitch_labels: hop must be > 0");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path.string());

  PitchContour contour;
  contour.hop_seconds = hop_seconds;
  contour.start_seconds = start_seconds;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || trim(end) != "" || !std::isfinite(v)) {
      throw FormatError("non-numeric label at " + path.string() + ":" + std::to_string(line_no));
    }
    double hz;
    if (v == 0.0) {
      hz = 0.0;
    } else if (format == LabelFormat::midi_semitone) {
      if (v < 0.0) {
        throw FormatError("negative semitone at " + path.string() + ":" + std::to_string(line_no));
      }
      hz = 440.0 * std::pow(2.0, (v - 69.0) / 12.0);
    } else {
      hz = v;
    }
    if (hz != 0.0 && (hz < 20.0 || hz > 4000.0)) {
      throw FormatError("f0 out of [20, 4000] Hz at " + path.string() + ":" +
                        std::to_string(line_no));
    }
    contour.f0.push_back(hz);
  }
  if (contour.f0.empty()) throw FormatError("empty label file: " + path.string());
  return contour;
}

void write_contour_csv(const PitchContour& contour, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "time_sec,f0_hz\n";
  char buf[64];
  for (std::size_t i = 0; i < contour.f0.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.3f\n", contour.frame_time(i), contour.f0[i]);
    os << buf;
  }
  if (!os) throw IoError("write failed: " + path.string());
}

PitchContour read_contour_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open contour csv: " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "time_sec,f0_hz") {
    throw FormatError("bad contour csv header: " + path.string());
  }
  std::vector<double> times;
  PitchContour contour;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty()) continue;
    const auto comma = s.find(',');
    if (comma == std::string::npos) {
      throw FormatError("bad contour row at " + path.string() + ":" + std::to_string(line_no));
    }
    try {
      times.push_back(std::stod(s.substr(0, comma)));
      contour.f0.push_back(std::stod(s.substr(comma + 1)));
    } catch (const std::exception&) {
      throw FormatError("bad contour row at " + path.string() + ":" + std::to_string(line_no));
    }
  }
  contour.start_seconds = times.empty() ? 0.0 : times.front();
  contour.hop_seconds =
      times.size() >= 2 ? (times.back() - times.front()) / static_cast<double>(times.size() - 1)
                        : 0.02;
  return contour;
}

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::labeled: return "labeled";
    case SplitTag::unlabeled: return "unlabeled";
    case SplitTag::eval: return "eval";
  }
  return "labeled";
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "labeled") return SplitTag::labeled;
  if (s == "unlabeled") return SplitTag::unlabeled;
  if (s == "eval") return SplitTag::eval;
  throw FormatError("unknown split tag: " + s);
}

std::vector<ManifestEntry> DatasetManifest::split(SplitTag tag) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == tag) out.push_back(e);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string audio, label, tag;
    if (!std::getline(ss, audio, '\t') || !std::getline(ss, label, '\t') ||
        !std::getline(ss, tag, '\t')) {
      throw FormatError("manifest needs audio<TAB>label<TAB>split at " + path.string() + ":" +
                        std::to_string(line_no));
    }
    ManifestEntry e;
    e.audio_path = trim(audio);
    e.label_path = trim(label);
    if (e.label_path == "-") e.label_path.clear();
    try {
      e.split = split_tag_from_string(trim(tag));
    } catch (const FormatError& err) {
      throw FormatError(std::string(err.what()) + " at " + path.string() + ":" +
                        std::to_string(line_no));
    }
    if (e.audio_path.empty()) {
      throw FormatError("empty audio path at " + path.string() + ":" + std::to_string(line_no));
    }
    if (!e.label_path.empty() && e.label_path == e.audio_path) {
      throw FormatError("audio and label paths coincide at " + path.string() + ":" +
                        std::to_string(line_no));
    }
    if (e.label_path.empty() && e.split != SplitTag::unlabeled) {
      throw FormatError("missing label path for non-unlabeled entry at " + path.string() + ":" +
                        std::to_string(line_no));
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (const auto& e : manifest.entries) {
    os << e.audio_path << '\t' << (e.label_path.empty() ? "-" : e.label_path) << '\t'
       << to_string(e.split) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace melex
