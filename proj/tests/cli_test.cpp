#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

// End-to-end tests that run the installed binary the way a user would.

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "melex/audio_io.hpp"
#include "melex/run_config.hpp"
#include "support/synth.hpp"

#ifndef MELEX_CLI_PATH
#error "MELEX_CLI_PATH must point at the melex binary"
#endif

using namespace melex;

namespace {

int run(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(MELEX_CLI_PATH) + " " + args;
  if (output == nullptr) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  const std::string tmp = std::filesystem::temp_directory_path() /
                          ("melex_cli_out_" + std::to_string(::getpid()) + ".txt");
  const int rc = std::system((cmd + " >" + tmp + " 2>/dev/null").c_str());
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  *output = ss.str();
  std::filesystem::remove(tmp);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

/// Writes a truth label file (hz format, 10 ms hop) for a synthetic clip.
void write_labels(const PitchContour& truth, const std::filesystem::path& path) {
  std::ofstream os(path);
  for (double f : truth.f0) os << f << "\n";
}

struct CorpusPaths {
  std::filesystem::path manifest;
};

/// Tiny manifest of vocal-like clips for train/eval smoke runs.
CorpusPaths make_corpus(const synth::TempDir& dir, int labeled, int unlabeled, int eval_n,
                        melex::Rng& rng) {
  const StftConfig stft;
  DatasetManifest manifest;
  int idx = 0;
  auto add = [&](SplitTag tag, bool with_labels) {
    synth::VocalClipSpec spec;
    spec.f0 = 200.0 + 40.0 * (idx % 5);
    spec.seconds = 0.4;
    const auto sc = synth::make_vocal_clip(spec, rng, stft);
    const auto wav = dir.file("clip" + std::to_string(idx) + ".wav");
    write_wav(sc.clip, wav);
    ManifestEntry e;
    e.audio_path = wav.string();
    e.split = tag;
    if (with_labels) {
      const auto pv = dir.file("clip" + std::to_string(idx) + ".pv");
      write_labels(sc.truth, pv);
      e.label_path = pv.string();
    }
    manifest.entries.push_back(e);
    ++idx;
  };
  for (int i = 0; i < labeled; ++i) add(SplitTag::labeled, true);
  for (int i = 0; i < unlabeled; ++i) add(SplitTag::unlabeled, true);
  for (int i = 0; i < eval_n; ++i) add(SplitTag::eval, true);
  CorpusPaths paths;
  paths.manifest = dir.file("manifest.tsv");
  write_manifest(manifest, paths.manifest);
  return paths;
}

/// Labels config matching what write_labels produced (hz on the STFT frame
/// grid, whose first center sits at window/2 = 64 ms).
void write_labels_config(const std::filesystem::path& p) {
  std::ofstream os(p);
  os << R"({"labels": {"format": "hz", "hop_seconds": 0.01, "start_seconds": 0.064}})";
}

}  // namespace

TEST_CASE("extract --method sp recovers a synthetic tone") {
  synth::TempDir dir;
  write_wav(synth::sine(200.0, 0.5, 8000), dir.file("tone200.wav"));
  const auto out = dir.file("out.csv");
  const int rc =
      run("extract --method sp " + dir.file("tone200.wav").string() + " " + out.string());
  CHECK(rc == 0);
  const auto contour = read_contour_csv(out);
  REQUIRE(contour.frames() > 0);
  std::size_t voiced = 0;
  for (double f : contour.f0) {
    if (f > 0.0) {
      ++voiced;
      CHECK(std::abs(f - 200.0) < 1.0);
    }
  }
  CHECK(voiced == contour.frames());
}

TEST_CASE("extract exit codes distinguish usage, io and model errors") {
  synth::TempDir dir;
  write_wav(synth::sine(200.0, 0.3, 8000), dir.file("t.wav"));
  // missing checkpoint flag
  CHECK(run("extract --method patch_cnn " + dir.file("t.wav").string() + " " +
            dir.file("o.csv").string()) == 2);
  // unknown method
  CHECK(run("extract --method magic " + dir.file("t.wav").string() + " " +
            dir.file("o.csv").string()) == 2);
  // nonexistent audio
  CHECK(run("extract --method sp " + dir.file("missing.wav").string() + " " +
            dir.file("o.csv").string()) == 3);
  // checkpoint path that does not exist
  CHECK(run("extract --method patch_cnn --checkpoint " + dir.file("no.ckpt").string() + " " +
            dir.file("t.wav").string() + " " + dir.file("o.csv").string()) == 3);
  // bad subcommand
  CHECK(run("transmogrify") == 2);
}

TEST_CASE("extract runs are reproducible") {
  synth::TempDir dir;
  write_wav(synth::sine(330.0, 0.4, 8000), dir.file("t.wav"));
  REQUIRE(run("extract --method sp " + dir.file("t.wav").string() + " " +
              dir.file("a.csv").string()) == 0);
  REQUIRE(run("extract --method sp " + dir.file("t.wav").string() + " " +
              dir.file("b.csv").string()) == 0);
  CHECK(read_file(dir.file("a.csv")) == read_file(dir.file("b.csv")));
}

TEST_CASE("cfp-dump emits the log axis header and per-frame rows") {
  synth::TempDir dir;
  const auto clip = synth::harmonic_tone(220.0, 0.3, 8000, {1.0, 0.9, 0.8}, {0.1, 0.7, 1.9});
  write_wav(clip, dir.file("h.wav"));
  const auto out = dir.file("y.csv");
  REQUIRE(run("cfp-dump " + dir.file("h.wav").string() + " " + out.string()) == 0);

  std::ifstream in(out);
  std::string header;
  REQUIRE(std::getline(in, header));
  std::stringstream hs(header);
  std::string cell;
  std::vector<double> axis;
  while (std::getline(hs, cell, ',')) axis.push_back(std::stod(cell));
  CHECK(axis.size() == CfpConfig{}.log_bin_count());

  std::size_t frames = 0, good = 0;
  std::string row;
  while (std::getline(in, row)) {
    std::stringstream rs(row);
    std::size_t best = 0, col = 0;
    double best_v = -1.0;
    while (std::getline(rs, cell, ',')) {
      const double v = std::stod(cell);
      if (v > best_v) {
        best_v = v;
        best = col;
      }
      ++col;
    }
    REQUIRE(col == axis.size());
    if (std::abs(1200.0 * std::log2(axis[best] / 220.0)) <= 30.0) ++good;
    ++frames;
  }
  const std::size_t expected_frames = 1 + (clip.samples.size() - 1024) / 80;
  CHECK(frames == expected_frames);
  CHECK(static_cast<double>(good) >= 0.95 * static_cast<double>(frames));
}

TEST_CASE("cfp-dump of silence has an all-zero body") {
  synth::TempDir dir;
  AudioClip silence;
  silence.sample_rate = 8000;
  silence.samples.assign(2048, 0.0);
  write_wav(silence, dir.file("s.wav"));
  REQUIRE(run("cfp-dump " + dir.file("s.wav").string() + " " + dir.file("y.csv").string()) == 0);
  std::ifstream in(dir.file("y.csv"));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) CHECK(std::stod(cell) == 0.0);
  }
}

TEST_CASE("teacher and student training produce loadable checkpoints") {
  synth::TempDir dir;
  Rng rng(23);
  const auto corpus = make_corpus(dir, 2, 2, 0, rng);
  write_labels_config(dir.file("cfg.json"));
  const std::string common = "--config " + dir.file("cfg.json").string() + " --seed 9 ";

  const auto teacher = dir.file("teacher.ckpt");
  REQUIRE(run(common + "train --model patch_cnn --mode teacher " + corpus.manifest.string() +
              " " + teacher.string() + " ") == 0);
  CHECK(std::filesystem::exists(teacher));
  CHECK(std::filesystem::exists(teacher.string() + ".log"));

  const auto student = dir.file("student.ckpt");
  REQUIRE(run(common + "train --model patch_cnn --mode student --teacher " + teacher.string() +
              " " + corpus.manifest.string() + " " + student.string()) == 0);
  CHECK(std::filesystem::exists(student));

  // both checkpoints drive extraction
  write_wav(synth::sine(250.0, 0.3, 8000), dir.file("probe.wav"));
  CHECK(run("extract --method patch_cnn --checkpoint " + student.string() + " " +
            dir.file("probe.wav").string() + " " + dir.file("probe.csv").string()) == 0);

  // student mode without --teacher
  CHECK(run(common + "train --model patch_cnn --mode student " + corpus.manifest.string() +
            " " + dir.file("x.ckpt").string()) == 2);
  // unknown mode / model
  CHECK(run(common + "train --mode professor " + corpus.manifest.string() + " " +
            dir.file("x.ckpt").string()) == 2);
  CHECK(run(common + "train --model perceptron " + corpus.manifest.string() + " " +
            dir.file("x.ckpt").string()) == 2);
}

TEST_CASE("training twice with one seed is byte-identical") {
  synth::TempDir dir;
  Rng rng(29);
  const auto corpus = make_corpus(dir, 2, 0, 0, rng);
  write_labels_config(dir.file("cfg.json"));
  const std::string common = "--config " + dir.file("cfg.json").string() + " --seed 4242 ";
  REQUIRE(run(common + "train --model patch_cnn --mode teacher " + corpus.manifest.string() +
              " " + dir.file("a.ckpt").string()) == 0);
  REQUIRE(run(common + "train --model patch_cnn --mode teacher " + corpus.manifest.string() +
              " " + dir.file("b.ckpt").string()) == 0);
  const std::string a = read_file(dir.file("a.ckpt"));
  const std::string b = read_file(dir.file("b.ckpt"));
  REQUIRE(!a.empty());
  CHECK(a == b);
}

TEST_CASE("evaluate prints the summary line and writes clip rows") {
  synth::TempDir dir;
  Rng rng(31);
  const auto corpus = make_corpus(dir, 0, 0, 3, rng);
  write_labels_config(dir.file("cfg.json"));
  const auto report = dir.file("report.csv");
  std::string out;
  const int rc = run("--config " + dir.file("cfg.json").string() + " evaluate --method sp " +
                         corpus.manifest.string() + " " + report.string(),
                     &out);
  REQUIRE(rc == 0);
  CHECK(out.find("RPA/RCA: ") != std::string::npos);
  // two decimals in xx.xx/yy.yy form
  CHECK(out.find('/') != std::string::npos);
  CHECK(line_count(read_file(report)) == 4);  // 3 clips + mean row

  // empty eval split
  Rng rng2(32);
  const auto no_eval = make_corpus(dir, 1, 0, 0, rng2);
  CHECK(run("--config " + dir.file("cfg.json").string() + " evaluate --method sp " +
            no_eval.manifest.string() + " " + dir.file("r2.csv").string()) == 2);
}

TEST_CASE("evaluate on a perfect method reports 100.00/100.00") {
  synth::TempDir dir;
  // truth generated by the sp baseline itself, so the estimate matches exactly
  const auto clip = synth::sine(220.0, 0.4, 8000);
  write_wav(clip, dir.file("t.wav"));
  RunConfig cfg;
  const auto truth = autocorr_pitch(clip, cfg.stft, cfg.sp.f_min, cfg.sp.f_max,
                                    cfg.sp.voicing_threshold);
  {
    std::ofstream os(dir.file("t.pv"));
    for (double f : truth.f0) os << f << "\n";
  }
  DatasetManifest m;
  m.entries = {{dir.file("t.wav").string(), dir.file("t.pv").string(), SplitTag::eval}};
  write_manifest(m, dir.file("m.tsv"));
  write_labels_config(dir.file("cfg.json"));

  std::string out;
  const int rc = run("--config " + dir.file("cfg.json").string() + " evaluate --method sp " +
                         dir.file("m.tsv").string() + " " + dir.file("r.csv").string(),
                     &out);
  REQUIRE(rc == 0);
  CHECK(out.find("RPA/RCA: 100.00/100.00") != std::string::npos);
}

TEST_CASE("config errors surface as usage or io failures") {
  synth::TempDir dir;
  write_wav(synth::sine(200.0, 0.3, 8000), dir.file("t.wav"));
  {
    std::ofstream os(dir.file("bad_key.json"));
    os << R"({"stft": {"window": 512}})";
  }
  CHECK(run("--config " + dir.file("bad_key.json").string() + " extract --method sp " +
            dir.file("t.wav").string() + " " + dir.file("o.csv").string()) == 2);
  {
    std::ofstream os(dir.file("bad_json.json"));
    os << "{nope";
  }
  CHECK(run("--config " + dir.file("bad_json.json").string() + " extract --method sp " +
            dir.file("t.wav").string() + " " + dir.file("o.csv").string()) == 3);
  CHECK(run("--config " + dir.file("missing.json").string() + " extract --method sp " +
            dir.file("t.wav").string() + " " + dir.file("o.csv").string()) == 3);

  // a working override: coarser analysis grid still extracts
  {
    std::ofstream os(dir.file("ok.json"));
    os << R"({"stft": {"hop": 160}, "eval": {"tolerance_cents": 25.0}})";
  }
  CHECK(run("--config " + dir.file("ok.json").string() + " extract --method sp " +
            dir.file("t.wav").string() + " " + dir.file("o.csv").string()) == 0);
  const auto contour = read_contour_csv(dir.file("o.csv"));
  CHECK(contour.hop_seconds == doctest::Approx(0.02));  // 160 / 8000
}
