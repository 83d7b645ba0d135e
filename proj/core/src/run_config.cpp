#include "melex/run_config.hpp"

#include <fstream>

#include "json.hpp"
#include "melex/errors.hpp"

namespace melex {

namespace {

using nlohmann::json;

[[noreturn]] void unknown_key(const std::string& origin, const std::string& path) {
  throw std::invalid_argument("unknown config key '" + path + "' in " + origin);
}

class Section {
 public:
  Section(const json& j, std::string origin, std::string name)
      : j_(j), origin_(std::move(origin)), name_(std::move(name)) {
    if (!j_.is_object()) {
      throw std::invalid_argument("config section '" + name_ + "' must be an object in " +
                                  origin_);
    }
  }

  ~Section() = default;

  template <class T>
  void get(const char* key, T& out) {
    if (j_.contains(key)) {
      try {
        out = j_.at(key).get<T>();
      } catch (const json::exception&) {
        throw std::invalid_argument("bad value for '" + name_ + "." + key + "' in " + origin_);
      }
      seen_.push_back(key);
    }
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        unknown_key(origin_, name_ + "." + key);
      }
    }
  }

 private:
  const json& j_;
  std::string origin_;
  std::string name_;
  std::vector<std::string> seen_;
};

}  // namespace

void RunConfig::apply_json_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("config parse error in " + origin + ": " + e.what());
  }
  if (!doc.is_object()) throw FormatError("config root must be an object in " + origin);

  for (const auto& [section, body] : doc.items()) {
    if (section == "stft") {
      Section s(body, origin, section);
      s.get("window_size", stft.window_size);
      s.get("hop", stft.hop);
      s.get("sample_rate", stft.sample_rate);
      s.finish();
    } else if (section == "cfp") {
      Section s(body, origin, section);
      s.get("gamma", cfp.gamma);
      s.get("freq_cutoff_hz", cfp.freq_cutoff_hz);
      s.get("quef_cutoff_s", cfp.quef_cutoff_s);
      s.get("log_bins_per_octave", cfp.log_bins_per_octave);
      s.get("log_f_low", cfp.log_f_low);
      s.get("log_f_high", cfp.log_f_high);
      s.get("cubic_log_resample", cfp.cubic_log_resample);
      s.finish();
    } else if (section == "quantizer") {
      Section s(body, origin, section);
      s.get("f_min", quantizer.f_min);
      s.get("bins_per_semitone", quantizer.bins_per_semitone);
      s.get("num_pitch_classes", quantizer.num_pitch_classes);
      s.finish();
    } else if (section == "train") {
      Section s(body, origin, section);
      s.get("epochs", train.epochs);
      s.get("batch_size", train.batch_size);
      s.get("learning_rate", train.learning_rate);
      s.get("seed", train.seed);
      s.get("shuffle", train.shuffle);
      s.get("pseudo_confidence_min", train.pseudo_confidence_min);
      s.get("alt_true_label_loss", train.alt_true_label_loss);
      s.finish();
    } else if (section == "sp") {
      Section s(body, origin, section);
      s.get("f_min", sp.f_min);
      s.get("f_max", sp.f_max);
      s.get("voicing_threshold", sp.voicing_threshold);
      s.finish();
    } else if (section == "patches") {
      Section s(body, origin, section);
      s.get("label_tolerance_cents", patches.label_tolerance_cents);
      s.get("nonvocal_keep_rate", patches.nonvocal_keep_rate);
      s.finish();
    } else if (section == "eval") {
      Section s(body, origin, section);
      s.get("tolerance_cents", eval.tolerance_cents);
      s.finish();
    } else if (section == "labels") {
      Section s(body, origin, section);
      std::string format;
      s.get("format", format);
      if (!format.empty()) {
        if (format == "hz") {
          labels.format = LabelFormat::hz;
        } else if (format == "midi_semitone") {
          labels.format = LabelFormat::midi_semitone;
        } else {
          throw std::invalid_argument("labels.format must be 'hz' or 'midi_semitone' in " +
                                      origin);
        }
      }
      s.get("hop_seconds", labels.hop_seconds);
      s.get("start_seconds", labels.start_seconds);
      s.finish();
    } else {
      unknown_key(origin, section);
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_json_text(text, path.string());
}

}  // namespace melex
