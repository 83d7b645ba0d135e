#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "melex/commands.hpp"
#include "melex/errors.hpp"

namespace {

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int apply_config(melex::RunConfig& cfg, const GlobalOpts& opts) {
  if (!opts.config_path.empty()) {
    try {
      cfg.apply_file(opts.config_path);
    } catch (const melex::IoError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return melex::cli::kExitIo;
    } catch (const melex::FormatError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return melex::cli::kExitIo;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return melex::cli::kExitUsage;
    }
  }
  if (opts.seed_set) cfg.train.seed = opts.seed;  // flags win over the file
  return melex::cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melex - melody extraction toolkit"};
  app.require_subcommand(1);

  GlobalOpts globals;
  app.add_option("--config", globals.config_path, "JSON config file");
  app.add_option("--seed", globals.seed, "Random seed (overrides config)")
      ->each([&globals](const std::string&) { globals.seed_set = true; });

  melex::cli::ExtractArgs extract;
  CLI::App* cmd_extract = app.add_subcommand("extract", "Extract a melody contour to CSV");
  cmd_extract->add_option("audio", extract.audio_path, "Input WAV file")->required();
  cmd_extract->add_option("out_csv", extract.out_csv, "Output contour CSV")->required();
  cmd_extract->add_option("--method", extract.method, "sp | patch_cnn | frame_classifier");
  cmd_extract->add_option("--checkpoint", extract.checkpoint, "Model checkpoint");

  melex::cli::TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "Train a model from a manifest");
  cmd_train->add_option("manifest", train.manifest_path, "Dataset manifest")->required();
  cmd_train->add_option("out_checkpoint", train.out_checkpoint, "Output checkpoint")->required();
  cmd_train->add_option("--model", train.model, "patch_cnn | frame_classifier");
  cmd_train->add_option("--mode", train.mode, "teacher | student");
  cmd_train->add_option("--teacher", train.teacher_checkpoint,
                        "Teacher checkpoint (student mode)");

  melex::cli::EvaluateArgs evaluate;
  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "Report RPA/RCA over the eval split");
  cmd_evaluate->add_option("manifest", evaluate.manifest_path, "Dataset manifest")->required();
  cmd_evaluate->add_option("report_csv", evaluate.report_csv, "Output report CSV")->required();
  cmd_evaluate->add_option("--method", evaluate.method, "sp | patch_cnn | frame_classifier");
  cmd_evaluate->add_option("--checkpoint", evaluate.checkpoint, "Model checkpoint");

  melex::cli::CfpDumpArgs cfp_dump;
  CLI::App* cmd_cfp = app.add_subcommand("cfp-dump", "Write the CFP map as CSV");
  cmd_cfp->add_option("audio", cfp_dump.audio_path, "Input WAV file")->required();
  cmd_cfp->add_option("out_csv", cfp_dump.out_csv, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return melex::cli::kExitUsage;
  }

  melex::RunConfig cfg;
  if (int rc = apply_config(cfg, globals); rc != melex::cli::kExitOk) return rc;

  if (cmd_extract->parsed()) return melex::cli::cmd_extract(extract, cfg);
  if (cmd_train->parsed()) return melex::cli::cmd_train(train, cfg);
  if (cmd_evaluate->parsed()) return melex::cli::cmd_evaluate(evaluate, cfg);
  if (cmd_cfp->parsed()) return melex::cli::cmd_cfp_dump(cfp_dump, cfg);
  return melex::cli::kExitUsage;
}
