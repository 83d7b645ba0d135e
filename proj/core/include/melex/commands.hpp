#pragma once

#include <string>

#include "melex/run_config.hpp"

namespace melex::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitModel = 4;

struct ExtractArgs {
  std::string audio_path;
  std::string out_csv;
  std::string method = "sp";  // sp | patch_cnn | frame_classifier
  std::string checkpoint;
};

struct TrainArgs {
  std::string manifest_path;
  std::string out_checkpoint;
  std::string model = "patch_cnn";  // patch_cnn | frame_classifier
  std::string mode = "teacher";     // teacher | student
  std::string teacher_checkpoint;
};

struct EvaluateArgs {
  std::string manifest_path;
  std::string report_csv;
  std::string method = "sp";
  std::string checkpoint;
};

struct CfpDumpArgs {
  std::string audio_path;
  std::string out_csv;
};

int cmd_extract(const ExtractArgs& args, const RunConfig& cfg);
int cmd_train(const TrainArgs& args, const RunConfig& cfg);
int cmd_evaluate(const EvaluateArgs& args, const RunConfig& cfg);
int cmd_cfp_dump(const CfpDumpArgs& args, const RunConfig& cfg);

}  // namespace melex::cli
