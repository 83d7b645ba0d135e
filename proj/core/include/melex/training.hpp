#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "melex/neural.hpp"

namespace melex {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Pseudo labels below this teacher confidence are dropped (0 keeps all).
  double pseudo_confidence_min = 0.0;
  /// Replace the constant H(y_u, y_t) diagnostic with a gradient-carrying
  /// H(y_t, p) term. Off by default.
  bool alt_true_label_loss = false;
};

struct Example {
  Tensor input;
  int label = 0;
};

using Dataset = std::vector<Example>;

/// Per-epoch mean losses. For teacher-student training the two cross-entropy
/// components of the batch loss are reported separately; their sum is the
/// reported loss. epoch_h2 stays empty when no true labels were given.
struct LossReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_h1;
  std::vector<double> epoch_h2;
  std::size_t unlabeled_batch_size = 0;  // M of the batch loss
};

/// Seeded shuffle, fixed-order batches, cross-entropy + Adam. Same seed,
/// data and config give bit-identical parameters.
LossReport train_supervised(Network& net, const Dataset& data, const TrainConfig& cfg);

struct PseudoLabelSet {
  std::vector<int> labels;         // teacher argmax, ties toward the lower class
  std::vector<double> confidence;  // max softmax value
  std::string source_checkpoint;
};

PseudoLabelSet generate_pseudo_labels(const Network& teacher, const std::vector<Tensor>& inputs,
                                      const std::string& source_checkpoint = "");

/// Batch loss (1/M) sum(H(y_u, p_student) + H(y_u, y_t)). Only the first term
/// carries gradient; the second is constant in the student parameters and is
/// logged as a pseudo-label-quality diagnostic. Pass nullptr when there are
/// no true labels.
LossReport train_student(Network& student, const std::vector<Tensor>& inputs,
                         const PseudoLabelSet& pseudo, const std::vector<int>* true_labels,
                         const TrainConfig& cfg);

/// Line-oriented log: epoch<TAB>loss<TAB>h1<TAB>h2.
void write_training_log(const LossReport& report, const std::filesystem::path& path);

}  // namespace melex
