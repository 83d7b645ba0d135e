#include "melex/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "melex/errors.hpp"

namespace melex {

namespace {

constexpr double kLabelEpsilon = 1e-7;

/// H(one_hot(y_u), one_hot(y_t)) with probabilities clamped to [eps, 1-eps].
double hard_label_cross_entropy(int y_u, int y_t) {
  return y_u == y_t ? -std::log(1.0 - kLabelEpsilon) : -std::log(kLabelEpsilon);
}

std::size_t output_classes(Network& net, const Tensor& probe) {
  return net.forward(probe).size();
}

std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) rng.shuffle(order);
  return order;
}

}  // namespace

LossReport train_supervised(Network& net, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train_supervised: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train_supervised: need epochs >= 1 and batch_size >= 1");
  }
  const std::size_t classes = output_classes(net, data.front().input);
  for (const Example& e : data) {
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= classes) {
      throw std::invalid_argument("train_supervised: label out of range");
    }
  }

  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  const std::vector<Parameter*> params = net.parameters();
  Rng rng(cfg.seed);

  LossReport report;
  report.unlabeled_batch_size = std::min<std::size_t>(cfg.batch_size, data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(data.size(), cfg.shuffle, rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_m = 1.0 / static_cast<double>(end - begin);
      net.zero_grads();
      for (std::size_t i = begin; i < end; ++i) {
        const Example& e = data[order[i]];
        ForwardTrace trace;
        const Tensor logits = net.forward(e.input, &trace);
        CrossEntropyResult ce = cross_entropy(logits, static_cast<std::size_t>(e.label));
        loss_sum += ce.loss;
        for (double& g : ce.grad_logits.data) g *= inv_m;
        net.backward(trace, ce.grad_logits);
      }
      adam_step(params, adam);
    }
    const double mean = loss_sum / static_cast<double>(data.size());
    report.epoch_loss.push_back(mean);
    report.epoch_h1.push_back(mean);
  }
  return report;
}

PseudoLabelSet generate_pseudo_labels(const Network& teacher, const std::vector<Tensor>& inputs,
                                      const std::string& source_checkpoint) {
  PseudoLabelSet set;
  set.source_checkpoint = source_checkpoint;
  set.labels.reserve(inputs.size());
  set.confidence.reserve(inputs.size());
  for (const Tensor& x : inputs) {
    const Tensor probs = softmax(teacher.forward(x));
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k) {
      if (probs[k] > probs[best]) best = k;  // strict: ties keep the lower class
    }
    set.labels.push_back(static_cast<int>(best));
    set.confidence.push_back(probs[best]);
  }
  return set;
}

LossReport train_student(Network& student, const std::vector<Tensor>& inputs,
                         const PseudoLabelSet& pseudo, const std::vector<int>* true_labels,
                         const TrainConfig& cfg) {
  if (inputs.empty()) throw std::invalid_argument("train_student: empty unlabeled set");
  if (pseudo.labels.size() != inputs.size()) {
    throw std::invalid_argument("train_student: pseudo labels do not cover the unlabeled set");
  }
  if (true_labels != nullptr && true_labels->size() != inputs.size()) {
    throw std::invalid_argument("train_student: true label count mismatch");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train_student: need epochs >= 1 and batch_size >= 1");
  }

  // Confidence gate (default keeps everything).
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (pseudo.confidence.empty() || pseudo.confidence[i] >= cfg.pseudo_confidence_min) {
      kept.push_back(i);
    }
  }
  if (kept.empty()) throw std::invalid_argument("train_student: confidence gate kept nothing");

  const std::size_t classes = output_classes(student, inputs[kept.front()]);
  for (std::size_t i : kept) {
    if (pseudo.labels[i] < 0 || static_cast<std::size_t>(pseudo.labels[i]) >= classes) {
      throw std::invalid_argument("train_student: pseudo label out of range");
    }
  }

  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  const std::vector<Parameter*> params = student.parameters();
  Rng rng(cfg.seed);

  LossReport report;
  report.unlabeled_batch_size = std::min<std::size_t>(cfg.batch_size, kept.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = epoch_order(kept.size(), cfg.shuffle, rng);
    double h1_sum = 0.0, h2_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double inv_m = 1.0 / static_cast<double>(end - begin);
      student.zero_grads();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = kept[order[i]];
        const auto y_u = static_cast<std::size_t>(pseudo.labels[idx]);
        ForwardTrace trace;
        const Tensor logits = student.forward(inputs[idx], &trace);
        CrossEntropyResult ce = cross_entropy(logits, y_u);
        h1_sum += ce.loss;
        if (true_labels != nullptr) {
          const int y_t = (*true_labels)[idx];
          if (cfg.alt_true_label_loss) {
            CrossEntropyResult alt = cross_entropy(logits, static_cast<std::size_t>(y_t));
            h2_sum += alt.loss;
            for (std::size_t k = 0; k < ce.grad_logits.size(); ++k) {
              ce.grad_logits.data[k] += alt.grad_logits[k];
            }
          } else {
            h2_sum += hard_label_cross_entropy(pseudo.labels[idx], y_t);
          }
        }
        for (double& g : ce.grad_logits.data) g *= inv_m;
        student.backward(trace, ce.grad_logits);
      }
      adam_step(params, adam);
    }
    const double n = static_cast<double>(kept.size());
    const double h1 = h1_sum / n;
    const double h2 = h2_sum / n;
    report.epoch_h1.push_back(h1);
    if (true_labels != nullptr) report.epoch_h2.push_back(h2);
    report.epoch_loss.push_back(true_labels != nullptr ? h1 + h2 : h1);
  }
  return report;
}

void write_training_log(const LossReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open training log for writing: " + path.string());
  char buf[128];
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    const double h1 = e < report.epoch_h1.size() ? report.epoch_h1[e] : 0.0;
    const double h2 = e < report.epoch_h2.size() ? report.epoch_h2[e] : 0.0;
    std::snprintf(buf, sizeof(buf), "%zu\t%.9g\t%.9g\t%.9g\n", e + 1, report.epoch_loss[e], h1,
                  h2);
    os << buf;
  }
  if (!os) throw IoError("training log write failed: " + path.string());
}

}  // namespace melex
