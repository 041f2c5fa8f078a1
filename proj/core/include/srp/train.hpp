#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "srp/config.hpp"
#include "srp/data.hpp"
#include "srp/resnet.hpp"

namespace srp {

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double test_acc = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> metrics;
};

/// Full training run per the configured recipe: SGD-Nesterov, milestone lr
/// decay, SRP active in train-mode forwards, pure-GAP eval after each epoch.
/// Throws NumericalError naming the step index if the loss diverges.
TrainResult train(ResNet<float>& net, const TrainConfig& cfg, const Dataset& train_data,
                  const Dataset& test_data, std::ostream* log = nullptr);

/// Top-1 accuracy, eval mode only.
double evaluate(const ResNet<float>& net, const Dataset& data, int batch = 256);

/// Eval-mode logits for the first `count` samples (bitwise-determinism and
/// invariance checks).
std::vector<float> eval_logits(const ResNet<float>& net, const Dataset& data, int count);

/// Header: epoch,train_loss,test_acc,seconds
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics);

}  // namespace srp
