#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "srp/data.hpp"
#include "srp/resnet.hpp"

namespace srp {

/// Training recipe. Learning rate at epoch e is lr * decay^(#milestones <= e).
struct TrainConfig {
    int epochs = 15;
    int batch = 128;
    double lr = 0.1;
    std::vector<int> milestones = {10};
    double decay = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    AugmentFlags augment;
    bool mixup = false;
    double mixup_alpha = 1.0;
    int train_subset = 0;  // 0 = all
    int test_subset = 0;

    void validate() const;
    double lr_at(int epoch) const {
        double f = lr;
        for (int m : milestones)
            if (m <= epoch) f *= decay;
        return f;
    }
};

struct RunConfig {
    NetworkConfig net;
    TrainConfig train;
};

/// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
RunConfig parse_run_config(const std::string& text);
RunConfig parse_run_config_file(const std::string& path);

/// Round-trips a RunConfig back into config text (checkpoint snapshots).
std::string serialize_run_config(const RunConfig& cfg);

}  // namespace srp
