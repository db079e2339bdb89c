#pragma once

#include <cstdint>
#include <vector>

#include "aoff/network.hpp"

namespace aoff {

/// Paired head features: the hardware-path FC1 input (post crop,
/// batch-norm, pool, flatten) and the simulation-path FC1 pre-ReLU
/// output it should map onto.
struct FeaturePairSet {
    int feature_dim = 0;
    int hidden_dim = 0;
    std::vector<double> hw_features;   // [n][feature_dim]
    std::vector<double> sim_targets;   // [n][hidden_dim]
    std::vector<uint8_t> labels;
    size_t count() const { return labels.size(); }
};

/// How one side of the pair collection runs the conv layer.
struct ForwardSpec {
    enum class Mode { ideal, physical } mode = Mode::ideal;
    const PhysicalConv* conv = nullptr;  // required for physical
};

/// Run `n` train-split samples through the hardware path and the
/// simulation path; records hardware FC1 inputs and simulation FC1
/// pre-ReLU outputs. Deterministic for a fixed seed.
FeaturePairSet collect_pairs(const Model& model, const LabeledImages& train_split, size_t n,
                             const ForwardSpec& hardware, const ForwardSpec& simulation,
                             uint64_t seed);

struct FineTuneConfig {
    int epochs = 20;
    int batch_size = 64;
    double learning_rate = 0.001;  // Adam, default moments
    uint64_t seed = 7;
};

/// Re-train FC1 so FC1(hardware features) matches the recorded
/// simulation pre-ReLU targets in least squares; FC2 and every other
/// parameter stay untouched. Returns the final mean squared error.
double finetune_fc1(Model& model, const FeaturePairSet& pairs, const FineTuneConfig& cfg = {});

/// Mean squared error of the current FC1 against the pairs.
double pair_loss(const Model& model, const FeaturePairSet& pairs);

struct SweepPoint {
    size_t samples = 0;
    double accuracy = 0.0;
};

/// Fine-tune independently at each sample count (0 = no fine-tuning)
/// and report post-tuning hardware-path accuracy on `eval_set`.
std::vector<SweepPoint> accuracy_vs_samples(const Model& model, const LabeledImages& train_split,
                                            const LabeledImages& eval_set,
                                            const std::vector<size_t>& sample_grid,
                                            const ForwardSpec& hardware,
                                            const ForwardSpec& simulation,
                                            const FineTuneConfig& cfg, uint64_t seed);

}  // namespace aoff
