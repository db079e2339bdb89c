#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aoff/image.hpp"
#include "aoff/io.hpp"
#include "aoff/optics.hpp"

namespace aoff {

// ---------------------------------------------------------------------------
// Kernel quantization
// ---------------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// 1-bit view of real weights: x > 0 maps to 1, x <= 0 maps to 0.
std::vector<double> binarize(const std::vector<double>& weights);

/// Amplitude view of real weights at the given precision:
///   1 bit  -> binarize(weights)
///   2/8 bits -> sigmoid(weights) rounded to the nearest of 2^bits
///              uniform levels in [0,1]
///   32 bits -> sigmoid(weights), the amplitude-constrained full
///              precision parameterization
std::vector<double> quantize(const std::vector<double>& weights, int bits);

// ---------------------------------------------------------------------------
// Trainable pieces
// ---------------------------------------------------------------------------

/// Real-valued trainable Fourier-domain kernels plus their quantized
/// amplitude view. Kernels are authored dc_at_center, like the physical
/// Fourier-plane masks they become.
struct KernelBank {
    int num_kernels = 16;
    int rows = 208;
    int cols = 208;
    int quant_bits = 1;
    std::vector<double> weights;  // [kernel][row][col]

    size_t kernel_stride() const { return static_cast<size_t>(rows) * cols; }
    const double* kernel(int k) const { return weights.data() + k * kernel_stride(); }
    double* kernel(int k) { return weights.data() + k * kernel_stride(); }

    /// Quantized amplitude mask of one kernel (dc_at_center).
    RealImage mask(int k) const;

    static KernelBank random_init(int num_kernels, int rows, int cols, int quant_bits,
                                  uint64_t seed, double stddev = 0.05);
};

/// Electronic layers after the optical convolution: batch-norm over the
/// centre-cropped maps, 2x2 max-pool, FC1 + ReLU, FC2.
struct NetHead {
    int channels = 16;
    int map_size = 28;  // centre crop edge
    int pool = 2;
    int hidden = 1024;
    int classes = 10;

    std::vector<double> bn_gamma, bn_beta;
    std::vector<double> bn_run_mean, bn_run_var;
    std::vector<double> fc1_w, fc1_b;  // hidden x feature_dim
    std::vector<double> fc2_w, fc2_b;  // classes x hidden

    int pooled_size() const { return map_size / pool; }
    int feature_dim() const { return channels * pooled_size() * pooled_size(); }

    static NetHead init(int channels, int map_size, int hidden, uint64_t seed);
};

/// Geometry of the conv stage. The fast preset (32x32 kernels, no
/// 208-padding) keeps the physical path at a desk-scale grid.
struct ModelPreset {
    int kernel_size = 32;  // padded input and kernel edge
    int crop_size = 28;    // centre crop fed to the head
    int expansion = 2;     // physical-mode pixel expansion
    int subpixel = 2;      // physical-mode DMD subpixel factor
};

struct Model {
    KernelBank kernels;
    NetHead head;
    ModelPreset preset;
    int in_channels = 1;
};

Model make_model(int in_channels, int input_size, int kernel_size, int num_kernels,
                 int quant_bits, int hidden, uint64_t seed);

// ---------------------------------------------------------------------------
// Forward paths
// ---------------------------------------------------------------------------

/// Ideal fast path: per channel c and kernel k,
/// y_ck = |idft2(dft2(x_c) * mask_k)|^2, channels summed after the
/// squaring. Inputs must already be padded to the kernel size.
std::vector<RealImage> fourier_conv_forward(const std::vector<RealImage>& channels,
                                            const KernelBank& kernels);

/// Eval-mode head: centre crop, batch-norm with running statistics,
/// max-pool, FC1, ReLU, FC2. `maps` holds num_kernels maps of
/// map_rows x map_rows.
std::vector<double> head_forward(const NetHead& head, const std::vector<RealImage>& maps);

/// The crop/batch-norm/pool/flatten stage of the eval-mode head: the
/// FC1 input vector.
std::vector<double> head_features(const NetHead& head, const std::vector<RealImage>& maps);

/// FC1 output before the ReLU.
std::vector<double> fc1_pre_relu(const NetHead& head, const std::vector<double>& features);

/// Physical path: kernels rendered to the Fourier-plane DMD of `config`
/// and run through the 4f engine. The preset's expansion/subpixel
/// factors override the DMD subpixel setting. Saturation levels come
/// from calibrate(); detection counts are mapped back to intensity
/// units so both paths feed the head in the same scale.
class PhysicalConv {
  public:
    PhysicalConv(const Model& model, const SystemConfig& config);

    /// Fix per-kernel exposure from the raw intensities of up to
    /// `count` calibration samples (train split only).
    void calibrate(const LabeledImages& samples, size_t count);
    const std::vector<double>& saturations() const { return saturation_; }
    void set_saturations(std::vector<double> s) { saturation_ = std::move(s); }

    /// Feature maps at crop resolution's parent grid (kernel_size),
    /// channels summed after detection.
    std::vector<RealImage> forward(const LabeledImages& set, size_t index,
                                   uint64_t frame_seed) const;

    /// Mask-pattern gradients for physical-mode training: given
    /// d(loss)/d(feature maps) for one sample, accumulates
    /// d(loss)/d(mask pattern) (dc_at_center, kernel grid) into `grad`.
    /// Straight-through at the camera and DMD quantizers.
    void backward_masks(const LabeledImages& set, size_t index,
                        const std::vector<RealImage>& feature_grads, uint64_t frame_seed,
                        std::vector<double>& grad) const;

    const SystemConfig& config() const { return cfg_; }

  private:
    ComplexField input_spectrum(const RealImage& channel_pattern) const;
    RealImage detect_raw(const ComplexField& masked_spectrum) const;

    SystemConfig cfg_;
    ModelPreset preset_;
    int pattern_size_ = 0;  // kernel_size * expansion
    int grid_ = 0;          // pattern_size * subpixel
    int roll_r_ = 0, roll_c_ = 0;
    ComplexField lens_mult_;                  // H1*H2, dc_at_center
    std::vector<ComplexField> kernel_mults_;  // lens_mult * perturbed mask, per kernel
    std::shared_ptr<const Propagator> input_probe_;
    std::vector<double> saturation_;          // per kernel, raw intensity units
    int num_kernels_ = 0;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    uint64_t seed = 1;
    double learning_rate = 0.001;  // Adam defaults
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double bn_momentum = 0.1;
    int quant_bits = 1;
    enum class Mode { ideal, physical };
    Mode forward_mode = Mode::ideal;
    void validate() const;
};

TrainConfig train_config_from_json(const std::string& text);

struct EpochStats {
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Model model;  // best-validation snapshot
    std::vector<EpochStats> history;
    double best_val_accuracy = 0.0;
    int best_epoch = -1;
};

/// Epoch loop with Adam; deterministic for a fixed seed and thread
/// count. Physical-mode training routes the conv stage through
/// `physical_config` (small instances only).
TrainResult train(const LabeledImages& train_set, const LabeledImages& val_set, Model model,
                  const TrainConfig& cfg, const SystemConfig* physical_config = nullptr);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion_matrix;
    std::vector<int> predictions;
};

EvalResult evaluate(const Model& model, const LabeledImages& set);
EvalResult evaluate_physical(const Model& model, const LabeledImages& set,
                             const PhysicalConv& conv, uint64_t seed_base = 0);

// ---------------------------------------------------------------------------
// Gradients (exposed for the finite-difference oracles)
// ---------------------------------------------------------------------------

struct Gradients {
    double loss = 0.0;
    std::vector<double> kernel_weights;  // straight-through, per raw weight
    std::vector<double> kernel_masks;    // pre-quantizer, dc_at_center
    std::vector<double> bn_gamma, bn_beta;
    std::vector<double> fc1_w, fc1_b, fc2_w, fc2_b;
};

/// One training-mode forward (batch statistics); fills gradients when
/// `out` is non-null, touches running stats only when `update_running`.
/// `mask_override` (dc_at_center, num_kernels x kernel area) bypasses
/// the quantizer, pinning the mask values the gradient is taken at.
double forward_backward(Model& model, const LabeledImages& set,
                        const std::vector<size_t>& batch_indices, Gradients* out,
                        bool update_running,
                        const std::vector<double>* mask_override = nullptr);

// ---------------------------------------------------------------------------
// Checkpoints: raster tensors plus a JSON manifest
// ---------------------------------------------------------------------------

struct CheckpointMeta {
    uint64_t seed = 0;
    int epoch = -1;
    double val_accuracy = 0.0;
    std::string dataset;
};

void save_checkpoint(const std::string& dir, const Model& model, const CheckpointMeta& meta);
Model load_checkpoint(const std::string& dir, CheckpointMeta* meta = nullptr);

}  // namespace aoff
