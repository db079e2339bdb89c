#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aoff/image.hpp"
#include "aoff/optics.hpp"
#include "aoff/perf.hpp"

namespace aoff {

/// Malformed input bytes (magic, truncation, counts).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structurally valid input whose values violate an invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A labelled image set in [0,1], stored channel-planar per sample.
struct LabeledImages {
    int rows = 0;
    int cols = 0;
    int channels = 1;
    std::vector<float> pixels;  // [sample][channel][row][col]
    std::vector<uint8_t> labels;

    size_t count() const { return labels.size(); }
    size_t sample_stride() const {
        return static_cast<size_t>(rows) * cols * channels;
    }
    const float* sample(size_t i) const { return pixels.data() + i * sample_stride(); }
    /// One channel of one sample as a RealImage.
    RealImage image(size_t i, int channel = 0) const;
};

/// Parse the IDX pair (images + labels) from `dir`; train=false loads
/// the t10k files. Pixels are normalized to [0,1].
LabeledImages load_mnist(const std::string& dir, bool train = true);

/// Parse CIFAR-10 binary batches (3073-byte records, channel-planar
/// RGB) from `dir`.
LabeledImages load_cifar10(const std::string& dir, bool train = true);

/// Deterministic shuffle-split: last `val_count` of the seeded
/// permutation become the validation set.
std::pair<LabeledImages, LabeledImages> split_train_val(const LabeledImages& set,
                                                        size_t val_count, uint64_t seed);

/// First `count` samples of a seeded permutation.
LabeledImages take_subset(const LabeledImages& set, size_t count, uint64_t seed);

// ---------------------------------------------------------------------------
// Raster container: "AOFF" magic, little-endian u32 version/rows/cols/
// channels, row-major little-endian float32 payload.
// ---------------------------------------------------------------------------

struct RasterFile {
    uint32_t rows = 0;
    uint32_t cols = 0;
    uint32_t channels = 1;
    std::vector<float> payload;
};

void write_raster(const std::string& path, const RasterFile& raster);
RasterFile read_raster(const std::string& path);

RasterFile to_raster(const RealImage& img);
RealImage raster_channel(const RasterFile& raster, int channel = 0);

// 8-bit binary PGM (P5), maxval 255.
void write_pgm(const std::string& path, const RealImage& img);
RealImage read_pgm(const std::string& path);

// ---------------------------------------------------------------------------
// JSON configuration. Omitted fields take the bench defaults; unknown
// keys are rejected with their path, invariant violations are reported
// with the offending section.
// ---------------------------------------------------------------------------

SystemConfig system_config_from_json(const std::string& text);
SystemConfig load_system_config(const std::string& path);
std::string system_config_to_json(const SystemConfig& cfg);

std::vector<TechnologyEntry> technology_table_from_json(const std::string& text);
std::vector<TechnologyEntry> load_technology_table(const std::string& path);
std::vector<TechnologyEntry> default_technology_table();

// Content hashing for run manifests (FNV-1a 64).
uint64_t fnv1a(const void* data, size_t len);
uint64_t hash_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace aoff
