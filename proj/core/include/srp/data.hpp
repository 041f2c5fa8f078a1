#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "srp/rng.hpp"

namespace srp {

struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kImageSide = 32;
constexpr int kImageChannels = 3;
constexpr int kImagePixels = kImageChannels * kImageSide * kImageSide;  // 3072
constexpr int kRecordBytes = 1 + kImagePixels;                          // 3073

/// Labeled image set in channel-major float layout, normalized per channel.
struct Dataset {
    int count = 0;
    std::vector<float> pixels;  // count * 3072, (C,H,W) per image
    std::vector<int> labels;
    std::array<float, 3> mean{0, 0, 0};
    std::array<float, 3> stdev{1, 1, 1};

    const float* image(int i) const { return pixels.data() + static_cast<size_t>(i) * kImagePixels; }
    float* image(int i) { return pixels.data() + static_cast<size_t>(i) * kImagePixels; }
};

/// Reads one CIFAR binary batch file (3073-byte records: label byte then
/// R,G,B planes). Pixels scaled to [0,1], not yet normalized.
Dataset load_cifar_file(const std::string& path, int subset_size = 0);

/// Loads the train split (data_batch_*.bin, or train.bin) and test split
/// (test_batch.bin, or test.bin) from a directory. Normalization statistics
/// are computed from the loaded training subset and applied to both splits.
struct CifarData {
    Dataset train;
    Dataset test;
};
CifarData load_cifar(const std::string& dir, int train_subset = 0, int test_subset = 0);

/// Computes per-channel mean/std over a dataset and normalizes it in place.
void normalize_from(Dataset& reference, Dataset* other = nullptr);

struct AugmentFlags {
    bool translate = true;  // pad 4, random 32x32 crop
    bool mirror = true;     // horizontal flip with p = 1/2
};

/// Writes the augmented view of `src` (one 3x32x32 image) into `dst`.
/// With both flags off this is a plain copy and consumes no draws.
void augment(const float* src, float* dst, RngStream& rng, const AugmentFlags& flags);

/// One mixup draw over a batch: convex combination with a shuffled pairing,
/// lam ~ Beta(alpha, alpha) shared by the whole batch.
struct MixupBatch {
    std::vector<float> pixels;
    std::vector<int> labels_a;
    std::vector<int> labels_b;
    float lam = 1.0f;
};
MixupBatch mixup(const std::vector<float>& pixels, const std::vector<int>& labels,
                 int pixels_per_image, RngStream& rng, double alpha);

/// Synthetic CIFAR-format dataset with class-dependent structure, for use
/// where the real corpus is unavailable. Writes data_batch_1.bin and
/// test_batch.bin under `dir`.
void write_synthetic_cifar(const std::string& dir, int train_count, int test_count,
                           std::uint64_t seed, int classes = 10);

}  // namespace srp
