#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srp/data.hpp"
#include "srp/resnet.hpp"

namespace srp {

/// One attention block's region-area statistics (Monte-Carlo over mask
/// draws; the SS column is the closed-form single-square ratio H'W'/(HW)).
struct AreaRatioRow {
    int block = 0;
    int height = 0, width = 0;
    double lambda = 1.0;
    double mean_ratio = 1.0;
    double p2_5 = 1.0;   // empirical 2.5th percentile
    double p97_5 = 1.0;  // empirical 97.5th percentile
    double ss_ratio = 1.0;
};

std::vector<AreaRatioRow> area_ratio_curve(const NetworkConfig& net_cfg,
                                           const SrpConfig& srp_cfg, int trials,
                                           std::uint64_t seed);

/// Standalone variant for explicit geometry: `blocks` attention blocks all
/// at the given feature-map size, lambda scheduled per block.
std::vector<AreaRatioRow> area_ratio_curve(int height, int width, double lambda_target, int m,
                                           SrpSchedule schedule, int blocks, int trials,
                                           std::uint64_t seed);

void write_area_ratio_csv(const std::string& path, const std::vector<AreaRatioRow>& rows);

struct Heatmap {
    int height = 0, width = 0;
    std::vector<float> values;  // in [0,1]
};

/// Grad-CAM for one image: alpha_k = spatial mean of d(logit)/dA_k,
/// L = relu(sum_k alpha_k A_k), bilinearly upsampled to the input size and
/// max-normalized (an all-zero map stays all-zero).
Heatmap gradcam(const ResNet<float>& net, const float* image, int class_index,
                const std::string& layer_name);

/// Grad-CAM core given an already-recorded forward pass: `act` is the conv
/// activation to attribute, `logits` the classifier output on the same tape.
Heatmap gradcam_from(Tape<float>& tape, const TensorPtr<float>& act,
                     const TensorPtr<float>& logits, int class_index, int out_h, int out_w);

struct GrayGrid {
    int rows = 0, cols = 0;
    int tile_h = 0, tile_w = 0;
    std::vector<float> values;  // (rows*tile_h) x (cols*tile_w), in [0,1]
};

/// First `count` channels of a block's identity or residual activation,
/// min-max normalized per channel (0.5 when the channel is constant).
GrayGrid dump_feature_maps(const ResNet<float>& net, const float* image, int block_index,
                           const std::string& branch, int count);

/// Mean cosine similarity over all column pairs of a rows x cols matrix.
double mean_pairwise_cosine(const std::vector<float>& z, int rows, int cols);

/// Mean pairwise cosine similarity between channel-descriptor columns over a
/// probe batch; the homogeneity diagnostic (reported, not gated).
double descriptor_similarity(const ResNet<float>& net, const Dataset& data, int probe_count,
                             int block_index);

/// Binary PPM (P6, maxval 255) emission. Heatmaps use a gray-to-red ramp,
/// grids plain grayscale.
void write_ppm_gray(const std::string& path, const std::vector<float>& values, int height,
                    int width);
void write_ppm_heat(const std::string& path, const Heatmap& map);

}  // namespace srp
