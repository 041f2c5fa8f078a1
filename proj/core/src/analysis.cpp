#include "srp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace srp {

namespace {

AreaRatioRow block_row(int block, int h, int w, double lambda_target, int m,
                       SrpSchedule schedule, int total_blocks, int trials, std::uint64_t seed) {
    AreaRatioRow row;
    row.block = block;
    row.height = h;
    row.width = w;
    row.lambda = scheduled_lambda(block, total_blocks, lambda_target, schedule);
    auto [hp, wp] = region_dims(h, w, row.lambda);
    row.ss_ratio = static_cast<double>(hp) * wp / (static_cast<double>(h) * w);

    std::vector<double> ratios(static_cast<size_t>(trials));
    double sum = 0.0;
    for (int t = 0; t < trials; ++t) {
        RngStream rng = make_stream(seed, static_cast<std::uint64_t>(block), 0,
                                    static_cast<std::uint64_t>(t));
        auto pos = sample_positions(rng, h, w, hp, wp, m);
        const RegionMask mask = build_union_mask(pos, hp, wp, h, w);
        ratios[t] = area_ratio(mask);
        sum += ratios[t];
    }
    std::sort(ratios.begin(), ratios.end());
    auto pct = [&](double q) {
        const double pos_idx = q * (trials - 1);
        const size_t lo = static_cast<size_t>(pos_idx);
        const size_t hi = std::min(lo + 1, ratios.size() - 1);
        const double frac = pos_idx - static_cast<double>(lo);
        return ratios[lo] * (1.0 - frac) + ratios[hi] * frac;
    };
    row.mean_ratio = sum / trials;
    row.p2_5 = pct(0.025);
    row.p97_5 = pct(0.975);
    return row;
}

}  // namespace

std::vector<AreaRatioRow> area_ratio_curve(const NetworkConfig& net_cfg,
                                           const SrpConfig& srp_cfg, int trials,
                                           std::uint64_t seed) {
    srp_cfg.validate();
    const int n = net_cfg.blocks_per_stage();
    const int total = net_cfg.total_attention_blocks();
    std::vector<AreaRatioRow> rows;
    for (int block = 0; block < total; ++block) {
        const int stage = block / n;
        const int side = kImageSide >> stage;
        rows.push_back(block_row(block, side, side, srp_cfg.lambda_target,
                                 srp_cfg.effective_regions(), srp_cfg.schedule, total, trials,
                                 seed));
    }
    return rows;
}

std::vector<AreaRatioRow> area_ratio_curve(int height, int width, double lambda_target, int m,
                                           SrpSchedule schedule, int blocks, int trials,
                                           std::uint64_t seed) {
    std::vector<AreaRatioRow> rows;
    for (int block = 0; block < blocks; ++block)
        rows.push_back(
            block_row(block, height, width, lambda_target, m, schedule, blocks, trials, seed));
    return rows;
}

void write_area_ratio_csv(const std::string& path, const std::vector<AreaRatioRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path);
    out << "block,height,width,lambda,mean_ratio,p2_5,p97_5,ss_ratio\n";
    char buf[192];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.block,
                      r.height, r.width, r.lambda, r.mean_ratio, r.p2_5, r.p97_5, r.ss_ratio);
        out << buf;
    }
}

namespace {

TensorPtr<float> single_image_tensor(const float* image) {
    std::vector<float> pix(image, image + kImagePixels);
    return make_tensor<float>({1, kImageChannels, kImageSide, kImageSide}, std::move(pix));
}

std::vector<float> bilinear_upsample(const std::vector<float>& src, int h, int w, int oh,
                                     int ow) {
    std::vector<float> dst(static_cast<size_t>(oh) * ow);
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int i = 0; i < oh; ++i) {
        double fy = (i + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int j = 0; j < ow; ++j) {
            double fx = (j + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            const double top = src[y0 * w + x0] * (1 - wx) + src[y0 * w + x1] * wx;
            const double bot = src[y1 * w + x0] * (1 - wx) + src[y1 * w + x1] * wx;
            dst[static_cast<size_t>(i) * ow + j] = static_cast<float>(top * (1 - wy) + bot * wy);
        }
    }
    return dst;
}

}  // namespace

Heatmap gradcam_from(Tape<float>& tape, const TensorPtr<float>& act,
                     const TensorPtr<float>& logits, int class_index, int out_h, int out_w) {
    if (class_index < 0 || class_index >= logits->dim(1))
        throw ConfigError("class index out of range");
    std::vector<float> seed(logits->numel(), 0.0f);
    seed[class_index] = 1.0f;
    backward_from(tape, logits, seed);

    const int K = act->dim(1), h = act->dim(2), w = act->dim(3);
    const int hw = h * w;
    std::vector<float> cam(static_cast<size_t>(hw), 0.0f);
    for (int k = 0; k < K; ++k) {
        float alpha = 0.0f;
        const float* g = act->grad.data() + static_cast<size_t>(k) * hw;
        for (int p = 0; p < hw; ++p) alpha += g[p];
        alpha /= static_cast<float>(hw);
        const float* a = act->data.data() + static_cast<size_t>(k) * hw;
        for (int p = 0; p < hw; ++p) cam[p] += alpha * a[p];
    }
    for (float& v : cam) v = std::max(v, 0.0f);

    Heatmap map;
    map.height = out_h;
    map.width = out_w;
    map.values = bilinear_upsample(cam, h, w, out_h, out_w);
    float mx = 0.0f;
    for (float v : map.values) mx = std::max(mx, v);
    if (mx > 0.0f)
        for (float& v : map.values) v /= mx;
    return map;
}

Heatmap gradcam(const ResNet<float>& net, const float* image, int class_index,
                const std::string& layer_name) {
    Tape<float> tape;
    Probe<float> probe;
    SrpDrawCtx ctx{};
    auto x = single_image_tensor(image);
    auto logits = net.forward(tape, x, Mode::Eval, ctx, &probe);
    auto it = probe.activations.find(layer_name);
    if (it == probe.activations.end() || it->second->rank() != 4)
        throw ConfigError("unknown conv layer '" + layer_name + "'");
    return gradcam_from(tape, it->second, logits, class_index, kImageSide, kImageSide);
}

GrayGrid dump_feature_maps(const ResNet<float>& net, const float* image, int block_index,
                           const std::string& branch, int count) {
    if (branch != "identity" && branch != "residual")
        throw ConfigError("branch must be 'identity' or 'residual', got '" + branch + "'");
    const auto& blocks = net.blocks();
    if (block_index < 0 || block_index >= static_cast<int>(blocks.size()))
        throw ConfigError("block index out of range");
    Tape<float> tape;
    Probe<float> probe;
    SrpDrawCtx ctx{};
    net.forward(tape, single_image_tensor(image), Mode::Eval, ctx, &probe);
    auto act = probe.activations.at(blocks[block_index].name + "." + branch);

    const int C = act->dim(1), h = act->dim(2), w = act->dim(3);
    count = std::min(count, C);
    if (count < 1) throw ConfigError("count must be >= 1");
    GrayGrid grid;
    grid.tile_h = h;
    grid.tile_w = w;
    grid.cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    grid.rows = (count + grid.cols - 1) / grid.cols;
    grid.values.assign(static_cast<size_t>(grid.rows) * h * grid.cols * w, 0.0f);
    for (int c = 0; c < count; ++c) {
        const float* a = act->data.data() + static_cast<size_t>(c) * h * w;
        float lo = a[0], hi = a[0];
        for (int p = 1; p < h * w; ++p) {
            lo = std::min(lo, a[p]);
            hi = std::max(hi, a[p]);
        }
        const int tr = c / grid.cols, tc = c % grid.cols;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const float v =
                    (hi > lo) ? (a[i * w + j] - lo) / (hi - lo) : 0.5f;
                grid.values[(static_cast<size_t>(tr) * h + i) * (grid.cols * w) + tc * w + j] =
                    v;
            }
    }
    return grid;
}

double mean_pairwise_cosine(const std::vector<float>& z, int rows, int cols) {
    auto col_dot = [&](int c1, int c2) {
        double s = 0;
        for (int i = 0; i < rows; ++i)
            s += static_cast<double>(z[static_cast<size_t>(i) * cols + c1]) *
                 z[static_cast<size_t>(i) * cols + c2];
        return s;
    };
    double total = 0.0;
    int pairs = 0;
    for (int c1 = 0; c1 < cols; ++c1)
        for (int c2 = c1 + 1; c2 < cols; ++c2) {
            const double denom = std::sqrt(col_dot(c1, c1)) * std::sqrt(col_dot(c2, c2));
            total += denom > 0 ? col_dot(c1, c2) / denom : 0.0;
            ++pairs;
        }
    return pairs > 0 ? total / pairs : 0.0;
}

double descriptor_similarity(const ResNet<float>& net, const Dataset& data, int probe_count,
                             int block_index) {
    const auto& blocks = net.blocks();
    if (block_index < 0 || block_index >= static_cast<int>(blocks.size()))
        throw ConfigError("block index out of range");
    const int n = std::min(probe_count, data.count);
    std::vector<float> pixels(data.pixels.begin(),
                              data.pixels.begin() + static_cast<size_t>(n) * kImagePixels);
    Tape<float> tape;
    Probe<float> probe;
    SrpDrawCtx ctx{};
    net.forward(tape,
                make_tensor<float>({n, kImageChannels, kImageSide, kImageSide},
                                   std::move(pixels)),
                Mode::Eval, ctx, &probe);
    auto act = probe.activations.at(blocks[block_index].name + ".residual");

    // Descriptor z: (N,C) global average pool of the residual activation;
    // channel columns compared across the probe batch.
    Tape<float> pool_tape;
    auto z = gap(pool_tape, act);
    return mean_pairwise_cosine(z->data, n, z->dim(1));
}

void write_ppm_gray(const std::string& path, const std::vector<float>& values, int height,
                    int width) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    for (float v : values) {
        const float c = std::min(1.0f, std::max(0.0f, v));
        const unsigned char b = static_cast<unsigned char>(std::lround(c * 255.0f));
        const unsigned char px[3] = {b, b, b};
        out.write(reinterpret_cast<const char*>(px), 3);
    }
}

void write_ppm_heat(const std::string& path, const Heatmap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path);
    out << "P6\n" << map.width << " " << map.height << "\n255\n";
    for (float v : map.values) {
        const float c = std::min(1.0f, std::max(0.0f, v));
        // gray (128,128,128) at 0 ramping to pure red at 1
        const unsigned char px[3] = {
            static_cast<unsigned char>(std::lround(128.0f + 127.0f * c)),
            static_cast<unsigned char>(std::lround(128.0f * (1.0f - c))),
            static_cast<unsigned char>(std::lround(128.0f * (1.0f - c)))};
        out.write(reinterpret_cast<const char*>(px), 3);
    }
}

}  // namespace srp
