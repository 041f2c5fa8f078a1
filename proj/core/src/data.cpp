#include "srp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace srp {

Dataset load_cifar_file(const std::string& path, int subset_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::int64_t bytes = in.tellg();
    in.seekg(0);
    if (bytes == 0 || bytes % kRecordBytes != 0)
        throw IngestionError(path + ": file length " + std::to_string(bytes) +
                             " is not a multiple of the " + std::to_string(kRecordBytes) +
                             "-byte record size");
    int n = static_cast<int>(bytes / kRecordBytes);
    if (subset_size > 0) n = std::min(n, subset_size);

    Dataset ds;
    ds.count = n;
    ds.pixels.resize(static_cast<size_t>(n) * kImagePixels);
    ds.labels.resize(n);
    std::vector<unsigned char> rec(kRecordBytes);
    for (int i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(rec.data()), kRecordBytes);
        if (!in) throw IngestionError(path + ": short read at record " + std::to_string(i));
        ds.labels[i] = rec[0];
        float* img = ds.image(i);
        for (int p = 0; p < kImagePixels; ++p) img[p] = rec[1 + p] / 255.0f;
    }
    return ds;
}

void normalize_from(Dataset& reference, Dataset* other) {
    const std::int64_t per_channel =
        static_cast<std::int64_t>(reference.count) * kImageSide * kImageSide;
    for (int c = 0; c < kImageChannels; ++c) {
        double sum = 0, sq = 0;
        for (int i = 0; i < reference.count; ++i) {
            const float* plane = reference.image(i) + c * kImageSide * kImageSide;
            for (int p = 0; p < kImageSide * kImageSide; ++p) {
                sum += plane[p];
                sq += static_cast<double>(plane[p]) * plane[p];
            }
        }
        const double mean = sum / static_cast<double>(per_channel);
        double var = sq / static_cast<double>(per_channel) - mean * mean;
        if (var < 1e-12) var = 1e-12;
        reference.mean[c] = static_cast<float>(mean);
        reference.stdev[c] = static_cast<float>(std::sqrt(var));
    }
    auto apply = [&](Dataset& ds) {
        ds.mean = reference.mean;
        ds.stdev = reference.stdev;
        for (int i = 0; i < ds.count; ++i)
            for (int c = 0; c < kImageChannels; ++c) {
                float* plane = ds.image(i) + c * kImageSide * kImageSide;
                for (int p = 0; p < kImageSide * kImageSide; ++p)
                    plane[p] = (plane[p] - reference.mean[c]) / reference.stdev[c];
            }
    };
    if (other) apply(*other);
    apply(reference);
}

CifarData load_cifar(const std::string& dir, int train_subset, int test_subset) {
    if (!fs::is_directory(dir)) throw IngestionError(dir + " is not a directory");
    std::vector<std::string> train_files;
    for (int b = 1; b <= 6; ++b) {
        fs::path p = fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin");
        if (fs::exists(p)) train_files.push_back(p.string());
    }
    if (train_files.empty() && fs::exists(fs::path(dir) / "train.bin"))
        train_files.push_back((fs::path(dir) / "train.bin").string());
    if (train_files.empty())
        throw IngestionError(dir + ": no data_batch_*.bin or train.bin found");

    CifarData data;
    for (const auto& f : train_files) {
        int remaining = train_subset > 0 ? train_subset - data.train.count : 0;
        if (train_subset > 0 && remaining <= 0) break;
        Dataset part = load_cifar_file(f, train_subset > 0 ? remaining : 0);
        data.train.pixels.insert(data.train.pixels.end(), part.pixels.begin(),
                                 part.pixels.end());
        data.train.labels.insert(data.train.labels.end(), part.labels.begin(),
                                 part.labels.end());
        data.train.count += part.count;
    }

    fs::path test_path = fs::path(dir) / "test_batch.bin";
    if (!fs::exists(test_path)) test_path = fs::path(dir) / "test.bin";
    if (!fs::exists(test_path))
        throw IngestionError(dir + ": no test_batch.bin or test.bin found");
    data.test = load_cifar_file(test_path.string(), test_subset);

    normalize_from(data.train, &data.test);
    return data;
}

void augment(const float* src, float* dst, RngStream& rng, const AugmentFlags& flags) {
    const int S = kImageSide;
    int dy = 4, dx = 4;  // offsets into the padded frame; (4,4) = identity crop
    bool flip = false;
    if (flags.translate) {
        dy = static_cast<int>(rng.uniform_int(9));
        dx = static_cast<int>(rng.uniform_int(9));
    }
    if (flags.mirror) flip = rng.uniform_int(2) == 1;
    for (int c = 0; c < kImageChannels; ++c) {
        const float* in = src + c * S * S;
        float* out = dst + c * S * S;
        for (int i = 0; i < S; ++i) {
            const int si = i + dy - 4;
            for (int j = 0; j < S; ++j) {
                const int sj0 = j + dx - 4;
                const int sj = flip ? S - 1 - sj0 : sj0;
                out[i * S + j] =
                    (si >= 0 && si < S && sj >= 0 && sj < S) ? in[si * S + sj] : 0.0f;
            }
        }
    }
}

MixupBatch mixup(const std::vector<float>& pixels, const std::vector<int>& labels,
                 int pixels_per_image, RngStream& rng, double alpha) {
    const int n = static_cast<int>(labels.size());
    MixupBatch out;
    out.lam = static_cast<float>(rng.beta(alpha, alpha));
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint32_t>(i + 1))]);
    out.pixels.resize(pixels.size());
    out.labels_a = labels;
    out.labels_b.resize(n);
    for (int i = 0; i < n; ++i) {
        out.labels_b[i] = labels[perm[i]];
        const float* a = pixels.data() + static_cast<size_t>(i) * pixels_per_image;
        const float* b = pixels.data() + static_cast<size_t>(perm[i]) * pixels_per_image;
        float* d = out.pixels.data() + static_cast<size_t>(i) * pixels_per_image;
        for (int p = 0; p < pixels_per_image; ++p)
            d[p] = out.lam * a[p] + (1.0f - out.lam) * b[p];
    }
    return out;
}

namespace {

// Smooth low-frequency class template: sum of a few fixed sinusoids whose
// frequencies/phases are drawn per (class, channel).
void class_template(int cls, std::uint64_t seed, std::vector<float>& out) {
    out.assign(kImagePixels, 0.0f);
    RngStream rng = make_stream(seed, 0x7E41, 0, static_cast<std::uint64_t>(cls));
    for (int c = 0; c < kImageChannels; ++c) {
        float base = 0.3f + 0.4f * static_cast<float>(rng.uniform());
        for (int wave = 0; wave < 3; ++wave) {
            const double fx = 1.0 + rng.uniform_int(3);
            const double fy = 1.0 + rng.uniform_int(3);
            const double px = rng.uniform() * 6.2831853;
            const double py = rng.uniform() * 6.2831853;
            const double amp = 0.10 + 0.08 * rng.uniform();
            for (int i = 0; i < kImageSide; ++i)
                for (int j = 0; j < kImageSide; ++j) {
                    const double v = amp * std::sin(fy * i * 6.2831853 / kImageSide + py) *
                                     std::sin(fx * j * 6.2831853 / kImageSide + px);
                    out[(c * kImageSide + i) * kImageSide + j] += static_cast<float>(v);
                }
        }
        for (int p = 0; p < kImageSide * kImageSide; ++p)
            out[c * kImageSide * kImageSide + p] += base;
    }
}

void write_batch(const std::string& path, int count, std::uint64_t seed, std::uint64_t split,
                 int classes) {
    std::vector<std::vector<float>> templates(classes);
    for (int k = 0; k < classes; ++k) class_template(k, seed, templates[k]);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path);
    std::vector<unsigned char> rec(kRecordBytes);
    for (int i = 0; i < count; ++i) {
        RngStream rng = make_stream(seed, 0xDA7A, split, static_cast<std::uint64_t>(i));
        const int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(classes)));
        rec[0] = static_cast<unsigned char>(cls);
        for (int p = 0; p < kImagePixels; ++p) {
            const double v = templates[cls][p] + 0.12 * rng.normal();
            const double clamped = std::min(1.0, std::max(0.0, v));
            rec[1 + p] = static_cast<unsigned char>(std::lround(clamped * 255.0));
        }
        out.write(reinterpret_cast<const char*>(rec.data()), kRecordBytes);
    }
}

}  // namespace

void write_synthetic_cifar(const std::string& dir, int train_count, int test_count,
                           std::uint64_t seed, int classes) {
    fs::create_directories(dir);
    write_batch((fs::path(dir) / "data_batch_1.bin").string(), train_count, seed, 0, classes);
    write_batch((fs::path(dir) / "test_batch.bin").string(), test_count, seed, 1, classes);
}

}  // namespace srp
