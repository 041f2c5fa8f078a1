#include "srp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "srp/optimizer.hpp"

namespace srp {

namespace {

// Fixed stream tags so every random consumer has its own keyspace.
constexpr std::uint64_t kShuffleTag = 0x5F1E;
constexpr std::uint64_t kAugmentTag = 0xA06;
constexpr std::uint64_t kMixupTag = 0x317B;

TensorPtr<float> batch_tensor(const std::vector<float>& pixels, int n) {
    return make_tensor<float>({n, kImageChannels, kImageSide, kImageSide}, pixels);
}

}  // namespace

TrainResult train(ResNet<float>& net, const TrainConfig& cfg, const Dataset& train_data,
                  const Dataset& test_data, std::ostream* log) {
    cfg.validate();
    const auto params = net.parameters();
    SgdNesterov<float> opt(static_cast<float>(cfg.lr), static_cast<float>(cfg.momentum),
                           static_cast<float>(cfg.weight_decay));

    std::vector<int> order(train_data.count);
    for (int i = 0; i < train_data.count; ++i) order[i] = i;

    TrainResult result;
    std::uint64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        opt.set_lr(static_cast<float>(cfg.lr_at(epoch)));

        RngStream shuffle_rng = make_stream(cfg.seed, kShuffleTag, epoch, 0);
        for (int i = train_data.count - 1; i > 0; --i)
            std::swap(order[i],
                      order[shuffle_rng.uniform_int(static_cast<std::uint32_t>(i + 1))]);

        double loss_sum = 0.0;
        std::int64_t seen = 0;
        for (int start = 0; start < train_data.count; start += cfg.batch) {
            const int n = std::min(cfg.batch, train_data.count - start);
            std::vector<float> pixels(static_cast<size_t>(n) * kImagePixels);
            std::vector<int> labels(n);
            for (int i = 0; i < n; ++i) {
                const int idx = order[start + i];
                labels[i] = train_data.labels[idx];
                RngStream aug_rng =
                    make_stream(cfg.seed, kAugmentTag, epoch, static_cast<std::uint64_t>(idx));
                augment(train_data.image(idx),
                        pixels.data() + static_cast<size_t>(i) * kImagePixels, aug_rng,
                        cfg.augment);
            }

            std::vector<int> labels_b = labels;
            float lam = 1.0f;
            if (cfg.mixup) {
                RngStream mix_rng = make_stream(cfg.seed, kMixupTag, epoch,
                                                static_cast<std::uint64_t>(start / cfg.batch));
                MixupBatch mixed = mixup(pixels, labels, kImagePixels, mix_rng, cfg.mixup_alpha);
                pixels = std::move(mixed.pixels);
                labels = std::move(mixed.labels_a);
                labels_b = std::move(mixed.labels_b);
                lam = mixed.lam;
            }

            try {
                Tape<float> tape;
                auto x = batch_tensor(pixels, n);
                SrpDrawCtx ctx{cfg.seed, 0, step};
                auto logits = net.forward(tape, x, Mode::Train, ctx);
                auto loss = softmax_xent_mix(tape, logits, labels, labels_b, lam);
                loss_sum += static_cast<double>(loss->data[0]) * n;
                seen += n;
                backward(tape, loss);
                opt.step(params);
            } catch (const NumericalError& e) {
                throw NumericalError("training diverged at step " + std::to_string(step) +
                                     ": " + e.what());
            }
            ++step;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
        m.test_acc = evaluate(net, test_data);
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.metrics.push_back(m);
        if (log) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "epoch %d: lr %.4g, train loss %.6f, test acc %.4f (%.1fs)", epoch,
                          cfg.lr_at(epoch), m.train_loss, m.test_acc, m.seconds);
            (*log) << buf << "\n" << std::flush;
        }
    }
    return result;
}

double evaluate(const ResNet<float>& net, const Dataset& data, int batch) {
    int correct = 0;
    SrpDrawCtx ctx{};
    for (int start = 0; start < data.count; start += batch) {
        const int n = std::min(batch, data.count - start);
        std::vector<float> pixels(data.pixels.begin() + static_cast<size_t>(start) * kImagePixels,
                                  data.pixels.begin() +
                                      static_cast<size_t>(start + n) * kImagePixels);
        Tape<float> tape;
        auto logits = net.forward(tape, batch_tensor(pixels, n), Mode::Eval, ctx);
        const int k = logits->dim(1);
        for (int i = 0; i < n; ++i) {
            const float* row = logits->data.data() + static_cast<size_t>(i) * k;
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            if (best == data.labels[start + i]) ++correct;
        }
    }
    return data.count > 0 ? static_cast<double>(correct) / data.count : 0.0;
}

std::vector<float> eval_logits(const ResNet<float>& net, const Dataset& data, int count) {
    const int n = std::min(count, data.count);
    std::vector<float> pixels(data.pixels.begin(),
                              data.pixels.begin() + static_cast<size_t>(n) * kImagePixels);
    Tape<float> tape;
    SrpDrawCtx ctx{};
    auto logits = net.forward(tape, batch_tensor(pixels, n), Mode::Eval, ctx);
    return logits->data;
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& metrics) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write " + path);
    out << "epoch,train_loss,test_acc,seconds\n";
    char buf[128];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.4f,%.3f\n", m.epoch, m.train_loss,
                      m.test_acc, m.seconds);
        out << buf;
    }
}

}  // namespace srp
