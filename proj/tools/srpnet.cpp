// srpnet: training, evaluation and analysis entry point.
//
// Exit codes: 0 success, 2 config/usage error, 3 data/checkpoint error,
// 4 numerical divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "srp/analysis.hpp"
#include "srp/checkpoint.hpp"
#include "srp/config.hpp"
#include "srp/data.hpp"
#include "srp/train.hpp"

namespace fs = std::filesystem;
using namespace srp;

namespace {

struct LoadedNet {
    RunConfig cfg;
    std::unique_ptr<ResNet<float>> net;
    std::array<float, 3> mean{0, 0, 0};
    std::array<float, 3> stdev{1, 1, 1};
};

LoadedNet load_net(const std::string& checkpoint_path) {
    LoadedNet out;
    CheckpointContent content = read_checkpoint(checkpoint_path);
    out.cfg = parse_run_config(content.config_text);
    out.net = std::make_unique<ResNet<float>>(out.cfg.net, out.cfg.train.seed);
    load_state(content, out.net->state_tensors());
    if (const auto* m = content.find("norm.mean"))
        for (int c = 0; c < 3; ++c) out.mean[c] = m->data[c];
    if (const auto* s = content.find("norm.std"))
        for (int c = 0; c < 3; ++c) out.stdev[c] = s->data[c];
    return out;
}

void normalize_with(Dataset& ds, const std::array<float, 3>& mean,
                    const std::array<float, 3>& stdev) {
    for (int i = 0; i < ds.count; ++i)
        for (int c = 0; c < kImageChannels; ++c) {
            float* plane = ds.image(i) + c * kImageSide * kImageSide;
            for (int p = 0; p < kImageSide * kImageSide; ++p)
                plane[p] = (plane[p] - mean[c]) / stdev[c];
        }
    ds.mean = mean;
    ds.stdev = stdev;
}

Dataset load_test_split(const std::string& data_dir, const LoadedNet& ln, int subset) {
    fs::path p = fs::path(data_dir) / "test_batch.bin";
    if (!fs::exists(p)) p = fs::path(data_dir) / "test.bin";
    if (!fs::exists(p)) throw IngestionError(data_dir + ": no test_batch.bin or test.bin found");
    Dataset ds = load_cifar_file(p.string(), subset);
    normalize_with(ds, ln.mean, ln.stdev);
    return ds;
}

Dataset load_image_file(const std::string& path, const LoadedNet& ln) {
    Dataset ds = load_cifar_file(path);
    normalize_with(ds, ln.mean, ln.stdev);
    return ds;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, std::int64_t seed_override) {
    RunConfig cfg = parse_run_config_file(config_path);
    if (seed_override >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_override);
    fs::create_directories(out_dir);

    CifarData data = load_cifar(data_dir, cfg.train.train_subset, cfg.train.test_subset);
    ResNet<float> net(cfg.net, cfg.train.seed);
    std::cerr << "training depth-" << cfg.net.depth << " net, "
              << net.parameter_count() << " parameters, " << data.train.count << " train / "
              << data.test.count << " test samples\n";
    TrainResult result = train(net, cfg.train, data.train, data.test, &std::cerr);

    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), result.metrics);
    auto tensors = net.state_tensors();
    auto mean_t = make_tensor<float>({3});
    auto std_t = make_tensor<float>({3});
    for (int c = 0; c < 3; ++c) {
        mean_t->data[c] = data.train.mean[c];
        std_t->data[c] = data.train.stdev[c];
    }
    tensors.emplace_back("norm.mean", mean_t);
    tensors.emplace_back("norm.std", std_t);
    save_checkpoint((fs::path(out_dir) / "checkpoint.srpc").string(), tensors, cfg.train.seed,
                    serialize_run_config(cfg));
    if (!result.metrics.empty())
        std::cout << "top1=" << result.metrics.back().test_acc << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic region pooling attention networks"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint_path, input_path, layer_name,
        branch = "residual", out_path, schedule = "linear";
    std::int64_t seed_override = -1;
    std::uint64_t seed = 1;
    int class_index = 0, image_index = 0, block_index = 0, count = 20;
    int height = 8, width = 8, regions = 5, trials = 10000, blocks = 6;
    int subset = 0, train_count = 5000, test_count = 1000, classes = 10;
    double lambda = 0.6;

    auto* tr = app.add_subcommand("train", "train a model from a flat key=value config");
    tr->add_option("--config", config_path, "config file")->required();
    tr->add_option("--data", data_dir, "CIFAR binary batch directory")->required();
    tr->add_option("--out", out_dir, "output directory (metrics.csv, checkpoint.srpc)")
        ->required();
    tr->add_option("--seed", seed_override, "override train.seed");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint, prints top1=<float>");
    ev->add_option("--checkpoint", checkpoint_path)->required();
    ev->add_option("--data", data_dir)->required();
    ev->add_option("--subset", subset, "evaluate only the first N test records");

    auto* gc = app.add_subcommand("gradcam", "emit a Grad-CAM heatmap as PPM");
    gc->add_option("--checkpoint", checkpoint_path)->required();
    gc->add_option("--input", input_path, "CIFAR binary batch file")->required();
    gc->add_option("--index", image_index, "record index within --input");
    gc->add_option("--class", class_index, "logit to attribute")->required();
    gc->add_option("--layer", layer_name, "conv layer name (default: last conv)");
    gc->add_option("--out", out_path, "output .ppm path")->required();

    auto* df = app.add_subcommand("dump-features", "emit a feature-map grid as PPM");
    df->add_option("--checkpoint", checkpoint_path)->required();
    df->add_option("--input", input_path)->required();
    df->add_option("--index", image_index);
    df->add_option("--block", block_index, "residual block index")->required();
    df->add_option("--branch", branch, "identity or residual");
    df->add_option("--count", count, "number of channels to tile");
    df->add_option("--out", out_path)->required();

    auto* ar = app.add_subcommand("area-ratio", "Monte-Carlo region area-ratio curve as CSV");
    ar->add_option("--height", height)->required();
    ar->add_option("--width", width)->required();
    ar->add_option("--lambda", lambda, "target scale ratio in (0,1]")->required();
    ar->add_option("--m", regions, "number of square regions")->required();
    ar->add_option("--trials", trials);
    ar->add_option("--blocks", blocks, "number of scheduled attention blocks");
    ar->add_option("--schedule", schedule, "linear or fixed");
    ar->add_option("--seed", seed);
    ar->add_option("--out", out_path)->required();

    auto* sd = app.add_subcommand("synth-data",
                                  "generate a synthetic CIFAR-format dataset fixture");
    sd->add_option("--out", out_dir)->required();
    sd->add_option("--train", train_count);
    sd->add_option("--test", test_count);
    sd->add_option("--classes", classes);
    sd->add_option("--seed", seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (tr->parsed()) return run_train(config_path, data_dir, out_dir, seed_override);
        if (ev->parsed()) {
            LoadedNet ln = load_net(checkpoint_path);
            Dataset test = load_test_split(data_dir, ln, subset);
            std::cout << "top1=" << evaluate(*ln.net, test) << "\n";
            return 0;
        }
        if (gc->parsed()) {
            LoadedNet ln = load_net(checkpoint_path);
            Dataset imgs = load_image_file(input_path, ln);
            if (image_index < 0 || image_index >= imgs.count)
                throw ConfigError("--index out of range");
            if (layer_name.empty()) layer_name = ln.net->conv_layer_names().back();
            Heatmap map = gradcam(*ln.net, imgs.image(image_index), class_index, layer_name);
            write_ppm_heat(out_path, map);
            return 0;
        }
        if (df->parsed()) {
            LoadedNet ln = load_net(checkpoint_path);
            Dataset imgs = load_image_file(input_path, ln);
            if (image_index < 0 || image_index >= imgs.count)
                throw ConfigError("--index out of range");
            GrayGrid grid =
                dump_feature_maps(*ln.net, imgs.image(image_index), block_index, branch, count);
            write_ppm_gray(out_path, grid.values, grid.rows * grid.tile_h,
                           grid.cols * grid.tile_w);
            return 0;
        }
        if (ar->parsed()) {
            SrpSchedule sched;
            if (schedule == "linear")
                sched = SrpSchedule::LinearDepth;
            else if (schedule == "fixed")
                sched = SrpSchedule::Fixed;
            else
                throw ConfigError("--schedule must be linear or fixed");
            if (!(lambda > 0.0 && lambda <= 1.0))
                throw ConfigError("--lambda must lie in (0,1], got " + std::to_string(lambda));
            auto rows =
                area_ratio_curve(height, width, lambda, regions, sched, blocks, trials, seed);
            write_area_ratio_csv(out_path, rows);
            return 0;
        }
        if (sd->parsed()) {
            write_synthetic_cifar(out_dir, train_count, test_count, seed, classes);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
