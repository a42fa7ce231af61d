#include "tmgan/cli_lib.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tmgan/checks.hpp"
#include "tmgan/common.hpp"
#include "tmgan/config.hpp"
#include "tmgan/image_io.hpp"
#include "tmgan/inference.hpp"
#include "tmgan/metrics.hpp"
#include "tmgan/precision.hpp"
#include "tmgan/synthdata.hpp"
#include "tmgan/trainer.hpp"

namespace tmgan {
namespace {

namespace fs = std::filesystem;

constexpr int kTextureBankDraws = 128;
constexpr int kTextureBankSide = 64;
constexpr const char* kManifestHeader = "index,split,phantom_seed,pair_seed,row,col";
constexpr const char* kMetricsHeader = "method,psnr_db,ssim,noise_std_hu,nps_distance_to_target";

// ---- small file and string helpers --------------------------------------

std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw ConfigError(std::string(what) + ": cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& text, const char* what) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), std::string(what) + ": cannot open '" + path + "' for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    require(f.good(), std::string(what) + ": write to '" + path + "' failed");
}

void ensure_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path))
        throw ConfigError(std::string(what) + ": '" + path + "' does not exist");
}

std::string zero_pad(int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", width, value);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::uint64_t field_u64(const std::string& v, const char* what) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(std::string(what) + ": bad numeric field '" + v + "'");
    return out;
}

int field_int(const std::string& v, const char* what) {
    int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(std::string(what) + ": bad numeric field '" + v + "'");
    return out;
}

Tensor squeeze_image(const Tensor& t) {
    Tensor out({t.dim(1), t.dim(2)});
    out.data = t.data;
    return out;
}

Tensor lift_patch(const Tensor& t) {
    Tensor out({1, t.dim(0), t.dim(1)});
    out.data = t.data;
    return out;
}

// All .txim files directly under a directory, in name order so runs are
// independent of directory enumeration order.
std::vector<std::string> txim_files_in(const std::string& dir, const char* what) {
    if (!fs::is_directory(dir))
        throw ConfigError(std::string(what) + ": '" + dir + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txim")
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ConfigError(std::string(what) + ": no .txim files under '" + dir + "'");
    return files;
}

// ---- gen-data ------------------------------------------------------------

struct GenDataOptions {
    std::string config_path, out_dir;
    bool force = false;
    int exams = 4;
    std::optional<std::uint64_t> seed;
};

int cmd_gen_data(const GenDataOptions& opt) {
    RunConfig cfg;
    if (!opt.config_path.empty()) cfg = RunConfig::load(opt.config_path);
    if (opt.seed) cfg.data_seed = *opt.seed;
    cfg.validate();

    const fs::path out(opt.out_dir);
    if (fs::exists(out) && !fs::is_empty(out) && !opt.force)
        throw ConfigError("gen-data: '" + opt.out_dir + "' is not empty (pass --force to overwrite)");
    fs::create_directories(out / "pairs");
    fs::create_directories(out / "texture");

    write_text_file((out / "config.txt").string(), cfg.render(), "gen-data");

    const DatasetConfig dc = cfg.dataset();

    // The phantoms behind the training patches, for reference and audits.
    for (int i = 0; i < dc.phantom_count; ++i) {
        PhantomImage ph =
            generate_phantom(phantom_seed_for(dc.seed, i), dc.phantom_h, dc.phantom_w, dc.n_shapes);
        write_image((out / ("phantom_" + zero_pad(i, 4) + ".txim")).string(),
                    {ph.pixels, dc.dy_mm, dc.dx_mm});
    }

    // Held-out exam images: phantoms past the training range, each with a
    // clean ground truth and two independently corrupted observations.
    for (int e = 0; e < opt.exams; ++e) {
        PhantomImage ph = generate_phantom(phantom_seed_for(dc.seed, dc.phantom_count + e),
                                           dc.phantom_h, dc.phantom_w, dc.n_shapes);
        ph.dy_mm = dc.dy_mm;
        ph.dx_mm = dc.dx_mm;
        const std::uint64_t exam_seed =
            Rng::stream(dc.seed, stream_key("exam_id"), static_cast<std::uint64_t>(e)).next_u64();
        ImagePair pair = make_pair(ph, dc.deform, dc.noise, exam_seed);
        const std::string stem = (out / ("exam_" + zero_pad(e, 4))).string();
        write_image(stem + "_clean.txim", {pair.clean, dc.dy_mm, dc.dx_mm});
        write_image(stem + "_y1.txim", {pair.y1, dc.dy_mm, dc.dx_mm});
        write_image(stem + "_y2.txim", {pair.y2, dc.dy_mm, dc.dx_mm});
    }

    // Patch dataset plus the manifest that makes it regenerable.
    Dataset ds = build_dataset(dc);
    std::string manifest = std::string(kManifestHeader) + "\n";
    const auto dump_split = [&](const char* split, const std::vector<PatchPair>& set) {
        for (std::size_t i = 0; i < set.size(); ++i) {
            const PatchPair& p = set[i];
            const std::string stem =
                (out / "pairs" / (std::string(split) + "_" + zero_pad(static_cast<int>(i), 5)))
                    .string();
            write_image(stem + "_x.txim", {squeeze_image(p.x), dc.dy_mm, dc.dx_mm});
            write_image(stem + "_y1.txim", {squeeze_image(p.y1), dc.dy_mm, dc.dx_mm});
            write_image(stem + "_y2.txim", {squeeze_image(p.y2), dc.dy_mm, dc.dx_mm});
            manifest += std::to_string(i) + "," + split + "," + std::to_string(p.phantom_seed) +
                        "," + std::to_string(p.pair_seed) + "," + std::to_string(p.row) + "," +
                        std::to_string(p.col) + "\n";
        }
    };
    dump_split("train", ds.train);
    dump_split("validation", ds.validation);
    write_text_file((out / "manifest.csv").string(), manifest, "gen-data");

    // Target texture bank for spectrum evaluation.
    const TextureSpec target = cfg.target();
    for (int i = 0; i < kTextureBankDraws; ++i)
        write_image((out / "texture" / ("target_" + zero_pad(i, 4) + ".txim")).string(),
                    {sample_texture(target, kTextureBankSide, kTextureBankSide,
                                    static_cast<std::uint64_t>(i)),
                     dc.dy_mm, dc.dx_mm});

    std::cout << "gen-data: wrote " << dc.phantom_count << " phantoms, " << opt.exams
              << " exams, " << ds.train.size() + ds.validation.size() << " patch pairs, and "
              << kTextureBankDraws << " target textures under " << opt.out_dir << "\n";
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainOptions {
    std::string data_dir, config_path, out_path, log_path;
    std::string mode = "tmgan";
    std::optional<std::uint64_t> seed;
    std::string precision;
};

Dataset load_dataset_files(const std::string& data_dir) {
    const fs::path dir(data_dir);
    if (!fs::is_regular_file(dir / "manifest.csv"))
        throw ConfigError("train: no manifest.csv under '" + data_dir + "' (run gen-data first)");

    std::istringstream lines(read_text_file((dir / "manifest.csv").string(), "train"));
    std::string line;
    if (!std::getline(lines, line) || line != kManifestHeader)
        throw ConfigError("train: manifest header mismatch in '" + data_dir + "'");

    Dataset ds;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_fields(line);
        if (f.size() != 6) throw ConfigError("train: malformed manifest row '" + line + "'");
        PatchPair p;
        p.phantom_seed = field_u64(f[2], "train");
        p.pair_seed = field_u64(f[3], "train");
        p.row = field_int(f[4], "train");
        p.col = field_int(f[5], "train");
        const std::string stem =
            (dir / "pairs" / (f[1] + "_" + zero_pad(field_int(f[0], "train"), 5))).string();
        ensure_file(stem + "_x.txim", "train");
        p.x = lift_patch(read_image(stem + "_x.txim").pixels);
        p.y1 = lift_patch(read_image(stem + "_y1.txim").pixels);
        p.y2 = lift_patch(read_image(stem + "_y2.txim").pixels);
        if (f[1] == "train")
            ds.train.push_back(std::move(p));
        else if (f[1] == "validation")
            ds.validation.push_back(std::move(p));
        else
            throw ConfigError("train: unknown split '" + f[1] + "' in the manifest");
    }
    if (ds.train.empty() || ds.validation.empty())
        throw ConfigError("train: manifest lists an empty train or validation split");
    return ds;
}

template <typename T>
int run_training(const RunConfig& cfg, const Dataset& ds, const TrainOptions& opt) {
    const TrainConfig tc = cfg.train();
    TrainStateT<T> state =
        init_train_state<T>(cfg.arch(), tc.seed, GammaParamT<T>{T(0), cfg.gamma_learnable});
    TrainingLog log = train<T>(tc, ds.train, ds.validation, state);
    save_checkpoint(state, tc, opt.out_path);
    log.write_csv(opt.log_path.empty() ? opt.out_path + ".log.csv" : opt.log_path);

    std::cout << "train: " << log.records.size() << " updates done; validation mse "
              << format_number(validation_mse(state.gen, ds.validation))
              << " against identity baseline " << format_number(identity_mse(ds.validation))
              << "\n";
    return 0;
}

int cmd_train(const TrainOptions& opt) {
    if (!fs::is_regular_file(fs::path(opt.data_dir) / "manifest.csv"))
        throw ConfigError("train: no manifest.csv under '" + opt.data_dir +
                          "' (run gen-data first)");
    const std::string config_path = opt.config_path.empty()
                                        ? (fs::path(opt.data_dir) / "config.txt").string()
                                        : opt.config_path;
    RunConfig cfg = RunConfig::load(config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (!opt.precision.empty()) {
        try {
            cfg.precision = precision_from_name(opt.precision);
        } catch (const Error& e) {
            throw ConfigError(std::string("train: ") + e.what());
        }
    }
    if (opt.mode == "br")
        cfg.lambda = 0.0;  // the bias-reducing companion drops the adversary
    else if (opt.mode != "tmgan")
        throw ConfigError("train: --mode must be tmgan or br, got '" + opt.mode + "'");
    cfg.validate();

    Dataset ds = load_dataset_files(opt.data_dir);
    if (static_cast<std::size_t>(cfg.batch_size) > ds.train.size())
        throw ConfigError("train: batch size " + std::to_string(cfg.batch_size) + " exceeds the " +
                          std::to_string(ds.train.size()) + " training patches");

    if (cfg.precision == Precision::train32) return run_training<float>(cfg, ds, opt);
    return run_training<double>(cfg, ds, opt);
}

// ---- enhance -------------------------------------------------------------

struct EnhanceOptions {
    std::string tmgan_path, br_path, in_path, out_path;
    std::optional<double> eta;
};

template <typename T>
int run_enhance(const EnhanceOptions& opt) {
    CheckpointT<T> tm = load_checkpoint<T>(opt.tmgan_path);
    const double eta = opt.eta ? *opt.eta : tm.config.eta;
    if (eta < 0.0 || eta > 1.0)
        throw ConfigError("enhance: eta must lie in [0, 1], got " + format_number(eta));

    const ImageData in = read_image(opt.in_path);
    const TensorT<T> y = cast_tensor<T>(in.pixels);
    TensorT<T> result = enhance(tm.state.gen, y);
    if (eta < 1.0) {
        if (opt.br_path.empty())
            throw ConfigError("enhance: eta " + format_number(eta) +
                              " blends with the bias-reducing output; pass --br CHECKPOINT");
        CheckpointT<T> br = load_checkpoint<T>(opt.br_path);
        result = blend(result, enhance(br.state.gen, y), eta);
    }

    // Output precision follows the model's: a train32 checkpoint computed
    // in single precision, so its file records exactly those values.
    write_image(opt.out_path, {cast_tensor<double>(result), in.dy_mm, in.dx_mm},
                static_cast<int>(sizeof(T)));
    std::cout << "enhance: wrote " << opt.out_path << " at eta " << format_number(eta) << "\n";
    return 0;
}

int cmd_enhance(const EnhanceOptions& opt) {
    ensure_file(opt.tmgan_path, "enhance");
    ensure_file(opt.in_path, "enhance");
    const int elem = checkpoint_element_size(opt.tmgan_path);
    if (!opt.br_path.empty()) {
        ensure_file(opt.br_path, "enhance");
        if (checkpoint_element_size(opt.br_path) != elem)
            throw ConfigError("enhance: the two checkpoints disagree on element width");
    }
    if (elem == 4) return run_enhance<float>(opt);
    return run_enhance<double>(opt);
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateOptions {
    std::string method, rois_dir, target_dir, out_csv;
    std::vector<std::string> in_paths, truth_paths;
    int roi = 64;
    double peak = 3000.0;
};

int cmd_evaluate(const EvaluateOptions& opt) {
    if (opt.method.empty()) throw ConfigError("evaluate: --method must not be empty");
    for (char c : opt.method)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
            throw ConfigError("evaluate: method label '" + opt.method +
                              "' may use only letters, digits, '_', '-', '.'");
    if (opt.in_paths.empty() || opt.in_paths.size() != opt.truth_paths.size())
        throw ConfigError("evaluate: --in and --truth must list the same nonzero number of files");
    if (opt.roi < 16 || (opt.roi & (opt.roi - 1)) != 0)
        throw ConfigError("evaluate: --roi must be a power of two no smaller than 16, got " +
                          std::to_string(opt.roi));
    if (!(opt.peak > 0.0)) throw ConfigError("evaluate: --peak must be positive");

    double psnr_acc = 0.0, ssim_acc = 0.0;
    std::vector<Tensor> method_rois;
    double roi_dy = 0.0, roi_dx = 0.0;
    for (std::size_t i = 0; i < opt.in_paths.size(); ++i) {
        ensure_file(opt.in_paths[i], "evaluate");
        ensure_file(opt.truth_paths[i], "evaluate");
        const ImageData enhanced = read_image(opt.in_paths[i]);
        const ImageData truth = read_image(opt.truth_paths[i]);
        if (!enhanced.pixels.same_shape(truth.pixels))
            throw ConfigError("evaluate: '" + opt.in_paths[i] + "' and '" + opt.truth_paths[i] +
                              "' differ in shape");
        psnr_acc += psnr(enhanced.pixels, truth.pixels, opt.peak);
        ssim_acc += ssim(enhanced.pixels, truth.pixels, opt.peak);

        if (opt.rois_dir.empty()) {
            // Texture ROIs: non-overlapping tiles of the error field.
            const int h = enhanced.pixels.dim(0), w = enhanced.pixels.dim(1);
            if (h < opt.roi || w < opt.roi)
                throw ConfigError("evaluate: '" + opt.in_paths[i] + "' is smaller than the " +
                                  std::to_string(opt.roi) + "-pixel ROI tile");
            for (int r0 = 0; r0 + opt.roi <= h; r0 += opt.roi)
                for (int c0 = 0; c0 + opt.roi <= w; c0 += opt.roi) {
                    Tensor tile({opt.roi, opt.roi});
                    for (int r = 0; r < opt.roi; ++r)
                        for (int c = 0; c < opt.roi; ++c)
                            tile.at2(r, c) = enhanced.pixels.at2(r0 + r, c0 + c) -
                                             truth.pixels.at2(r0 + r, c0 + c);
                    method_rois.push_back(std::move(tile));
                }
            roi_dy = enhanced.dy_mm;
            roi_dx = enhanced.dx_mm;
        }
    }

    if (!opt.rois_dir.empty()) {
        for (const std::string& path : txim_files_in(opt.rois_dir, "evaluate")) {
            const ImageData r = read_image(path);
            if (!method_rois.empty() && !r.pixels.same_shape(method_rois.front()))
                throw ConfigError("evaluate: ROI files under '" + opt.rois_dir +
                                  "' differ in shape");
            roi_dy = r.dy_mm;
            roi_dx = r.dx_mm;
            method_rois.push_back(r.pixels);
        }
    }
    if (method_rois.size() < 2)
        throw ConfigError("evaluate: need at least two noise ROIs for a spectrum");

    double std_acc = 0.0;
    for (const Tensor& roi : method_rois) std_acc += noise_std(roi);
    const double noise_std_hu = std_acc / static_cast<double>(method_rois.size());

    std::vector<Tensor> bank;
    double bank_dy = 0.0, bank_dx = 0.0;
    for (const std::string& path : txim_files_in(opt.target_dir, "evaluate")) {
        const ImageData t = read_image(path);
        if (!bank.empty() && !t.pixels.same_shape(bank.front()))
            throw ConfigError("evaluate: target bank files under '" + opt.target_dir +
                              "' differ in shape");
        bank_dy = t.dy_mm;
        bank_dx = t.dx_mm;
        bank.push_back(t.pixels);
    }

    // The target curve is sampled on the method curve's frequency grid so
    // the distance compares like bins even when tile sizes differ.  A noise
    // field that is exactly zero has no spectrum shape to compare, so its
    // distance column reads nan rather than a fabricated number.
    const NPSCurve method_curve = nps_radial(method_rois, roi_dy, roi_dx);
    const NPSCurve target_curve = nps_radial(bank, bank_dy, bank_dx,
                                             static_cast<int>(method_curve.bin_centers.size()));
    const double distance = method_curve.total_power == 0.0
                                ? std::numeric_limits<double>::quiet_NaN()
                                : nps_distance(method_curve, target_curve);

    const double count = static_cast<double>(opt.in_paths.size());
    const double psnr_db = psnr_acc / count;
    const double ssim_mean = ssim_acc / count;

    // Metrics table: append below an existing header so a sweep can build
    // one table across invocations.
    std::string table;
    if (fs::exists(opt.out_csv)) {
        table = read_text_file(opt.out_csv, "evaluate");
        const std::size_t eol = table.find('\n');
        if (table.substr(0, eol) != kMetricsHeader)
            throw ConfigError("evaluate: '" + opt.out_csv + "' does not start with the metrics header");
        if (!table.empty() && table.back() != '\n') table += '\n';
    } else {
        table = std::string(kMetricsHeader) + "\n";
    }
    table += opt.method + "," + format_number(psnr_db) + "," + format_number(ssim_mean) + "," +
             format_number(noise_std_hu) + "," + format_number(distance) + "\n";
    write_text_file(opt.out_csv, table, "evaluate");

    // Per-method and target NPS curves for external plotting.
    const fs::path out(opt.out_csv);
    const auto write_curve = [&out](const NPSCurve& curve, const std::string& label) {
        std::string csv = "frequency_cycles_per_mm,power_hu2_mm2\n";
        for (std::size_t b = 0; b < curve.bin_centers.size(); ++b)
            csv += format_number(curve.bin_centers[b]) + "," + format_number(curve.power[b]) + "\n";
        const fs::path path =
            out.parent_path() / (out.stem().string() + "_nps_" + label + ".csv");
        write_text_file(path.string(), csv, "evaluate");
    };
    write_curve(method_curve, opt.method);
    write_curve(target_curve, "target");

    std::cout << "evaluate: " << opt.method << " psnr " << format_number(psnr_db) << " dB, ssim "
              << format_number(ssim_mean) << ", noise std " << format_number(noise_std_hu)
              << " HU, nps distance " << format_number(distance) << "\n";
    return 0;
}

// ---- check ---------------------------------------------------------------

int cmd_check(const std::string& suite) {
    const CheckReport report = check_suite(suite);
    std::cout << report.to_text();
    if (!report.all_passed()) {
        std::cout << "check: suite '" << suite << "' has failures\n";
        return 3;
    }
    std::cout << "check: all " << report.results.size() << " checks passed\n";
    return 0;
}

// ---- wiring --------------------------------------------------------------

int dispatch(int argc, char** argv) {
    CLI::App app{"Siamese texture-matching image enhancement pipeline"};
    app.require_subcommand(1);

    GenDataOptions gen_opt;
    CLI::App* gen_cmd = app.add_subcommand(
        "gen-data", "Generate phantoms, patch pairs, held-out exams, and the target texture bank");
    gen_cmd->add_option("--config", gen_opt.config_path, "Run configuration file");
    gen_cmd->add_option("--out", gen_opt.out_dir, "Output directory")->required();
    gen_cmd->add_flag("--force", gen_opt.force, "Overwrite a non-empty output directory");
    gen_cmd->add_option("--exams", gen_opt.exams, "Held-out exam count (default 4)")
        ->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen_opt.seed, "Override the dataset seed");

    TrainOptions train_opt;
    CLI::App* train_cmd =
        app.add_subcommand("train", "Train the enhancement model on a generated dataset");
    train_cmd->add_option("--data", train_opt.data_dir, "Dataset directory from gen-data")
        ->required();
    train_cmd->add_option("--config", train_opt.config_path,
                          "Run configuration (default: the dataset's config.txt)");
    train_cmd->add_option("--out", train_opt.out_path, "Checkpoint output path")->required();
    train_cmd->add_option("--log", train_opt.log_path, "Training log CSV (default: OUT.log.csv)");
    train_cmd->add_option("--mode", train_opt.mode, "tmgan, or br for the lambda = 0 companion")
        ->check(CLI::IsMember({"tmgan", "br"}));
    train_cmd->add_option("--seed", train_opt.seed, "Override the training seed");
    train_cmd->add_option("--precision", train_opt.precision, "train32 or test64");

    EnhanceOptions enh_opt;
    CLI::App* enh_cmd = app.add_subcommand(
        "enhance", "Run a checkpoint on an image, blending with the bias-reducing companion");
    enh_cmd->add_option("--tmgan", enh_opt.tmgan_path, "Adversarially trained checkpoint")
        ->required();
    enh_cmd->add_option("--br", enh_opt.br_path, "Bias-reducing companion checkpoint");
    enh_cmd->add_option("--eta", enh_opt.eta,
                        "Blend weight toward the adversarial output (default: checkpoint value)");
    enh_cmd->add_option("--in", enh_opt.in_path, "Input image")->required();
    enh_cmd->add_option("--out", enh_opt.out_path, "Output image")->required();

    EvaluateOptions eval_opt;
    CLI::App* eval_cmd = app.add_subcommand(
        "evaluate", "Score enhanced images against ground truth and the target texture");
    eval_cmd->add_option("--method", eval_opt.method, "Row label for the metrics table")
        ->required();
    eval_cmd->add_option("--in", eval_opt.in_paths, "Enhanced image (repeatable)")->required();
    eval_cmd->add_option("--truth", eval_opt.truth_paths, "Matching ground truth (repeatable)")
        ->required();
    eval_cmd->add_option("--rois", eval_opt.rois_dir,
                         "Directory of precut noise ROIs (default: tiles of in minus truth)");
    eval_cmd->add_option("--target", eval_opt.target_dir, "Target texture bank directory")
        ->required();
    eval_cmd->add_option("--out", eval_opt.out_csv, "Metrics CSV path")->required();
    eval_cmd->add_option("--roi", eval_opt.roi, "ROI tile side in pixels (power of two)");
    eval_cmd->add_option("--peak", eval_opt.peak, "Peak signal for PSNR and the SSIM range");

    std::string suite = "all";
    CLI::App* check_cmd = app.add_subcommand("check", "Run the self-check suites");
    check_cmd->add_option("suite", suite, "grad, theorem, nps, or all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (app.got_subcommand(gen_cmd)) return cmd_gen_data(gen_opt);
    if (app.got_subcommand(train_cmd)) return cmd_train(train_opt);
    if (app.got_subcommand(enh_cmd)) return cmd_enhance(enh_opt);
    if (app.got_subcommand(eval_cmd)) return cmd_evaluate(eval_opt);
    if (app.got_subcommand(check_cmd)) return cmd_check(suite);
    return 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("tmgan");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(full.size());
    for (std::string& s : full) argv.push_back(s.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tmgan
