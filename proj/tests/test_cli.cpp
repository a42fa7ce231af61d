#include <doctest.h>

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tmgan/config.hpp"
#include "tmgan/image_io.hpp"
#include "tmgan/inference.hpp"
#include "tmgan/synthdata.hpp"
#include "tmgan/trainer.hpp"

using namespace tmgan;
namespace fs = std::filesystem;

namespace {

// One scratch workspace for the whole suite, rebuilt on entry so reruns
// start clean. Doctest runs cases in declaration order within a suite, and
// the later cases build on artifacts the earlier ones produced.
const fs::path& workspace() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "tmgan_cli_suite";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

struct RunResult {
    int code = -1;
    std::string output;  // stdout and stderr interleaved
};

RunResult run_tool(const std::string& args) {
    const std::string capture = (workspace() / "capture.txt").string();
    const std::string cmd = std::string(TMGAN_BIN_PATH) + " " + args + " > " + capture + " 2>&1";
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    REQUIRE(WIFEXITED(raw));
    return {WEXITSTATUS(raw), slurp(capture)};
}

std::string tiny_config_text() {
    RunConfig cfg;
    cfg.set("phantom_count", "2");
    cfg.set("phantom_h", "64");
    cfg.set("phantom_w", "64");
    cfg.set("pairs_per_phantom", "24");
    cfg.set("patch_size", "16");
    cfg.set("split_fraction", "0.9");
    cfg.set("target_kind", "low_pass");
    cfg.set("target_sigma_px", "1");
    cfg.set("arch_depth", "3");
    cfg.set("arch_width", "4");
    cfg.set("total_updates", "3");
    cfg.set("batch_size", "8");
    return cfg.render();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0, comma = 0;
    while ((comma = line.find(',', start)) != std::string::npos) {
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    out.push_back(line.substr(start));
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0, nl = 0;
    while ((nl = text.find('\n', start)) != std::string::npos) {
        out.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    if (start < text.size()) out.push_back(text.substr(start));
    return out;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("usage errors exit with the usage code") {
        CHECK(run_tool("").code == 1);
        CHECK(run_tool("check knitting").code == 1);
        CHECK(run_tool("frobnicate").code == 1);
        const RunResult missing = run_tool("train --data nowhere --out x.ckpt");
        CHECK(missing.code == 1);
        CHECK(missing.output.find("gen-data first") != std::string::npos);
    }

    TEST_CASE("the fast self-check suite passes through the tool") {
        const RunResult r = run_tool("check grad");
        CHECK(r.code == 0);
        CHECK(r.output.find("[PASS]") != std::string::npos);
        CHECK(r.output.find("[FAIL]") == std::string::npos);
    }

    TEST_CASE("gen-data writes a complete, regenerable dataset") {
        const fs::path ws = workspace();
        {
            std::ofstream f(ws / "run.cfg");
            f << tiny_config_text();
        }
        const std::string data = (ws / "data").string();
        const RunResult r =
            run_tool("gen-data --config " + (ws / "run.cfg").string() + " --out " + data +
                     " --seed 99");
        REQUIRE(r.code == 0);

        // The stored config reflects the seed override and parses cleanly.
        const RunConfig stored = RunConfig::load(data + "/config.txt");
        CHECK(stored.data_seed == 99);
        CHECK(stored.render() == slurp(data + "/config.txt"));

        // Manifest rows match the patch files one to one.
        const std::vector<std::string> rows = lines_of(slurp(data + "/manifest.csv"));
        REQUIRE(rows.size() == 49);  // header + 2 phantoms x 24 pairs
        CHECK(rows[0] == "index,split,phantom_seed,pair_seed,row,col");
        std::size_t pair_files = 0;
        for (const auto& entry : fs::directory_iterator(data + "/pairs")) {
            (void)entry;
            ++pair_files;
        }
        CHECK(pair_files == 3 * (rows.size() - 1));

        // A non-empty output directory is refused without --force.
        CHECK(run_tool("gen-data --config " + (ws / "run.cfg").string() + " --out " + data)
                  .code == 1);

        // A forced rerun reproduces the files byte for byte.
        const std::string before_pair = slurp(data + "/pairs/train_00000_x.txim");
        const std::string before_manifest = slurp(data + "/manifest.csv");
        REQUIRE(run_tool("gen-data --config " + (ws / "run.cfg").string() + " --out " + data +
                         " --seed 99 --force")
                    .code == 0);
        CHECK(slurp(data + "/pairs/train_00000_x.txim") == before_pair);
        CHECK(slurp(data + "/manifest.csv") == before_manifest);
    }

    TEST_CASE("manifest coordinates regenerate the stored patches") {
        const fs::path ws = workspace();
        const std::string data = (ws / "data").string();
        const RunConfig stored = RunConfig::load(data + "/config.txt");
        const DatasetConfig dc = stored.dataset();

        const std::vector<std::string> rows = lines_of(slurp(data + "/manifest.csv"));
        REQUIRE(rows.size() > 5);
        for (std::size_t i : {std::size_t(1), std::size_t(7), rows.size() - 1}) {
            const std::vector<std::string> f = split_csv(rows[i]);
            REQUIRE(f.size() == 6);
            const PatchPair again =
                regenerate_patch(dc, std::stoull(f[2]), std::stoull(f[3]), std::stoi(f[4]),
                                 std::stoi(f[5]));
            char stem[64];
            std::snprintf(stem, sizeof(stem), "%s/pairs/%s_%05d", data.c_str(), f[1].c_str(),
                          std::stoi(f[0]));
            for (const auto& [suffix, tensor] :
                 {std::pair{"_x.txim", &again.x}, {"_y1.txim", &again.y1},
                  {"_y2.txim", &again.y2}}) {
                const ImageData on_disk = read_image(std::string(stem) + suffix);
                REQUIRE(tensor->size() == on_disk.pixels.size());
                for (std::int64_t k = 0; k < on_disk.pixels.size(); ++k)
                    REQUIRE((*tensor)[k] == on_disk.pixels[k]);
            }
        }
    }

    TEST_CASE("train produces a checkpoint, a log, and deterministic reruns") {
        const fs::path ws = workspace();
        const std::string data = (ws / "data").string();
        const std::string ckpt = (ws / "model.ckpt").string();

        const RunResult r = run_tool("train --data " + data + " --out " + ckpt);
        REQUIRE(r.code == 0);
        CHECK(r.output.find("3 updates done") != std::string::npos);

        const std::vector<std::string> log = lines_of(slurp(ckpt + ".log.csv"));
        REQUIRE(log.size() == 4);
        CHECK(log[0] == TrainingLog::kCsvHeader);

        const CheckpointT<double> cp = load_checkpoint<double>(ckpt);
        CHECK(cp.state.completed_steps == 3);
        CHECK(cp.config.loss.lambda == 0.4);

        // Identical invocation, identical bytes.
        const std::string again = (ws / "model_again.ckpt").string();
        REQUIRE(run_tool("train --data " + data + " --out " + again).code == 0);
        CHECK(slurp(ckpt) == slurp(again));

        // A seed override changes the run.
        const std::string other = (ws / "model_seeded.ckpt").string();
        REQUIRE(run_tool("train --data " + data + " --out " + other + " --seed 5").code == 0);
        CHECK(slurp(ckpt) != slurp(other));
        CHECK(load_checkpoint<double>(other).config.seed == 5);
    }

    TEST_CASE("the bias-reducing mode never touches the adversary") {
        const fs::path ws = workspace();
        const std::string data = (ws / "data").string();
        const std::string ckpt = (ws / "br.ckpt").string();
        REQUIRE(run_tool("train --data " + data + " --out " + ckpt + " --mode br").code == 0);

        const std::vector<std::string> log = lines_of(slurp(ckpt + ".log.csv"));
        REQUIRE(log.size() == 4);
        for (std::size_t i = 1; i < log.size(); ++i) {
            const std::vector<std::string> f = split_csv(log[i]);
            REQUIRE(f.size() == 6);
            CHECK(f[2] == "0");  // disc_loss never evaluated
            CHECK(f[3] == "0");  // n_d
        }
        CHECK(load_checkpoint<double>(ckpt).config.loss.lambda == 0.0);
    }

    TEST_CASE("enhance matches the in-process path and guards the blend") {
        const fs::path ws = workspace();
        const std::string data = (ws / "data").string();
        const std::string ckpt = (ws / "model.ckpt").string();
        const std::string br = (ws / "br.ckpt").string();
        const std::string in = data + "/exam_0000_y1.txim";
        const std::string out = (ws / "enhanced.txim").string();

        REQUIRE(run_tool("enhance --tmgan " + ckpt + " --in " + in + " --out " + out +
                         " --eta 1")
                    .code == 0);
        const ImageData produced = read_image(out);
        const ImageData input = read_image(in);
        const CheckpointT<double> cp = load_checkpoint<double>(ckpt);
        CHECK(produced.pixels.bitwise_equal(enhance(cp.state.gen, input.pixels)));
        CHECK(produced.dy_mm == input.dy_mm);

        // The written image survives a read/write cycle byte for byte.
        const std::string copy = (ws / "enhanced_copy.txim").string();
        write_image(copy, produced);
        CHECK(slurp(copy) == slurp(out));

        // eta below one needs the companion checkpoint.
        const RunResult refused =
            run_tool("enhance --tmgan " + ckpt + " --in " + in + " --out " + out + " --eta 0.5");
        CHECK(refused.code == 1);
        CHECK(refused.output.find("--br") != std::string::npos);

        // The blended path agrees with the library blend.
        const std::string blended = (ws / "blended.txim").string();
        REQUIRE(run_tool("enhance --tmgan " + ckpt + " --br " + br + " --in " + in + " --out " +
                         blended + " --eta 0.3")
                    .code == 0);
        const CheckpointT<double> cb = load_checkpoint<double>(br);
        const Tensor want =
            blend(enhance(cp.state.gen, input.pixels), enhance(cb.state.gen, input.pixels), 0.3);
        CHECK(read_image(blended).pixels.bitwise_equal(want));
    }

    TEST_CASE("evaluate emits the documented table and curve files") {
        const fs::path ws = workspace();
        const std::string data = (ws / "data").string();
        const std::string metrics = (ws / "metrics.csv").string();
        const std::string truth = data + "/exam_0000_clean.txim";

        // Ground truth against itself: perfect scores by construction.
        REQUIRE(run_tool("evaluate --method truth --in " + truth + " --truth " + truth +
                         " --target " + data + "/texture --out " + metrics + " --roi 16")
                    .code == 0);
        // The target bank scored as its own noise: distance exactly zero.
        REQUIRE(run_tool("evaluate --method bank --in " + truth + " --truth " + truth +
                         " --rois " + data + "/texture --target " + data + "/texture --out " +
                         metrics + " --roi 16")
                    .code == 0);

        const std::vector<std::string> rows = lines_of(slurp(metrics));
        REQUIRE(rows.size() == 3);
        CHECK(rows[0] == "method,psnr_db,ssim,noise_std_hu,nps_distance_to_target");
        const std::vector<std::string> truth_row = split_csv(rows[1]);
        REQUIRE(truth_row.size() == 5);
        CHECK(truth_row[0] == "truth");
        CHECK(truth_row[1] == "inf");
        CHECK(truth_row[2] == "1");
        CHECK(truth_row[3] == "0");
        const std::vector<std::string> bank_row = split_csv(rows[2]);
        CHECK(bank_row[0] == "bank");
        CHECK(bank_row[4] == "0");

        for (const char* label : {"truth", "bank", "target"}) {
            const std::string curve = (ws / ("metrics_nps_" + std::string(label) + ".csv")).string();
            REQUIRE(fs::exists(curve));
            CHECK(lines_of(slurp(curve))[0] == "frequency_cycles_per_mm,power_hu2_mm2");
        }

        // A metrics file with a foreign header is refused, not appended to.
        const std::string foreign = (ws / "foreign.csv").string();
        {
            std::ofstream f(foreign);
            f << "who,what\n";
        }
        CHECK(run_tool("evaluate --method truth --in " + truth + " --truth " + truth +
                       " --target " + data + "/texture --out " + foreign + " --roi 16")
                  .code == 1);
    }

    TEST_CASE("single precision training round-trips through its checkpoint") {
        const fs::path ws = workspace();
        const std::string data = (ws / "data").string();
        const std::string ckpt = (ws / "model32.ckpt").string();
        REQUIRE(run_tool("train --data " + data + " --out " + ckpt + " --precision train32")
                    .code == 0);
        CHECK(checkpoint_element_size(ckpt) == 4);

        // enhance dispatches on the stored width and emits a 4-byte image.
        const std::string out = (ws / "enh32.txim").string();
        REQUIRE(run_tool("enhance --tmgan " + ckpt + " --in " + data +
                         "/exam_0000_y1.txim --out " + out + " --eta 1")
                    .code == 0);
        CHECK(image_element_size(out) == 4);

        // Mixed-width blends are refused up front.
        const RunResult mixed = run_tool("enhance --tmgan " + ckpt + " --br " +
                                         (ws / "br.ckpt").string() + " --in " + data +
                                         "/exam_0000_y1.txim --out " + out + " --eta 0.5");
        CHECK(mixed.code == 1);
        CHECK(mixed.output.find("element width") != std::string::npos);
    }
}
