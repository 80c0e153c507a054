#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "domdepth/image_io.hpp"
#include "domdepth/metrics.hpp"
#include "domdepth/scenesim.hpp"
#include "suite_scenes.hpp"

#ifndef DOMDEPTH_CLI_PATH
#define DOMDEPTH_CLI_PATH ""
#endif

namespace fs = std::filesystem;
using namespace domdepth;

namespace {

struct CliFixture {
    fs::path work;
    std::string cli = DOMDEPTH_CLI_PATH;

    CliFixture() {
        work = fs::temp_directory_path() / "domdepth_cli_tests";
        fs::remove_all(work);
        fs::create_directories(work);
    }

    int run(const std::string& args) const {
        std::string cmd = "\"" + cli + "\" " + args + " > " + (work / "stdout.txt").string() +
                          " 2> " + (work / "stderr.txt").string();
        int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }

    std::string scene_config() const {
        std::string path = (work / "scene.cfg").string();
        std::ofstream out(path);
        out << format_scene_spec(suite::object_scene(0));
        return path;
    }

    std::string read(const fs::path& p) const {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

}  // namespace

TEST_CASE("cli: render writes the documented file set deterministically") {
    CliFixture f;
    std::string cfg = f.scene_config();
    REQUIRE(f.run("render --config " + cfg + " --out " + (f.work / "r1").string()) == 0);
    REQUIRE(f.run("render --config " + cfg + " --out " + (f.work / "r2").string()) == 0);
    for (const char* name : {"image_prev.ppm", "image_t.ppm", "image_next.ppm", "depth_t.pfm",
                             "mask_t.pgm", "prior_t.pfm", "poses.txt", "manifest.txt"}) {
        CAPTURE(name);
        CHECK(fs::exists(f.work / "r1" / name));
        CHECK(f.read(f.work / "r1" / name) == f.read(f.work / "r2" / name));
    }
    // Render output round-trips through the readers.
    ImageBuffer img = read_ppm((f.work / "r1" / "image_t.ppm").string());
    CHECK(img.width == 192);
    CHECK(img.height == 96);
    DepthMap depth = read_pfm((f.work / "r1" / "depth_t.pfm").string());
    CHECK(depth.at(2, 2) == doctest::Approx(8.0).epsilon(1e-6));
}

TEST_CASE("cli: solve from a config and from a rendered scene dir agree on shape") {
    CliFixture f;
    std::string cfg = f.scene_config();
    std::string grid = " --d-min 3.8787878787878789 --d-max 13.837837837837839";
    REQUIRE(f.run("render --config " + cfg + " --out " + (f.work / "scene").string()) == 0);
    REQUIRE(f.run("solve --config " + cfg + " --out " + (f.work / "s1").string() + grid) == 0);
    REQUIRE(f.run("solve --scene " + (f.work / "scene").string() + " --out " +
                  (f.work / "s2").string() + grid) == 0);
    DepthMap d1 = read_pfm((f.work / "s1" / "depth.pfm").string());
    DepthMap d2 = read_pfm((f.work / "s2" / "depth.pfm").string());
    CHECK(d1.width == d2.width);
    CHECK(d1.height == d2.height);
    // metrics.csv carries the documented header and three region rows.
    std::string csv = f.read(f.work / "s1" / "metrics.csv");
    CHECK(csv.find("scene_id,variant,region,abs_rel") == 0);
    CHECK(csv.find(",dynamic,") != std::string::npos);
    CHECK(csv.find(",static,") != std::string::npos);
}

TEST_CASE("cli: toggle flags flip the solver configuration") {
    CliFixture f;
    std::string cfg = f.scene_config();
    std::string grid = " --d-min 3.8787878787878789 --d-max 13.837837837837839";
    REQUIRE(f.run("solve --config " + cfg + " --out " + (f.work / "on").string() + grid) == 0);
    REQUIRE(f.run("solve --config " + cfg + " --out " + (f.work / "off").string() + grid +
                  " --no-domd") == 0);
    // Dynamic-region error must differ between the two (DOMD on vs off).
    auto dynamic_row = [&](const fs::path& p) {
        std::ifstream in(p / "metrics.csv");
        std::string line, hit;
        while (std::getline(in, line))
            if (line.find(",dynamic,") != std::string::npos) hit = line;
        return hit;
    };
    CHECK(dynamic_row(f.work / "on") != dynamic_row(f.work / "off"));
}

TEST_CASE("cli: exit codes distinguish validation from success") {
    CliFixture f;
    std::string missing = (f.work / "nope.cfg").string();
    CHECK(f.run("render --config " + missing + " --out " + (f.work / "x").string()) == 1);

    std::string bad = (f.work / "bad.cfg").string();
    std::ofstream(bad) << "spec_version = 1\nnot a key value line\n";
    CHECK(f.run("render --config " + bad + " --out " + (f.work / "x").string()) == 1);
    // The parse error names the line.
    CHECK(f.read(f.work / "stderr.txt").find("line 2") != std::string::npos);

    CHECK(f.run("solve --out " + (f.work / "x").string()) == 1);  // neither --config nor --scene
    CHECK(f.run("definitely-not-a-command") == 1);
}

TEST_CASE("cli: ablate produces the scene x variant x region row grid") {
    CliFixture f;
    std::string cfg_dir = (f.work / "configs").string();
    suite::write_suite_configs(cfg_dir);
    std::ofstream suite_file(f.work / "mini.txt");
    suite_file << cfg_dir << "/scene_0.cfg\n" << cfg_dir << "/scene_1.cfg\n";
    suite_file.close();
    std::string grid = " --d-min 3.8787878787878789 --d-max 13.837837837837839";
    REQUIRE(f.run("ablate --suite " + (f.work / "mini.txt").string() + " --out " +
                  (f.work / "ab").string() + grid + " --variants full --variants no-fill" +
                  " --variants no-domd") == 0);
    std::ifstream in(f.work / "ab" / "ablate.csv");
    std::string line;
    int rows = 0;
    std::getline(in, line);  // header
    CHECK(line == metrics_csv_header());
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2 * 3 * 3);  // 2 scenes x 3 variants x 3 regions
}

TEST_CASE("cli: ablate full variant beats no-domd on the dynamic region") {
    CliFixture f;
    std::string cfg_dir = (f.work / "configs").string();
    suite::write_suite_configs(cfg_dir);
    std::ofstream suite_file(f.work / "pair.txt");
    suite_file << cfg_dir << "/scene_2.cfg\n" << cfg_dir << "/scene_3.cfg\n";
    suite_file.close();
    std::string grid = " --d-min 3.8787878787878789 --d-max 13.837837837837839";
    REQUIRE(f.run("ablate --suite " + (f.work / "pair.txt").string() + " --out " +
                  (f.work / "ab2").string() + grid + " --variants full --variants no-domd") == 0);
    std::ifstream in(f.work / "ab2" / "ablate.csv");
    std::string line;
    double full_sum = 0, nodomd_sum = 0;
    while (std::getline(in, line)) {
        size_t dyn = line.find(",dynamic,");
        if (dyn == std::string::npos) continue;
        double abs_rel = std::stod(line.substr(dyn + 9));
        if (line.find(",full,") != std::string::npos) full_sum += abs_rel;
        else nodomd_sum += abs_rel;
    }
    CHECK(full_sum > 0.0);
    CHECK(full_sum < nodomd_sum);
}

TEST_CASE("cli: exceeding the gradcheck threshold exits with the runtime code") {
    CliFixture f;
    std::string cfg = f.scene_config();
    CHECK(f.run("gradcheck --config " + cfg + " --out " + (f.work / "g3").string() +
                " --samples 60 --seed 3 --threshold 1e-12") == 2);
}

TEST_CASE("cli: gradcheck passes on texture and reports all-skipped on constant scenes") {
    CliFixture f;
    std::string cfg = f.scene_config();
    CHECK(f.run("gradcheck --config " + cfg + " --out " + (f.work / "g1").string() +
                " --samples 80 --seed 3") == 0);
    std::string sweep = f.read(f.work / "g1" / "eps_sweep.csv");
    CHECK(sweep.find("eps,max_rel_err") == 0);
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 4);  // header + three steps

    // Constant texture: every sample is degenerate, reported and skipped.
    SceneSpec flat = suite::static_scene(0);
    flat.allow_textureless = true;
    flat.background[0].texture.kind = "constant";
    std::string flat_cfg = (f.work / "flat.cfg").string();
    std::ofstream(flat_cfg) << format_scene_spec(flat);
    CHECK(f.run("gradcheck --config " + flat_cfg + " --out " + (f.work / "g2").string() +
                " --samples 40") == 0);
    CHECK(f.read(f.work / "stderr.txt").find("40 of 40") != std::string::npos);
    std::string csv = f.read(f.work / "g2" / "gradcheck.csv");
    CHECK(csv.find(",0,0,0,1") != std::string::npos);  // zero gradients, skipped flag set
}

TEST_CASE("cli: static scene with exact prior solves under 2% abs rel") {
    CliFixture f;
    std::string cfg = (f.work / "static.cfg").string();
    std::ofstream(cfg) << format_scene_spec(suite::static_scene(0));
    std::string grid = " --d-min 3.8787878787878789 --d-max 13.837837837837839";
    REQUIRE(f.run("solve --config " + cfg + " --out " + (f.work / "st").string() + grid) == 0);
    std::ifstream in(f.work / "st" / "metrics.csv");
    std::string line, all_row;
    while (std::getline(in, line))
        if (line.find(",all,") != std::string::npos) all_row = line;
    REQUIRE(!all_row.empty());
    double abs_rel = std::stod(all_row.substr(all_row.find(",all,") + 5));
    CHECK(abs_rel < 0.02);
}

TEST_CASE("cli: tilted plane with a biased prior drives the cycle loop to zero") {
    // Generic geometry (tilt, forward motion, non-grid depths): the refine
    // loop must reach L_c = 0 and leave usable outputs.
    CliFixture f;
    REQUIRE(f.run("solve --config " DOMDEPTH_CONFIG_DIR "/tilted_bias_prior.cfg --out " +
                  (f.work / "tilt").string() + " --iters 3 --d-min 2.0 --d-max 20.0") == 0);
    std::ifstream in(f.work / "tilt" / "loss.csv");
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    REQUIRE(!last.empty());
    // Final iteration row starts "N,l_c,..." with l_c == 0.
    size_t comma = last.find(',');
    CHECK(std::stod(last.substr(comma + 1)) == 0.0);
}

TEST_CASE("cli: a static camera renders three identical frames") {
    CliFixture f;
    SceneSpec still = suite::static_scene(2);
    still.camera.cam_to_world_prev = RigidPose::identity();
    still.camera.cam_to_world_next = RigidPose::identity();
    std::string cfg = (f.work / "still.cfg").string();
    std::ofstream(cfg) << format_scene_spec(still);
    REQUIRE(f.run("render --config " + cfg + " --out " + (f.work / "still").string()) == 0);
    std::string a = f.read(f.work / "still" / "image_prev.ppm");
    CHECK(a == f.read(f.work / "still" / "image_t.ppm"));
    CHECK(a == f.read(f.work / "still" / "image_next.ppm"));
}

TEST_CASE("cli: eval on identical maps yields the perfect-score row") {
    CliFixture f;
    std::string cfg = f.scene_config();
    REQUIRE(f.run("render --config " + cfg + " --out " + (f.work / "scene").string()) == 0);
    std::string gt = (f.work / "scene" / "depth_t.pfm").string();
    REQUIRE(f.run("eval --pred " + gt + " --gt " + gt + " --out " + (f.work / "e").string()) == 0);
    std::string csv = f.read(f.work / "e" / "metrics.csv");
    CHECK(csv.find(",all,0,0,0,0,1,1,1,") != std::string::npos);
}
