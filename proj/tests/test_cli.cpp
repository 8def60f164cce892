#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "rainfill/gridfile.hpp"
#include "rainfill/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("rainfill_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct Cleanup {
    ~Cleanup() { fs::remove_all(workdir()); }
} cleanup;

int run(const std::string& args) {
    const auto cmd = std::string(RAINFILL_CLI_PATH) + " " + args + " >" + (workdir() / "stdout").string() + " 2>" +
                     (workdir() / "stderr").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string path(const std::string& rel) { return (workdir() / rel).string(); }

const std::string kTiny =
    "--frames 2 --rows 8 --cols 8 --steps 10 --ddim-steps 5 --base-channels 4 --batch 2 "
    "--train-sequences 4 --eval-sequences 2 --swath-width 3 --ensemble 2";

}  // namespace

TEST_CASE("help and parse errors") {
    CHECK(run("--help") == 0);
    CHECK(slurp(workdir() / "stdout").find("gen-data") != std::string::npos);
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("gen-data") == 2);
    CHECK(run("--rows 12 gen-data --out " + path("bad")) == 2);
    CHECK(run("--no-such-key 3 gen-data --out " + path("bad")) == 2);
    CHECK(run("--config " + path("absent.json") + " gen-data --out " + path("bad")) == 2);
    std::ofstream(workdir() / "unknown.json") << R"({"widgets": 3})";
    CHECK(run("--config " + path("unknown.json") + " gen-data --out " + path("bad")) == 2);
    CHECK(slurp(workdir() / "stderr").find("widgets") != std::string::npos);
}

TEST_CASE("end to end through the command line") {
    REQUIRE(run(kTiny + " gen-data --out " + path("data")) == 0);
    CHECK(fs::exists(workdir() / "data/train/seq_00003.hdr"));
    CHECK(fs::exists(workdir() / "data/eval/seq_00001.bin"));

    REQUIRE(run(kTiny + " --epochs 2 train --data " + path("data/train") + " --checkpoint " + path("ck") + " --log " +
                path("loss.log")) == 0);
    const auto log = slurp(workdir() / "loss.log");
    CHECK(log.rfind("1 ", 0) == 0);
    CHECK(log.find("\n2 ") != std::string::npos);
    CHECK(rainfill::read_checkpoint(workdir() / "ck").epoch == 2);

    // resume picks the config up from the checkpoint
    REQUIRE(run("--epochs 3 train --data " + path("data/train") + " --checkpoint " + path("ck2") + " --resume " +
                path("ck")) == 0);
    CHECK(rainfill::read_checkpoint(workdir() / "ck2").epoch == 3);
    CHECK(run("--epochs 3 --base-channels 8 train --data " + path("data/train") + " --checkpoint " + path("x") +
              " --resume " + path("ck")) == 2);

    const auto input = path("data/eval/seq_00000");
    REQUIRE(run("sample --checkpoint " + path("ck") + " --input " + input + " --out " + path("s") +
                " --members 2") == 0);
    CHECK(rainfill::read_grid(workdir() / "s").channel_count() == 3);
    REQUIRE(run("baseline --method tli --input " + input + " --out " + path("b")) == 0);
    CHECK(run("baseline --method spline --input " + input + " --out " + path("b")) == 2);

    REQUIRE(run("evaluate --pred " + path("s") + " " + path("b") + " --truth " + input + " " + input + " --report " +
                path("r.jsonl")) == 0);
    std::ifstream rep(workdir() / "r.jsonl");
    const auto parsed = rainfill::parse_report(rep);
    CHECK(parsed.windows.size() == 2);
    CHECK(run("evaluate --pred " + path("s") + " --truth " + input + " " + input) == 3);

    REQUIRE(run("ablate --checkpoint " + path("ck") + " --data " + path("data/eval") + " --members 1") == 0);
    CHECK(slurp(workdir() / "stdout").find("rainfill-sensitivity") != std::string::npos);

    REQUIRE(run("render --input " + path("s") + " --channel mean --out " + path("img")) == 0);
    CHECK(fs::exists(workdir() / "img/mean_f01.ppm"));
    CHECK(run("render --input " + path("s") + " --channel nope --out " + path("img")) == 3);
}

TEST_CASE("data and numeric failures map to their exit codes") {
    CHECK(run("baseline --method tli --input " + path("missing") + " --out " + path("b")) == 3);
    CHECK(run("sample --checkpoint " + path("missing") + " --input " + path("missing") + " --out " + path("x")) == 3);

    // a window whose truth holds NaN trains to a non-finite loss
    REQUIRE(run(kTiny + " gen-data --out " + path("nan")) == 0);
    for (const auto& base : rainfill::list_grid_files(workdir() / "nan/train")) {
        auto g = rainfill::read_grid(base);
        const auto t = g.channel_index("truth");
        g.data[static_cast<size_t>(t * g.grid.volume())] = std::numeric_limits<float>::quiet_NaN();
        rainfill::write_grid(base, g);
    }
    CHECK(run(kTiny + " --epochs 1 --augment false train --data " + path("nan/train") + " --checkpoint " +
              path("nanck")) == 4);
}
