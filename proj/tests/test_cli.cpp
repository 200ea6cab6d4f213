#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "dgs_cli_tests";

struct Result {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Result run(const std::string &args) {
    fs::create_directories(kRoot);
    const fs::path out = kRoot / "stdout.txt", err = kRoot / "stderr.txt";
    const std::string cmd = std::string(DGS_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const std::string &name, const std::string &text) {
    fs::create_directories(kRoot);
    const fs::path p = kRoot / name;
    std::ofstream(p) << text;
    return p;
}

const char *kSmall = "synth.primitives = 16\nsynth.width = 32\nsynth.height = 32\n"
                     "train.max_steps = 100\ntrain.eval_interval = 25\n";

} // namespace

TEST_CASE("cli: usage errors exit with 1") {
    CHECK(run("").code == 1);
    CHECK(run("frobnicate").code == 1);
    CHECK(run("train").code == 1);  // --out missing
    const Result missing = run("train --config /nonexistent.cfg --out " + (kRoot / "x").string());
    CHECK(missing.code == 1);
    CHECK(missing.err.find("not found") != std::string::npos);
    const fs::path bad = write_config("bad.cfg", "train.max_steps = 10\nno equals sign here\n");
    const Result malformed = run("train --config " + bad.string() + " --out " + (kRoot / "x").string());
    CHECK(malformed.code == 1);
    CHECK(malformed.err.find("bad.cfg:2") != std::string::npos);
    const Result unknown = run("train --set lr.nonsense=1 --out " + (kRoot / "x").string());
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("lr.nonsense") != std::string::npos);
    CHECK(run("synth --set synth.extent=-1 --out " + (kRoot / "x").string()).code == 1);
}

TEST_CASE("cli: runtime failures exit with 2") {
    const Result r = run("eval --scene /nonexistent.ply --data /nonexistent");
    CHECK(r.code == 2);
}

TEST_CASE("cli: synth writes a dataset and a noisy init") {
    const fs::path out = kRoot / "synth";
    fs::remove_all(out);
    const fs::path cfg = write_config("small.cfg", kSmall);
    const Result r = run("synth --spec " + cfg.string() + " --out " + out.string());
    CHECK(r.code == 0);
    for (const char *f : {"ground_truth.ply", "init.ply", "cameras.txt", "manifest.txt", "targets/view_009.ppm"})
        CHECK(fs::exists(out / f));
    CHECK(run("synth --spec default --out " + (kRoot / "synth_default").string()).code == 0);
}

TEST_CASE("cli: train echoes overrides and the manifest reproduces the run") {
    const fs::path cfg = write_config("small.cfg", kSmall);
    const fs::path a = kRoot / "train_a", b = kRoot / "train_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const Result r = run("train --config " + cfg.string() + " --set explore.alpha=0.07 --seed 3 --out " + a.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("explore.alpha = 0.07") != std::string::npos);
    CHECK(r.out.find("train.seed = 3") != std::string::npos);
    const std::string manifest = slurp(a / "manifest.txt");
    CHECK(manifest.find("explore.alpha = 0.07") != std::string::npos);
    CHECK(manifest.find("explore.tau = auto") == std::string::npos);
    for (const char *f : {"checkpoint.ply", "optimizer_state.txt", "metrics.csv", "mutations.ndjson",
                          "renders/holdout_000.ppm"})
        CHECK(fs::exists(a / f));

    REQUIRE(run("train --config " + (a / "manifest.txt").string() + " --out " + b.string()).code == 0);
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
    CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
    // Thread count does not change results.
    const fs::path t = kRoot / "train_threads";
    REQUIRE(run("train --config " + (a / "manifest.txt").string() + " --threads 3 --out " + t.string()).code == 0);
    CHECK(slurp(a / "metrics.csv") == slurp(t / "metrics.csv"));
}

TEST_CASE("cli: train, eval, render and prune on a dataset directory") {
    const fs::path cfg = write_config("small.cfg", kSmall);
    const fs::path data = kRoot / "synth2", run_dir = kRoot / "train_data";
    fs::remove_all(data);
    fs::remove_all(run_dir);
    REQUIRE(run("synth --config " + cfg.string() + " --out " + data.string()).code == 0);
    REQUIRE(run("train --config " + cfg.string() + " --data " + data.string() + " --out " + run_dir.string()).code == 0);
    CHECK(slurp(run_dir / "manifest.txt").find("data.dir = " + data.string()) != std::string::npos);

    const fs::path ckpt = run_dir / "checkpoint.ply";
    const Result ev = run("eval --scene " + ckpt.string() + " --data " + data.string());
    CHECK(ev.code == 0);
    CHECK(ev.out.rfind("view,psnr,ssim\n", 0) == 0);
    CHECK(ev.out.find("mean,") != std::string::npos);

    const fs::path img = kRoot / "view.ppm";
    CHECK(run("render --scene " + ckpt.string() + " --data " + data.string() + " --view 2 --out " + img.string()).code == 0);
    CHECK(slurp(img).rfind("P6\n32 32\n255\n", 0) == 0);

    const fs::path pruned = kRoot / "pruned.ply";
    const Result pr = run("prune --scene " + ckpt.string() + " --data " + data.string() + " --fraction 0.2 --out " + pruned.string());
    CHECK(pr.code == 0);
    CHECK(fs::exists(pruned));
    CHECK(pr.out.find("removed") != std::string::npos);
}

TEST_CASE("cli: ablate rows match independent train runs") {
    const fs::path cfg = write_config("small.cfg", kSmall);
    const fs::path out = kRoot / "ablate";
    fs::remove_all(out);
    const Result r = run("ablate --config " + cfg.string() + " --axis beta2 --values 0.1,0.5,1.0 --out " + out.string());
    REQUIRE(r.code == 0);
    const std::string csv = slurp(out / "ablation.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("explore.beta2,run_dir,holdout_psnr", 0) == 0);
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    const char *values[] = {"0.1", "0.5", "1.0"};
    for (int i = 0; i < 3; ++i) {
        CHECK(rows[i].rfind(std::string(values[i]) + ",run_00" + std::to_string(i) + ",", 0) == 0);
        const fs::path solo = kRoot / ("solo_" + std::to_string(i));
        fs::remove_all(solo);
        REQUIRE(run("train --config " + cfg.string() + " --set explore.beta2=" + values[i] + " --out " + solo.string()).code == 0);
        CHECK(slurp(solo / "metrics.csv") == slurp(out / ("run_00" + std::to_string(i)) / "metrics.csv"));
    }
    CHECK(run("ablate --config " + cfg.string() + " --axis beta2 --values 0.1,7 --out " + out.string()).code == 1);
}

TEST_CASE("cli: stage grid") {
    const fs::path cfg = write_config("tiny.cfg", std::string(kSmall) + "train.max_steps = 60\n");
    const fs::path out = kRoot / "grid";
    fs::remove_all(out);
    REQUIRE(run("ablate --config " + cfg.string() + " --grid stages --out " + out.string()).code == 0);
    const std::string csv = slurp(out / "ablation.csv");
    CHECK(csv.find("\nbaseline,") != std::string::npos);
    CHECK(csv.find("\nfull,") != std::string::npos);
}

TEST_CASE("cli: thread count from the environment") {
    const fs::path cfg = write_config("small.cfg", kSmall);
    const fs::path out = kRoot / "env_threads";
    const Result r = run("train --config " + cfg.string() + " --out " + out.string() + " && DGS_THREADS=2 true");
    CHECK(r.code == 0);
    setenv("DGS_THREADS", "2", 1);
    const Result e = run("train --config " + cfg.string() + " --out " + out.string());
    unsetenv("DGS_THREADS");
    CHECK(e.code == 0);
    CHECK(e.out.find("runtime.threads = 2") != std::string::npos);
}
