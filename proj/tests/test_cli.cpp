#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef JARN_CLI_PATH
#error "JARN_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(JARN_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string slurp_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Drops the wall-clock column from a trace CSV; everything else must be
// bit-identical across reruns.
std::string strip_seconds(const std::string& csv) {
  std::istringstream is(csv);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && (line[0] == '#' || line.rfind("iteration", 0) == 0)) {
      os << line << '\n';
      continue;
    }
    const auto last = line.rfind(',');
    os << line.substr(0, last) << '\n';
  }
  return os.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("jarn_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help exits zero and documents the subcommands") {
  TempDir dir;
  RunResult r = run_cli("--help", dir.path);
  CHECK(r.exit_code == 0);
  for (const char* name : {"train", "attack", "eval", "landscape", "theory", "export"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
  RunResult t = run_cli("train --help", dir.path);
  CHECK(t.exit_code == 0);
  CHECK(t.out.find("--lambda-adv") != std::string::npos);
  CHECK(t.out.find("--jarn-start-fraction") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  TempDir dir;
  CHECK(run_cli("no-such-subcommand", dir.path).exit_code == 1);
  CHECK(run_cli("train --no-such-flag 1", dir.path).exit_code == 1);
  CHECK(run_cli("", dir.path).exit_code == 1);
}

TEST_CASE("missing dataset path is a named precondition violation (exit 2)") {
  TempDir dir;
  RunResult r = run_cli("train --regime standard --data-source mnist --epochs 1 --out-dir " +
                            dir.path.string(),
                        dir.path);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("missing required field 'data.mnist_images'") != std::string::npos);
}

TEST_CASE("theory subcommand writes a passing json report") {
  TempDir dir;
  RunResult r = run_cli("theory --trials 100 --seed 5 --out-dir " + dir.path.string(), dir.path);
  CHECK(r.exit_code == 0);
  const std::string report = slurp_file(dir.path / "theory_report.json");
  CHECK(report.find("\"all_pass\": true") != std::string::npos);
  CHECK(report.find("jarn-theory-report/1") != std::string::npos);
}

TEST_CASE("config file values are overridden by flags and echoed") {
  TempDir dir;
  const fs::path cfg = dir.path / "run.cfg";
  {
    std::ofstream os(cfg);
    os << "# test config\nepochs = 9\nbatch_size = 50\nseed = 4\n";
  }
  RunResult r = run_cli("theory --config " + cfg.string() + " --seed 6 --trials 10 --out-dir " +
                            dir.path.string(),
                        dir.path);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("seed = 6") != std::string::npos);        // flag wins
  CHECK(r.out.find("epochs = 9") != std::string::npos);      // file value survives
  const std::string report = slurp_file(dir.path / "theory_report.json");
  CHECK(report.find("\"seed\": \"6\"") != std::string::npos);  // echo in the artifact
}

TEST_CASE("same config and seed reproduce trace and checkpoint bit-exactly") {
  TempDir dir;
  const fs::path out = dir.path / "out";
  fs::create_directories(out);
  // the full resolved config is echoed into every artifact, so both runs must
  // share it verbatim, out-dir included; artifacts are set aside in between
  const std::string cmd =
      "train --regime jarn --data-source glyphs --samples-per-class 6 --epochs 2"
      " --batch-size 30 --jarn-start-fraction 0.5 --epsilon 0.2 --seed 11 --out-dir " +
      out.string();
  REQUIRE(run_cli(cmd, dir.path).exit_code == 0);
  fs::rename(out / "model.ckpt", dir.path / "first.ckpt");
  fs::rename(out / "trace.csv", dir.path / "first_trace.csv");
  REQUIRE(run_cli(cmd, dir.path).exit_code == 0);

  // checkpoints byte-identical (no timing inside)
  CHECK(slurp_file(dir.path / "first.ckpt") == slurp_file(out / "model.ckpt"));
  // traces identical after dropping the wall-clock column
  const std::string t1 = strip_seconds(slurp_file(dir.path / "first_trace.csv"));
  const std::string t2 = strip_seconds(slurp_file(out / "trace.csv"));
  CHECK(t1 == t2);
  CHECK(t1.find("# seed=11") != std::string::npos);
}

TEST_CASE("attack subcommand emits the per-sample csv") {
  TempDir dir;
  const std::string out = dir.path.string();
  REQUIRE(run_cli("train --regime standard --data-source glyphs --samples-per-class 6"
                  " --epochs 1 --batch-size 30 --seed 2 --out-dir " + out,
                  dir.path)
              .exit_code == 0);
  RunResult r = run_cli("attack --checkpoint " + out +
                            "/model.ckpt --data-source glyphs --samples-per-class 3"
                            " --attack-epsilon 0.2 --iterations 3 --limit 20 --seed 3"
                            " --out-dir " + out,
                        dir.path);
  CHECK(r.exit_code == 0);
  const std::string csv = slurp_file(dir.path / "attack.csv");
  CHECK(csv.find("sample,label,clean_pred,adv_pred,success,linf,loss_clean,loss_adv") !=
        std::string::npos);
  // 20 samples -> 20 data rows
  int rows = 0;
  std::istringstream is(csv);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#' && line.rfind("sample,", 0) != 0) ++rows;
  }
  CHECK(rows == 20);
}

TEST_CASE("eval emits csv with attacks+1 rows when asked for csv") {
  TempDir dir;
  const std::string out = dir.path.string();
  REQUIRE(run_cli("train --regime standard --data-source glyphs --samples-per-class 6"
                  " --epochs 1 --batch-size 30 --seed 2 --out-dir " + out,
                  dir.path)
              .exit_code == 0);
  RunResult r = run_cli("eval --checkpoint " + out +
                            "/model.ckpt --data-source glyphs --samples-per-class 4"
                            " --attacks fgsm,pgd3 --attack-epsilon 0.15 --limit 40"
                            " --alignment-samples 10 --format csv --seed 2 --out-dir " + out,
                        dir.path);
  CHECK(r.exit_code == 0);
  std::istringstream is(slurp_file(dir.path / "eval_report.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#' && line.rfind("name,", 0) != 0) ++rows;
  }
  CHECK(rows == 3);
}
