#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Drives the installed binary end to end through std::system. VRFF_CLI_PATH
// is injected by the build so the test always finds the matching executable.

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("vrff_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  fs::path out_path = scratch / "stdout.txt";
  fs::path err_path = scratch / "stderr.txt";
  std::string command = std::string("\"") + VRFF_CLI_PATH + "\" " + args + " > " +
                        out_path.string() + " 2> " + err_path.string();
  int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// Two iterations of a small sine run: fast, but enough to produce a real
// checkpoint and several metric rows.
fs::path write_config(const fs::path& dir, const std::string& output_dir) {
  fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << R"({
  "task": {"kind": "sine", "shots": 3, "query_count": 4},
  "train": {"iterations": 2, "episodes_per_iteration": 2, "basis_count": 8,
            "feature_width": 6, "hidden_width": 5, "learning_rate": 0.001},
  "output_dir": ")" << output_dir
      << R"(",
  "eval_episodes": 3,
  "log_cadence": 1,
  "checkpoint_cadence": 1
})";
  return path;
}

}  // namespace

TEST_CASE("train subcommand produces outputs and reruns byte-identically") {
  fs::path dir = fresh_dir("train");
  fs::path cfg = write_config(dir, (dir / "out_a").string());

  CliResult first = run_cli("train --config " + cfg.string(), dir);
  CAPTURE(first.err);
  REQUIRE(first.exit_code == 0);
  CHECK(first.out.find("iterations: 2") != std::string::npos);
  CHECK(first.out.find("final eval: {") != std::string::npos);
  CHECK(fs::exists(dir / "out_a" / "metrics.csv"));
  CHECK(fs::exists(dir / "out_a" / "checkpoint.json"));
  CHECK(fs::exists(dir / "out_a" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "out_a" / "summary.json"));

  fs::path cfg_b = dir / "config_b.json";
  fs::copy_file(cfg, cfg_b);
  {
    // Same model, different output directory.
    std::string text = slurp(cfg_b);
    auto pos = text.find("out_a");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 5, "out_b");
    std::ofstream(cfg_b, std::ios::trunc) << text;
  }
  CliResult second = run_cli("train --config " + cfg_b.string(), dir);
  REQUIRE(second.exit_code == 0);
  CHECK(slurp(dir / "out_a" / "metrics.csv") == slurp(dir / "out_b" / "metrics.csv"));

  // A seed override must change the numbers.
  fs::path cfg_c = dir / "config_c.json";
  fs::copy_file(cfg, cfg_c);
  {
    std::string text = slurp(cfg_c);
    auto pos = text.find("out_a");
    text.replace(pos, 5, "out_c");
    std::ofstream(cfg_c, std::ios::trunc) << text;
  }
  CliResult third =
      run_cli("train --config " + cfg_c.string() + " --seed-override sampling=99", dir);
  REQUIRE(third.exit_code == 0);
  CHECK(slurp(dir / "out_a" / "metrics.csv") != slurp(dir / "out_c" / "metrics.csv"));
}

TEST_CASE("eval subcommand prints one json line and honors --episodes") {
  fs::path dir = fresh_dir("eval");
  fs::path cfg = write_config(dir, (dir / "out").string());
  REQUIRE(run_cli("train --config " + cfg.string(), dir).exit_code == 0);
  std::string ckpt = (dir / "out" / "checkpoint.json").string();

  CliResult eval = run_cli("eval --config " + cfg.string() + " --checkpoint " + ckpt, dir);
  CAPTURE(eval.err);
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.out.find("\"episodes\":3") != std::string::npos);
  CHECK(eval.out.find("\"mode\":\"mean\"") != std::string::npos);
  CHECK(eval.out.find("\"metric_mean\":") != std::string::npos);

  CliResult again = run_cli("eval --config " + cfg.string() + " --checkpoint " + ckpt, dir);
  CHECK(again.out == eval.out);

  CliResult fewer = run_cli(
      "eval --config " + cfg.string() + " --checkpoint " + ckpt + " --episodes 2", dir);
  REQUIRE(fewer.exit_code == 0);
  CHECK(fewer.out.find("\"episodes\":2") != std::string::npos);

  CliResult sampled = run_cli("eval --config " + cfg.string() + " --checkpoint " + ckpt +
                                  " --mode sampled",
                              dir);
  REQUIRE(sampled.exit_code == 0);
  CHECK(sampled.out.find("\"mode\":\"sampled\"") != std::string::npos);

  CliResult baseline =
      run_cli("eval --config " + cfg.string() + " --mode baseline", dir);
  REQUIRE(baseline.exit_code == 0);
  CHECK(baseline.out.find("\"mode\":\"baseline\"") != std::string::npos);
  CHECK(baseline.out != eval.out);

  CliResult zero = run_cli(
      "eval --config " + cfg.string() + " --checkpoint " + ckpt + " --episodes 0", dir);
  CHECK(zero.exit_code == 1);
  CHECK(zero.err.find("error: --episodes must be a positive count") != std::string::npos);

  CliResult no_ckpt = run_cli("eval --config " + cfg.string(), dir);
  CHECK(no_ckpt.exit_code == 1);
  CHECK(no_ckpt.err.find("eval needs a checkpoint unless mode is baseline") !=
        std::string::npos);
}

TEST_CASE("export-curves writes csv where asked") {
  fs::path dir = fresh_dir("curves");
  fs::path cfg = write_config(dir, (dir / "out").string());
  REQUIRE(run_cli("train --config " + cfg.string(), dir).exit_code == 0);
  std::string ckpt = (dir / "out" / "checkpoint.json").string();

  fs::path csv = dir / "fit.csv";
  CliResult named = run_cli("export-curves --config " + cfg.string() + " --checkpoint " +
                                ckpt + " --task 0 --grid 9 --output " + csv.string(),
                            dir);
  CAPTURE(named.err);
  REQUIRE(named.exit_code == 0);
  CHECK(named.out.find("curves: " + csv.string()) != std::string::npos);
  std::string body = slurp(csv);
  CHECK(body.rfind("x,y_true,y_pred,is_support\n", 0) == 0);

  // Default output path lands next to the run's other outputs.
  CliResult defaulted = run_cli(
      "export-curves --config " + cfg.string() + " --checkpoint " + ckpt + " --task 1",
      dir);
  REQUIRE(defaulted.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "curves_task1.csv"));

  CliResult oob = run_cli("export-curves --config " + cfg.string() + " --checkpoint " +
                              ckpt + " --task 99",
                          dir);
  CHECK(oob.exit_code == 1);
  CHECK(oob.err.find("task index 99 out of range") != std::string::npos);
}

TEST_CASE("bad invocations exit nonzero with a diagnostic") {
  fs::path dir = fresh_dir("errors");
  fs::path cfg = write_config(dir, (dir / "out").string());

  CliResult missing_cfg = run_cli("train --config " + (dir / "nope.json").string(), dir);
  CHECK(missing_cfg.exit_code == 1);
  CHECK(missing_cfg.err.find("error: config: cannot open") != std::string::npos);

  fs::path broken = dir / "broken.json";
  std::ofstream(broken) << "{this is not json";
  CliResult bad_json = run_cli("train --config " + broken.string(), dir);
  CHECK(bad_json.exit_code == 1);
  CHECK(bad_json.err.find("not valid JSON") != std::string::npos);

  CliResult bad_seed = run_cli(
      "train --config " + cfg.string() + " --seed-override tasks=abc", dir);
  CHECK(bad_seed.exit_code == 1);
  CHECK(bad_seed.err.find("seed override value must be a non-negative integer") !=
        std::string::npos);

  CliResult unknown_sub = run_cli("frobnicate", dir);
  CHECK(unknown_sub.exit_code != 0);

  CliResult unknown_flag = run_cli("train --config " + cfg.string() + " --turbo", dir);
  CHECK(unknown_flag.exit_code != 0);

  CliResult missing_required = run_cli("eval", dir);
  CHECK(missing_required.exit_code != 0);

  CliResult no_sub = run_cli("", dir);
  CHECK(no_sub.exit_code != 0);
}
