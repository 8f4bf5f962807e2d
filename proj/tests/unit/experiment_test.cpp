#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ringgyro/experiment.hpp"

using namespace ringgyro;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ringgyro_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RINGGYRO_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> out;
  std::stringstream ss(row);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!row.empty() && row.back() == ',') out.emplace_back();
  return out;
}

const char* kLossSweep = R"(command: loss-sweep
scheme:
  atoms: 10
  coupling_hz: 10
  theta_rad: 0.0314159
sweep:
  schemes: [1, 2, 3]
  eta: {start: 0.5, stop: 1.0, step: 0.05}
)";

}  // namespace

TEST(ExperimentParse, ReadsGridsAndDefaults) {
  const auto c = parse_experiment_string(kLossSweep);
  EXPECT_EQ(c.command, CommandKind::kLossSweep);
  EXPECT_EQ(c.schemes, (std::vector<int>{1, 2, 3}));
  ASSERT_EQ(c.eta.size(), 11u);
  EXPECT_DOUBLE_EQ(c.eta.back(), 1.0);
  EXPECT_DOUBLE_EQ(c.eta[9], 0.95);
  EXPECT_EQ(c.scheme.atoms, 10);
  EXPECT_EQ(c.stem(), "loss-sweep");
  EXPECT_TRUE(validate_experiment(c).empty());
}

TEST(ExperimentParse, ReportsLineOfBadValue) {
  try {
    parse_experiment_string("command: run-scheme\nscheme:\n  atoms: ten\n");
    FAIL();
  } catch (const ConfigParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("scheme.atoms"), std::string::npos) << e.what();
  }
}

TEST(ExperimentParse, RejectsUnknownFieldsAndCommands) {
  EXPECT_THROW(parse_experiment_string("command: run-scheme\nschema: {}\n"), ConfigParseError);
  EXPECT_THROW(parse_experiment_string("command: fly\n"), ConfigParseError);
  EXPECT_THROW(parse_experiment_string("scheme: {atoms: 2}\n"), ConfigParseError);
  EXPECT_THROW(parse_experiment_string("command: [unclosed\n"), ConfigParseError);
}

TEST(ExperimentValidate, DiagnosticsCarryFieldPaths) {
  auto c = parse_experiment_string("command: run-scheme\nscheme: {id: 2, atoms: 5}\n");
  auto d = validate_experiment(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], "scheme.atoms: N must be even for scheme 2");

  c = parse_experiment_string("command: loss-sweep\nscheme: {atoms: 4}\nsweep: {eta: [0.5, 1.2]}\n");
  d = validate_experiment(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], "sweep.eta[1]: eta out of [0,1]");

  c = parse_experiment_string("command: fidelity-sweep\n");
  d = validate_experiment(c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], "sweep.atoms: grid must be non-empty");
}

TEST(ExperimentRun, LossSweepEndpoints) {
  auto c = parse_experiment_string(kLossSweep);
  const auto rows = run_experiment(c, 2);
  ASSERT_EQ(rows.size(), 33u);
  const double want[] = {0.316227766, 0.129099445, 0.1};
  for (const auto& r : rows) {
    if (r.eta == 1.0) EXPECT_NEAR(r.delta_phi, want[r.scheme - 1], 1e-6);
  }
}

TEST(ExperimentRun, RunSchemeAtZeroRotationRevives) {
  const auto c = parse_experiment_string("command: run-scheme\nscheme: {id: 3, atoms: 4, theta_rad: 0}\n");
  const auto rows = run_experiment(c);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].qfi, 16.0, 1e-8);
  const auto csv = to_csv_row(rows[0]);
  EXPECT_NE(csv.find("P0=1"), std::string::npos) << csv;
  EXPECT_EQ(fields(csv)[11], "");  // fidelity is empty for scheme runs
}

TEST(ExperimentRun, NonFiniteRowsFail) {
  const auto c = parse_experiment_string("command: loss-sweep\nscheme: {id: 3, atoms: 4}\nsweep: {eta: [0.0]}\n");
  EXPECT_THROW(run_experiment(c), NumericFailure);
}

TEST(ExperimentRun, ThreadCountDoesNotChangeOutput) {
  const auto c = parse_experiment_string(
      "command: fluctuation-study\nscheme: {id: 2}\nsweep: {mean_atoms: [8, 12], samples: 20}\n");
  EXPECT_EQ(to_csv(run_experiment(c, 1)), to_csv(run_experiment(c, 3)));
}

TEST(Csv, HeaderAndVersion) {
  const auto text = to_csv({});
  const auto l = lines(text);
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0], "# format_version=1");
  EXPECT_EQ(l[1], "command,scheme,N,eta,theta_rad,J_hz,t_omega_s,qfi,delta_phi,delta_theta,delta_omega,fidelity,extra");
}

TEST(ParallelMap, KeepsIndexOrderAndPropagatesErrors) {
  const auto v = parallel_map<int>(50, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map<int>(5, 2,
                                 [](std::size_t i) -> int {
                                   if (i == 3) throw ValidationError("boom");
                                   return 0;
                                 }),
               ValidationError);
}

TEST(Cli, ValidateExitCodes) {
  const auto dir = scratch("validate");
  const auto log = dir / "log.txt";
  EXPECT_EQ(cli("validate " + write_file(dir, "ok.yaml", kLossSweep).string(), log), 0);
  EXPECT_EQ(read_file(log), "");

  EXPECT_EQ(cli("validate " + write_file(dir, "odd.yaml", "command: run-scheme\nscheme: {id: 2, atoms: 3}\n").string(), log),
            3);
  EXPECT_NE(read_file(log).find("N must be even for scheme 2"), std::string::npos);

  EXPECT_EQ(cli("validate " + write_file(dir, "eta.yaml", "command: loss-sweep\nsweep: {eta: [1.2]}\n").string(), log), 3);
  EXPECT_NE(read_file(log).find("eta out of [0,1]"), std::string::npos);

  EXPECT_EQ(cli("validate " + (dir / "missing.yaml").string(), log), 2);
  EXPECT_EQ(cli("validate " + write_file(dir, "bad.yaml", "command: run-scheme\n  atoms: : 3\n").string(), log), 2);
  EXPECT_NE(read_file(log).find("line"), std::string::npos);
}

TEST(Cli, RunWritesCsvAndPlotScript) {
  const auto dir = scratch("run");
  const auto cfg = write_file(dir, "loss.yaml", kLossSweep);
  const auto log = dir / "log.txt";
  ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "out").string(), log), 0) << read_file(log);
  const auto csv = read_file(dir / "out" / "loss-sweep.csv");
  const auto l = lines(csv);
  ASSERT_EQ(l.size(), 2u + 33u);
  EXPECT_EQ(l[0], "# format_version=1");
  for (std::size_t i = 2; i < l.size(); ++i) EXPECT_EQ(fields(l[i]).size(), 13u) << l[i];
  const auto gp = read_file(dir / "out" / "loss-sweep.gp");
  EXPECT_NE(gp.find("x=eta y=delta_phi"), std::string::npos);
  EXPECT_NE(gp.find("loss-sweep.csv"), std::string::npos);
}

TEST(Cli, RunIsDeterministic) {
  const auto dir = scratch("determinism");
  const auto cfg = write_file(dir, "fluct.yaml",
                              "command: fluctuation-study\nseed: 5\nscheme: {id: 2}\n"
                              "sweep: {mean_atoms: [8, 12, 16], samples: 25}\n");
  const auto log = dir / "log.txt";
  ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "a").string() + " --threads 1", log), 0) << read_file(log);
  ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "b").string() + " --threads 3", log), 0) << read_file(log);
  const auto a = read_file(dir / "a" / "fluctuation-study.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, read_file(dir / "b" / "fluctuation-study.csv"));
  EXPECT_NE(a.find("seed=5"), std::string::npos);

  ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "c").string() + " --seed 6", log), 0) << read_file(log);
  const auto c = read_file(dir / "c" / "fluctuation-study.csv");
  EXPECT_NE(a, c);
  EXPECT_NE(c.find("seed=6"), std::string::npos);
}

TEST(Cli, RunExitCodes) {
  const auto dir = scratch("codes");
  const auto log = dir / "log.txt";
  const auto out = " --out " + (dir / "out").string();
  EXPECT_EQ(cli("run " + write_file(dir, "odd.yaml", "command: run-scheme\nscheme: {id: 2, atoms: 3}\n").string() + out, log),
            3);
  EXPECT_EQ(
      cli("run " + write_file(dir, "zero.yaml", "command: loss-sweep\nscheme: {id: 3, atoms: 4}\nsweep: {eta: [0]}\n").string() +
              out,
          log),
      4);
  EXPECT_EQ(cli("run " + write_file(dir, "bad.yaml", "command: run-scheme\nscheme: {atoms: x}\n").string() + out, log), 2);
  EXPECT_EQ(cli("run " + write_file(dir, "ok.yaml", "command: run-scheme\nscheme: {id: 1, atoms: 2}\n").string() + out, log),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "run-scheme.csv"));
  EXPECT_FALSE(fs::exists(dir / "out" / "run-scheme.gp"));
}
