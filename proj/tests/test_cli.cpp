#include "test_support.hpp"

#include <sys/wait.h>

#include <map>
#include <sstream>

using namespace testing_support;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

// Runs the CLI with stdout and stderr captured under dir.
Run cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" MULTIFIELD_CLI "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, mf::io::read_file(out), mf::io::read_file(err)};
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

const std::string configs = MULTIFIELD_CONFIGS;

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("cli_usage");
  EXPECT_EQ(cli(dir, "").code, 1);
  EXPECT_EQ(cli(dir, "info").code, 1);
  EXPECT_EQ(cli(dir, "info x --bogus").code, 1);
  EXPECT_EQ(cli(dir, "frobnicate").code, 1);
  EXPECT_EQ(cli(dir, "check-arch").code, 1);
  EXPECT_EQ(cli(dir, "sample-params --suite Nope").code, 1);
  EXPECT_EQ(cli(dir, "--help").code, 0);
  const auto bad_env = cli(dir, "radii x", "CMD_THREADS=abc");
  EXPECT_EQ(bad_env.code, 1);
  EXPECT_NE(bad_env.err.find("CMD_THREADS"), std::string::npos) << bad_env.err;
  EXPECT_EQ(cli(dir, "generate -o " + q(dir / "never"), "CMD_THREADS=-3").code, 1);
}

TEST(Cli, SynthInfoAndRadii) {
  TempDir dir("cli_synth");
  const auto snap = dir / "s.cmdsnap";
  const auto made = cli(dir, "synth --seed 4 --n-gas 500 --n-dm 300 --n-star 20 -o " + q(snap));
  ASSERT_EQ(made.code, 0) << made.err;
  EXPECT_NE(made.out.find("gas=500"), std::string::npos) << made.out;
  EXPECT_EQ(mf::read_snapshot(snap).find(mf::Species::gas)->count(), 500u);

  const auto info = cli(dir, "info " + q(snap));
  EXPECT_EQ(info.code, 2);
  EXPECT_NE(info.err.find("CMD-SNAP"), std::string::npos) << info.err;
  EXPECT_EQ(cli(dir, "info " + q(dir / "missing.cmdgrid")).code, 2);

  const auto radii = cli(dir, "radii " + q(snap) + " -j 2");
  ASSERT_EQ(radii.code, 0) << radii.err;
  EXPECT_EQ(count_lines(radii.out), 500u);
  const auto expected = mf::smoothing_radii(*mf::read_snapshot(snap).find(mf::Species::gas), 25.0, 32);
  std::istringstream in(radii.out);
  double first = 0.0;
  in >> first;
  EXPECT_DOUBLE_EQ(first, expected.radii.front());
  EXPECT_EQ(cli(dir, "radii " + q(snap) + " --species quark").code, 1);
  EXPECT_EQ(cli(dir, "radii " + q(snap) + " --species black_hole").code, 2);
}

TEST(Cli, GenerateInfoRender) {
  TempDir dir("cli_gen");
  const auto out = dir / "run";
  const auto gen = cli(dir, "generate -c " + q(configs + "/small.cfg") + " -o " + q(out) + " -j 1");
  ASSERT_EQ(gen.code, 0) << gen.err;
  EXPECT_TRUE(std::filesystem::exists(out / "manifest.json"));
  const auto grid = out / "grids" / "T_n32.cmdgrid";
  const auto map = out / "maps" / "Mgas_map64.cmdgrid";
  ASSERT_TRUE(std::filesystem::exists(grid));
  ASSERT_TRUE(std::filesystem::exists(map));
  EXPECT_TRUE(std::filesystem::exists(out / "grids" / "ne_n32.cmdgrid"));

  const auto info = cli(dir, "info " + q(map));
  ASSERT_EQ(info.code, 0) << info.err;
  EXPECT_NE(info.out.find("records: 15\n"), std::string::npos) << info.out;
  EXPECT_NE(info.out.find("payload bytes per record: 16384\n"), std::string::npos) << info.out;

  const auto pgm = dir / "m.pgm";
  ASSERT_EQ(cli(dir, "render " + q(map) + " -r 14 -o " + q(pgm)).code, 0);
  const auto image = mf::io::read_file(pgm);
  EXPECT_EQ(image.substr(0, 13), "P5 64 64 255\n");
  EXPECT_EQ(image.size(), 13u + 64 * 64);

  EXPECT_EQ(cli(dir, "render " + q(grid) + " -o " + q(pgm)).code, 1);
  const auto mass = out / "grids" / "Mgas_n32.cmdgrid";
  const auto slab = cli(dir, "render " + q(grid) + " -o " + q(pgm) + " --axis y --start 4 --count 8 --mass-grid " + q(mass));
  ASSERT_EQ(slab.code, 0) << slab.err;
  EXPECT_EQ(mf::io::read_file(pgm).substr(0, 13), "P5 32 32 255\n");
  EXPECT_EQ(cli(dir, "render " + q(grid) + " -o " + q(pgm) + " --count 8").code, 2);
  EXPECT_EQ(cli(dir, "render " + q(map) + " -r 15 -o " + q(pgm)).code, 2);
}

TEST(Cli, GenerateFlagsOverrideConfig) {
  TempDir dir("cli_flags");
  const auto a = dir / "a", b = dir / "b";
  const std::string base = "generate -c " + q(configs + "/small.cfg") +
                           " --fields Mgas --sizes 16 --set slices=none --set synthetic.n_gas=1200 --seed 9 -o ";
  ASSERT_EQ(cli(dir, base + q(a)).code, 0);
  ASSERT_EQ(cli(dir, base + q(b), "CMD_THREADS=2").code, 0);
  EXPECT_EQ(mf::io::read_file(a / "manifest.json"), mf::io::read_file(b / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(a / "grids" / "Mgas_n16.cmdgrid"));
  EXPECT_FALSE(std::filesystem::exists(a / "maps"));
  EXPECT_FALSE(std::filesystem::exists(a / "grids" / "T_n32.cmdgrid"));
  EXPECT_EQ(cli(dir, "generate --set nonsense=1 -o " + q(a)).code, 2);
}

TEST(Cli, MissingMagneticFieldIsDataError) {
  TempDir dir("cli_b");
  const auto r = cli(dir, "generate --set synthetic.magnetic=false --set synthetic.n_gas=200 --fields B --sizes 8 "
                          "--set slices=none -o " + q(dir / "out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("field B"), std::string::npos) << r.err;
}

TEST(Cli, SampleParamsAndLossEval) {
  TempDir dir("cli_labels");
  const auto labels = dir / "labels.txt";
  const auto s = cli(dir, "sample-params -n 16 --seed 5 --suite N-body --prefix run -o " + q(labels));
  ASSERT_EQ(s.code, 0) << s.err;
  const auto records = mf::read_labels(labels);
  ASSERT_EQ(records.size(), 16u);
  EXPECT_EQ(records[3].id, "run3");

  const auto tng = cli(dir, "sample-params -n 4");
  EXPECT_EQ(count_lines(tng.out), 4u);

  mf::MomentsBatch b{16, 2, {}, {}, {}};
  std::string predictions;
  mf::Rng rng(12);
  for (const auto& r : records) {
    std::vector<double> mu{rng.uniform(), rng.uniform()}, sigma{rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)};
    predictions += r.id;
    for (double v : {mu[0], mu[1], sigma[0], sigma[1]}) predictions += " " + mf::format_double(v);
    predictions += "\n";
    for (std::size_t i = 0; i < 2; ++i) {
      b.theta.push_back(mf::normalize_parameter(i, r.params.values[i]));
      b.mu.push_back(mu[i]);
      b.sigma.push_back(sigma[i]);
    }
  }
  mf::io::write_file(dir / "pred.txt", predictions);
  const auto loss = cli(dir, "loss-eval --labels " + q(labels) + " --predictions " + q(dir / "pred.txt"));
  ASSERT_EQ(loss.code, 0) << loss.err;
  std::istringstream in(loss.out);
  std::map<std::string, double> values;
  for (std::string key; in >> key;) in >> values[key];
  EXPECT_EQ(values["batch"], 16.0);
  EXPECT_NEAR(values["loss_log"], mf::loss_moments_log(b), 1e-12 * std::fabs(mf::loss_moments_log(b)));
  EXPECT_NEAR(values["loss_sum"], mf::loss_moments_sum(b), 1e-12 * mf::loss_moments_sum(b));

  mf::io::write_file(dir / "short.txt", "run0 0.1 0.2\n");
  EXPECT_EQ(cli(dir, "loss-eval --labels " + q(labels) + " --predictions " + q(dir / "short.txt")).code, 2);
}

TEST(Cli, SplitByGroup) {
  TempDir dir("cli_split");
  std::string groups;
  for (int g = 0; g < 1000; ++g) {
    for (int i = 0; i < 15; ++i) groups += "LH_" + std::to_string(g) + "\n";
  }
  mf::io::write_file(dir / "groups.txt", groups);
  const auto r = cli(dir, "split " + q(dir / "groups.txt") + " --seed 3 --out-dir " + q(dir / "parts"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "train 13500\nvalidation 750\ntest 750\n");
  EXPECT_EQ(count_lines(mf::io::read_file(dir / "parts" / "validation.txt")), 750u);
  EXPECT_EQ(cli(dir, "split " + q(dir / "groups.txt") + " --fractions 0.5,0.5").code, 1);
}

TEST(Cli, CheckArchitecture) {
  TempDir dir("cli_arch");
  const auto builtin = cli(dir, "check-arch --builtin -H 4");
  ASSERT_EQ(builtin.code, 0) << builtin.err;
  EXPECT_NE(builtin.out.find("->  128Hx1x1  [512]"), std::string::npos) << builtin.out;
  EXPECT_NE(builtin.out.find("output 12\n"), std::string::npos);
  const auto file = cli(dir, "check-arch " + q(configs + "/moments_cnn.arch"));
  ASSERT_EQ(file.code, 0) << file.err;
  EXPECT_EQ(file.out, cli(dir, "check-arch --builtin").out);
  EXPECT_EQ(cli(dir, "check-arch --builtin --size 100").code, 2);
  EXPECT_EQ(cli(dir, "check-arch --builtin " + q(configs + "/moments_cnn.arch")).code, 1);
}

TEST(Cli, SampleConfigsParse) {
  for (const auto& e : std::filesystem::directory_iterator(configs)) {
    if (e.path().extension() == ".cfg") {
      EXPECT_NO_THROW(mf::read_run_config(e.path())) << e.path();
    }
  }
}
