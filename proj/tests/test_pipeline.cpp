#include "test_support.hpp"

#include <nlohmann/json.hpp>

using namespace testing_support;

namespace {

mf::RunConfig small_config(const std::filesystem::path& out) {
  mf::RunConfig c = mf::parse_run_config(
      "synthetic.n_gas = 3000\n"
      "synthetic.n_dm = 3000\n"
      "synthetic.n_star = 100\n"
      "fields = Mgas, T\n"
      "grid_sizes = 64\n"
      "map_size = 64\n"
      "tracers = 200\n"
      "seed = 3\n");
  c.output = out;
  return c;
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), root).generic_string()] = mf::io::read_file(e.path());
  }
  return files;
}

mf::ScalarGrid constant_map(std::size_t n, double value) {
  auto g = mf::make_grid(2, n, 25.0, 0.0, mf::FieldId::Mgas);
  std::fill(g.values.begin(), g.values.end(), value);
  return g;
}

}  // namespace

TEST(GridFiles, RoundTripAndByteMath) {
  auto g = mf::make_grid(3, 8, 25.0, 0.5, mf::FieldId::T);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = 0.25 * static_cast<double>(i);
  g.params = mf::ParameterVector::hydro(mf::Suite::illustris_tng, {0.3, 0.8, 1, 1, 1, 1});
  auto file = mf::grid_file_for(g);
  mf::append_record(file, g);
  mf::append_record(file, g);
  const auto bytes = mf::encode_grid_file(file);
  EXPECT_EQ(bytes.size(), mf::grid_header_bytes + 2 * (48 + 512 * 4));
  EXPECT_EQ(bytes.size(), file.header.file_bytes());
  const auto back = mf::decode_grid_file(bytes);
  const auto h = mf::grid_from_record(back, 1);
  EXPECT_EQ(h.values, g.values);
  EXPECT_EQ(h.field, mf::FieldId::T);
  EXPECT_EQ(h.redshift, 0.5);
  ASSERT_TRUE(h.params.has_value());
  EXPECT_EQ(*h.params, *g.params);
  EXPECT_MF_ERROR(mf::grid_from_record(back, 2), mf::ErrorCode::record_out_of_range);
  EXPECT_MF_ERROR(mf::decode_grid_file(std::string_view(bytes).substr(0, bytes.size() - 1)),
                  mf::ErrorCode::truncated_file);
  const auto other = mf::make_grid(3, 4, 25.0, 0.5, mf::FieldId::T);
  EXPECT_MF_ERROR(mf::append_record(file, other), mf::ErrorCode::shape_mismatch);
}

TEST(GridFiles, NBodyParamsAndNoParams) {
  auto g = mf::make_grid(2, 4, 25.0, 0.0, mf::FieldId::Mcdm);
  g.params = mf::ParameterVector::nbody(0.2, 0.9);
  auto file = mf::grid_file_for(g);
  mf::append_record(file, g);
  g.params.reset();
  mf::append_record(file, g);
  const auto back = mf::decode_grid_file(mf::encode_grid_file(file));
  EXPECT_EQ(*mf::grid_from_record(back, 0).params, mf::ParameterVector::nbody(0.2, 0.9));
  EXPECT_FALSE(mf::grid_from_record(back, 1).params.has_value());
}

TEST(GridFiles, NonFiniteValuesRejected) {
  auto g = mf::make_grid(2, 4, 25.0, 0.0, mf::FieldId::Mgas);
  g.values[3] = std::nan("");
  EXPECT_MF_ERROR(mf::to_record(g), mf::ErrorCode::invariant_violation);
}

TEST(Info, RecordByteFormulas) {
  TempDir dir("info");
  {
    auto map = constant_map(256, 1.0);
    auto f = mf::grid_file_for(map);
    mf::append_record(f, map);
    mf::write_grid_file(f, dir / "map.cmdgrid");
    const auto text = mf::cmd_info(dir / "map.cmdgrid");
    EXPECT_NE(text.find("payload bytes per record: 262144\n"), std::string::npos) << text;
    EXPECT_NE(text.find("kind: 2D map"), std::string::npos);
  }
  {
    auto grid = mf::make_grid(3, 128, 25.0, 0.0, mf::FieldId::Mtot);
    auto f = mf::grid_file_for(grid);
    mf::append_record(f, grid);
    mf::write_grid_file(f, dir / "grid.cmdgrid");
    const auto text = mf::cmd_info(dir / "grid.cmdgrid");
    EXPECT_NE(text.find("payload bytes per record: 8388608\n"), std::string::npos) << text;
    EXPECT_NE(text.find("size: 128x128x128"), std::string::npos);
  }
}

TEST(Info, SnapshotGivesMagicMismatchWithHint) {
  TempDir dir("info");
  mf::SyntheticSpec s;
  s.n_gas = 10;
  mf::write_snapshot(mf::gen_synthetic(s), dir / "x.cmdsnap");
  try {
    mf::cmd_info(dir / "x.cmdsnap");
    FAIL();
  } catch (const mf::Error& e) {
    EXPECT_EQ(e.code(), mf::ErrorCode::magic_mismatch);
    EXPECT_NE(std::string(e.what()).find("CMD-SNAP"), std::string::npos);
  }
}

TEST(Info, SizeMismatchDetected) {
  TempDir dir("info");
  auto map = constant_map(16, 1.0);
  auto f = mf::grid_file_for(map);
  mf::append_record(f, map);
  auto bytes = mf::encode_grid_file(f);
  mf::io::write_file(dir / "short", std::string_view(bytes).substr(0, bytes.size() - 4));
  EXPECT_MF_ERROR(mf::cmd_info(dir / "short"), mf::ErrorCode::truncated_file);
}

TEST(Render, HeaderAndPixelCount) {
  auto map = constant_map(256, 1.0);
  for (std::size_t i = 0; i < map.values.size(); ++i) map.values[i] = 1.0 + static_cast<double>(i % 977);
  const auto pgm = mf::render_pgm(map);
  const std::string header = "P5 256 256 255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  EXPECT_EQ(pgm.size(), header.size() + 65536);
}

TEST(Render, ConstantMapIsBlack) {
  const auto pgm = mf::render_pgm(constant_map(32, 7.5));
  const auto pixels = pgm.substr(std::string("P5 32 32 255\n").size());
  ASSERT_EQ(pixels.size(), 1024u);
  for (char c : pixels) EXPECT_EQ(c, 0);
}

TEST(Render, LogScaleIsMonotone) {
  auto map = constant_map(10, 0.0);
  for (std::size_t i = 0; i < 100; ++i) map.values[i] = std::pow(10.0, static_cast<double>(i) / 20.0);
  map.values[0] = 0.0;
  const auto pgm = mf::render_pgm(map);
  const auto px = pgm.substr(pgm.size() - 100);
  EXPECT_EQ(static_cast<unsigned char>(px[0]), 0);
  for (std::size_t i = 2; i < 100; ++i) EXPECT_GE(static_cast<unsigned char>(px[i]), static_cast<unsigned char>(px[i - 1]));
  EXPECT_EQ(static_cast<unsigned char>(px[99]), 255);
}

TEST(RunConfig, ParsesKeysAndReportsLines) {
  const auto c = mf::parse_run_config(
      "# comment\n"
      "fields = Mgas, T, Mgas\n"
      "grid_sizes = 32, 64\n"
      "slices = z:0:5, x:20:5\n"
      "kernel2d = projected_sphere\n"
      "params = 0.3 0.8\n"
      "synthetic.magnetic = false\n");
  EXPECT_EQ(c.fields, (std::vector<mf::FieldId>{mf::FieldId::Mgas, mf::FieldId::T}));
  EXPECT_EQ(c.grid_sizes, (std::vector<std::size_t>{32, 64}));
  ASSERT_EQ(c.slices.size(), 2u);
  EXPECT_EQ(c.slices[1], (mf::SlicePlan{0, 20.0, 5.0}));
  EXPECT_FALSE(c.default_slices);
  EXPECT_EQ(c.kernel2d, mf::Kernel2DMode::projected_sphere);
  EXPECT_EQ(*c.params, mf::ParameterVector::nbody(0.3, 0.8));
  EXPECT_FALSE(c.synthetic.magnetic);
  EXPECT_TRUE(mf::resolved_slices(mf::parse_run_config("slices = none\n"), 25.0).empty());
  EXPECT_EQ(mf::resolved_slices(mf::RunConfig{}, 25.0).size(), 15u);

  auto expect_line = [](const std::string& text, const std::string& what) {
    try {
      mf::parse_run_config(text);
      FAIL() << text;
    } catch (const mf::Error& e) {
      EXPECT_EQ(e.code(), mf::ErrorCode::parse_error);
      EXPECT_NE(std::string(e.what()).find(what), std::string::npos) << e.what();
    }
  };
  expect_line("\nfields = Mgas, Nope\n", "line 2");
  expect_line("colour = red\n", "unknown config key");
  expect_line("grid_sizes = 64x\n", "line 1");
  expect_line("just words\n", "key = value");
  expect_line("params = 1 2 3\n", "2 or 6");
  expect_line("slices = z:0\n", "axis:offset:thickness");
}

TEST(Generate, CountingContract) {
  TempDir dir("gen");
  const auto m = mf::cmd_generate(small_config(dir.path()));
  std::map<std::string, int> kinds;
  for (const auto& f : m.files) {
    ++kinds[f.kind];
    if (f.kind != "labels") {
      EXPECT_EQ(f.records, f.kind == "map" ? 15u : 1u);
    }
    EXPECT_EQ(f.sha256, mf::sha256_hex(mf::io::read_file(dir / f.path)));
    EXPECT_EQ(f.bytes, std::filesystem::file_size(dir / f.path));
  }
  EXPECT_EQ(kinds["grid"], 2);
  EXPECT_EQ(kinds["map"], 2);
  EXPECT_EQ(kinds["labels"], 1);
  EXPECT_EQ(m.files.size(), 5u);

  const auto manifest = nlohmann::json::parse(mf::io::read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest["format"], "cmd-manifest-1");
  EXPECT_EQ(manifest["files"].size(), 5u);
  EXPECT_EQ(manifest["config"]["fields"], nlohmann::json({"Mgas", "T"}));
  // Every written file other than the manifest is listed.
  const auto tree = read_tree(dir.path());
  EXPECT_EQ(tree.size(), 6u);

  const auto grid = mf::read_grid_file(dir / "grids/Mgas_n64.cmdgrid");
  EXPECT_EQ(grid.header.n, 64u);
  const auto g = mf::grid_from_record(grid, 0);
  EXPECT_NEAR(g.integral(), 3000 * 1.3e7 * 1.05, 3000 * 1.3e7 * 0.06);
  const auto labels = mf::read_labels(dir / "labels.txt");
  ASSERT_EQ(labels.size(), 1u);
  EXPECT_EQ(labels[0].params, *g.params);
}

TEST(Generate, ByteIdenticalReruns) {
  TempDir a("gen_a"), b("gen_b");
  auto ca = small_config(a.path());
  auto cb = small_config(b.path());
  cb.threads = 3;
  const auto ma = mf::cmd_generate(ca);
  const auto mb = mf::cmd_generate(cb);
  EXPECT_EQ(read_tree(a.path()), read_tree(b.path()));
  ASSERT_EQ(ma.files.size(), mb.files.size());
  for (std::size_t i = 0; i < ma.files.size(); ++i) EXPECT_EQ(ma.files[i].sha256, mb.files[i].sha256);
}

TEST(Generate, MissingBModulusNamesField) {
  TempDir dir("gen");
  auto c = small_config(dir.path());
  c.synthetic.magnetic = false;
  c.fields = {mf::FieldId::Mgas, mf::FieldId::B};
  try {
    mf::cmd_generate(c);
    FAIL();
  } catch (const mf::Error& e) {
    EXPECT_EQ(e.code(), mf::ErrorCode::missing_property);
    EXPECT_NE(std::string(e.what()).find("field B"), std::string::npos) << e.what();
  }
}

TEST(Generate, SnapshotInputAndExplicitParams) {
  TempDir dir("gen");
  mf::SyntheticSpec s;
  s.n_gas = 500;
  s.n_dm = 500;
  mf::write_snapshot(mf::gen_synthetic(s), dir / "in.cmdsnap");
  auto c = mf::parse_run_config("fields = Mcdm\ngrid_sizes = 16\nslices = y:5:10\nmap_size = 32\nparams = 0.3 0.8\n");
  c.snapshot = dir / "in.cmdsnap";
  c.output = dir / "out";
  const auto m = mf::cmd_generate(c);
  ASSERT_EQ(m.files.size(), 3u);
  EXPECT_EQ(m.files[1].records, 1u);
  EXPECT_EQ(m.params, mf::ParameterVector::nbody(0.3, 0.8));
  const auto map = mf::grid_from_record(mf::read_grid_file(dir / "out/maps/Mcdm_map32.cmdgrid"), 0);
  EXPECT_EQ(map.dimensionality, 2);

  c.params = mf::ParameterVector::nbody(0.7, 0.8);
  EXPECT_MF_ERROR(mf::cmd_generate(c), mf::ErrorCode::out_of_range);
  c.snapshot = dir / "missing.cmdsnap";
  EXPECT_MF_ERROR(mf::cmd_generate(c), mf::ErrorCode::io_failure);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(mf::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
