// multifield-cli: batch front end for snapshot generation, deposition and
// the label/loss utilities. Exit codes: 0 ok, 1 usage, 2 data/format error,
// 3 internal failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "multifield/multifield.hpp"

namespace fs = std::filesystem;
using namespace multifield;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_internal = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<unsigned> env_threads() {
  const char* v = std::getenv("CMD_THREADS");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || v[0] == '-') throw UsageError("CMD_THREADS must be a non-negative integer");
  return static_cast<unsigned>(n);
}

unsigned resolve_threads(unsigned configured, std::optional<unsigned> flag) {
  if (flag) return *flag;
  if (auto env = env_threads()) return *env;
  return configured;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    io::write_file(out_path, text);
  }
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string output;
  std::string snapshot;
  std::string fields;
  std::string sizes;
  std::vector<std::string> settings;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

int run_generate(const GenerateArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : read_run_config(a.config);
  if (!a.snapshot.empty()) c.snapshot = a.snapshot;
  if (!a.fields.empty()) apply_setting(c, "fields", a.fields);
  if (!a.sizes.empty()) apply_setting(c, "grid_sizes", a.sizes);
  if (a.seed) c.seed = *a.seed;
  for (const auto& s : a.settings) apply_assignment(c, s);
  if (!a.output.empty()) c.output = a.output;
  c.threads = resolve_threads(c.threads, a.threads);

  const Manifest m = cmd_generate(c);
  std::cout << "wrote " << m.files.size() + 1 << " files to " << c.output.string() << "\n";
  for (const auto& f : m.files) {
    std::cout << "  " << f.path << "  " << f.bytes << " bytes  sha256 " << f.sha256 << "\n";
  }
  std::cout << "  " << manifest_name << "\n";
  return 0;
}

// --- render ---------------------------------------------------------------

struct RenderArgs {
  std::string input;
  std::size_t record = 0;
  std::string out;
  std::string axis = "z";
  std::size_t start = 0;
  std::size_t count = 0;
  std::string mass_grid;
  std::size_t mass_record = 0;
};

int run_render(const RenderArgs& a) {
  const GridFile file = read_grid_file(a.input);
  ScalarGrid g = grid_from_record(file, a.record);
  if (g.dimensionality == 3) {
    if (a.count == 0) throw UsageError("3D input: give the slab with --count (and --axis, --start)");
    std::optional<ScalarGrid> mass;
    if (!a.mass_grid.empty()) mass = grid_from_record(read_grid_file(a.mass_grid), a.mass_record);
    g = extract_map(g, detail::parse_axis(a.axis), a.start, a.count, mass ? &*mass : nullptr);
  }
  io::write_file(a.out, render_pgm(g));
  std::cout << "wrote " << a.out << " (" << g.n << "x" << g.n << ")\n";
  return 0;
}

// --- synth / radii --------------------------------------------------------

int run_synth(const SyntheticSpec& spec, const std::string& out) {
  const Snapshot snap = gen_synthetic(spec);
  write_snapshot(snap, out);
  std::cout << "wrote " << out << ":";
  for (const auto& s : snap.species) std::cout << " " << species_name(s.kind) << "=" << s.count();
  std::cout << "\n";
  return 0;
}

int run_radii(const std::string& input, const std::string& species, std::size_t k, const std::string& out,
              std::optional<unsigned> threads) {
  const auto kind = parse_species(species);
  if (!kind) throw UsageError("unknown species '" + species + "'");
  const unsigned workers = resolve_threads(default_workers(), threads);
  const Snapshot snap = read_snapshot(input);
  const ParticleSet* set = snap.find(*kind);
  if (set == nullptr) fail(ErrorCode::missing_property, "species " + species + " absent from " + input);
  const auto radii = smoothing_radii(*set, snap.header.box_size, k, workers == 0 ? default_workers() : workers);
  std::string text;
  for (double r : radii.radii) text += format_double(r) + "\n";
  emit(text, out);
  return 0;
}

// --- labels / split / loss ------------------------------------------------

int run_sample(std::size_t n, std::uint64_t seed, const std::string& suite_text, const std::string& prefix,
               const std::string& out) {
  const auto suite = parse_suite(suite_text);
  if (!suite) throw UsageError("unknown suite '" + suite_text + "'");
  std::vector<LabelRecord> records;
  const auto samples = sample_lhs(n, seed, *suite);
  for (std::size_t i = 0; i < samples.size(); ++i) records.push_back({prefix + std::to_string(i), samples[i]});
  emit(format_labels(records), out);
  return 0;
}

int run_split(const std::string& groups_path, std::uint64_t seed, const std::vector<double>& fractions,
              const std::string& out_dir) {
  if (fractions.size() != 3) throw UsageError("--fractions takes three values: train,val,test");
  std::vector<std::uint64_t> groups;
  std::istringstream in(io::read_file(groups_path));
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::uint64_t> ids;
  while (std::getline(in, line)) {
    ++line_no;
    const auto word = detail::trim(line);
    if (word.empty()) continue;
    const auto it = ids.try_emplace(word, ids.size()).first;
    groups.push_back(it->second);
  }
  const auto split = split_by_simulation(groups, {fractions[0], fractions[1], fractions[2]}, seed);
  std::cout << "train " << split.train.size() << "\nvalidation " << split.validation.size() << "\ntest "
            << split.test.size() << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    auto dump = [&](const std::string& name, const std::vector<std::size_t>& items) {
      std::string text;
      for (auto i : items) text += std::to_string(i) + "\n";
      io::write_file(fs::path(out_dir) / name, text);
    };
    dump("train.txt", split.train);
    dump("validation.txt", split.validation);
    dump("test.txt", split.test);
  }
  return 0;
}

// Predictions: "<id> mu_1 .. mu_P sigma_1 .. sigma_P" in normalized units,
// matched to label records by id.
MomentsBatch read_batch(const std::string& labels_path, const std::string& predictions_path) {
  const auto labels = read_labels(labels_path);
  if (labels.empty()) fail(ErrorCode::empty_input, "no label records in " + labels_path);
  const std::size_t p = active_parameters(labels.front().params.suite);
  std::map<std::string, std::vector<double>> predictions;
  std::istringstream in(io::read_file(predictions_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream words(line);
    std::string id;
    if (!(words >> id)) continue;
    std::vector<double> v;
    for (std::string t; words >> t;) v.push_back(parse_double(t, line_no));
    if (v.size() != 2 * p) {
      fail(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected " + std::to_string(2 * p) +
                                       " values, got " + std::to_string(v.size()));
    }
    predictions[id] = std::move(v);
  }
  MomentsBatch b;
  b.batch = labels.size();
  b.params = p;
  for (const auto& rec : labels) {
    if (active_parameters(rec.params.suite) != p) fail(ErrorCode::shape_mismatch, "mixed label arities");
    const auto it = predictions.find(rec.id);
    if (it == predictions.end()) fail(ErrorCode::shape_mismatch, "no prediction for record " + rec.id);
    for (std::size_t i = 0; i < p; ++i) {
      b.theta.push_back(normalize_parameter(i, rec.params.values[i]));
      b.mu.push_back(it->second[i]);
      b.sigma.push_back(it->second[p + i]);
    }
  }
  return b;
}

int run_loss(const std::string& labels, const std::string& predictions, double epsilon) {
  const auto b = read_batch(labels, predictions);
  std::cout.precision(17);
  std::cout << "batch " << b.batch << "\nparams " << b.params << "\n";
  std::cout << "loss_log " << loss_moments_log(b, epsilon) << "\n";
  std::cout << "loss_sum " << loss_moments_sum(b) << "\n";
  return 0;
}

int run_check_arch(const std::string& path, bool builtin, int outputs, std::int64_t channels, std::int64_t size,
                   std::optional<std::int64_t> h) {
  if (path.empty() == !builtin) throw UsageError("give an architecture file or --builtin");
  const ArchitectureSpec arch = builtin ? moments_architecture(outputs) : parse_architecture(io::read_file(path));
  const auto shapes = propagate_shapes(arch, channels, size);
  std::cout << "input " << channels << "x" << size << "x" << size << "\n";
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    std::cout << i + 1 << "  " << shapes[i].layer << "  ->  " << shapes[i].output.str();
    if (h) std::cout << "  [" << shapes[i].output.channels.evaluate(*h) << "]";
    std::cout << "\n";
  }
  std::cout << "output " << shapes.back().output.str() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-to-field deposition for multifield cosmology datasets"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Deposit grids and maps and write a manifest");
  generate->add_option("-c,--config", gen.config, "Run configuration file (key = value)");
  generate->add_option("-o,--output", gen.output, "Output directory");
  generate->add_option("--snapshot", gen.snapshot, "Input CMD-SNAP file (default: synthetic)");
  generate->add_option("--fields", gen.fields, "Comma-separated field prefixes, e.g. Mgas,T");
  generate->add_option("--sizes", gen.sizes, "Comma-separated 3D grid sizes");
  generate->add_option("--seed", gen.seed, "Label sampling seed");
  generate->add_option("--set", gen.settings, "Override any config key: key=value");
  generate->add_option("-j,--threads", gen.threads, "Worker threads (0: all cores)");

  RenderArgs ren;
  auto* render = app.add_subcommand("render", "Write a record as a log-scaled PGM image");
  render->add_option("input", ren.input, "CMD-GRID file")->required();
  render->add_option("-r,--record", ren.record, "Record index");
  render->add_option("-o,--out", ren.out, "Output .pgm path")->required();
  render->add_option("--axis", ren.axis, "3D input: projection axis x|y|z");
  render->add_option("--start", ren.start, "3D input: first voxel plane");
  render->add_option("--count", ren.count, "3D input: number of voxel planes");
  render->add_option("--mass-grid", ren.mass_grid, "3D input: mass grid for mass-weighted fields");
  render->add_option("--mass-record", ren.mass_record, "Record index in the mass grid");

  std::string info_input;
  auto* info = app.add_subcommand("info", "Summarize a CMD-GRID file");
  info->add_option("input", info_input, "CMD-GRID file")->required();

  SyntheticSpec synth_spec;
  std::string synth_out;
  bool no_magnetic = false;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic snapshot");
  synth->add_option("--seed", synth_spec.seed, "Generator seed");
  synth->add_option("--box", synth_spec.box_size, "Box size, h^-1 Mpc");
  synth->add_option("--redshift", synth_spec.redshift, "Redshift");
  synth->add_option("--n-gas", synth_spec.n_gas, "Gas particles");
  synth->add_option("--n-dm", synth_spec.n_dm, "Dark matter particles");
  synth->add_option("--n-star", synth_spec.n_star, "Star particles");
  synth->add_option("--n-bh", synth_spec.n_black_hole, "Black hole particles");
  synth->add_option("--clumps", synth_spec.n_clumps, "Number of clumps");
  synth->add_flag("--no-magnetic", no_magnetic, "Omit b_modulus (SIMBA-like)");
  synth->add_option("-o,--out", synth_out, "Output CMD-SNAP path")->required();

  std::string radii_input, radii_species = "gas", radii_out;
  std::size_t radii_k = default_neighbor_count;
  std::optional<unsigned> radii_threads;
  auto* radii = app.add_subcommand("radii", "Print per-particle smoothing radii");
  radii->add_option("input", radii_input, "CMD-SNAP file")->required();
  radii->add_option("--species", radii_species, "gas|dark_matter|star|black_hole");
  radii->add_option("-k,--neighbors", radii_k, "Neighbour rank");
  radii->add_option("-o,--out", radii_out, "Output text file (default stdout)");
  radii->add_option("-j,--threads", radii_threads, "Worker threads");

  std::size_t sample_n = 1000;
  std::uint64_t sample_seed = 1;
  std::string sample_suite = "IllustrisTNG", sample_prefix = "sim", sample_out;
  auto* sample = app.add_subcommand("sample-params", "Latin-hypercube parameter labels");
  sample->add_option("-n,--count", sample_n, "Number of samples");
  sample->add_option("--seed", sample_seed, "Seed");
  sample->add_option("--suite", sample_suite, "IllustrisTNG|SIMBA|N-body");
  sample->add_option("--prefix", sample_prefix, "Record id prefix");
  sample->add_option("-o,--out", sample_out, "Output label file (default stdout)");

  std::string split_groups, split_out;
  std::uint64_t split_seed = 1;
  std::vector<double> split_fractions{0.90, 0.05, 0.05};
  auto* split = app.add_subcommand("split", "Split items into train/validation/test by group");
  split->add_option("groups", split_groups, "Text file, one group id per item line")->required();
  split->add_option("--seed", split_seed, "Seed");
  split->add_option("--fractions", split_fractions, "train,val,test")->delimiter(',')->expected(3);
  split->add_option("--out-dir", split_out, "Write train.txt/validation.txt/test.txt here");

  std::string loss_labels, loss_predictions;
  double loss_epsilon = default_loss_epsilon;
  auto* loss = app.add_subcommand("loss-eval", "Evaluate both moment losses");
  loss->add_option("--labels", loss_labels, "Label file")->required();
  loss->add_option("--predictions", loss_predictions, "Prediction file")->required();
  loss->add_option("--epsilon", loss_epsilon, "Clamp inside each log term");

  std::string arch_path;
  bool arch_builtin = false;
  int arch_outputs = 12;
  std::int64_t arch_channels = 1, arch_size = 256;
  std::optional<std::int64_t> arch_h;
  auto* arch = app.add_subcommand("check-arch", "Shape-check an architecture file");
  arch->add_option("input", arch_path, "Architecture file");
  arch->add_flag("--builtin", arch_builtin, "Use the built-in moments network");
  arch->add_option("--outputs", arch_outputs, "Built-in network outputs (12, or 4 for N-body)");
  arch->add_option("-C,--channels", arch_channels, "Input channels");
  arch->add_option("--size", arch_size, "Input spatial size");
  arch->add_option("-H", arch_h, "Evaluate channel counts for this H");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_usage;
  }

  try {
    if (generate->parsed()) return run_generate(gen);
    if (render->parsed()) return run_render(ren);
    if (info->parsed()) {
      std::cout << cmd_info(info_input);
      return 0;
    }
    if (synth->parsed()) {
      synth_spec.magnetic = !no_magnetic;
      return run_synth(synth_spec, synth_out);
    }
    if (radii->parsed()) return run_radii(radii_input, radii_species, radii_k, radii_out, radii_threads);
    if (sample->parsed()) return run_sample(sample_n, sample_seed, sample_suite, sample_prefix, sample_out);
    if (split->parsed()) return run_split(split_groups, split_seed, split_fractions, split_out);
    if (loss->parsed()) return run_loss(loss_labels, loss_predictions, loss_epsilon);
    if (arch->parsed()) return run_check_arch(arch_path, arch_builtin, arch_outputs, arch_channels, arch_size, arch_h);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_data;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_internal;
  }
  return exit_usage;
}
