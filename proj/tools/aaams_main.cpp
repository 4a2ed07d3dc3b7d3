#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aaams/aaams.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;

struct ClusterArgs {
  std::string config;
  std::string input, image, truth, out_dir = ".";
  std::string algo = "aaams";
  std::vector<double> sigma_base_sq;  // squared, per domain
  std::vector<double> epsilon_sq;     // squared, per domain
  std::vector<double> params;         // image shorthand <sr2, ss2, er2, es2>
  double lambda = 5.0;
  double delta = 0.01;
  double xi = 0.0;  // 0: auto (1e-4 * sigma_base^2 per domain)
  double db = 1.0;
  int min_size = 10;
  bool perturb = false;
  std::uint64_t seed = 0;
  int n_prime = 64;
  int max_iter = 300;
  bool no_postprocess = false;
  bool db_fixpoint = false;
  int dense_gate = -1;  // -1 auto: on for images, off otherwise
  // baseline knobs
  double grouping_radius = 0.0;
  int k = 0;                 // vms neighbor rank; 0: ceil(sqrt(n))
  double sigma_scale = 1.0;  // vms proportionality
};

// key = value lines, # comments, optional quotes; keys match the long flag
// names without the leading dashes. Flags given on the command line win.
void apply_config_file(ClusterArgs& args, const CLI::App& sub) {
  std::ifstream in(args.config);
  if (!in) throw std::runtime_error("cannot open config file " + args.config);
  const auto untouched = [&](const std::string& flag) {
    return sub.count(flag) == 0;
  };
  const auto parse_list = [](const std::string& v) {
    std::vector<double> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
  };
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\"'");
      const auto e = s.find_last_not_of(" \t\"'");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    if (key == "sigma-base" && untouched("--sigma-base")) args.sigma_base_sq = parse_list(value);
    else if (key == "epsilon" && untouched("--epsilon")) args.epsilon_sq = parse_list(value);
    else if (key == "params" && untouched("--params")) args.params = parse_list(value);
    else if (key == "algo" && untouched("--algo")) args.algo = value;
    else if (key == "lambda" && untouched("--lambda")) args.lambda = std::stod(value);
    else if (key == "delta" && untouched("--delta")) args.delta = std::stod(value);
    else if (key == "xi" && untouched("--xi")) args.xi = std::stod(value);
    else if (key == "db" && untouched("--db")) args.db = std::stod(value);
    else if (key == "min-size" && untouched("--min-size")) args.min_size = std::stoi(value);
    else if (key == "perturb" && untouched("--perturb")) args.perturb = value == "true" || value == "1";
    else if (key == "seed" && untouched("--seed")) args.seed = std::stoull(value);
    else if (key == "n-prime" && untouched("--n-prime")) args.n_prime = std::stoi(value);
    else if (key == "max-iter" && untouched("--max-iter")) args.max_iter = std::stoi(value);
    else if (key == "grouping-radius" && untouched("--grouping-radius")) args.grouping_radius = std::stod(value);
    else if (key == "k" && untouched("--k")) args.k = std::stoi(value);
    else if (key == "sigma-scale" && untouched("--sigma-scale")) args.sigma_scale = std::stod(value);
    else if (key == "out-dir" && untouched("--out-dir")) args.out_dir = value;
    else if (key == "truth" && untouched("--truth")) args.truth = value;
  }
}

int env_threads() {
  if (const char* v = std::getenv("AAAMS_THREADS")) {
    const int t = std::atoi(v);
    if (t > 0) return t;
  }
  return 0;  // auto
}

aaams::Scales to_scales(const std::vector<double>& squared, double fallback) {
  aaams::Scales s = aaams::Scales::uniform(fallback);
  if (!squared.empty()) s.range = std::sqrt(squared[0]);
  if (squared.size() > 1) s.spatial = std::sqrt(squared[1]);
  else s.spatial = s.range;
  return s;
}

void write_labels_csv(const std::vector<int>& labels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int v : labels) out << v << '\n';
}

void write_modes_csv(const std::vector<Eigen::VectorXd>& modes,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (const auto& m : modes) {
    for (int d = 0; d < m.size(); ++d) {
      if (d) out << ',';
      out << m[d];
    }
    out << '\n';
  }
}

// one row per cluster and domain block: id, block, mode, eigenvalues,
// eigenvectors (column-major), for external ellipse plotting
void write_ellipses_csv(const aaams::Partition& part, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "cluster,block,mode,eigenvalues,eigenvectors\n";
  const auto emit_block = [&](int id, const char* name,
                              const Eigen::VectorXd& mode,
                              const aaams::SpdMatrix& s) {
    out << id << ',' << name << ',';
    for (int d = 0; d < mode.size(); ++d) out << (d ? " " : "") << mode[d];
    out << ',';
    for (int d = 0; d < s.dim(); ++d) out << (d ? " " : "") << s.eigenvalues()[d];
    out << ',';
    const auto& v = s.eigenvectors();
    for (int c = 0; c < s.dim(); ++c)
      for (int r = 0; r < s.dim(); ++r)
        out << ((c || r) ? " " : "") << v(r, c);
    out << '\n';
  };
  for (int k = 0; k < part.cluster_count(); ++k) {
    const auto& sigma = part.sigmas[static_cast<size_t>(k)];
    const auto& mode = part.modes[static_cast<size_t>(k)];
    if (sigma.is_joint()) {
      emit_block(k, "range", mode.head(sigma.range().dim()), sigma.range());
      emit_block(k, "spatial", mode.tail(sigma.spatial().dim()), sigma.spatial());
    } else {
      emit_block(k, "full", mode, sigma.range());
    }
  }
}

std::vector<int> load_truth_labels(const std::string& path, int expect_n,
                                   int* width = nullptr, int* height = nullptr) {
  std::vector<int> truth;
  if (aaams::has_suffix(path, ".csv") || aaams::has_suffix(path, ".txt")) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      double v;
      // last column of each row is the label
      double last = 0;
      bool any = false;
      while (ss >> v) {
        last = v;
        any = true;
        if (ss.peek() == ',') ss.get();
      }
      if (any) truth.push_back(static_cast<int>(last));
    }
  } else {
    int w = 0, h = 0;
    truth = aaams::load_label_map(path, w, h);
    if (width) *width = w;
    if (height) *height = h;
  }
  if (static_cast<int>(truth.size()) != expect_n)
    throw std::runtime_error(path + ": ground truth size mismatch");
  return truth;
}

void write_metrics_json(const aaams::Partition& part,
                        const std::vector<int>& truth, int width, int height,
                        const std::string& path) {
  json report;
  report["pri"] = aaams::pri(part.labels, truth);
  report["gce"] = aaams::gce(part.labels, truth);
  report["voi"] = aaams::voi(part.labels, truth);
  report["ari"] = aaams::ari(part.labels, truth);
  if (width > 0 && height > 0)
    report["bde"] = aaams::bde(part.labels, truth, width, height);
  report["cluster_count"] = part.cluster_count();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << report.dump(2) << '\n';
}

aaams::Partition partition_without_postprocess(const aaams::RunResult& result,
                                               const aaams::PointStore& store,
                                               const aaams::DensityField& density,
                                               const aaams::Scales& xi) {
  // compact labels, keep converged modes, attach standalone covariances
  aaams::Partition part;
  part.labels.assign(result.labels.size(), -1);
  std::vector<int> members_of;
  for (size_t k = 0; k < result.cluster_ids.size(); ++k) {
    part.modes.push_back(result.modes[k]);
  }
  std::vector<std::vector<int>> members(result.cluster_ids.size());
  std::unordered_map<int, int> to_compact;
  for (size_t k = 0; k < result.cluster_ids.size(); ++k)
    to_compact[result.cluster_ids[k]] = static_cast<int>(k);
  for (size_t i = 0; i < result.labels.size(); ++i) {
    const int k = to_compact.at(result.labels[i]);
    part.labels[i] = k;
    members[static_cast<size_t>(k)].push_back(static_cast<int>(i));
  }
  for (const auto& m : members) {
    auto [mu, sigma] = aaams::standalone_covariance(m, store, density, xi);
    part.sigmas.push_back(std::move(sigma));
  }
  return part;
}

int run_cluster(const ClusterArgs& args) {
  const bool image_mode = !args.image.empty();
  if (image_mode == !args.input.empty()) {
    std::cerr << "error: exactly one of --input or --image is required\n";
    return kExitUsage;
  }
  if (!fs::exists(image_mode ? args.image : args.input)) {
    std::cerr << "error: no such file: " << (image_mode ? args.image : args.input)
              << "\n";
    return kExitUsage;
  }
  fs::create_directories(args.out_dir);
  const auto out = [&](const std::string& name) {
    return (fs::path(args.out_dir) / name).string();
  };

  // assemble the store
  std::optional<aaams::PointStore> store;
  int width = 0, height = 0;
  if (image_mode) {
    const aaams::Image img = aaams::load_image(args.image);
    auto features = aaams::image_to_features(img);
    width = features.width;
    height = features.height;
    store.emplace(std::move(features.features));
  } else if (aaams::has_suffix(args.input, ".bin")) {
    store.emplace(aaams::PointStore::from_binary(args.input));
  } else {
    store.emplace(aaams::PointStore::from_csv(args.input));
  }

  // resolve parameters (CLI values are squared, paper convention)
  std::vector<double> sigma_sq = args.sigma_base_sq;
  std::vector<double> eps_sq = args.epsilon_sq;
  if (image_mode && args.params.size() == 4) {
    sigma_sq = {args.params[0], args.params[1]};
    eps_sq = {args.params[2], args.params[3]};
  }
  if (sigma_sq.empty()) {
    if (image_mode) sigma_sq = {15.0, 16.0};
    else {
      std::cerr << "error: --sigma-base is required for point input\n";
      return kExitUsage;
    }
  }
  if (eps_sq.empty() && image_mode) eps_sq = {1.0, 81.0};

  aaams::RunConfig cfg;
  cfg.sigma_base = to_scales(sigma_sq, 1.0);
  cfg.epsilon = eps_sq.empty() ? aaams::Scales::uniform(0.0)
                               : to_scales(eps_sq, 0.0);
  cfg.lambda = args.lambda;
  cfg.delta = args.delta;
  if (args.xi > 0.0) cfg.xi = aaams::Scales::uniform(args.xi);
  cfg.neighbor_count = args.n_prime;
  cfg.max_iterations = args.max_iter;
  cfg.perturbation.enabled = args.perturb;
  cfg.seed = args.seed;
  cfg.dense_size_gate = args.dense_gate < 0 ? image_mode : args.dense_gate > 0;
  cfg.threads = env_threads();
  if (image_mode) {
    cfg.grid_width = width;
    cfg.grid_height = height;
  }

  std::ofstream diag(out("diagnostics.jsonl"));
  cfg.diagnostics = &diag;

  // run the selected algorithm
  aaams::RunResult result;
  std::optional<aaams::DensityField> density;
  if (args.algo == "aaams") {
    aaams::AgglomerationEngine engine(*store, cfg);
    result = engine.run_to_convergence();
    density = engine.density();
  } else {
    aaams::BaselineConfig bl;
    bl.delta = args.delta;
    bl.grouping_radius = args.grouping_radius;
    bl.neighbor_count = args.n_prime;
    bl.max_iterations = args.max_iter;
    bl.grid_width = cfg.grid_width;
    bl.grid_height = cfg.grid_height;
    aaams::Partition base;
    if (args.algo == "ms") {
      base = aaams::run_standard_ms(*store, cfg.sigma_base, bl);
    } else {
      const int k = args.k > 0
                        ? args.k
                        : static_cast<int>(std::ceil(std::sqrt(
                              static_cast<double>(store->size()))));
      base = aaams::run_variable_ms(*store, k, args.sigma_scale, bl);
    }
    result = aaams::to_run_result(base, *store, cfg.sigma_base);
    const auto index = aaams::build_index(*store, cfg.grid_width, cfg.grid_height);
    density = aaams::compute_density(*store, cfg.sigma_base, *index, cfg.profile,
                                     cfg.threads);
  }

  const aaams::Scales xi_scales{
      args.xi > 0.0 ? args.xi
                    : 1e-4 * cfg.sigma_base.range * cfg.sigma_base.range,
      args.xi > 0.0 ? args.xi
                    : 1e-4 * cfg.sigma_base.spatial * cfg.sigma_base.spatial};

  aaams::Partition part;
  if (args.no_postprocess) {
    part = partition_without_postprocess(result, *store, *density, xi_scales);
  } else {
    aaams::PostprocessConfig pp;
    pp.min_size = args.min_size;
    pp.db_threshold = args.db;
    pp.structured = image_mode;
    pp.grid_width = width;
    pp.grid_height = height;
    pp.db_fixpoint = args.db_fixpoint;
    pp.xi = xi_scales;
    part = aaams::postprocess(result, *store, *density, pp);
  }

  // artifacts
  if (image_mode) {
    aaams::emit_segmentation(part, part.modes, width, height, out("labels.png"),
                             out("segment.png"));
  } else {
    write_labels_csv(part.labels, out("labels.csv"));
  }
  write_modes_csv(part.modes, out("modes.csv"));
  write_ellipses_csv(part, out("ellipses.csv"));
  aaams::write_cluster_dump(part, out("clusters.json"));

  if (!args.truth.empty()) {
    if (!fs::exists(args.truth)) {
      std::cerr << "error: no such file: " << args.truth << "\n";
      return kExitUsage;
    }
    const auto truth = load_truth_labels(
        args.truth, static_cast<int>(store->size()));
    write_metrics_json(part, truth, width, height, out("metrics.json"));
  }

  std::cout << "clusters: " << part.cluster_count()
            << "  iterations: " << result.iterations_used << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int components = 3;
  int n = 600;
  int dim = 2;
  std::uint64_t seed = 0;
  double eig_min = 0.05;
  double eig_max = 1.0;
  double mean_box = 10.0;
  std::string out = "points.csv";
  std::string truth_out = "truth.csv";
};

int run_synth(const SynthArgs& args) {
  if (args.components < 1 || args.n < 1 || args.dim < 1 ||
      args.eig_min < 0.0 || args.eig_max < args.eig_min) {
    std::cerr << "error: invalid synth parameters\n";
    return kExitUsage;
  }
  std::mt19937_64 rng(args.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> mean_u(-args.mean_box, args.mean_box);
  std::uniform_real_distribution<double> eig_u(args.eig_min, args.eig_max);

  struct Component {
    Eigen::VectorXd mean;
    Eigen::MatrixXd chol;  // such that chol * z has the requested covariance
  };
  std::vector<Component> comps;
  for (int c = 0; c < args.components; ++c) {
    Component comp;
    comp.mean = Eigen::VectorXd(args.dim);
    for (int d = 0; d < args.dim; ++d) comp.mean[d] = mean_u(rng);
    Eigen::MatrixXd a(args.dim, args.dim);
    for (int i = 0; i < args.dim; ++i)
      for (int j = 0; j < args.dim; ++j) a(i, j) = normal(rng);
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
    Eigen::VectorXd eig(args.dim);
    for (int d = 0; d < args.dim; ++d) eig[d] = eig_u(rng);
    comp.chol = q * eig.cwiseSqrt().asDiagonal();
    comps.push_back(std::move(comp));
  }

  Eigen::MatrixXd pts(args.dim, args.n);
  std::vector<int> labels(static_cast<size_t>(args.n));
  std::uniform_int_distribution<int> pick(0, args.components - 1);
  for (int i = 0; i < args.n; ++i) {
    const int c = pick(rng);
    Eigen::VectorXd z(args.dim);
    for (int d = 0; d < args.dim; ++d) z[d] = normal(rng);
    pts.col(i) = comps[static_cast<size_t>(c)].mean +
                 comps[static_cast<size_t>(c)].chol * z;
    labels[static_cast<size_t>(i)] = c;
  }
  const aaams::PointStore store(pts);
  store.save_csv(args.out);
  write_labels_csv(labels, args.truth_out);
  std::cout << "wrote " << args.n << " points to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string image, input;
  std::string param = "sigma_r2";
  std::vector<double> values;
  std::vector<double> params = {15.0, 16.0, 1.0, 81.0};
  double delta = 0.01;
  int min_size = 10;
  double db = 1.0;
  int max_iter = 300;
  std::uint64_t seed = 0;
  std::string out = "sweep.csv";
};

int run_sweep(const SweepArgs& args) {
  if (args.values.empty()) {
    std::cerr << "error: --values must list at least one setting\n";
    return kExitUsage;
  }
  const bool image_mode = !args.image.empty();
  if (image_mode == !args.input.empty()) {
    std::cerr << "error: exactly one of --input or --image is required\n";
    return kExitUsage;
  }
  if (!fs::exists(image_mode ? args.image : args.input)) {
    std::cerr << "error: no such file\n";
    return kExitUsage;
  }
  static const std::map<std::string, int> kParamIndex = {
      {"sigma_r2", 0}, {"sigma_s2", 1}, {"eps_r2", 2}, {"eps_s2", 3}};
  if (!kParamIndex.count(args.param)) {
    std::cerr << "error: unknown --param (use sigma_r2|sigma_s2|eps_r2|eps_s2)\n";
    return kExitUsage;
  }

  std::optional<aaams::PointStore> store;
  int width = 0, height = 0;
  if (image_mode) {
    const aaams::Image img = aaams::load_image(args.image);
    auto features = aaams::image_to_features(img);
    width = features.width;
    height = features.height;
    store.emplace(std::move(features.features));
  } else {
    store.emplace(aaams::PointStore::from_csv(args.input));
  }

  std::ofstream out(args.out);
  if (!out) {
    std::cerr << "error: cannot write " << args.out << "\n";
    return kExitUsage;
  }
  out << "param,value,cluster_count,mean_cluster_size,iterations\n";
  for (const double value : args.values) {
    std::vector<double> p = args.params;
    p[static_cast<size_t>(kParamIndex.at(args.param))] = value;

    aaams::RunConfig cfg;
    cfg.sigma_base = aaams::Scales{std::sqrt(p[0]), std::sqrt(p[1])};
    cfg.epsilon = aaams::Scales{std::sqrt(p[2]), std::sqrt(p[3])};
    cfg.delta = args.delta;
    cfg.max_iterations = args.max_iter;
    cfg.seed = args.seed;
    cfg.threads = env_threads();
    if (image_mode) {
      cfg.grid_width = width;
      cfg.grid_height = height;
      cfg.dense_size_gate = true;
    }
    cfg = aaams::AgglomerationEngine::normalized(cfg, *store);
    aaams::AgglomerationEngine engine(*store, cfg);
    const aaams::RunResult result = engine.run_to_convergence();

    aaams::PostprocessConfig pp;
    pp.min_size = args.min_size;
    pp.db_threshold = args.db;
    pp.structured = image_mode;
    pp.grid_width = width;
    pp.grid_height = height;
    pp.xi = cfg.xi;
    const aaams::Partition part =
        aaams::postprocess(result, *store, engine.density(), pp);

    const double mean_size =
        static_cast<double>(store->size()) / part.cluster_count();
    out << args.param << ',' << value << ',' << part.cluster_count() << ','
        << mean_size << ',' << result.iterations_used << '\n';
    std::cout << args.param << '=' << value
              << " clusters=" << part.cluster_count()
              << " iterations=" << result.iterations_used << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic agglomerative adaptive mean-shift clustering"};
  app.require_subcommand(1);

  ClusterArgs cl;
  CLI::App* cluster = app.add_subcommand("cluster", "cluster points or an image");
  cluster->add_option("--config", cl.config, "key=value config file");
  cluster->add_option("--input", cl.input, "points file (.csv or .bin)");
  cluster->add_option("--image", cl.image, "image file (.png/.ppm/.pgm)");
  cluster->add_option("--algo", cl.algo, "algorithm")
      ->check(CLI::IsMember({"aaams", "ms", "vms"}));
  cluster->add_option("--sigma-base", cl.sigma_base_sq,
                      "squared base bandwidth(s), per domain")
      ->delimiter(',');
  cluster->add_option("--epsilon", cl.epsilon_sq,
                      "squared merge vicinity, per domain")
      ->delimiter(',');
  cluster->add_option("--params", cl.params,
                      "image shorthand: sigma_r2,sigma_s2,eps_r2,eps_s2")
      ->delimiter(',');
  cluster->add_option("--lambda", cl.lambda, "minimum ESS");
  cluster->add_option("--delta", cl.delta, "convergence epsilon");
  cluster->add_option("--xi", cl.xi, "bandwidth regularizer (0 = auto)");
  cluster->add_option("--db", cl.db, "Bhattacharyya merge threshold");
  cluster->add_option("--min-size", cl.min_size, "minimum cluster size");
  cluster->add_flag("--perturb", cl.perturb, "perturb clusters at convergence");
  cluster->add_option("--seed", cl.seed, "random seed");
  cluster->add_option("--out-dir", cl.out_dir, "output directory");
  cluster->add_option("--truth", cl.truth, "ground-truth labels for metrics");
  cluster->add_option("--n-prime", cl.n_prime, "neighbor count per query");
  cluster->add_option("--max-iter", cl.max_iter, "iteration budget");
  cluster->add_flag("--no-postprocess", cl.no_postprocess,
                    "skip merge post-processing");
  cluster->add_flag("--db-fixpoint", cl.db_fixpoint,
                    "repeat the d_B merge sweep to fixpoint");
  cluster->add_option("--dense-gate", cl.dense_gate,
                      "1/0 force the member-count gate (default: auto)");
  cluster->add_option("--grouping-radius", cl.grouping_radius,
                      "baseline mode grouping radius");
  cluster->add_option("--k", cl.k, "vms neighbor rank");
  cluster->add_option("--sigma-scale", cl.sigma_scale, "vms bandwidth scale");

  SynthArgs sy;
  CLI::App* synth = app.add_subcommand("synth", "sample a Gaussian mixture");
  synth->add_option("--components", sy.components, "component count");
  synth->add_option("--n", sy.n, "sample count");
  synth->add_option("--dim", sy.dim, "dimension");
  synth->add_option("--seed", sy.seed, "random seed");
  synth->add_option("--eig-min", sy.eig_min, "smallest covariance eigenvalue");
  synth->add_option("--eig-max", sy.eig_max, "largest covariance eigenvalue");
  synth->add_option("--mean-box", sy.mean_box, "means drawn from [-box, box]^d");
  synth->add_option("--out", sy.out, "points CSV path");
  synth->add_option("--truth-out", sy.truth_out, "labels CSV path");

  SweepArgs sw;
  CLI::App* sweep = app.add_subcommand("sweep", "grid-sweep one parameter");
  sweep->add_option("--image", sw.image, "image file");
  sweep->add_option("--input", sw.input, "points CSV");
  sweep->add_option("--param", sw.param, "sigma_r2|sigma_s2|eps_r2|eps_s2");
  sweep->add_option("--values", sw.values, "settings to sweep")->delimiter(',');
  sweep->add_option("--params", sw.params, "fixed parameter set")->delimiter(',');
  sweep->add_option("--delta", sw.delta, "convergence epsilon");
  sweep->add_option("--min-size", sw.min_size, "minimum cluster size");
  sweep->add_option("--db", sw.db, "Bhattacharyya merge threshold");
  sweep->add_option("--max-iter", sw.max_iter, "iteration budget");
  sweep->add_option("--seed", sw.seed, "random seed");
  sweep->add_option("--out", sw.out, "sweep CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cluster->parsed()) {
      if (!cl.config.empty()) apply_config_file(cl, *cluster);
      return run_cluster(cl);
    }
    if (synth->parsed()) return run_synth(sy);
    if (sweep->parsed()) return run_sweep(sw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
