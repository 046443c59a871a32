// Apache License, Version 2.0, refer to LICENSE.txt

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cam/dataset_io.hpp"
#include "cam/draws.hpp"
#include "cam/error.hpp"
#include "cam/gibbs_sampler.hpp"
#include "cam/prior.hpp"
#include "cam/scenarios.hpp"
#include "cam/slice_sampler.hpp"
#include "cam/summary.hpp"

namespace cam::cli {

namespace fs = std::filesystem;

namespace {

// Signals a failed verification (exit code 4) after the report was printed.
struct VerificationFailed {};

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

unsigned thread_budget(unsigned wanted) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CAM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) cap = static_cast<unsigned>(v);
    } catch (const std::exception&) {
      throw ValidationError(std::string("CAM_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return std::max(1u, std::min(wanted, cap));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int scenario = 0;
  std::string which_case = "A";
  int size = 75;
  int r = 2;
  int n3 = 100;
  std::string weights = "equal";
  std::uint64_t seed = 1;
  std::string out;
};

// Config files are flat key=value text whose keys are the long flag names.
// The pairs are spliced in ahead of the command-line flags so that, with
// take-last semantics, explicit flags override file values.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> from_file;
  std::size_t insert_at = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ValidationError("--config needs a file path");
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      if (out.size() == 1) insert_at = 1;
      continue;
    }
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
      }
      auto trim = [](std::string v) {
        const auto b = v.find_first_not_of(" \t\r");
        const auto e = v.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (key.starts_with("--")) key = key.substr(2);
      from_file.push_back("--" + key + "=" + value);
    }
  }
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(insert_at), from_file.begin(), from_file.end());
  return out;
}

void add_config_flag(CLI::App& app) {
  // Parsed by expand_config; registered so that it shows up in --help.
  app.add_option("--config", "Read key=value options from a file (flags override)");
}

void add_simulate(CLI::App& app, SimulateArgs& a) {
  app.add_option("--scenario", a.scenario, "Scenario 1, 2 or 3")->required()->check(CLI::Range(1, 3));
  app.add_option("--case", a.which_case, "Scenario 1 case (A or B)")->check(CLI::IsMember({"A", "B"}));
  app.add_option("--size", a.size, "Scenario 1 size parameter (n_A or n_B)");
  app.add_option("--r", a.r, "Scenario 2 units per mixture");
  app.add_option("--n3", a.n3, "Scenario 3 draws from the uniform component");
  app.add_option("--weights", a.weights, "Scenario 1 component weights")
      ->check(CLI::IsMember({"equal", "harmonic"}));
  app.add_option("--seed", a.seed, "Random seed");
  app.add_option("--out", a.out, "Output directory")->required();
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  Scenario s;
  if (a.scenario == 1) {
    s = gen_scenario1(a.which_case.front(), a.size, a.seed, parse_scenario1_weights(a.weights));
  } else if (a.scenario == 2) {
    s = gen_scenario2(a.r, a.seed);
  } else {
    s = gen_scenario3(a.n3, a.seed);
  }
  const fs::path dir(a.out);
  write_dataset(dir / "data.csv", s.data, s.params);
  write_truth(dir / "truth.csv", s.truth, s.params);
  out << "scenario=" << a.scenario << " units=" << s.data.num_units()
      << " observations=" << s.data.num_observations() << " kind=" << to_string(s.data.kind)
      << " out=" << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string table;
  std::string model = "auto";
  std::string sampler = "slice";
  std::string out;
  int chains = 1;
  std::uint64_t seed = 1;
  long iters = 5000;
  long burnin = 5000;
  long thin = 1;
  int max_K = 200;
  int max_L = 200;
  int K = 35;
  int L = 50;
  bool force = false;
  bool label_switch = false;
  std::string envelope = "geometric";
  std::string concentration = "label_marginal";
  bool scale = false;
  int init_inner = 10;
  std::optional<double> m0, k0, a0, b0;
  std::optional<double> alpha, alpha_shape, alpha_rate;
  std::optional<double> beta, beta_shape, beta_rate;
  std::optional<double> kappa_D, kappa_O;
  std::optional<double> reg_mean, reg_precision;
};

void add_fit(CLI::App& app, FitArgs& a) {
  app.add_option("--data", a.data, "Long-format dataset (unit,index,value[,x])");
  app.add_option("--table", a.table, "Abundance table (rows = items, columns = subjects)");
  app.add_option("--model", a.model, "cam, dcam or auto (from the data kind)")
      ->check(CLI::IsMember({"auto", "cam", "dcam"}));
  app.add_option("--sampler", a.sampler, "slice or gibbs")->check(CLI::IsMember({"slice", "gibbs"}));
  app.add_option("--out", a.out, "Output directory (one chain_<n> directory per chain)")->required();
  app.add_option("--chains", a.chains, "Number of chains")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Random seed");
  app.add_option("--iters", a.iters, "Retained sweeps after burn-in");
  app.add_option("--burnin", a.burnin, "Burn-in sweeps");
  app.add_option("--thin", a.thin, "Keep every thin-th sweep");
  app.add_option("--max-K", a.max_K, "Slice sampler cap on outer labels");
  app.add_option("--max-L", a.max_L, "Slice sampler cap on inner labels");
  app.add_option("--K", a.K, "Gibbs outer truncation level");
  app.add_option("--L", a.L, "Gibbs inner truncation level");
  app.add_flag("--force", a.force, "Run Gibbs even when the truncation bound exceeds 0.1");
  app.add_flag("--label-switch", a.label_switch, "Enable label-switching moves (slice)");
  app.add_option("--envelope", a.envelope, "Slice envelopes: geometric or dependent")
      ->check(CLI::IsMember({"geometric", "dependent"}));
  app.add_option("--concentration-update", a.concentration,
                 "Concentration update: label_marginal, stick_conditional or escobar_west (slice only)")
      ->check(CLI::IsMember({"label_marginal", "stick_conditional", "escobar_west"}));
  app.add_flag("--scale", a.scale, "Scale each unit by its mean (library size)");
  app.add_option("--init-inner", a.init_inner, "Quantile bins for the initial observational labels");
  app.add_option("--m0", a.m0, "NIG mean (default: grand mean)");
  app.add_option("--k0", a.k0, "NIG precision factor (default: 1 / overall variance)");
  app.add_option("--a0", a.a0, "Inverse-gamma shape");
  app.add_option("--b0", a.b0, "Inverse-gamma scale");
  app.add_option("--alpha", a.alpha, "Fix the outer concentration at this value");
  app.add_option("--alpha-shape", a.alpha_shape, "Gamma prior shape for alpha");
  app.add_option("--alpha-rate", a.alpha_rate, "Gamma prior rate for alpha");
  app.add_option("--beta", a.beta, "Fix the inner concentration at this value");
  app.add_option("--beta-shape", a.beta_shape, "Gamma prior shape for beta");
  app.add_option("--beta-rate", a.beta_rate, "Gamma prior rate for beta");
  app.add_option("--kappa-D", a.kappa_D, "Outer geometric envelope rate");
  app.add_option("--kappa-O", a.kappa_O, "Inner geometric envelope rate");
  app.add_option("--reg-mean", a.reg_mean, "Regression prior mean (enables the covariate term)");
  app.add_option("--reg-precision", a.reg_precision, "Regression prior precision");
}

ConcentrationPrior concentration_prior(const ConcentrationPrior& base, const std::optional<double>& fixed,
                                       const std::optional<double>& shape,
                                       const std::optional<double>& rate) {
  if (fixed) {
    if (shape || rate) throw ValidationError("a concentration is either fixed or given a Gamma prior");
    return ConcentrationPrior::fixed_at(*fixed);
  }
  return ConcentrationPrior::gamma(shape.value_or(base.shape), rate.value_or(base.rate));
}

Dataset load_fit_data(const FitArgs& a) {
  if (a.data.empty() == a.table.empty()) throw ValidationError("give exactly one of --data or --table");
  Dataset data = a.data.empty() ? load_abundance_table(a.table) : read_dataset(a.data).data;
  if (a.model == "dcam" && data.kind != DataKind::count) {
    throw ValidationError("the dcam model needs count data");
  }
  if (a.model == "cam") data.kind = DataKind::continuous;
  if (a.scale) attach_library_scaling(data);
  validate_dataset(data).throw_if_invalid();
  return data;
}

Hyperparameters fit_hyper(const FitArgs& a, const Dataset& data) {
  Hyperparameters h = default_hyperparameters(data);
  if (a.m0) h.m0 = *a.m0;
  if (a.k0) h.k0 = *a.k0;
  if (a.a0) h.a0 = *a.a0;
  if (a.b0) h.b0 = *a.b0;
  h.alpha = concentration_prior(h.alpha, a.alpha, a.alpha_shape, a.alpha_rate);
  h.beta = concentration_prior(h.beta, a.beta, a.beta_shape, a.beta_rate);
  if (a.kappa_D) h.kappa_D = *a.kappa_D;
  if (a.kappa_O) h.kappa_O = *a.kappa_O;
  if (a.reg_mean || a.reg_precision) {
    if (!data.has_covariate()) throw ValidationError("regression options need a covariate column x");
    h.regression = RegressionPrior{a.reg_mean.value_or(0.0), a.reg_precision.value_or(1.0)};
  }
  h.validate();
  return h;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset data = load_fit_data(a);
  const Hyperparameters hyper = fit_hyper(a, data);
  const bool gibbs = a.sampler == "gibbs";

  SliceConfig slice;
  GibbsConfig gcfg;
  if (gibbs) {
    gcfg.iters = a.iters;
    gcfg.burnin = a.burnin;
    gcfg.thin = a.thin;
    gcfg.levels = {a.K, a.L};
    gcfg.seed = a.seed;
    gcfg.init_inner = a.init_inner;
    gcfg.concentration_update = parse_concentration_update(a.concentration);
    gcfg.validate();
    const double bound = truncation_bound_mixture(hyper.alpha.prior_mean(), hyper.beta.prior_mean(), a.K,
                                                  a.L, static_cast<long>(data.num_observations()));
    out << "truncation_bound=" << format_double(bound) << '\n';
    if (bound > 0.1 && !a.force) {
      throw ValidationError("truncation bound " + format_double(bound) +
                            " exceeds 0.1; raise --K/--L or pass --force");
    }
  } else {
    slice.iters = a.iters;
    slice.burnin = a.burnin;
    slice.thin = a.thin;
    slice.max_K = a.max_K;
    slice.max_L = a.max_L;
    slice.enable_label_switch = a.label_switch;
    slice.envelope = a.envelope == "dependent" ? EnvelopeKind::dependent : EnvelopeKind::geometric;
    slice.concentration_update = parse_concentration_update(a.concentration);
    slice.seed = a.seed;
    slice.init_inner = a.init_inner;
    slice.validate();
  }

  const auto n = static_cast<std::size_t>(a.chains);
  std::vector<DrawStore> stores(n);
  std::vector<double> seconds(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  std::mutex log_mutex;
  std::size_t next = 0;
  std::mutex next_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t c;
      {
        std::lock_guard lock(next_mutex);
        if (next >= n) return;
        c = next++;
      }
      try {
        const auto t0 = std::chrono::steady_clock::now();
        stores[c] = gibbs ? run_gibbs_chain(data, hyper, gcfg, static_cast<int>(c))
                          : run_chain(data, hyper, slice, static_cast<int>(c));
        seconds[c] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto& meta = stores[c].meta;
        meta.config.insert(meta.config.begin(),
                           {{"input", a.data.empty() ? a.table : a.data},
                            {"input_format", a.data.empty() ? "table" : "long"},
                            {"chains", std::to_string(a.chains)}});
        write_drawstore(stores[c], fs::path(a.out) / ("chain_" + std::to_string(c + 1)));
        std::lock_guard lock(log_mutex);
        out << "chain " << c + 1 << ": " << stores[c].size() << " draws, " << fixed(seconds[c], 1) << " s\n";
        for (const auto& w : stores[c].meta.warnings) err << "chain " << c + 1 << " warning: " << w << '\n';
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const unsigned threads = thread_budget(static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  nlohmann::ordered_json timing;
  timing["chains"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < n; ++c) {
    timing["chains"].push_back({{"chain", c + 1}, {"seconds", seconds[c]}});
  }
  auto tf = open_out(fs::path(a.out) / "timing.json");
  tf << timing.dump(2) << '\n';
  out << "wrote " << n << " chain(s) to " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- summarize

struct SummarizeArgs {
  std::string run;
  std::string truth;
  std::string data;
  std::string out;
  std::string classes;
  double pcm_threshold = 0.5;
  long obs_stride = 0;
  long max_candidates = 500;
};

void add_summarize(CLI::App& app, SummarizeArgs& a) {
  app.add_option("--run", a.run, "Fit output directory or a single chain directory")->required();
  app.add_option("--truth", a.truth, "Truth file (unit,index,dc,oc) to score against");
  app.add_option("--data", a.data, "Dataset used for the fit (CRF curves, item names)");
  app.add_option("--out", a.out, "Report directory (default: <run>/summary)");
  app.add_option("--classes", a.classes,
                 "Abundance class sizes, e.g. 3,3,2: observational clusters sorted by posterior mean");
  app.add_option("--pcm-threshold", a.pcm_threshold, "Edge threshold for co-occurrence networks");
  app.add_option("--obs-stride", a.obs_stride,
                 "Use every n-th draw for the observational matrix (default: about 1000 draws)");
  app.add_option("--max-candidates", a.max_candidates,
                 "Sampled observational partitions considered by the VI search (0 = all)");
}

std::vector<fs::path> chain_dirs(const fs::path& run) {
  if (!fs::exists(run)) throw IoError("run directory " + run.string() + " does not exist");
  if (fs::exists(run / "meta.json")) return {run};
  std::vector<std::pair<long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(run)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && name.starts_with("chain_") && fs::exists(entry.path() / "meta.json")) {
      found.emplace_back(std::stol(name.substr(6)), entry.path());
    }
  }
  if (found.empty()) throw IoError("no chain directories under " + run.string());
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_labels(const fs::path& path, const Partition& p) {
  auto out = open_out(path);
  for (int v : p) out << v + 1 << '\n';
}

Eigen::MatrixXd truth_matrix(const Partition& p) {
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) m(a, b) = p[static_cast<std::size_t>(a)] == p[static_cast<std::size_t>(b)];
  }
  return m;
}

std::vector<int> parse_bins(const std::string& text) {
  std::vector<int> bins;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      bins.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("--classes expects comma-separated non-negative integers, got '" + text + "'");
    }
  }
  if (bins.empty()) throw ValidationError("--classes is empty");
  return bins;
}

int cmd_summarize(const SummarizeArgs& a, std::ostream& out) {
  std::vector<DrawStore> chains;
  for (const auto& dir : chain_dirs(a.run)) chains.push_back(read_drawstore(dir));
  const DrawStore pooled = pool_chains(chains);
  if (pooled.empty()) throw ValidationError("the run holds no draws");
  const fs::path dir = a.out.empty() ? fs::path(a.run) / "summary" : fs::path(a.out);

  const auto dc_ccm = coclustering(pooled, ClusterLevel::distributional);
  const auto dc_est = minimize_expected_vi(dc_ccm.matrix, sampled_partitions(pooled, ClusterLevel::distributional));
  const std::size_t stride = a.obs_stride > 0 ? static_cast<std::size_t>(a.obs_stride)
                                              : std::max<std::size_t>(1, pooled.size() / 1000);
  const auto oc_ccm = coclustering(pooled, ClusterLevel::observational, stride);
  ViSearchOptions oc_opts;
  oc_opts.max_sampled = static_cast<std::size_t>(std::max(0L, a.max_candidates));
  const auto oc_est =
      minimize_expected_vi(oc_ccm.matrix, sampled_partitions(pooled, ClusterLevel::observational), oc_opts);

  write_matrix(dir / "ccm_distributional.csv", dc_ccm.matrix);
  write_matrix(dir / "ccm_observational.csv", oc_ccm.matrix);
  write_labels(dir / "partition_distributional.csv", dc_est.labels);
  write_labels(dir / "partition_observational.csv", oc_est.labels);

  double mean_alpha = 0.0;
  double mean_beta = 0.0;
  for (const Draw& d : pooled.draws) {
    mean_alpha += d.alpha;
    mean_beta += d.beta;
  }
  mean_alpha /= static_cast<double>(pooled.size());
  mean_beta /= static_cast<double>(pooled.size());

  std::vector<std::pair<std::string, std::string>> report = {
      {"sampler", pooled.meta.sampler},
      {"model", pooled.meta.model},
      {"chains", std::to_string(chains.size())},
      {"draws", std::to_string(pooled.size())},
      {"obs_stride", std::to_string(stride)},
      {"mean_alpha", format_double(mean_alpha)},
      {"mean_beta", format_double(mean_beta)},
      {"dc_clusters", std::to_string(num_clusters(dc_est.labels))},
      {"dc_loss", format_double(dc_est.loss)},
      {"dc_search", dc_est.provenance},
      {"oc_clusters", std::to_string(num_clusters(oc_est.labels))},
      {"oc_loss", format_double(oc_est.loss)},
      {"oc_search", oc_est.provenance},
  };

  std::ostringstream table;
  if (!a.truth.empty()) {
    const Truth truth = read_truth(a.truth);
    Partition true_oc;
    for (const auto& row : truth.oc) true_oc.insert(true_oc.end(), row.begin(), row.end());
    if (truth.dc.size() != dc_est.labels.size() || true_oc.size() != oc_est.labels.size()) {
      throw ValidationError("truth file does not match the fitted dataset shape");
    }
    const double dc_ari = ari(dc_est.labels, truth.dc);
    const double oc_ari = ari(oc_est.labels, true_oc);
    const double dc_nfd = nfd(dc_ccm.matrix, truth_matrix(truth.dc));
    const double oc_nfd = nfd(oc_ccm.matrix, truth_matrix(true_oc));
    const int dc_true = num_clusters(truth.dc);
    const int oc_true = num_clusters(true_oc);
    report.insert(report.end(), {{"dc_true", std::to_string(dc_true)},
                                 {"dc_ari", format_double(dc_ari)},
                                 {"dc_nfd", format_double(dc_nfd)},
                                 {"oc_true", std::to_string(oc_true)},
                                 {"oc_ari", format_double(oc_ari)},
                                 {"oc_nfd", format_double(oc_nfd)}});
    table << "DC-D/T " << num_clusters(dc_est.labels) << '/' << dc_true << '\n'
          << "DC-ARI " << fixed(dc_ari) << '\n'
          << "DC-NFD " << fixed(dc_nfd) << '\n'
          << "OC-D/T " << num_clusters(oc_est.labels) << '/' << oc_true << '\n'
          << "OC-ARI " << fixed(oc_ari) << '\n'
          << "OC-NFD " << fixed(oc_nfd) << '\n';
  } else {
    table << "DC-D " << num_clusters(dc_est.labels) << '\n'
          << "OC-D " << num_clusters(oc_est.labels) << '\n';
  }

  std::optional<Dataset> data;
  if (!a.data.empty()) {
    data = read_dataset(a.data).data;
    if (data->num_units() != pooled.unit_sizes.size()) {
      throw ValidationError("dataset does not match the fitted run");
    }
    if (data->kind == DataKind::count) {
      auto crf_out = open_out(dir / "crf.csv");
      crf_out << "unit,rank,crf\n";
      for (std::size_t j = 0; j < data->num_units(); ++j) {
        const auto& unit = data->units[j];
        if (std::all_of(unit.begin(), unit.end(), [](double v) { return v == 0.0; })) continue;
        const auto curve = crf(unit);
        for (std::size_t i = 0; i < curve.size(); ++i) {
          crf_out << j + 1 << ',' << i + 1 << ',' << format_double(curve[i]) << '\n';
        }
      }
    }
  }

  if (!a.classes.empty()) {
    const auto bins = parse_bins(a.classes);
    const auto mu = cluster_mean_mu(pooled, oc_est.labels);
    const auto class_map = abundance_class_map(mu, bins);
    const auto classes = abundance_classes(oc_est.labels, class_map);
    std::vector<std::vector<int>> per_unit;
    {
      auto cf = open_out(dir / "abundance_classes.csv");
      cf << "unit,index,class\n";
      std::size_t idx = 0;
      for (std::size_t j = 0; j < pooled.unit_sizes.size(); ++j) {
        per_unit.emplace_back();
        for (int i = 0; i < pooled.unit_sizes[j]; ++i, ++idx) {
          per_unit.back().push_back(classes[idx]);
          cf << j + 1 << ',' << i + 1 << ',' << classes[idx] + 1 << '\n';
        }
      }
    }
    const bool rectangular = std::all_of(pooled.unit_sizes.begin(), pooled.unit_sizes.end(),
                                         [&](int s) { return s == pooled.unit_sizes.front(); });
    if (rectangular) {
      for (int k = 0; k < num_clusters(dc_est.labels); ++k) {
        const Eigen::MatrixXd m = pcm(per_unit, dc_est.labels, k);
        write_matrix(dir / ("pcm_dc" + std::to_string(k + 1) + ".csv"), m);
        auto ef = open_out(dir / ("edges_dc" + std::to_string(k + 1) + ".csv"));
        ef << "item_a,item_b,weight\n";
        for (const Edge& e : edges_above(m, a.pcm_threshold)) {
          auto name = [&](int i) {
            return data && static_cast<std::size_t>(i) < data->item_names.size()
                       ? data->item_names[static_cast<std::size_t>(i)]
                       : std::to_string(i + 1);
          };
          ef << name(e.a) << ',' << name(e.b) << ',' << format_double(e.weight) << '\n';
        }
      }
      report.emplace_back("pcm_clusters", std::to_string(num_clusters(dc_est.labels)));
    }
  }

  {
    auto rf = open_out(dir / "report.txt");
    for (const auto& [k, v] : report) rf << k << '=' << v << '\n';
  }
  {
    auto tf = open_out(dir / "table.txt");
    tf << table.str();
  }
  out << table.str();
  out << "report written to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- verify-prior

struct VerifyArgs {
  double alpha = 1.0;
  double beta = 1.0;
  long reps = 100000;
  int depth = 200;
  std::optional<int> K;
  std::optional<int> L;
  std::uint64_t seed = 1;
};

void add_verify(CLI::App& app, VerifyArgs& a) {
  app.add_option("--alpha", a.alpha, "Outer concentration")->check(CLI::PositiveNumber);
  app.add_option("--beta", a.beta, "Inner concentration")->check(CLI::PositiveNumber);
  app.add_option("--reps", a.reps, "Monte-Carlo replicates")->check(CLI::PositiveNumber);
  app.add_option("--depth", a.depth, "Stick-breaking depth of the simulated prior draws")
      ->check(CLI::PositiveNumber);
  app.add_option("--K", a.K, "Outer truncation level for the total-variation check");
  app.add_option("--L", a.L, "Inner truncation level for the total-variation check");
  app.add_option("--seed", a.seed, "Random seed");
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  PriorCheckOptions options;
  options.reps = a.reps;
  options.depth = a.depth;
  if (a.K || a.L) {
    if (!(a.K && a.L)) throw ValidationError("--K and --L go together");
    if (*a.K < 1 || *a.L < 1) throw ValidationError("--K and --L must be positive");
    options.truncations = {{*a.K, *a.L}};
  }
  RngStream rng(a.seed);
  const PriorCheckReport report = mc_verify_prior(a.alpha, a.beta, options, rng);
  out << "alpha=" << format_double(a.alpha) << '\n'
      << "beta=" << format_double(a.beta) << '\n'
      << "reps=" << a.reps << '\n'
      << "depth=" << a.depth << '\n'
      << "seed=" << a.seed << '\n';
  for (const auto& [K, L] : options.truncations) {
    out << "bound_K" << K << "_L" << L << '=' << fixed(truncation_bound_single(a.alpha, a.beta, K, L), 7) << '\n';
  }
  for (const McEstimate& c : report.checks) {
    out << c.name << ".analytic=" << fixed(c.analytic, 5) << '\n'
        << c.name << ".estimate=" << fixed(c.estimate, 5) << '\n'
        << c.name << ".se=" << fixed(c.std_error, 6) << '\n'
        << c.name << ".status=" << (c.flagged ? "FLAGGED" : "ok") << (c.one_sided ? " (one-sided)" : "")
        << '\n';
  }
  out << "verdict=" << (report.all_passed() ? "pass" : "fail") << '\n';
  if (!report.all_passed()) throw VerificationFailed{};
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Common atoms model: simulate, fit, summarize, verify-prior", "cam"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  SimulateArgs sim;
  FitArgs fit;
  SummarizeArgs summ;
  VerifyArgs ver;
  add_simulate(*app.add_subcommand("simulate", "Generate a simulation-study dataset and its truth"), sim);
  add_fit(*app.add_subcommand("fit", "Run MCMC chains and write one draw directory per chain"), fit);
  add_summarize(*app.add_subcommand("summarize", "Posterior summaries of a fitted run"), summ);
  add_verify(*app.add_subcommand("verify-prior", "Monte-Carlo check of the prior closed forms"), ver);

  for (CLI::App* sub : app.get_subcommands({})) add_config_flag(*sub);

  try {
    const auto expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(sim, out);
    if (app.got_subcommand("fit")) return cmd_fit(fit, out, err);
    if (app.got_subcommand("summarize")) return cmd_summarize(summ, out);
    return cmd_verify(ver, out);
  } catch (const VerificationFailed&) {
    err << "error: prior verification flagged at least one check\n";
    return kExitVerification;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace cam::cli
