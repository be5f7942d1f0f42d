// Command-line front end: fit a model to a CSV, run simulation studies, or
// diagnose exported chains. All outputs are deterministic for a fixed seed.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "higibbs/diagnostics.hpp"
#include "higibbs/gibbs.hpp"
#include "higibbs/io.hpp"
#include "higibbs/model.hpp"
#include "higibbs/simulation.hpp"

namespace fs = std::filesystem;
using namespace higibbs;

namespace {

int index_of(const std::vector<std::string>& names, const std::string& name,
             const char* role) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw Error(strf("unknown %s covariate '%s'", role, name.c_str()));
}

// Interaction lists name columns, e.g. xc = IPre*CT and cc = IPre*EPre.
void apply_model_config(const Config& cfg, const LoadedData& ld, HlmSpec& spec) {
  std::vector<std::string> xnames = ld.x1_names;
  xnames.insert(xnames.end(), ld.x2_names.begin(), ld.x2_names.end());
  for (const std::string& term : split_list(cfg.get("xc", ""))) {
    std::size_t star = term.find('*');
    if (star == std::string::npos)
      throw Error(strf("xc term '%s' must look like '<partial>*<known>'", term.c_str()));
    int s = index_of(ld.c_names, trim(term.substr(0, star)), "partial");
    int col = index_of(xnames, trim(term.substr(star + 1)), "known");
    spec.active_xc.emplace_back(s, col);
  }
  for (const std::string& term : split_list(cfg.get("cc", ""))) {
    std::size_t star = term.find('*');
    if (star == std::string::npos)
      throw Error(strf("cc term '%s' must look like '<partial>*<partial>'", term.c_str()));
    int s = index_of(ld.c_names, trim(term.substr(0, star)), "partial");
    int t = index_of(ld.c_names, trim(term.substr(star + 1)), "partial");
    if (s > t) std::swap(s, t);
    spec.active_cc.emplace_back(s, t);
  }
  std::sort(spec.active_xc.begin(), spec.active_xc.end());
  std::sort(spec.active_cc.begin(), spec.active_cc.end());
  spec.validate();
}

PriorConfig priors_from_config(const Config& cfg, int p) {
  PriorConfig pc;
  pc.ig_shape = cfg.get_double("ig_shape", pc.ig_shape);
  pc.ig_scale = cfg.get_double("ig_scale", pc.ig_scale);
  pc.iw_dof = cfg.get_double("iw_dof", pc.iw_dof);
  if (cfg.has("iw_scale")) {
    std::vector<std::string> rows = split_list(cfg.get("iw_scale"), ';');
    if (static_cast<int>(rows.size()) != p)
      throw Error(strf("iw_scale must have %d rows separated by ';'", p));
    pc.iw_scale.resize(p, p);
    for (int r = 0; r < p; ++r) {
      std::vector<std::string> cells = split_list(rows[r]);
      if (static_cast<int>(cells.size()) != p)
        throw Error(strf("iw_scale row %d must have %d values", r + 1, p));
      for (int c = 0; c < p; ++c) pc.iw_scale(r, c) = cfg.parse_double("iw_scale", cells[c]);
    }
  }
  return pc;
}

void write_convergence_tsv(const std::string& path, const ConvergenceReport& conv) {
  std::ofstream outf(path);
  if (!outf) throw Error(strf("cannot write '%s'", path.c_str()));
  outf << "parameter\tgeweke_z\tgeweke_pass\tpsrf\tpsrf_pass\n";
  for (std::size_t k = 0; k < conv.names.size(); ++k) {
    outf << conv.names[k] << "\t" << strf("%.10g", conv.geweke[k].z) << "\t"
         << (conv.geweke[k].pass ? 1 : 0) << "\t";
    if (conv.has_psrf)
      outf << strf("%.10g", conv.psrf_values[k].value) << "\t"
           << (conv.psrf_values[k].pass ? 1 : 0) << "\n";
    else
      outf << "-\t-\n";
  }
}

MissingnessLaw parse_law(const std::string& key, const std::string& text) {
  std::vector<std::string> f = split_list(text);
  if (f.empty()) throw Error(strf("%s: empty law", key.c_str()));
  MissingnessLaw law;
  if (f[0] == "mar") {
    if (f.size() < 4 || f.size() > 5)
      throw Error(strf("%s: mar law needs intercept,slope,noise_var[,driver]", key.c_str()));
    law.kind = MissingnessLaw::Kind::mar;
    law.intercept = std::stod(f[1]);
    law.slope = std::stod(f[2]);
    law.noise_var = std::stod(f[3]);
    law.driver = f.size() == 5 ? std::stoi(f[4]) - 1 : 0;
  } else if (f[0] == "mnar") {
    if (f.size() < 3 || f.size() > 4)
      throw Error(strf("%s: mnar law needs intercept,slope[,driver]", key.c_str()));
    law.kind = MissingnessLaw::Kind::mnar;
    law.intercept = std::stod(f[1]);
    law.slope = std::stod(f[2]);
    law.driver = f.size() == 4 ? std::stoi(f[3]) - 1 : 0;
  } else {
    throw Error(strf("%s: law kind '%s' must be mar or mnar", key.c_str(), f[0].c_str()));
  }
  return law;
}

int run_fit(const std::string& data_path, const std::string& schema_path,
            const std::string& model_path, const std::string& priors_path,
            const GibbsConfig& gc, const std::string& out_dir) {
  ColumnSchema schema = ColumnSchema::from_config(parse_config_file(schema_path));
  LoadedData ld = load_dataset(data_path, schema);
  HlmSpec spec;
  spec.p = static_cast<int>(ld.c_names.size());
  spec.q1 = static_cast<int>(ld.x1_names.size());
  spec.q2 = static_cast<int>(ld.x2_names.size());
  if (!model_path.empty()) apply_model_config(parse_config_file(model_path), ld, spec);
  PriorConfig priors;
  if (!priors_path.empty()) priors = priors_from_config(parse_config_file(priors_path), spec.p);

  std::vector<ChainRecord> chains = run_chains(ld.data, spec, priors, gc);

  fs::create_directories(out_dir);
  std::vector<std::string> names = parameter_names(spec);
  std::vector<std::string> labels = fixed_effect_labels(spec);
  labels.resize(names.size(), "-");
  std::vector<FitRow> rows = fit_rows(chains, names, labels);
  ConvergenceReport conv = assess_convergence(chains, monitored_parameters(spec));

  double tau_hat = 0.0, sig_hat = 0.0;
  for (const auto& r : rows) {
    if (r.parameter == "tau") tau_hat = r.stats.mean;
    if (r.parameter == "sigma2") sig_hat = r.stats.mean;
  }
  double icc = tau_hat / (tau_hat + sig_hat);

  write_estimates_tsv((fs::path(out_dir) / "estimates.tsv").string(), rows);
  write_fit_report((fs::path(out_dir) / "report.txt").string(), rows, conv, icc,
                   ld.data.N(), ld.data.J(), ld.centers);
  write_convergence_tsv((fs::path(out_dir) / "convergence.tsv").string(), conv);
  fs::create_directories(fs::path(out_dir) / "chains");
  for (std::size_t c = 0; c < chains.size(); ++c)
    write_chain_record((fs::path(out_dir) / "chains" / strf("chain_%zu.tsv", c + 1)).string(),
                       chains[c]);
  write_trace_series((fs::path(out_dir) / "traces").string(), chains);
  std::printf("fit: %d units, %d clusters; outputs in %s\n", ld.data.N(), ld.data.J(),
              out_dir.c_str());
  std::printf("ICC %.4f; Geweke %s; PSRF %s\n", icc, conv.all_geweke_pass ? "pass" : "FAIL",
              conv.has_psrf ? (conv.all_psrf_pass ? "pass" : "FAIL") : "n/a");
  return 0;
}

int run_simulate(const std::string& config_path, std::uint64_t seed_override, bool seed_given,
                 int workers_override, const std::string& out_dir_override) {
  Config cfg = parse_config_file(config_path);
  SimulationDesign design = SimulationDesign::make(
      scenario_from_name(cfg.get("scenario", "baseline")),
      static_cast<int>(cfg.get_int("clusters", 36)),
      static_cast<int>(cfg.get_int("cluster_size", 4)));
  if (cfg.has("beta")) {
    std::vector<double> b = cfg.get_doubles("beta");
    if (static_cast<int>(b.size()) != design.spec.fixed_dim())
      throw Error(strf("beta needs %d values for this scenario", design.spec.fixed_dim()));
    for (std::size_t i = 0; i < b.size(); ++i) design.truth.beta[i] = b[i];
  }
  design.truth.tau = cfg.get_double("tau", design.truth.tau);
  design.truth.sigma2 = cfg.get_double("sigma2", design.truth.sigma2);
  if (cfg.has("y_missing")) {
    std::string v = cfg.get("y_missing");
    if (v == "none")
      design.y_law.reset();
    else
      design.y_law = parse_law("y_missing", v);
  }
  for (int k = 0; k < design.spec.p; ++k) {
    std::string key = strf("c%d_missing", k + 1);
    if (!cfg.has(key)) continue;
    std::string v = cfg.get(key);
    if (v == "none")
      design.c_laws[k].reset();
    else
      design.c_laws[k] = parse_law(key, v);
  }

  GibbsConfig gc;
  gc.burn_in = static_cast<int>(cfg.get_int("burn_in", 2500));
  gc.kept = static_cast<int>(cfg.get_int("kept", 2500));
  gc.n_chains = static_cast<int>(cfg.get_int("chains", 2));
  gc.seed = seed_given ? seed_override : static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  int replications = static_cast<int>(cfg.get_int("replications", 1000));
  int workers = workers_override > 0 ? workers_override
                                     : static_cast<int>(cfg.get_int("workers", 1));
  std::string out_dir = !out_dir_override.empty() ? out_dir_override
                                                  : cfg.get("out_dir", "sim_out");
  PriorConfig priors;

  ReplicationReport rep = run_replications(design, replications, gc, priors, workers);
  write_sim_report(out_dir, rep, design);
  std::printf("simulate: scenario %s, %d replications (%d completed, %d failed); outputs in %s\n",
              scenario_name(design.scenario), rep.replications, rep.completed, rep.failed,
              out_dir.c_str());
  for (std::size_t k = 0; k < rep.names.size(); ++k)
    std::printf("  %-8s bias%% %8.3f  ase %7.3f  ese %7.3f  coverage %.3f\n",
                rep.names[k].c_str(), rep.bias_pct[k], rep.ase[k], rep.ese[k], rep.coverage[k]);
  std::printf("  Geweke pass rate %.3f, PSRF pass rate %.3f\n", rep.geweke_pass_rate,
              rep.psrf_pass_rate);
  return 0;
}

int run_diagnose(const std::vector<std::string>& chain_paths, const std::string& out_dir) {
  std::vector<ChainRecord> chains;
  for (const auto& path : chain_paths) chains.push_back(read_chain_record(path));
  for (std::size_t c = 1; c < chains.size(); ++c)
    if (chains[c].names != chains[0].names)
      throw Error(strf("chain file '%s' has different columns than '%s'",
                       chain_paths[c].c_str(), chain_paths[0].c_str()));
  ConvergenceReport conv = assess_convergence(chains, chains[0].names);
  fs::create_directories(out_dir);
  write_convergence_tsv((fs::path(out_dir) / "convergence.tsv").string(), conv);
  std::printf("diagnose: %zu chains, %zu parameters\n", chains.size(), conv.names.size());
  for (std::size_t k = 0; k < conv.names.size(); ++k) {
    if (conv.has_psrf)
      std::printf("  %-12s geweke_z %8.3f %s  psrf %8.4f %s\n", conv.names[k].c_str(),
                  conv.geweke[k].z, conv.geweke[k].pass ? "pass" : "FAIL",
                  conv.psrf_values[k].value, conv.psrf_values[k].pass ? "pass" : "FAIL");
    else
      std::printf("  %-12s geweke_z %8.3f %s\n", conv.names[k].c_str(), conv.geweke[k].z,
                  conv.geweke[k].pass ? "pass" : "FAIL");
  }
  std::printf("Geweke: %s", conv.all_geweke_pass ? "all pass\n" : "FAILURES\n");
  if (conv.has_psrf) std::printf("PSRF: %s", conv.all_psrf_pass ? "all pass\n" : "FAILURES\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbs sampler for two-level linear models with partially observed "
               "cluster-level covariates"};
  app.require_subcommand(1);

  std::string data_path, schema_path, model_path, priors_path, out_dir = "fit_out";
  GibbsConfig gc;
  auto* fit = app.add_subcommand("fit", "fit a model to a long-format CSV");
  fit->add_option("--data", data_path, "data CSV")->required();
  fit->add_option("--schema", schema_path, "column-role config")->required();
  fit->add_option("--model", model_path, "interaction config (xc, cc)");
  fit->add_option("--priors", priors_path, "prior config");
  fit->add_option("--seed", gc.seed, "RNG seed");
  fit->add_option("--chains", gc.n_chains, "number of chains");
  fit->add_option("--burn-in", gc.burn_in, "burn-in cycles");
  fit->add_option("--kept", gc.kept, "kept cycles");
  fit->add_option("--out-dir", out_dir, "output directory");

  std::string sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  int sim_workers = 0;
  auto* sim = app.add_subcommand("simulate", "run a simulation study");
  sim->add_option("--config", sim_config, "scenario config")->required();
  auto* seed_opt = sim->add_option("--seed", sim_seed, "RNG seed (overrides config)");
  sim->add_option("--workers", sim_workers, "worker threads (overrides config)");
  sim->add_option("--out-dir", sim_out, "output directory (overrides config)");

  std::vector<std::string> chain_paths;
  std::string diag_out = ".";
  auto* diag = app.add_subcommand("diagnose", "convergence diagnostics for chain files");
  diag->add_option("chains", chain_paths, "chain TSV files")->required()->expected(-1);
  diag->add_option("--out-dir", diag_out, "output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (fit->parsed()) return run_fit(data_path, schema_path, model_path, priors_path, gc, out_dir);
    if (sim->parsed())
      return run_simulate(sim_config, sim_seed, seed_opt->count() > 0, sim_workers, sim_out);
    if (diag->parsed()) return run_diagnose(chain_paths, diag_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
