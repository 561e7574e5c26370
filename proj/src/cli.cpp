#include "tvtp/cli.hpp"

#include "tvtp/config.hpp"
#include "tvtp/errors.hpp"
#include "tvtp/io.hpp"
#include "tvtp/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace tvtp {

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  std::string out_path;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> estimator;
};

RunConfig load(const CommonArgs& a) {
  RunConfig rc = a.config_path.empty() ? RunConfig{} : load_config(a.config_path);
  if (a.estimator) {
    const Variant v = *a.estimator == "joint" ? Variant::Joint : Variant::Partial;
    rc.model.variant = v;
    rc.mc.estimators = {v};
  }
  return rc;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  return f;
}

nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
  return a;
}

int cmd_simulate(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = load(a);
  if (a.seed) rc.dgp.seed = *a.seed;
  if (a.config_path.empty()) err << "simulate: no --config given, using the default design (T = " << rc.dgp.T << ")\n";
  const Dataset d = simulate_dgp(rc.dgp);
  if (a.out_path.empty()) {
    write_csv(out, d);
  } else {
    write_csv_file(a.out_path, d);
  }
  return kExitOk;
}

int cmd_fit(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  if (a.data_path.empty()) throw InputError("fit: --data is required");
  RunConfig rc = load(a);
  for (const ParamVector& s : rc.fit.starts) s.validate(rc.model);
  rc.fit.threads = resolve_threads(a.threads);
  if (a.seed) err << "fit: --seed has no effect on estimation\n";

  const Dataset data = read_csv_file(a.data_path);
  data.validate(rc.model);
  const EstimationResult r = fit(data, rc.model, rc.fit);

  const Eigen::VectorXd est = r.estimate();
  const Eigen::VectorXd tv = r.has_se() ? t_stats(r, Eigen::VectorXd::Zero(est.size()), SeFlavor::Sandwich) : Eigen::VectorXd();
  out << "variant " << variant_name(r.config.variant) << ", scored observations " << r.n_obs << "\n";
  out << "log-likelihood " << format_double(r.loglik) << ", gradient norm " << r.grad_norm << ", iterations "
      << r.n_iter << ", start " << r.start_index << ", converged " << (r.converged ? "yes" : "no") << "\n\n";
  out << std::left << std::setw(10) << "parameter" << std::right << std::setw(14) << "estimate" << std::setw(14)
      << "se_hessian" << std::setw(14) << "se_sandwich" << std::setw(10) << "t" << "\n";
  for (Eigen::Index i = 0; i < est.size(); ++i) {
    out << std::left << std::setw(10) << r.names[i] << std::right << std::fixed << std::setprecision(6)
        << std::setw(14) << est[i];
    if (r.has_se()) {
      out << std::setw(14) << r.se_hessian[i] << std::setw(14) << r.se_sandwich[i] << std::setprecision(3)
          << std::setw(10) << tv[i];
    } else {
      out << std::setw(14) << "n/a" << std::setw(14) << "n/a" << std::setw(10) << "n/a";
    }
    out << "\n";
    out.unsetf(std::ios::floatfield);
  }
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";

  nlohmann::json j;
  j["variant"] = variant_name(r.config.variant);
  j["n_obs"] = r.n_obs;
  j["loglik"] = r.loglik;
  j["grad_norm"] = r.grad_norm;
  j["converged"] = r.converged;
  j["iterations"] = r.n_iter;
  j["start_index"] = r.start_index;
  j["parameters"] = r.names;
  j["estimate"] = to_json(est);
  j["hessian_pd"] = r.hessian_pd;
  if (r.has_se()) {
    j["se_hessian"] = to_json(r.se_hessian);
    j["se_sandwich"] = to_json(r.se_sandwich);
    j["cov_hessian"] = to_json(r.cov_hessian);
    j["cov_sandwich"] = to_json(r.cov_sandwich);
  }
  j["warnings"] = r.warnings;
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& s : r.starts)
    starts.push_back({{"ok", s.ok}, {"loglik", s.loglik}, {"grad_norm", s.grad_norm}, {"iterations", s.iterations},
                      {"converged", s.converged}, {"message", s.message}});
  j["starts"] = starts;
  const std::string path = a.out_path.empty() ? a.data_path + ".fit.json" : a.out_path;
  open_out(path) << std::setprecision(17) << j.dump(2) << "\n";

  if (!r.converged) {
    err << "fit: optimizer did not converge (gradient norm " << r.grad_norm << ")\n";
    return kExitNumeric;
  }
  return kExitOk;
}

void write_records(std::ostream& os, const MCReport& report) {
  // estimate and se hold the natural-space vector, ';'-separated.
  os << "estimator,rho,T,rep,converged,relabeled,has_se,error,estimate,se\n";
  for (const MCRecord& r : report.records) {
    os << variant_name(r.estimator) << ',' << format_double(r.rho) << ',' << r.T << ',' << r.rep << ','
       << r.converged << ',' << r.relabeled << ',' << r.has_se << ',' << '"' << r.error << '"' << ',';
    for (Eigen::Index i = 0; i < r.estimate.size(); ++i) os << (i ? ";" : "") << format_double(r.estimate[i]);
    os << ',';
    for (Eigen::Index i = 0; i < r.se.size(); ++i) os << (i ? ";" : "") << format_double(r.se[i]);
    os << '\n';
  }
}

int cmd_mc(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = load(a);
  if (!rc.has_mc) throw InputError("config: missing required key 'mc'");
  if (a.seed) rc.mc.master_seed = *a.seed;
  rc.mc.threads = resolve_threads(a.threads);
  rc.mc.fit.threads = 1;
  const MCReport report = run_monte_carlo(rc.mc);

  const std::filesystem::path dir = a.out_path.empty() ? std::filesystem::path("mc_out") : std::filesystem::path(a.out_path);
  std::filesystem::create_directories(dir);
  {
    auto f = open_out((dir / "mc_report.csv").string());
    write_mc_csv(f, report);
  }
  {
    auto f = open_out((dir / "mc_table.txt").string());
    write_mc_table(f, report);
  }
  {
    auto f = open_out((dir / "mc_records.csv").string());
    write_records(f, report);
  }
  write_mc_table(out, report);
  int invalid = 0;
  for (const MCRow& r : report.rows) invalid += !r.valid;
  if (invalid > 0) err << "mc: " << invalid << " summary rows have no converged replications\n";
  err << "mc: results written to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_mixing(const CommonArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = load(a);
  if (a.seed) rc.mixing.seed = *a.seed;
  rc.mixing.threads = resolve_threads(a.threads);
  const MixingReport rep = run_mixing_check(rc.mixing);
  if (!a.out_path.empty()) {
    auto f = open_out(a.out_path);
    f << "m,j,bound,tv,chain_product,max_step_excess,half_tv_within_bound,tv_within_bound,chain_rule_holds,"
         "step_bound_holds\n";
    for (const MixingInstance& i : rep.instances)
      f << i.m << ',' << i.j << ',' << format_double(i.bound) << ',' << format_double(i.tv) << ','
        << format_double(i.chain_product) << ',' << format_double(i.max_step_excess) << ','
        << i.half_tv_within_bound << ',' << i.tv_within_bound << ',' << i.chain_rule_holds << ','
        << i.step_bound_holds << '\n';
  }
  out << "instances " << rep.instances.size() << ", violations " << rep.violations << ", max(tv/2 - bound) "
      << rep.max_violation << ", tolerance " << rep.tolerance << "\n";
  out << "instances with tv > bound (l1 distance without the 1/2 factor): " << rep.unhalved_violations << "\n";
  if (!rep.ok()) {
    err << "mixing-check: " << rep.violations << " instances violate the bound\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regime-switching autoregression with time-varying transition probabilities"};
  app.require_subcommand(1);
  CommonArgs a;

  auto add_common = [&](CLI::App* sub, bool data, bool seed_flag, bool est_flag) {
    sub->add_option("--config", a.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    if (data) sub->add_option("--data", a.data_path, "input CSV (t,y,z[,s_true])")->required();
    sub->add_option("--out", a.out_path, "output path");
    sub->add_option("--threads", a.threads, "worker threads (default: TVTP_THREADS, then hardware)")
        ->check(CLI::NonNegativeNumber);
    if (seed_flag) sub->add_option("--seed", a.seed, "override the configured seed");
    if (est_flag)
      sub->add_option("--estimator", a.estimator, "likelihood variant")->check(CLI::IsMember({"partial", "joint"}));
  };
  CLI::App* sim = app.add_subcommand("simulate", "simulate a dataset from the configured design");
  add_common(sim, false, true, false);
  CLI::App* fitc = app.add_subcommand("fit", "maximum-likelihood fit of a dataset");
  add_common(fitc, true, true, true);
  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo study");
  add_common(mc, false, true, true);
  CLI::App* mix = app.add_subcommand("mixing-check", "check the mixing bound on random instances");
  add_common(mix, false, true, false);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kExitInput;
    }
    if (sim->parsed()) return cmd_simulate(a, out, err);
    if (fitc->parsed()) return cmd_fit(a, out, err);
    if (mc->parsed()) return cmd_mc(a, out, err);
    if (mix->parsed()) return cmd_mixing(a, out, err);
    return kExitInternal;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SizeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const EstimationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace tvtp
