#include "tvtp/mc.hpp"

#include "tvtp/errors.hpp"
#include "tvtp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tvtp {

namespace {

struct Job {
  int cell = 0;  // index into the (rho, T) grid
  Variant estimator = Variant::Partial;
  double rho = 0.0;
  int T = 0;
  int rep = 0;
};

std::vector<Job> make_jobs(const MCDesign& d) {
  std::vector<Job> jobs;
  int cell = 0;
  for (double rho : d.rho_grid)
    for (int T : d.T_grid) {
      for (Variant v : d.estimators)
        for (int rep = 0; rep < d.n_reps; ++rep) jobs.push_back({cell, v, rho, T, rep});
      ++cell;
    }
  return jobs;
}

std::vector<ParamVector> desk_starts(const Dataset& data, const ModelConfig& cfg, const ParamVector& truth) {
  std::vector<ParamVector> starts = {truth};
  const Eigen::VectorXd raw = pack(moment_anchor(data, cfg), cfg).raw;
  const Eigen::VectorXd step = start_grid_step(cfg);
  starts.push_back(unpack({raw + step}, cfg));
  starts.push_back(unpack({raw - step}, cfg));
  return starts;
}

std::string format_number(double v, int precision = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

std::string variant_name(Variant v) { return v == Variant::Joint ? "joint" : "partial"; }

EstimationResult relabel(const EstimationResult& result, bool* swapped) {
  if (swapped) *swapped = false;
  const ModelConfig& cfg = result.config;
  if (cfg.n_regimes != 2 || !cfg.switching.intercept) return result;
  if (!(result.theta_hat.mu[0] < result.theta_hat.mu[1])) return result;
  const int perm[2] = {1, 0};
  EstimationResult out = result;
  out.theta_hat = tvtp::relabel(result.theta_hat, cfg, perm);
  const Eigen::MatrixXd M = ParamLayout(cfg).relabel_matrix(perm);
  const auto permute = [&](const Eigen::MatrixXd& A) -> Eigen::MatrixXd {
    return A.size() == 0 ? A : Eigen::MatrixXd(M * A * M.transpose());
  };
  out.hessian = permute(result.hessian);
  out.cov_hessian = permute(result.cov_hessian);
  out.cov_sandwich = permute(result.cov_sandwich);
  if (out.se_hessian.size() > 0) out.se_hessian = (M * result.se_hessian).eval();
  if (out.se_sandwich.size() > 0) out.se_sandwich = (M * result.se_sandwich).eval();
  if (swapped) *swapped = true;
  return out;
}

void MCDesign::validate() const {
  if (n_reps < 1) throw DomainError("mc: n_reps must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("mc: level must be in (0, 1)");
  if (rho_grid.empty() || T_grid.empty() || estimators.empty())
    throw DomainError("mc: rho_grid, T_grid and estimators must be non-empty");
  for (double r : rho_grid)
    if (!(std::abs(r) < 1.0)) throw DomainError("mc: |rho| must be < 1");
  for (int T : T_grid)
    if (T < 10) throw DomainError("mc: every T must be >= 10");
  if (n_reps >= (1 << 24)) throw DomainError("mc: n_reps must be < 2^24");
  if (threads < 0) throw DomainError("mc: threads must be >= 0");
  fit.validate();
}

double MCDesign::critical_value() const {
  // Solve erfc(x / sqrt 2) = level by bisection.
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::sqrt(2.0)) > level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::uint64_t mc_stream(double rho, int T, int rep) {
  const auto r = static_cast<std::uint64_t>(std::llround(rho * 10000.0) + 20000);
  return (static_cast<std::uint64_t>(T) << 40) ^ (r << 24) ^ static_cast<std::uint64_t>(rep);
}

ParamVector mc_truth(const MCDesign& design, Variant estimator, double rho) {
  ParamVector p = design.dgp.params;
  p.rho = rho;
  return estimator == Variant::Joint ? p : to_partial(p);
}

MCReport run_monte_carlo(const MCDesign& design) {
  design.validate();
  const std::vector<Job> jobs = make_jobs(design);
  std::vector<MCRecord> records(jobs.size());
  const Estimator estimator = design.estimator ? design.estimator : Estimator([](const Dataset& d, const ModelConfig& c,
                                                                                  const FitOptions& o) {
    return fit(d, c, o);
  });

  parallel_for(static_cast<int>(jobs.size()), design.threads, [&](int i) {
    const Job& job = jobs[i];
    MCRecord& rec = records[i];
    rec.estimator = job.estimator;
    rec.rho = job.rho;
    rec.T = job.T;
    rec.rep = job.rep;

    DgpSpec spec = design.dgp;
    spec.rho = job.rho;
    spec.params.rho = job.rho;
    spec.T = job.T;
    spec.seed = design.master_seed;
    spec.rep_index = mc_stream(job.rho, job.T, job.rep);
    const Dataset data = simulate_dgp(spec);

    ModelConfig cfg = design.dgp.model;
    cfg.variant = job.estimator;
    const ParamVector truth = mc_truth(design, job.estimator, job.rho);
    FitOptions opt = design.fit;
    opt.threads = 1;
    try {
      if (design.starts == MCDesign::Starts::Desk) {
        opt.starts = desk_starts(data, cfg, truth);
      } else {
        opt.starts = default_starts(data, cfg);
        opt.starts.insert(opt.starts.begin(), truth);
      }
      const EstimationResult r = relabel(estimator(data, cfg, opt), &rec.relabeled);
      rec.converged = r.converged;
      rec.estimate = r.estimate();
      rec.has_se = r.has_se();
      rec.se = r.se_hessian;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  });
  return summarize(std::move(records), design);
}

MCReport summarize(std::vector<MCRecord> records, const MCDesign& design) {
  MCReport report;
  const double crit = design.critical_value();
  for (double rho : design.rho_grid)
    for (int T : design.T_grid)
      for (Variant v : design.estimators) {
        ModelConfig cfg = design.dgp.model;
        cfg.variant = v;
        const ParamLayout layout(cfg);
        const Eigen::VectorXd truth = layout.flatten(mc_truth(design, v, rho));
        const auto names = layout.names();
        std::vector<const MCRecord*> cell;
        for (const auto& r : records)
          if (r.estimator == v && r.rho == rho && r.T == T) cell.push_back(&r);
        std::vector<const MCRecord*> conv;
        int n_relabeled = 0;
        for (const MCRecord* r : cell)
          if (r->converged && r->error.empty()) {
            conv.push_back(r);
            if (r->relabeled) ++n_relabeled;
          }
        for (int j = 0; j < layout.size(); ++j) {
          MCRow row;
          row.estimator = v;
          row.rho = rho;
          row.T = T;
          row.parameter = names[j];
          row.truth = truth[j];
          row.n_reps = static_cast<int>(cell.size());
          row.n_converged = static_cast<int>(conv.size());
          row.n_relabeled = n_relabeled;
          row.boundary = layout.is_log_scale(j);
          row.low_precision = row.n_converged < design.low_precision_reps;
          row.valid = !conv.empty();
          if (row.valid) {
            double sum = 0.0;
            for (const MCRecord* r : conv) sum += r->estimate[j];
            row.mean = sum / conv.size();
            row.bias = row.mean - row.truth;
            double ss = 0.0;
            for (const MCRecord* r : conv) ss += (r->estimate[j] - row.mean) * (r->estimate[j] - row.mean);
            row.sd = conv.size() > 1 ? std::sqrt(ss / (conv.size() - 1)) : 0.0;
            double se_sum = 0.0;
            int reject_true = 0, reject_zero = 0;
            for (const MCRecord* r : conv) {
              if (!r->has_se) continue;
              ++row.n_se;
              const double se = r->se[j];
              se_sum += se;
              if (std::abs(r->estimate[j] - truth[j]) > crit * se) ++reject_true;
              if (std::abs(r->estimate[j]) > crit * se) ++reject_zero;
            }
            if (row.n_se > 0) {
              row.mean_se = se_sum / row.n_se;
              row.sd_ratio = row.mean_se > 0.0 ? row.sd / row.mean_se : std::numeric_limits<double>::quiet_NaN();
              row.size = static_cast<double>(reject_true) / row.n_se;
              row.power = static_cast<double>(reject_zero) / row.n_se;
            }
          }
          report.rows.push_back(row);
        }
      }
  report.records = std::move(records);
  return report;
}

const MCRow* MCReport::find(Variant estimator, double rho, int T, const std::string& parameter) const {
  for (const auto& r : rows)
    if (r.estimator == estimator && r.rho == rho && r.T == T && r.parameter == parameter) return &r;
  return nullptr;
}

void write_mc_csv(std::ostream& os, const MCReport& report) {
  os << "estimator,rho,T,parameter,truth,mean,bias,sd,mean_se,sd_ratio,size,power,n_reps,n_converged,"
        "n_relabeled,n_se,flags\n";
  os << std::setprecision(17);
  for (const auto& r : report.rows) {
    std::string flags;
    const auto add = [&](const char* f) { flags += flags.empty() ? f : std::string(";") + f; };
    if (!r.valid) add("invalid");
    if (r.low_precision) add("low-precision");
    if (r.boundary) add("boundary");
    os << variant_name(r.estimator) << ',' << r.rho << ',' << r.T << ',' << r.parameter << ',' << r.truth << ','
       << r.mean << ',' << r.bias << ',' << r.sd << ',' << r.mean_se << ',' << r.sd_ratio << ',' << r.size << ','
       << r.power << ',' << r.n_reps << ',' << r.n_converged << ',' << r.n_relabeled << ',' << r.n_se << ','
       << flags << '\n';
  }
}

void write_mc_table(std::ostream& os, const MCReport& report) {
  // One block per (estimator, rho): parameters down, T across, with
  // bias / sd-ratio and size / power pairs.
  std::vector<std::pair<Variant, double>> blocks;
  std::vector<int> Ts;
  for (const auto& r : report.rows) {
    if (std::find(blocks.begin(), blocks.end(), std::make_pair(r.estimator, r.rho)) == blocks.end())
      blocks.emplace_back(r.estimator, r.rho);
    if (std::find(Ts.begin(), Ts.end(), r.T) == Ts.end()) Ts.push_back(r.T);
  }
  for (const auto& [v, rho] : blocks) {
    os << variant_name(v) << " ML, rho = " << rho << "\n";
    os << std::left << std::setw(10) << "param";
    for (int T : Ts) os << std::right << std::setw(34) << ("T = " + std::to_string(T));
    os << "\n" << std::left << std::setw(10) << "";
    for (std::size_t i = 0; i < Ts.size(); ++i)
      os << std::right << std::setw(9) << "bias" << std::setw(8) << "sd/se" << std::setw(8) << "size"
         << std::setw(9) << "power";
    os << "\n";
    std::vector<std::string> params;
    for (const auto& r : report.rows)
      if (r.estimator == v && r.rho == rho && std::find(params.begin(), params.end(), r.parameter) == params.end())
        params.push_back(r.parameter);
    for (const auto& name : params) {
      os << std::left << std::setw(10) << name;
      for (int T : Ts) {
        const MCRow* r = report.find(v, rho, T, name);
        if (!r || !r->valid) {
          os << std::right << std::setw(34) << "n/a";
          continue;
        }
        os << std::right << std::setw(9) << format_number(r->bias) << std::setw(8) << format_number(r->sd_ratio, 2)
           << std::setw(8) << format_number(r->size) << std::setw(8) << format_number(r->power)
           << (r->boundary ? "*" : " ");
      }
      os << "\n";
    }
    os << std::left << std::setw(10) << "converged";
    for (int T : Ts) {
      const MCRow* r = report.find(v, rho, T, params.front());
      std::string s = r ? std::to_string(r->n_converged) + "/" + std::to_string(r->n_reps) : "n/a";
      if (r && r->low_precision) s += " (low precision)";
      os << std::right << std::setw(34) << s;
    }
    os << "\n\n";
  }
  os << "* null value on the parameter boundary; interpret power with caution\n";
}

}  // namespace tvtp
