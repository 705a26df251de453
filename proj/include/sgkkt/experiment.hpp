#pragma once

#include "format.hpp"
#include "krylov.hpp"
#include "preconditioners.hpp"
#include "random_field.hpp"
#include "spectral_analysis.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sgkkt {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ProblemKind { Steady, Time };
enum class CoefficientKind { Affine, Lognormal };
enum class PrecondKind { Block, Hgsoc };

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::Steady;
  int n = 0;
  int m_xi = 0;
  int p = 0;
  double sigma = 0.1;
  double beta = 1e-4;
  double gamma = 1.0;
  CoefficientKind coefficient = CoefficientKind::Lognormal;
  std::optional<int> coefficient_degree;  // lognormal default 2p
  int n_t = 8;
  std::optional<double> tol;              // default 1e-8 steady, 1e-6 time
  std::vector<std::string> mass_solver{"cheb5"};
  std::vector<std::string> n_tau{"mean", "m+1", "full"};
  int richardson = 1;
  PrecondKind preconditioner = PrecondKind::Block;
  int max_iters = 500;
  double ell = 1.0;
  double mean = 1.0;
  std::string output;

  double effective_tol() const { return tol ? *tol : (problem == ProblemKind::Steady ? 1e-8 : 1e-6); }
  int effective_coefficient_degree() const {
    if (coefficient == CoefficientKind::Affine) return 1;
    return coefficient_degree ? *coefficient_degree : 2 * p;
  }
  Index n_terms() const {
    return static_cast<Index>(binomial(m_xi + effective_coefficient_degree(), effective_coefficient_degree()));
  }

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, int line, const std::string& key) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + text + "' for key '" + key + "'");
  return value;
}

inline bool valid_n_tau_token(const std::string& t) {
  if (t == "mean" || t == "m+1" || t == "full") return true;
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  auto fail = [&](const std::string& msg) { throw ConfigError("line " + std::to_string(line) + ": " + msg); };
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) fail(msg);
  };

  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    require(eq != std::string::npos, "expected 'key = value'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    require(!value.empty(), "empty value for key '" + key + "'");
    require(seen.insert(key).second, "duplicate key '" + key + "'");
    auto as_int = [&] { return detail::parse_number<int>(value, line, key); };
    auto as_real = [&] { return detail::parse_number<double>(value, line, key); };

    if (key == "problem") {
      require(value == "steady" || value == "time", "problem must be steady or time");
      cfg.problem = value == "steady" ? ProblemKind::Steady : ProblemKind::Time;
    } else if (key == "n") {
      cfg.n = as_int();
      require(cfg.n >= 2, "n must be >= 2");
    } else if (key == "m_xi") {
      cfg.m_xi = as_int();
      require(cfg.m_xi >= 1, "m_xi must be >= 1");
    } else if (key == "p") {
      cfg.p = as_int();
      require(cfg.p >= 0, "p must be >= 0");
    } else if (key == "sigma") {
      cfg.sigma = as_real();
      require(cfg.sigma >= 0.0, "sigma must be >= 0");
    } else if (key == "beta") {
      cfg.beta = as_real();
      require(cfg.beta > 0.0, "beta must be > 0");
    } else if (key == "gamma") {
      cfg.gamma = as_real();
      require(cfg.gamma >= 0.0, "gamma must be >= 0");
    } else if (key == "coefficient") {
      require(value == "affine" || value == "lognormal", "coefficient must be affine or lognormal");
      cfg.coefficient = value == "affine" ? CoefficientKind::Affine : CoefficientKind::Lognormal;
    } else if (key == "coefficient_degree") {
      cfg.coefficient_degree = as_int();
      require(*cfg.coefficient_degree >= 0, "coefficient_degree must be >= 0");
    } else if (key == "N_t") {
      cfg.n_t = as_int();
      require(cfg.n_t >= 1, "N_t must be >= 1");
    } else if (key == "tol") {
      cfg.tol = as_real();
      require(*cfg.tol > 0.0 && *cfg.tol < 1.0, "tol must lie in (0, 1)");
    } else if (key == "mass_solver") {
      cfg.mass_solver = detail::split_list(value);
      require(!cfg.mass_solver.empty(), "mass_solver list is empty");
      for (const auto& s : cfg.mass_solver)
        require(s == "cheb5" || s == "cheb10" || s == "direct", "unknown mass_solver '" + s + "'");
    } else if (key == "n_tau") {
      cfg.n_tau = detail::split_list(value);
      require(!cfg.n_tau.empty(), "n_tau list is empty");
      for (const auto& s : cfg.n_tau)
        require(detail::valid_n_tau_token(s) && s != "0", "n_tau entry '" + s + "' is not mean, m+1, full or a positive integer");
    } else if (key == "richardson") {
      cfg.richardson = as_int();
      require(cfg.richardson >= 1, "richardson must be >= 1");
    } else if (key == "preconditioner") {
      require(value == "block" || value == "hgsoc", "preconditioner must be block or hgsoc");
      cfg.preconditioner = value == "block" ? PrecondKind::Block : PrecondKind::Hgsoc;
    } else if (key == "max_iters") {
      cfg.max_iters = as_int();
      require(cfg.max_iters >= 1, "max_iters must be >= 1");
    } else if (key == "ell") {
      cfg.ell = as_real();
      require(cfg.ell > 0.0, "ell must be > 0");
    } else if (key == "mean") {
      cfg.mean = as_real();
      require(cfg.mean > 0.0, "mean must be > 0");
    } else if (key == "output") {
      cfg.output = value;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  ++line;
  for (const char* k : {"problem", "n", "m_xi", "p"})
    if (!seen.count(k)) fail(std::string("missing required key '") + k + "'");
  if (cfg.coefficient == CoefficientKind::Affine && cfg.coefficient_degree && *cfg.coefficient_degree != 1)
    fail("affine coefficient has degree 1");
  if (cfg.problem == ProblemKind::Time && cfg.preconditioner == PrecondKind::Hgsoc)
    fail("the time-dependent problem supports only the block preconditioner");
  return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  std::ostringstream os;
  os << "problem = " << (cfg.problem == ProblemKind::Steady ? "steady" : "time") << '\n'
     << "n = " << cfg.n << '\n'
     << "m_xi = " << cfg.m_xi << '\n'
     << "p = " << cfg.p << '\n'
     << "sigma = " << format_double(cfg.sigma) << '\n'
     << "beta = " << format_double(cfg.beta) << '\n'
     << "gamma = " << format_double(cfg.gamma) << '\n'
     << "coefficient = " << (cfg.coefficient == CoefficientKind::Affine ? "affine" : "lognormal") << '\n';
  if (cfg.coefficient_degree) os << "coefficient_degree = " << *cfg.coefficient_degree << '\n';
  os << "N_t = " << cfg.n_t << '\n';
  if (cfg.tol) os << "tol = " << format_double(*cfg.tol) << '\n';
  os << "mass_solver = " << join(cfg.mass_solver) << '\n'
     << "n_tau = " << join(cfg.n_tau) << '\n'
     << "richardson = " << cfg.richardson << '\n'
     << "preconditioner = " << (cfg.preconditioner == PrecondKind::Block ? "block" : "hgsoc") << '\n'
     << "max_iters = " << cfg.max_iters << '\n'
     << "ell = " << format_double(cfg.ell) << '\n'
     << "mean = " << format_double(cfg.mean) << '\n';
  if (!cfg.output.empty()) os << "output = " << cfg.output << '\n';
  return os.str();
}

inline Index resolve_n_tau(const std::string& token, int m_xi, Index n_terms) {
  Index v = 0;
  if (token == "mean")
    v = 1;
  else if (token == "m+1")
    v = m_xi + 1;
  else if (token == "full")
    v = n_terms;
  else
    v = std::stol(token);
  if (v < 1 || v > n_terms)
    throw ConfigError("n_tau '" + token + "' resolves to " + std::to_string(v) + ", outside [1, " +
                      std::to_string(n_terms) + "]");
  return v;
}

// Everything needed to assemble and precondition one problem instance.
struct ProblemSetup {
  Grid grid;
  MultiIndexSet basis;
  MultiIndexSet coeff_basis;
  TripleProductSet triple;
  LevelPartition levels;
  KLModes modes;
  GpcCoefficientField field;
  SteadyKKT steady;
  DenseMatrix y_d;
};

inline ProblemSetup build_problem(const ExperimentConfig& cfg) {
  ProblemSetup s;
  s.grid = build_grid(cfg.n);
  s.basis = enumerate_multi_indices(cfg.m_xi, cfg.p);
  s.coeff_basis = enumerate_multi_indices(cfg.m_xi, cfg.effective_coefficient_degree());
  s.triple = build_H(s.basis, s.coeff_basis, cfg.gamma);
  s.levels = level_partition(s.basis);
  const CovarianceSpec cov{cfg.sigma, cfg.ell, cfg.ell, cfg.mean};
  s.modes = kl_expand(cov, s.grid, cfg.m_xi);
  s.field = cfg.coefficient == CoefficientKind::Affine ? affine_coefficient(s.modes)
                                                       : lognormal_coefficient(s.modes, s.coeff_basis);
  std::vector<SparseMatrix> stiffness;
  for (const auto& f : s.field.coeff_fields) stiffness.push_back(assemble_stiffness(s.grid, f));
  s.steady = make_steady_kkt(assemble_mass(s.grid), std::move(stiffness), s.triple, cfg.beta);
  s.y_d = desired_state(s.grid, s.basis.size());
  return s;
}

struct ResultRow {
  std::string problem;
  int n = 0;
  Index n_h = 0;
  int m_xi = 0;
  int p = 0;
  Index n_xi = 0;
  double sigma = 0.0;
  double beta = 0.0;
  double tol = 0.0;
  std::string mass_solver;
  Index n_tau = 0;
  int iters = 0;
  bool converged = false;
  double seconds = 0.0;
  double final_rel_res = 0.0;

  SolveReport report;  // not emitted
};

inline MassSolver make_mass_solver(const std::string& name, const SparseMatrix& M) {
  if (name == "cheb5") return MassSolver::chebyshev(M, 5);
  if (name == "cheb10") return MassSolver::chebyshev(M, 10);
  if (name == "direct") return MassSolver::direct(M);
  throw ConfigError("unknown mass solver '" + name + "'");
}

inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  const ProblemSetup setup = build_problem(cfg);
  const SteadyKKT& sys = setup.steady;
  const Index nh = sys.n_h();
  const Index nxi = sys.n_xi();
  const FgmresConfig fcfg{cfg.effective_tol(), cfg.max_iters, true};

  std::vector<Index> taus;
  for (const auto& t : cfg.n_tau) taus.push_back(resolve_n_tau(t, cfg.m_xi, sys.stiffness.n_terms()));

  std::vector<std::string> mass_names = cfg.mass_solver;
  if (cfg.preconditioner == PrecondKind::Hgsoc) mass_names = {"ptilde"};

  std::optional<TimeKKT> tsys;
  if (cfg.problem == ProblemKind::Time) tsys = make_time_kkt(sys, cfg.n_t, setup.y_d);

  std::vector<ResultRow> rows;
  for (const auto& mass_name : mass_names)
    for (Index tau_terms : taus) {
      ResultRow row;
      row.problem = cfg.problem == ProblemKind::Steady ? "steady" : "time";
      row.n = cfg.n;
      row.n_h = nh;
      row.m_xi = cfg.m_xi;
      row.p = cfg.p;
      row.n_xi = nxi;
      row.sigma = cfg.sigma;
      row.beta = cfg.beta;
      row.tol = fcfg.tol;
      row.mass_solver = mass_name;
      row.n_tau = tau_terms;

      std::pair<Vector, SolveReport> result;
      if (tsys) {
        const TimePrecond prec =
            make_time_precond(*tsys, make_mass_solver(mass_name, sys.M), tau_terms, setup.levels, cfg.richardson);
        const int nt = tsys->n_t();
        result = fgmres([&](const Vector& v) { return pack(time_kkt_apply(*tsys, unpack(v, nt, nh, nxi))); },
                        [&](const Vector& v) { return pack(time_kkt_precond_apply(unpack(v, nt, nh, nxi), prec)); },
                        pack(time_rhs(*tsys)), fcfg);
      } else if (cfg.preconditioner == PrecondKind::Hgsoc) {
        const HgsocPrecond prec = make_hgsoc(sys, setup.levels, tau_terms);
        result = fgmres([&](const Vector& v) { return pack(steady_kkt_apply(sys, unpack(v, nh, nxi))); },
                        [&](const Vector& v) { return pack(hgsoc_apply(unpack(v, nh, nxi), prec)); },
                        pack(steady_rhs(sys, setup.y_d)), fcfg);
      } else {
        const KKTBlockPrecond prec =
            make_block_precond(sys, make_mass_solver(mass_name, sys.M), tau_terms, setup.levels, cfg.richardson);
        result = fgmres([&](const Vector& v) { return pack(steady_kkt_apply(sys, unpack(v, nh, nxi))); },
                        [&](const Vector& v) { return pack(steady_kkt_precond_apply(unpack(v, nh, nxi), prec)); },
                        pack(steady_rhs(sys, setup.y_d)), fcfg);
      }
      row.report = std::move(result.second);
      row.iters = row.report.iterations;
      row.converged = row.report.converged;
      row.seconds = row.report.wall_time;
      row.final_rel_res = row.report.final_rel_residual;
      rows.push_back(std::move(row));
    }
  return rows;
}

enum class TableFormat { Csv, Markdown };

inline const std::vector<std::string>& table_columns() {
  static const std::vector<std::string> cols{"problem", "n",   "N_h",        "m_xi",  "p",         "N_xi",
                                             "sigma",   "beta", "tol",       "mass_solver", "n_tau", "iters",
                                             "converged", "seconds", "final_rel_res"};
  return cols;
}

inline std::vector<std::string> row_cells(const ResultRow& r) {
  return {r.problem,
          std::to_string(r.n),
          std::to_string(r.n_h),
          std::to_string(r.m_xi),
          std::to_string(r.p),
          std::to_string(r.n_xi),
          format_double(r.sigma),
          format_double(r.beta),
          format_double(r.tol),
          r.mass_solver,
          std::to_string(r.n_tau),
          std::to_string(r.iters),
          r.converged ? "true" : "false",
          format_double(r.seconds),
          format_double(r.final_rel_res)};
}

inline std::string emit_table(const std::vector<ResultRow>& rows, TableFormat format) {
  if (rows.empty()) throw Error("emit_table: no rows");
  std::ostringstream os;
  const auto& cols = table_columns();
  if (format == TableFormat::Csv) {
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : rows) {
      const auto cells = row_cells(r);
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    }
  } else {
    os << '|';
    for (const auto& c : cols) os << ' ' << c << " |";
    os << "\n|";
    for (std::size_t i = 0; i < cols.size(); ++i) os << " --- |";
    os << '\n';
    for (const auto& r : rows) {
      os << '|';
      for (const auto& c : row_cells(r)) os << ' ' << c << " |";
      os << '\n';
    }
  }
  return os.str();
}

// Spectral bound reports for a configured (small) instance, one block of
// truncation links per resolved n_tau value.
inline std::vector<BoundReport> run_spectra(const ExperimentConfig& cfg) {
  const ProblemSetup setup = build_problem(cfg);
  std::vector<Index> rs;
  for (const auto& t : cfg.n_tau) rs.push_back(resolve_n_tau(t, cfg.m_xi, setup.steady.stiffness.n_terms()));
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  const FieldBounds fb = field_bounds(setup.field.coeff_fields);
  SchurChain chain = cfg.problem == ProblemKind::Steady
                         ? build_schur_chain(setup.steady, rs, fb)
                         : build_schur_chain(make_time_kkt(setup.steady, cfg.n_t, setup.y_d), rs, fb);
  std::vector<BoundReport> out{check_exact_vs_bar(chain)};
  if (chain.time_dependent) out.push_back(check_bar_vs_tilde(chain));
  for (Index r : rs) out.push_back(check_tilde_vs_truncated(chain, r));
  for (Index r : rs) out.push_back(check_hgs_link(chain, r));
  return out;
}

}  // namespace sgkkt
