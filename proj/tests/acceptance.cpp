// Acceptance run: one PASS/FAIL line per criterion. `acceptance 3 5` runs a subset.
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>

using namespace sgkkt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Every solve report produced along the way; checked by the FGMRES contract criterion.
std::vector<std::pair<std::string, SolveReport>> g_reports;

std::vector<ResultRow> run(const std::string& label, const std::string& config) {
  auto rows = run_experiment(parse_config(config));
  for (const auto& r : rows) g_reports.emplace_back(label + " n_tau=" + std::to_string(r.n_tau), r.report);
  return rows;
}

double spread(const std::vector<int>& its) {
  const auto [lo, hi] = std::minmax_element(its.begin(), its.end());
  return static_cast<double>(*hi - *lo) / *lo;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : "/") + std::to_string(x);
  return s;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937 rng(2024);
  const std::vector<std::pair<int, int>> bases{{1, 1}, {2, 1}, {1, 2}, {3, 1}, {1, 3}, {4, 1}, {2, 2}, {3, 2}};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  std::string worst_what;
  const int instances = 24;
  for (int inst = 0; inst < instances; ++inst) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const auto [m, p] = bases[rng() % bases.size()];
    const bool affine = rng() % 2 == 0;
    const int nt = 1 + static_cast<int>(rng() % 3);
    std::string cfg = "problem = steady\nn = " + std::to_string(n) + "\nm_xi = " + std::to_string(m) +
                      "\np = " + std::to_string(p) + "\nsigma = " + format_double(0.05 + 0.35 * unit(rng)) +
                      "\nbeta = " + format_double(std::pow(10.0, -2.0 + 2.0 * unit(rng))) +
                      "\ngamma = " + format_double(unit(rng)) + "\ncoefficient = " + (affine ? "affine" : "lognormal") +
                      "\n";
    const ProblemSetup s = oracle::setup(cfg);
    const SteadyKKT& sys = s.steady;
    const Index nh = sys.n_h(), nxi = sys.n_xi();
    const Index n_terms = sys.stiffness.n_terms();
    const Index n_tau = 1 + static_cast<Index>(rng() % static_cast<unsigned>(n_terms));

    auto track = [&](double err, const std::string& what) {
      if (err > worst) {
        worst = err;
        worst_what = what;
      }
    };

    const DenseMatrix x = oracle::random_matrix(rng, nh, nxi);
    const DenseMatrix ks = oracle::kron_sum(sys.stiffness.H, sys.stiffness.A, n_terms);
    track((vectorize(kron_apply(sys.stiffness, x)) - ks * vectorize(x)).cwiseAbs().maxCoeff(), "kron_apply");

    const KKTBlocks w = oracle::random_blocks(rng, nh, nxi);
    track((pack(steady_kkt_apply(sys, w)) - oracle::steady_kkt(sys) * pack(w)).cwiseAbs().maxCoeff(), "steady KKT");

    const TimeKKT tsys = make_time_kkt(sys, nt, s.y_d);
    const TimeBlocks tw = oracle::random_time_blocks(rng, nt, nh, nxi);
    track((pack(time_kkt_apply(tsys, tw)) - oracle::time_kkt(tsys) * pack(tw)).cwiseAbs().maxCoeff(), "time KKT");

    const KroneckerSumOperator z = schur_factor_operator(sys);
    const HgsConfig hcfg{n_tau, s.levels, LUFactors(z.A[0])};
    track((vectorize(hgs_apply(z, x, hcfg)) - oracle::hgs_inverse(z, s.levels, n_tau) * vectorize(x)).cwiseAbs().maxCoeff(),
          "hGS");

    const KKTBlockPrecond bp = make_block_precond(sys, MassSolver::direct(sys.M), n_tau, s.levels);
    track((pack(steady_kkt_precond_apply(w, bp)) - oracle::block_precond_inverse(sys, s.levels, n_tau) * pack(w))
              .cwiseAbs()
              .maxCoeff(),
          "block preconditioner");

    const HgsocPrecond hp = make_hgsoc(sys, s.levels, n_tau);
    track((pack(hgsoc_apply(w, hp)) - oracle::hgsoc_inverse(sys, s.levels, n_tau) * pack(w)).cwiseAbs().maxCoeff(),
          "hGSoc");

    const TimePrecond tp = make_time_precond(tsys, MassSolver::direct(sys.M), n_tau, s.levels);
    track((pack(time_kkt_precond_apply(tw, tp)) - oracle::time_precond_inverse(tsys, s.levels, n_tau) * pack(tw))
              .cwiseAbs()
              .maxCoeff(),
          "time preconditioner");
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs <= 60.0, std::to_string(instances) + " instances, max abs error " + fmt(worst) + " (" +
                                              worst_what + "), " + fmt(secs) + " s"};
}

Outcome triple_products() {
  const auto gh = oracle::gauss_hermite(12);
  double worst = 0.0;
  int matrices = 0;
  for (int m = 1; m <= 3; ++m)
    for (int p = 0; p <= 3; ++p)
      for (int c = 0; c <= 4; ++c) {
        const MultiIndexSet basis = enumerate_multi_indices(m, p);
        const MultiIndexSet coeff = enumerate_multi_indices(m, c);
        const TripleProductSet t = build_H(basis, coeff);
        for (Index l = 0; l < coeff.size(); ++l, ++matrices) {
          const DenseMatrix h = oracle::dense(t.H[static_cast<std::size_t>(l)]);
          for (Index j = 0; j < basis.size(); ++j)
            for (Index k = 0; k < basis.size(); ++k)
              worst = std::max(worst, std::abs(h(j, k) - oracle::triple_quadrature(coeff[l], basis[j], basis[k], gh)));
        }
      }
  return {worst <= 1e-10, std::to_string(matrices) + " matrices, max abs error " + fmt(worst)};
}

Outcome chebyshev_mass() {
  std::mt19937 rng(7);
  double worst = 0.0;
  for (int n : {8, 16, 32}) {
    const SparseMatrix m = assemble_mass(build_grid(n));
    const LUFactors lu(m);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector b = oracle::random_matrix(rng, m.rows(), 1);
      const Vector exact = lu.solve(b);
      const Vector approx = chebyshev_mass_solve(m, b, ChebyshevConfig{});
      worst = std::max(worst, (approx - exact).norm() / exact.norm());
    }
  }
  return {worst <= 0.07, "n in {8,16,32}, 20 right-hand sides each, max relative error " + fmt(worst)};
}

Outcome spectral_chain() {
  const auto t0 = Clock::now();
  const std::string common = "m_xi = 2\np = 2\ncoefficient = affine\nsigma = 0.1\nbeta = 1e-4\ngamma = 1\nn_tau = 1, 2, 3\n";
  std::vector<std::string> failed;
  int links = 0;
  for (const auto& [label, cfg] :
       {std::pair<std::string, std::string>{"steady", "problem = steady\nn = 4\n" + common},
        std::pair<std::string, std::string>{"time", "problem = time\nn = 3\nN_t = 3\n" + common}}) {
    for (const BoundReport& r : run_spectra(parse_config(cfg))) {
      ++links;
      if (!r.pass)
        failed.push_back(label + " " + r.link + " [" + format_double(r.lambda_min) + ", " + fmt(r.lambda_max) +
                         "] vs [" + fmt(r.bound_lo) + ", " + fmt(r.bound_hi) + "]");
    }
  }
  const double secs = seconds_since(t0);
  std::string detail = std::to_string(links - static_cast<int>(failed.size())) + "/" + std::to_string(links) +
                       " links within bounds, " + fmt(secs) + " s";
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty() && secs <= 120.0, detail};
}

Outcome mean_based_degradation() {
  const std::string base = "problem = steady\nn = 16\nm_xi = 3\np = 3\ncoefficient = lognormal\nbeta = 1e-4\ntol = 1e-8\n"
                           "n_tau = mean, full\n";
  const auto hi = run("sigma=0.4", base + "sigma = 0.4\n");
  const auto lo = run("sigma=0.01", base + "sigma = 0.01\n");
  bool ok = true;
  for (const auto* rows : {&hi, &lo})
    for (const auto& r : *rows) ok = ok && r.converged;
  ok = ok && hi[0].iters >= 1.2 * hi[1].iters && std::abs(lo[0].iters - lo[1].iters) <= 2;
  return {ok, "sigma=0.4: mean " + std::to_string(hi[0].iters) + " vs full " + std::to_string(hi[1].iters) +
                  "; sigma=0.01: mean " + std::to_string(lo[0].iters) + " vs full " + std::to_string(lo[1].iters)};
}

Outcome mesh_independence() {
  std::vector<int> its;
  bool converged = true;
  for (int n : {8, 16, 32}) {
    const auto rows = run("n=" + std::to_string(n), "problem = steady\nn = " + std::to_string(n) +
                                                        "\nm_xi = 3\np = 3\nsigma = 0.2\nbeta = 1e-4\nn_tau = m+1\n");
    its.push_back(rows[0].iters);
    converged = converged && rows[0].converged;
  }
  const double s = spread(its);
  return {converged && s <= 0.35, "iterations n=8/16/32: " + join(its) + ", spread " + fmt(100 * s) + "%"};
}

Outcome beta_robustness() {
  std::vector<int> its;
  bool converged = true;
  for (const char* beta : {"1e-2", "1e-3", "1e-4", "1e-5"}) {
    const auto rows = run(std::string("beta=") + beta, std::string("problem = steady\nn = 16\nm_xi = 3\np = 3\nsigma = 0.2\n"
                                                                   "n_tau = m+1\nbeta = ") + beta + "\n");
    its.push_back(rows[0].iters);
    converged = converged && rows[0].converged;
  }
  const double s = spread(its);
  return {converged && s <= 0.35, "iterations beta=1e-2..1e-5: " + join(its) + ", spread " + fmt(100 * s) + "%"};
}

Outcome time_dependent() {
  const auto t0 = Clock::now();
  const std::string cfg = "problem = time\nn = 16\nm_xi = 2\np = 2\nN_t = 8\nsigma = 0.2\nbeta = 1e-4\ntol = 1e-4\n"
                          "n_tau = mean, m+1, full\n";
  const auto rows = run("time", cfg);
  bool converged = true;
  std::vector<int> its;
  for (const auto& r : rows) {
    converged = converged && r.converged;
    its.push_back(r.iters);
  }

  // Same preconditioner applied with several step orders and thread counts.
  const ProblemSetup s = oracle::setup(cfg);
  const TimeKKT sys = make_time_kkt(s.steady, 8, s.y_d);
  std::mt19937 rng(99);
  const TimeBlocks r = oracle::random_time_blocks(rng, 8, sys.n_h(), sys.n_xi());
  bool identical = true;
  for (Index n_tau : {Index{1}, Index{3}}) {
    const TimePrecond p1 = make_time_precond(sys, MassSolver::chebyshev(sys.base.M, 5), n_tau, s.levels, 1, 1);
    const TimePrecond p4 = make_time_precond(sys, MassSolver::chebyshev(sys.base.M, 5), n_tau, s.levels, 1, 4);
    const Vector ref = pack(time_kkt_precond_apply(r, p1));
    std::vector<int> order{7, 6, 5, 4, 3, 2, 1, 0};
    identical = identical && pack(time_kkt_precond_apply(r, p1, order)) == ref;
    std::shuffle(order.begin(), order.end(), rng);
    identical = identical && pack(time_kkt_precond_apply(r, p4, order)) == ref;
    identical = identical && pack(time_kkt_precond_apply(r, p4)) == ref;
  }
  const double secs = seconds_since(t0);
  const bool ok = converged && its[1] <= its[0] && identical && secs <= 600.0;
  return {ok, "iterations mean/m+1/full: " + join(its) + (converged ? ", all converged" : ", NOT all converged") +
                  (identical ? ", step order invariant" : ", step order CHANGES output") + ", " + fmt(secs) + " s"};
}

Outcome fgmres_contract() {
  // Exact inverse of an assembled KKT matrix as the preconditioner.
  int exact_iters = 0;
  for (const char* cfg : {"problem = steady\nn = 4\nm_xi = 2\np = 2\nbeta = 1e-2\n",
                          "problem = time\nn = 3\nm_xi = 2\np = 1\nbeta = 1e-2\n"}) {
    const ProblemSetup s = oracle::setup(cfg);
    DenseMatrix k;
    Vector b;
    if (s.steady.n_h() == 9) {
      k = oracle::steady_kkt(s.steady);
      b = pack(steady_rhs(s.steady, s.y_d));
    } else {
      const TimeKKT t = make_time_kkt(s.steady, 3, s.y_d);
      k = oracle::time_kkt(t);
      b = pack(time_rhs(t));
    }
    const Eigen::PartialPivLU<DenseMatrix> lu(k);
    const auto [x, rep] = fgmres([&](const Vector& v) -> Vector { return k * v; },
                                 [&](const Vector& v) -> Vector { return lu.solve(v); }, b, FgmresConfig{});
    g_reports.emplace_back(std::string("exact inverse ") + (s.steady.n_h() == 9 ? "steady" : "time"), rep);
    exact_iters = std::max(exact_iters, rep.converged ? rep.iterations : 1000);
  }

  double worst_rise = 0.0, worst_gap = 0.0;
  for (const auto& [label, rep] : g_reports) {
    for (std::size_t i = 1; i < rep.residual_history.size(); ++i)
      worst_rise = std::max(worst_rise, rep.residual_history[i] - rep.residual_history[i - 1]);
    worst_gap = std::max(worst_gap, std::abs(rep.true_rel_residual - rep.final_rel_residual));
  }
  const bool ok = exact_iters == 1 && worst_rise <= 1e-13 && worst_gap <= 1e-8;
  return {ok, std::to_string(g_reports.size()) + " solves, max history increase " + fmt(worst_rise) +
                  ", max |true - recurrence| " + fmt(worst_gap) + ", exact inverse iterations " +
                  std::to_string(exact_iters)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"oracle equivalence", oracle_equivalence},   {"triple products", triple_products},
      {"chebyshev mass solve", chebyshev_mass},     {"spectral bounds", spectral_chain},
      {"mean-based degradation", mean_based_degradation}, {"mesh independence", mesh_independence},
      {"beta robustness", beta_robustness},         {"time-dependent solve", time_dependent},
      {"fgmres contract", fgmres_contract}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
