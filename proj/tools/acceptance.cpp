// Acceptance checks. One PASS/FAIL line per criterion; exit status is nonzero
// when a gated criterion fails. Benchmark runs (criteria 6 and 7) are cached
// under --work and reused when their manifest is complete and the config hash
// matches.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "eetg/cli.hpp"

using namespace eetg;

namespace {

struct Verdict {
  bool pass = true;
  bool gated = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// ------------------------------------------------------------ 1: TG analytics

Verdict tg_analytics() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, {1}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const TGConfig cfg;
  const double pi = std::numbers::pi;
  double worst_gap = 0.0, worst_bound = 0.0, worst_period = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    TGParams::Vector v{};
    for (int i = 0; i < kNumTGParams; ++i) v[i] = TGParams::lower()[i] + u(rng) * TGParams::width()[i];
    const TGParams p = clamp(TGParams::from_vector(v));
    const int leg = trial % 4;
    const double yd = leg_side(leg) * (cfg.lateral_offset + p.y_offset);
    // branch continuity at pi, approached from both sides
    for (double eps : {1e-9, 1e-7}) {
      const double gap = (foot_target(p, pi - eps, leg, cfg) - foot_target(p, pi + eps, leg, cfg)).norm();
      worst_gap = std::max(worst_gap, gap);
    }
    for (int k = 0; k < 400; ++k) {
      const double phi = kTwoPi * k / 400.0 + 1e-3 * u(rng);
      const Eigen::Vector3d x = foot_target(p, phi, leg, cfg);
      const double over = std::max({-x.x(), x.x() - p.swing, -(x.y() - yd), x.y() - yd - p.turn,
                                    -(x.z() - cfg.nominal_height), x.z() - cfg.nominal_height - p.lift, 0.0});
      worst_bound = std::max(worst_bound, over);
      worst_period = std::max(worst_period, (foot_target(p, phi + kTwoPi, leg, cfg) - x).norm());
    }
  }
  const double t = seconds_since(t0);
  Verdict v;
  v.pass = worst_gap < 1e-6 && worst_bound <= 1e-9 && worst_period <= 1e-12 && t < 10.0;
  v.detail = "1000 TGs: max gap at pi " + fmt_double(worst_gap) + " m, bound excess " + fmt_double(worst_bound) +
             ", period error " + fmt_double(worst_period) + ", " + fixed(t, 2) + " s";
  return v;
}

// ----------------------------------------------------------- 2: QD mechanics

Verdict qd_mechanics(double scale) {
  Verdict v;
  std::ostringstream d;

  // (a) a real phase-1 run at desk scale with ten snapshots
  const ExperimentConfig exp;
  QDConfig qd = exp.qd;
  qd.master_seed = 1;
  const long budget = budget_for(Variant::EETG, scale).tg_opt_evals;
  std::vector<Archive> snaps;
  Phase1Options opt;
  opt.snapshot_every = std::max<long>(1, budget / 10);
  opt.on_snapshot = [&](const Archive& a) { snaps.push_back(a); };
  Archive archive;
  run_eetg_phase1(
      archive, qd, budget,
      [&](const TGParams& tg, const EnvCell& c, std::uint64_t seed) {
        return rollout({tg, nullptr, c, qd.eval_noise_std, seed}, exp.sim, exp.reward).episode_return;
      },
      opt);
  int violations = 0;
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    if (snaps[k].coverage() < snaps[k - 1].coverage()) ++violations;
    for (int c = 0; c < kNumCells; ++c)
      if (snaps[k - 1].cells[c] && (!snaps[k].cells[c] || snaps[k].cells[c]->fitness < snaps[k - 1].cells[c]->fitness))
        ++violations;
  }
  const bool a = snaps.size() >= 2 && violations == 0;
  d << "(a) " << snaps.size() << " snapshots over " << budget << " evals, coverage " << archive.coverage()
    << "/80, " << violations << " monotonicity violations";

  // (b) goal switching over 1e4 draws, from every type
  double worst_p = 1.0;
  for (auto t : kEnvTypes) {
    Archive one;
    one.cells[make_cell(t, 5).index()] = Elite{};
    Rng rng(derive_seed(2, {static_cast<std::uint64_t>(t)}));
    std::vector<double> hist(4, 0.0), expected(4, 1000.0);
    expected[static_cast<int>(t)] = 7000.0;
    for (int i = 0; i < 10000; ++i) hist[static_cast<int>(select(one, rng).target.type)] += 1;
    worst_p = std::min(worst_p, chi_square_p(hist, expected));
  }
  const bool b = worst_p > 0.01;
  d << "; (b) min chi-square p " << fixed(worst_p, 4);

  // (c) initialisation
  Archive init;
  initialize(init, qd, [](const TGParams& tg, const EnvCell&, std::uint64_t) { return tg.lift; });
  const bool c = init.coverage() == 8;
  d << "; (c) init coverage " << init.coverage();

  // (d) iso-line moments
  const TGParams x1{0.04, 0.075, 0.1, 0.035, 2.0};
  const TGParams x2{0.05, 0.09, 0.12, 0.04, 2.2};
  Rng rng(derive_seed(3, {}));
  const int n = 100000;
  std::array<double, 5> sum{}, sq{};
  const auto base = x1.to_vector(), other = x2.to_vector();
  double line_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto iso = iso_line_variation(x1, x1, rng, qd.iso_sigma, qd.line_sigma).to_vector();
    for (int k = 0; k < 5; ++k) {
      sum[k] += iso[k] - base[k];
      sq[k] += (iso[k] - base[k]) * (iso[k] - base[k]);
    }
    const auto line = iso_line_variation(x1, x2, rng, 0.0, qd.line_sigma).to_vector();
    const double nu = (line[0] - base[0]) / (other[0] - base[0]);
    line_sq += nu * nu;
  }
  double worst_var = 0.0, worst_mean = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double sd = qd.iso_sigma * TGParams::width()[k];
    worst_var = std::max(worst_var, std::abs(sq[k] / n / (sd * sd) - 1.0));
    worst_mean = std::max(worst_mean, std::abs(sum[k] / n) / (sd / std::sqrt(n)));
  }
  const double line_rel = std::abs(line_sq / n / (qd.line_sigma * qd.line_sigma) - 1.0);
  const bool dd = worst_var <= 0.05 && worst_mean <= 4.0 && line_rel <= 0.05;
  d << "; (d) iso variance off by " << fixed(100 * worst_var, 2) << "%, mean " << fixed(worst_mean, 2)
    << " s.e., line variance off by " << fixed(100 * line_rel, 2) << "%";

  v.pass = a && b && c && dd;
  v.detail = d.str();
  return v;
}

// ------------------------------------------------------ 3: optimiser oracles

template <class F>
CmaState cma_run(const Eigen::VectorXd& x0, double sigma, long max_evals, double target, F f) {
  CmaState s = cma_init(x0, sigma);
  Rng rng(derive_seed(4, {static_cast<std::uint64_t>(x0.size())}));
  while (s.evaluations + s.lambda <= max_evals && s.best_f <= target) {
    const auto xs = cma_ask(s, rng);
    std::vector<double> fit;
    for (const auto& x : xs) fit.push_back(f(x));
    cma_tell(s, xs, fit);
  }
  return s;
}

Verdict optimiser_oracles() {
  const CmaState sphere =
      cma_run(Eigen::VectorXd::Constant(5, 3.0), 1.0, 5000, -1e-10, [](const Eigen::VectorXd& x) { return -x.squaredNorm(); });
  const CmaState rosen = cma_run(Eigen::VectorXd::Zero(5), 0.5, 50000, -1e-6, [](const Eigen::VectorXd& x) {
    double f = 0.0;
    for (int i = 0; i + 1 < 5; ++i) f += 100 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1 - x[i], 2);
    return -f;
  });

  ArsState ars;
  ars.theta = Eigen::VectorXd::Zero(1);
  Rng rng(derive_seed(5, {}));
  const ArsBatchOracle quad = [](const std::vector<Eigen::VectorXd>& cs) {
    std::vector<ArsEvaluation> out;
    for (const auto& c : cs) out.push_back({-(c[0] - 3.0) * (c[0] - 3.0), {}});
    return out;
  };
  int updates = 0;
  while (std::abs(ars.theta[0] - 3.0) >= 0.1 && updates < 200) {
    ars_update(ars, rng, quad);
    ++updates;
  }

  ArsState hand;
  hand.theta = Eigen::VectorXd::Zero(3);
  hand.config.top = 1;
  ars_apply(hand, {Eigen::Vector3d::UnitX()}, {{1.0, {}}, {0.0, {}}});
  const double hand_err = (hand.theta - 0.04 * Eigen::Vector3d::UnitX()).norm();

  Verdict v;
  v.pass = sphere.best_f > -1e-10 && rosen.best_f > -1e-6 && std::abs(ars.theta[0] - 3.0) < 0.1 && hand_err < 1e-15;
  v.detail = "sphere " + fmt_double(sphere.best_f) + " in " + std::to_string(sphere.evaluations) + " evals; rosenbrock " +
             fmt_double(rosen.best_f) + " in " + std::to_string(rosen.evaluations) + " evals; ARS quadratic |theta-3| " +
             fixed(std::abs(ars.theta[0] - 3.0), 4) + " after " + std::to_string(updates) +
             " updates; hand step error " + fmt_double(hand_err);
  return v;
}

// ---------------------------------------------------------- 4: sim physics

Verdict sim_physics() {
  const SimConfig cfg;
  const TGParams stand{0.0, 0.0, 0.0, 0.0, encode_gait(Gait::Trot)};
  const auto targets = [&] { return foot_targets(stand, initial_tg_state(gait_offsets(Gait::Trot), cfg.tg), cfg.tg); };
  const Terrain ground(EnvType::Slope, 0.0, 1);

  SimState fall = reset_state(cfg, targets());
  fall.trunk.position.z() = 10.0;
  for (int k = 0; k < 30; ++k) step_control(fall, targets(), ground, cfg);
  const double dz = fall.trunk.position.z() - 10.0;

  SimState s = reset_state(cfg, targets());
  const double z0 = s.trunk.position.z();
  for (int k = 0; k < 120; ++k) step_control(s, targets(), ground, cfg);
  const double sag = z0 - s.trunk.position.z();
  const double allowed = cfg.mass * cfg.gravity / (4 * cfg.contact_stiffness) + 0.005;

  const RolloutResult ep = rollout({stand, nullptr, EnvCell{EnvType::Slope, 9, 0.0}, 0.0, 1}, cfg, RewardWeights{});

  Verdict v;
  v.pass = std::abs(dz + 1.226) <= 1e-3 && std::abs(sag) <= allowed && ep.termination == Termination::TimeLimit &&
           ep.steps == cfg.max_steps();
  v.detail = "free fall dz " + fixed(dz, 6) + " m; stand sag " + fixed(1000 * sag, 3) + " mm (limit " +
             fixed(1000 * allowed, 3) + "); standing episode " + std::to_string(ep.steps) + " steps, " +
             termination_name(ep.termination);
  return v;
}

// ---------------------------------------------------------- 5: determinism

RunConfig small_run(Variant v, std::uint64_t seed, double scale, const fs::path& dir, int workers) {
  RunConfig rc;
  rc.exp.variant = v;
  rc.exp.master_seed = seed;
  rc.exp.scale_factor = scale;
  rc.exp.workers = workers;
  rc.output_dir = fs::absolute(dir).string();
  return rc;
}

std::vector<std::string> payload(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    if (rel == "manifest.json" || rel == "config.json" || rel.rfind("eval/", 0) == 0) continue;
    out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Verdict determinism(const fs::path& work) {
  const fs::path base = work / "determinism";
  fs::remove_all(base);
  std::ostringstream log;
  std::vector<fs::path> dirs;
  for (auto [name, workers] : std::vector<std::pair<const char*, int>>{{"w1a", 1}, {"w1b", 1}, {"w3", 3}}) {
    const RunOutcome r = execute_run(small_run(Variant::EETG, 7, 0.001, base / name, workers), log);
    if (r.code != 0) return {false, true, std::string("run ") + name + " failed: " + r.manifest.error};
    dirs.push_back(r.dir);
  }
  const auto files = payload(dirs[0]);
  int differ = 0;
  for (std::size_t k = 1; k < dirs.size(); ++k) {
    if (payload(dirs[k]) != files) ++differ;
    for (const auto& f : files)
      if (!fs::exists(dirs[k] / f) || read_file(dirs[k] / f) != read_file(dirs[0] / f)) ++differ;
  }
  const bool has_all = std::count(files.begin(), files.end(), "archive.json") == 1 &&
                       std::count(files.begin(), files.end(), "policies/policy.json") == 1 &&
                       std::count(files.begin(), files.end(), "results.csv") == 1;
  Verdict v;
  v.pass = differ == 0 && has_all;
  v.detail = "3 runs (workers 1, 1, 3), " + std::to_string(files.size()) +
             " archive/policy/result files compared byte for byte, " + std::to_string(differ) + " differences";
  return v;
}

// --------------------------------------------------------- 8: schemas

Verdict schemas(const fs::path& work) {
  const fs::path dir = work / "schemas";
  fs::remove_all(dir);
  std::ostringstream log, out, err;
  const RunOutcome r = execute_run(small_run(Variant::EETG, 3, 0.001, dir, 1), log);
  if (r.code != 0) return {false, true, "run failed: " + r.manifest.error};
  std::ostringstream d;
  bool ok = true;

  const int reps = 20;
  EvalOptions eo;
  eo.reps = reps;
  ok &= cmd_eval(r.dir, eo, out, err) == 0;
  const std::string results = read_file(r.dir / "eval/results.csv");
  const std::string summary = read_file(r.dir / "eval/summary.csv");
  const auto lines = [](const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')) - 1; };
  ok &= lines(results) == kNumCells * reps && lines(summary) == kNumEnvTypes;
  d << "eval rows " << lines(results) << " (want " << kNumCells * reps << "), summary rows " << lines(summary);

  const auto parsed = parse_results_csv(results);
  ok &= parsed.size() == 1 && results_csv(parsed[0]) == results;
  d << ", results CSV round-trip " << (parsed.size() == 1 && results_csv(parsed[0]) == results ? "ok" : "broken");

  std::ostringstream ins;
  ok &= cmd_inspect((r.dir / "archive.json").string(), ins, err) == 0;
  const ArchiveFile af = archive_from_json(read_json(r.dir / "archive.json"));
  const bool inspect_ok = ins.str().find("coverage " + std::to_string(af.archive.coverage()) + "/80") != std::string::npos;
  const bool archive_rt = archive_to_json(af.archive, af.seed, af.config_hash) == read_json(r.dir / "archive.json");
  int heat_cells = 0;
  const std::string heat = archive_heatmap_svg(af.archive);
  for (auto p = heat.find("class=\"cell\""); p != std::string::npos; p = heat.find("class=\"cell\"", p + 1)) ++heat_cells;
  ok &= inspect_ok && archive_rt && heat_cells == kNumCells;
  d << ", inspect coverage " << af.archive.coverage() << "/80, archive round-trip " << (archive_rt ? "ok" : "broken")
    << ", heatmap cells " << heat_cells;

  Variant pv{};
  const json pj = read_json(r.dir / "policies/policy.json");
  const bool policy_rt = policy_to_json(policy_from_json(pj, &pv), pv) == pj;
  const RunConfig rc = load_run_config(r.dir / "config.json");
  const bool config_rt = run_config_to_json(rc) == read_json(r.dir / "config.json");
  ok &= policy_rt && config_rt;
  d << ", policy round-trip " << (policy_rt ? "ok" : "broken") << ", config round-trip " << (config_rt ? "ok" : "broken");
  return {ok, true, d.str()};
}

// ------------------------------------------------ 6 and 7: benchmark runs

struct Bench {
  fs::path work;
  double scale = 0.01;
  int seeds = 5;
  int workers = 1;
  std::map<std::pair<Variant, int>, EvalReport> reports;

  const EvalReport& get(Variant v, int seed) {
    const auto key = std::make_pair(v, seed);
    auto it = reports.find(key);
    if (it != reports.end()) return it->second;
    const fs::path dir = work / "bench" / ("seed" + std::to_string(seed)) / variant_name(v);
    RunConfig rc = small_run(v, static_cast<std::uint64_t>(seed), scale, dir, workers);
    bool cached = false;
    if (fs::exists(dir / "manifest.json")) {
      try {
        const Manifest m = read_manifest(dir);
        cached = m.complete && m.config_hash == config_hash(rc) && fs::exists(dir / "results.csv");
      } catch (const std::exception&) {
      }
    }
    if (!cached) {
      const auto t0 = Clock::now();
      std::cout << "  running " << variant_name(v) << " seed " << seed << " at scale " << scale << " ..." << std::flush;
      std::ofstream log(work / "bench.log", std::ios::app);
      const RunOutcome r = execute_run(rc, log);
      if (r.code != 0) throw std::runtime_error(std::string(variant_name(v)) + " seed " + std::to_string(seed) +
                                                " failed: " + r.manifest.error);
      std::cout << " " << fixed(seconds_since(t0), 0) << " s" << std::endl;
    }
    auto parsed = parse_results_csv(read_file(dir / "results.csv"), (dir / "results.csv").string());
    if (parsed.size() != 1) throw std::runtime_error(dir.string() + ": expected one variant in results.csv");
    return reports.emplace(key, std::move(parsed[0])).first->second;
  }

  // Per-cell means averaged over seeds, then the usual per-type medians over
  // the 20 cells and the aggregate median over all 80.
  EvalReport pooled(Variant v) {
    EvalReport out;
    out.variant = v;
    for (int c = 0; c < kNumCells; ++c) {
      out.cells[c].cell = c;
      double s = 0.0;
      int n = 0;
      for (int seed = 1; seed <= seeds; ++seed) {
        const CellResult& cr = get(v, seed).cells[c];
        if (cr.failed) continue;
        s += cr.mean;
        ++n;
      }
      out.cells[c].failed = n == 0;
      out.cells[c].mean = n > 0 ? s / n : 0.0;
    }
    return summarize_cells(out);
  }
};

void print_table(Bench& b, const std::vector<Variant>& vs) {
  std::printf("  %-16s %9s %9s %9s %9s %10s\n", "variant / seed", "Slope", "Stairs", "Uneven", "Beam", "aggregate");
  for (Variant v : vs) {
    for (int seed = 1; seed <= b.seeds; ++seed) {
      const EvalReport& r = b.get(v, seed);
      std::printf("  %-12s s%-3d %9.1f %9.1f %9.1f %9.1f %10.1f\n", variant_name(v), seed, r.types[0].median,
                  r.types[1].median, r.types[2].median, r.types[3].median, r.aggregate_median);
    }
    const EvalReport p = b.pooled(v);
    std::printf("  %-12s pool %9.1f %9.1f %9.1f %9.1f %10.1f\n", variant_name(v), p.types[0].median, p.types[1].median,
                p.types[2].median, p.types[3].median, p.aggregate_median);
  }
  std::cout << std::flush;
}

Verdict method_ordering(Bench& b) {
  print_table(b, {Variant::EETG, Variant::PMTG_Enc, Variant::CMAES_Enc, Variant::CMAES_Ind});
  const EvalReport eetg = b.pooled(Variant::EETG), pmtg = b.pooled(Variant::PMTG_Enc),
                   cma_enc = b.pooled(Variant::CMAES_Enc), cma_ind = b.pooled(Variant::CMAES_Ind);
  std::ostringstream d;
  int wins = 0;
  for (int t = 0; t < kNumEnvTypes; ++t) wins += eetg.types[t].median >= pmtg.types[t].median;
  const bool a = wins >= 3;
  d << "over " << b.seeds << " seeds at scale " << b.scale << ": (a) eetg >= pmtg_enc on " << wins << "/4 types";

  const bool b1 = eetg.aggregate_median >= pmtg.aggregate_median;
  const bool b2 = cma_enc.aggregate_median >= pmtg.aggregate_median;
  d << "; (b) aggregate eetg " << fixed(eetg.aggregate_median, 1) << ", cmaes_enc " << fixed(cma_enc.aggregate_median, 1)
    << " vs pmtg_enc " << fixed(pmtg.aggregate_median, 1) << (b1 && b2 ? " ok" : " violated");

  const double budget_ratio = static_cast<double>(budget_for(Variant::EETG, b.scale).total()) /
                              static_cast<double>(budget_for(Variant::CMAES_Ind, b.scale).total());
  const double perf_ratio = eetg.aggregate_median / cma_ind.aggregate_median;
  const bool c = budget_ratio <= 0.25 && perf_ratio >= 0.9;
  d << "; (c) budget ratio " << fixed(budget_ratio, 3) << ", eetg / cmaes_ind aggregate " << fixed(perf_ratio, 3)
    << " (need >= 0.9)";

  int failed = 0;
  for (const auto* r : {&eetg, &pmtg, &cma_enc, &cma_ind})
    for (int t = 0; t < kNumEnvTypes; ++t) failed += r->failed[t];
  if (failed > 0) d << "; " << failed << " cells without any completed evaluation";
  return {a && b1 && b2 && c, true, d.str()};
}

Verdict ablation_parity(Bench& b) {
  print_table(b, {Variant::EETG_Itr, Variant::EETG_ItrPolicy});
  const EvalReport eetg = b.pooled(Variant::EETG);
  std::ostringstream d;
  bool all = true;
  for (Variant v : {Variant::EETG_Itr, Variant::EETG_ItrPolicy}) {
    const EvalReport r = b.pooled(v);
    d << (v == Variant::EETG_Itr ? "" : "; ") << variant_name(v) << " vs eetg:";
    for (int t = 0; t < kNumEnvTypes; ++t) {
      const double rel = (r.types[t].median - eetg.types[t].median) / std::abs(eetg.types[t].median);
      const bool within = std::abs(rel) <= 0.10;
      all &= within;
      d << ' ' << env_type_name(kEnvTypes[t]) << ' ' << (rel >= 0 ? "+" : "") << fixed(100 * rel, 1) << '%'
        << (within ? "" : "*");
    }
  }
  if (!all) d << " (* outside 10%)";
  return {all, false, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string criteria = "1,2,3,4,5,6,7,8";
  std::string work = "acceptance_work";
  int seeds = 5, workers = 1;
  double scale = 0.01;
  app.add_option("--criteria", criteria, "comma-separated criterion numbers");
  app.add_option("--work", work, "scratch and benchmark cache directory");
  app.add_option("--seeds", seeds, "master seeds for the benchmark criteria")->check(CLI::PositiveNumber);
  app.add_option("--scale", scale, "desk budget scale for criteria 2, 6 and 7")->check(CLI::PositiveNumber);
  app.add_option("-w,--workers", workers, "rollout threads for benchmark runs (0 = all cores)");
  CLI11_PARSE(app, argc, argv);

  std::set<int> chosen;
  std::stringstream ss(criteria);
  for (std::string item; std::getline(ss, item, ',');) {
    const int k = std::stoi(item);
    if (k < 1 || k > 8) {
      std::cerr << "unknown criterion " << k << '\n';
      return 2;
    }
    chosen.insert(k);
  }
  const fs::path work_dir = fs::absolute(work);
  fs::create_directories(work_dir);
  Bench bench{work_dir, scale, seeds, resolve_workers(workers), {}};

  const std::map<int, std::string> names{{1, "TG analytics"},        {2, "QD mechanics"},
                                         {3, "optimizer oracles"},   {4, "simulator physics"},
                                         {5, "determinism"},         {6, "method ordering"},
                                         {7, "ablation parity"},     {8, "archive/report schemas"}};
  int gated_failures = 0;
  for (int k : chosen) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      switch (k) {
        case 1: v = tg_analytics(); break;
        case 2: v = qd_mechanics(scale); break;
        case 3: v = optimiser_oracles(); break;
        case 4: v = sim_physics(); break;
        case 5: v = determinism(work_dir); break;
        case 6: v = method_ordering(bench); break;
        case 7: v = ablation_parity(bench); break;
        case 8: v = schemas(work_dir); break;
      }
    } catch (const std::exception& e) {
      v = {false, k != 7, std::string("error: ") + e.what()};
    }
    const char* status = v.pass ? "PASS" : (v.gated ? "FAIL" : "FLAG");
    if (!v.pass && v.gated) ++gated_failures;
    std::cout << "criterion " << k << " [" << status << "] " << names.at(k) << ": " << v.detail << " ("
              << fixed(seconds_since(t0), 1) << " s)" << (v.gated ? "" : " [reported, not gated]") << std::endl;
  }
  return gated_failures == 0 ? 0 : 1;
}
