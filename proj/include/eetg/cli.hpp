#pragma once

// The `eetg` command line: run, eval, plot, inspect, trace. Each command is an
// ordinary function returning the process exit code so tests can drive it.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eetg/bench.hpp"
#include "eetg/io.hpp"
#include "eetg/plot.hpp"

namespace eetg {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2 };

inline constexpr const char* kOutputRootEnv = "EETG_OUTPUT_ROOT";

// Resolves a run's output directory. Relative paths live under the output
// root ($EETG_OUTPUT_ROOT or the working directory); nothing may resolve
// outside that root.
inline fs::path resolve_output_dir(const std::string& output_dir) {
  const char* env = std::getenv(kOutputRootEnv);
  const fs::path root = fs::weakly_canonical(env != nullptr && *env != '\0' ? fs::path(env) : fs::current_path());
  fs::path p(output_dir);
  if (p.is_relative()) p = root / p;
  p = fs::weakly_canonical(p);
  if ((env != nullptr && *env != '\0') || fs::path(output_dir).is_relative()) {
    const auto rel = p.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..")
      throw ConfigError("output_dir '" + output_dir + "' resolves outside the output root " + root.string());
  }
  return p;
}

// `rel` joined under `dir`, refusing anything that climbs out.
inline fs::path inside(const fs::path& dir, const fs::path& rel) {
  const fs::path p = (dir / rel).lexically_normal();
  const auto r = p.lexically_relative(dir.lexically_normal());
  if (r.empty() || *r.begin() == ".." || rel.is_absolute())
    throw std::runtime_error("refusing to write outside " + dir.string() + ": " + rel.string());
  return p;
}

inline std::string snapshot_name(long evals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshots/archive_%08ld.json", evals);
  return buf;
}

struct RunOutcome {
  int code = kExitOk;
  fs::path dir;
  Manifest manifest;
};

// Executes a configured run and writes everything under its output directory.
inline RunOutcome execute_run(const RunConfig& rc, std::ostream& log, std::optional<int> workers_override = {}) {
  RunOutcome res;
  RunConfig cfg = rc;
  if (workers_override) cfg.exp.workers = *workers_override;
  cfg.exp.workers = resolve_workers(cfg.exp.workers);
  res.dir = resolve_output_dir(cfg.output_dir);
  const fs::path dir = res.dir;
  fs::create_directories(dir);
  if (fs::exists(dir / "snapshots")) fs::remove_all(dir / "snapshots");

  const std::string hash = config_hash(cfg);
  Manifest& m = res.manifest;
  m.variant = variant_name(cfg.exp.variant);
  m.master_seed = cfg.exp.master_seed;
  m.scale_factor = cfg.exp.scale_factor;
  m.config_hash = hash;
  m.started = utc_timestamp();
  m.plan = cfg.exp.budget();
  m.files = {"config.json"};
  write_json(inside(dir, "config.json"), run_config_to_json(cfg));
  write_json(inside(dir, "manifest.json"), manifest_to_json(m));

  try {
    RunHooks hooks;
    hooks.log = [&log](const std::string& s) { log << s << '\n' << std::flush; };
    if (is_eetg_family(cfg.exp.variant) && m.plan.tg_opt_evals > 0) {
      hooks.snapshot_every = std::max<long>(1, std::lround(m.plan.tg_opt_evals * cfg.snapshot_fraction));
      hooks.on_snapshot = [&](const Archive& a) {
        const std::string rel = snapshot_name(a.evaluations);
        write_json(inside(dir, rel), archive_to_json(a, cfg.exp.master_seed, hash));
        m.files.push_back(rel);
      };
    }
    const Artifacts art = run_variant(cfg.exp, hooks);
    m.used = art.used;
    for (const auto& f : save_artifacts(dir, art, hash)) m.files.push_back(f);

    log << "evaluating: " << cfg.exp.eval.reps << " replications per cell\n" << std::flush;
    const EvalReport rep = evaluate(art, cfg.exp.eval, cfg.exp.sim, cfg.exp.reward, cfg.exp.workers);
    write_atomic(inside(dir, "results.csv"), results_csv(rep));
    write_atomic(inside(dir, "summary.csv"), summary_csv(rep));
    m.files.push_back("results.csv");
    m.files.push_back("summary.csv");
    m.complete = true;
  } catch (const std::exception& e) {
    m.error = e.what();
    res.code = kExitFailure;
    log << "run failed: " << e.what() << '\n';
  }
  m.finished = utc_timestamp();
  write_json(inside(dir, "manifest.json"), manifest_to_json(m));
  return res;
}

inline Manifest read_manifest(const fs::path& dir) { return manifest_from_json(read_json(dir / "manifest.json")); }

inline int cmd_run(const std::string& config_path, std::optional<int> workers, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  try {
    rc = load_run_config(config_path);
  } catch (const ConfigError& e) {
    err << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const RunOutcome r = execute_run(rc, out, workers);
    if (r.code == kExitOk) out << "run complete: " << r.dir.string() << '\n';
    return r.code;
  } catch (const ConfigError& e) {
    err << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

struct EvalOptions {
  std::optional<int> reps;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

inline int cmd_eval(const fs::path& run_dir, const EvalOptions& o, std::ostream& out, std::ostream& err) {
  try {
    if (!fs::exists(run_dir / "manifest.json")) {
      err << run_dir.string() << ": no manifest.json; not a run directory\n";
      return kExitFailure;
    }
    const Manifest m = read_manifest(run_dir);
    if (!m.complete) {
      err << run_dir.string() << ": run is incomplete" << (m.error.empty() ? "" : " (" + m.error + ")")
          << "; refusing to evaluate partial artifacts\n";
      return kExitFailure;
    }
    RunConfig rc = load_run_config(run_dir / "config.json");
    EvalProtocol p = rc.exp.eval;
    if (o.reps) p.reps = *o.reps;
    if (o.noise) p.noise_std = *o.noise;
    if (o.seed) p.seed = *o.seed;
    if (p.reps < 1 || p.noise_std < 0.0) {
      err << "reps must be positive and noise non-negative\n";
      return kExitConfig;
    }
    const Artifacts art = load_artifacts(run_dir, m);
    const EvalReport rep = evaluate(art, p, rc.exp.sim, rc.exp.reward, resolve_workers(o.workers.value_or(1)));
    write_atomic(inside(run_dir, "eval/results.csv"), results_csv(rep));
    write_atomic(inside(run_dir, "eval/summary.csv"), summary_csv(rep));
    write_json(inside(run_dir, "eval/protocol.json"),
               {{"reps", p.reps}, {"noise_std", p.noise_std}, {"seed", p.seed}});
    for (int t = 0; t < kNumEnvTypes; ++t)
      out << env_type_name(kEnvTypes[t]) << ": median " << fmt_double(rep.types[t].median) << " (failed cells "
          << rep.failed[t] << ")\n";
    out << "aggregate median " << fmt_double(rep.aggregate_median) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "eval failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline int cmd_plot(const std::vector<std::string>& csvs, const std::string& out_svg, const std::string& archive_path,
                    const std::string& heatmap_svg, std::ostream& out, std::ostream& err) {
  try {
    if (csvs.empty() && archive_path.empty()) {
      err << "nothing to plot: give results CSV files and/or --archive\n";
      return kExitConfig;
    }
    if (!csvs.empty()) {
      std::vector<EvalReport> reports;
      for (const auto& f : csvs)
        for (auto& r : parse_results_csv(read_file(f), f)) reports.push_back(std::move(r));
      const BoxPlotResult plot = box_plot_svg(reports, "median total reward per environment type");
      for (const auto& w : plot.warnings) err << "warning: " << w << '\n';
      write_atomic(out_svg, plot.svg);
      out << "wrote " << out_svg << '\n';
    }
    if (!archive_path.empty()) {
      const ArchiveFile a = archive_from_json(read_json(archive_path));
      const std::string target = heatmap_svg.empty() ? "archive_heatmap.svg" : heatmap_svg;
      write_atomic(target, archive_heatmap_svg(a.archive));
      out << "wrote " << target << '\n';
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "plot failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline int cmd_inspect(const std::string& archive_path, std::ostream& out, std::ostream& err) {
  ArchiveFile a;
  try {
    a = archive_from_json(read_json(archive_path));
  } catch (const std::exception& e) {
    err << archive_path << ": " << e.what() << '\n';
    return kExitFailure;
  }
  out << "coverage " << a.archive.coverage() << "/" << kNumCells << '\n';
  out << "evaluations " << a.archive.evaluations << '\n';
  for (int t = 0; t < kNumEnvTypes; ++t) {
    std::vector<double> f;
    for (int v = 0; v < kNumVariations; ++v)
      if (const auto& e = a.archive.cells[t * kNumVariations + v]) f.push_back(e->fitness);
    out << env_type_name(kEnvTypes[t]) << ": " << f.size() << " elites";
    if (!f.empty())
      out << ", best " << fmt_double(*std::max_element(f.begin(), f.end())) << ", median " << fmt_double(median(f));
    out << '\n';
  }
  std::array<int, 4> gaits{};
  for (const auto& e : a.archive.cells)
    if (e) ++gaits[static_cast<int>(std::floor(clamp_gait_latent(e->tg.gait_latent)))];
  out << "gaits:";
  for (int g = 0; g < 4; ++g) out << ' ' << gait_name(static_cast<Gait>(g)) << '=' << gaits[g];
  out << '\n';
  return kExitOk;
}

inline EnvCell parse_cell_spec(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) throw std::invalid_argument("cell must look like TYPE/VARIATION, e.g. stairs/7");
  return make_cell(parse_env_type(s.substr(0, slash)), std::stoi(s.substr(slash + 1)));
}

struct TraceOptions {
  std::string run_dir;  // use the run's TG/policy for the cell
  std::string tg;       // or an explicit open-loop TG "s,t,l,y,g"
  std::string cell = "slope/0";
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::string out = "trace.csv";
};

inline int cmd_trace(const TraceOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const EnvCell cell = parse_cell_spec(o.cell);
    SimConfig sim;
    RewardWeights reward;
    TGParams tg = fixed_pmtg_tg();
    std::optional<Artifacts> art;
    const Policy* policy = nullptr;
    if (!o.run_dir.empty()) {
      const Manifest m = read_manifest(o.run_dir);
      if (!m.complete) throw std::runtime_error("run is incomplete");
      const RunConfig rc = load_run_config(fs::path(o.run_dir) / "config.json");
      sim = rc.exp.sim;
      reward = rc.exp.reward;
      art = load_artifacts(o.run_dir, m);
      const std::string why = bind_cell(*art, cell.index(), policy, tg);
      if (!why.empty()) throw std::runtime_error("cell " + o.cell + ": " + why);
    }
    if (!o.tg.empty()) {
      std::vector<double> v;
      std::stringstream ss(o.tg);
      for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stod(item));
      if (v.size() != kNumTGParams) throw std::invalid_argument("--tg needs 5 comma-separated values");
      tg = clamp(TGParams::from_vector(TGParams::Vector{v[0], v[1], v[2], v[3], v[4]}));
      policy = nullptr;
    }
    std::ostringstream csv;
    csv << "time,x,y,z,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz";
    for (int i = 0; i < kNumLegs; ++i)
      for (char a : {'x', 'y', 'z'}) csv << ",foot" << i << "_" << a;
    csv << ",r_lv,r_avt,r_avp,r_s,r_tp\n";
    const TraceSink sink = [&](const TraceRow& r) {
      const auto& t = r.trunk;
      csv << fmt_double(r.time);
      for (int k = 0; k < 3; ++k) csv << ',' << fmt_double(t.position[k]);
      csv << ',' << fmt_double(t.orientation.w()) << ',' << fmt_double(t.orientation.x()) << ','
          << fmt_double(t.orientation.y()) << ',' << fmt_double(t.orientation.z());
      for (int k = 0; k < 3; ++k) csv << ',' << fmt_double(t.linear_velocity[k]);
      for (int k = 0; k < 3; ++k) csv << ',' << fmt_double(t.angular_velocity[k]);
      for (const auto& f : r.targets)
        for (int k = 0; k < 3; ++k) csv << ',' << fmt_double(f[k]);
      for (double x : r.reward) csv << ',' << fmt_double(x);
      csv << '\n';
    };
    const RolloutResult res = rollout({tg, policy, cell, o.noise, o.seed}, sim, reward, nullptr, sink);
    write_atomic(o.out, csv.str());
    out << "return " << fmt_double(res.episode_return) << ", " << res.steps << " steps, "
        << termination_name(res.termination) << "; wrote " << o.out << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "trace failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Environment-specialised trajectory-generator priors for quadruped locomotion"};
  app.require_subcommand(1);

  std::string config_path;
  int run_workers = -1;
  auto* run = app.add_subcommand("run", "train one variant from a YAML config and evaluate it");
  run->add_option("config", config_path, "run configuration")->required();
  run->add_option("-w,--workers", run_workers, "rollout threads (0 = all cores); overrides the config");

  std::string eval_dir;
  EvalOptions eo;
  int eval_reps = -1, eval_workers = 1;
  double eval_noise = -1.0;
  std::uint64_t eval_seed_v = 0;
  auto* ev = app.add_subcommand("eval", "re-evaluate a finished run into <run>/eval/");
  ev->add_option("run_dir", eval_dir, "run directory")->required();
  auto* reps_opt = ev->add_option("--reps", eval_reps, "replications per cell");
  auto* noise_opt = ev->add_option("--noise", eval_noise, "parameter noise (fraction of range width)");
  auto* seed_opt = ev->add_option("--seed", eval_seed_v, "evaluation seed");
  ev->add_option("-w,--workers", eval_workers, "rollout threads");

  std::vector<std::string> csvs;
  std::string plot_out = "results.svg", plot_archive, plot_heatmap;
  auto* plot = app.add_subcommand("plot", "box plots from results CSVs and/or an archive heatmap");
  plot->add_option("results", csvs, "results CSV files");
  plot->add_option("-o,--out", plot_out, "box plot SVG");
  plot->add_option("--archive", plot_archive, "archive snapshot for the heatmap");
  plot->add_option("--heatmap", plot_heatmap, "heatmap SVG (default archive_heatmap.svg)");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "summarise an archive snapshot");
  inspect->add_option("archive", inspect_path, "archive JSON")->required();

  TraceOptions to;
  auto* trace = app.add_subcommand("trace", "dump one rollout as CSV");
  trace->add_option("--run", to.run_dir, "use the TG and policy a run deployed in the cell");
  trace->add_option("--tg", to.tg, "open-loop TG as swing,turn,lift,y_offset,gait");
  trace->add_option("--cell", to.cell, "environment as TYPE/VARIATION");
  trace->add_option("--noise", to.noise, "parameter noise");
  trace->add_option("--seed", to.seed, "rollout seed");
  trace->add_option("-o,--out", to.out, "trace CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config_path, run_workers >= 0 ? std::optional<int>(run_workers) : std::nullopt, out, err);
  if (*ev) {
    if (*reps_opt) eo.reps = eval_reps;
    if (*noise_opt) eo.noise = eval_noise;
    if (*seed_opt) eo.seed = eval_seed_v;
    eo.workers = eval_workers;
    return cmd_eval(eval_dir, eo, out, err);
  }
  if (*plot) return cmd_plot(csvs, plot_out, plot_archive, plot_heatmap, out, err);
  if (*inspect) return cmd_inspect(inspect_path, out, err);
  if (*trace) return cmd_trace(to, out, err);
  return kExitConfig;
}

}  // namespace eetg
