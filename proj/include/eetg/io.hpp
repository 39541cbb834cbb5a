#pragma once

// Persistence: run configuration (YAML), JSON artifacts, CSV reports and the
// run manifest. All writes go through a temp file and a rename.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include "eetg/bench.hpp"

namespace eetg {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using json = nlohmann::json;

// ------------------------------------------------------------------- files

inline void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_atomic(path, j.dump(1) + "\n"); }

// Shortest text that parses back to the same double.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// -------------------------------------------------------------- json helpers

inline json to_json_vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vec_from_json(const json& a, const std::string& what) {
  if (!a.is_array()) throw std::runtime_error(what + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw std::runtime_error(what + ": entry " + std::to_string(i) + " is not a number");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

inline json to_json_mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json_vec(m.row(r).transpose()));
  return rows;
}

inline Eigen::MatrixXd mat_from_json(const json& a, const std::string& what) {
  if (!a.is_array()) throw std::runtime_error(what + ": expected rows");
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd row = vec_from_json(a[r], what);
    if (row.size() != n) throw std::runtime_error(what + ": matrix is not square");
    m.row(r) = row.transpose();
  }
  return m;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw std::runtime_error(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::runtime_error(where + ": '" + key + "' has the wrong type");
  }
}

inline json tg_to_json(const TGParams& tg) {
  const auto v = tg.to_vector();
  return json::array({v[0], v[1], v[2], v[3], v[4]});
}

inline TGParams tg_from_json(const json& a, const std::string& where) {
  if (!a.is_array() || a.size() != kNumTGParams) throw std::runtime_error(where + ": tg must have 5 entries");
  TGParams::Vector v{};
  for (int i = 0; i < kNumTGParams; ++i) {
    if (!a[i].is_number()) throw std::runtime_error(where + ": tg entry " + std::to_string(i) + " is not a number");
    v[i] = a[i].get<double>();
  }
  const TGParams tg = TGParams::from_vector(v);
  if (!in_range(tg)) throw std::runtime_error(where + ": tg outside the parameter box");
  return tg;
}

// ------------------------------------------------------------------ archive

inline json archive_to_json(const Archive& a, std::uint64_t seed, const std::string& config_hash) {
  json cells = json::array();
  for (int c = 0; c < kNumCells; ++c) {
    if (!a.cells[c]) continue;
    const EnvCell cell = cell_from_index(c);
    cells.push_back({{"env_type", env_type_name(cell.type)},
                     {"variation_index", cell.variation},
                     {"tg", tg_to_json(a.cells[c]->tg)},
                     {"fitness", a.cells[c]->fitness},
                     {"added_at_eval", a.cells[c]->added_at_eval}});
  }
  return {{"format", "eetg-archive"}, {"version", 1},   {"evals", a.evaluations},
          {"seed", seed},             {"config_hash", config_hash}, {"cells", cells}};
}

struct ArchiveFile {
  Archive archive;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Rejects anything malformed and names the offending cell record.
inline ArchiveFile archive_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "eetg-archive") throw std::runtime_error("not an archive file");
  ArchiveFile f;
  f.archive.evaluations = field<long>(j, "evals", "archive");
  f.seed = field<std::uint64_t>(j, "seed", "archive");
  f.config_hash = field<std::string>(j, "config_hash", "archive");
  const json& cells = j.at("cells");
  if (!cells.is_array()) throw std::runtime_error("archive: 'cells' must be an array");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const json& r = cells[i];
    std::string where = "cell record " + std::to_string(i);
    try {
      const std::string type_name = field<std::string>(r, "env_type", where);
      const int var = field<int>(r, "variation_index", where);
      where += " (" + type_name + "/" + std::to_string(var) + ")";
      const EnvCell cell = make_cell(parse_env_type(type_name), var);
      if (f.archive.cells[cell.index()]) throw std::runtime_error("duplicate cell");
      const double fitness = field<double>(r, "fitness", where);
      if (!std::isfinite(fitness)) throw std::runtime_error("fitness is not finite");
      const long added = field<long>(r, "added_at_eval", where);
      if (added < 0 || added > f.archive.evaluations) throw std::runtime_error("added_at_eval out of range");
      f.archive.cells[cell.index()] = Elite{tg_from_json(r.at("tg"), where), fitness, added};
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      throw std::runtime_error(msg.rfind("cell record", 0) == 0 ? msg : where + ": " + msg);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return f;
}

// ------------------------------------------------------------------- policy

inline json layout_to_json(const PolicyLayout& l) {
  return {{"tg_conditioned", l.tg_conditioned}, {"encoding", env_encoding_name(l.encoding)},
          {"hidden", l.hidden},                 {"foot_scale", l.foot_scale},
          {"freq_scale", l.freq_scale},         {"input_dim", l.input_dim()},
          {"inputs", l.input_names()}};
}

inline PolicyLayout layout_from_json(const json& j) {
  PolicyLayout l;
  l.tg_conditioned = field<bool>(j, "tg_conditioned", "layout");
  l.encoding = parse_env_encoding(field<std::string>(j, "encoding", "layout"));
  l.hidden = field<int>(j, "hidden", "layout");
  l.foot_scale = field<double>(j, "foot_scale", "layout");
  l.freq_scale = field<double>(j, "freq_scale", "layout");
  if (field<int>(j, "input_dim", "layout") != l.input_dim()) throw std::runtime_error("layout: input_dim disagrees");
  if (j.contains("inputs") && j.at("inputs") != json(l.input_names()))
    throw std::runtime_error("layout: input ordering differs from this build");
  return l;
}

inline json policy_to_json(const PolicyRecord& r, Variant v) {
  const RunningStats& n = r.policy.normalizer;
  return {{"format", "eetg-policy"},
          {"version", 1},
          {"variant", variant_name(v)},
          {"cell", r.cell},
          {"layout", layout_to_json(r.policy.layout)},
          {"iterations", r.iterations},
          {"rollouts", r.rollouts},
          {"params", to_json_vec(r.policy.params)},
          {"normalizer", {{"count", n.count()}, {"mean", to_json_vec(n.mean())}, {"m2", to_json_vec(n.m2())}}}};
}

inline PolicyRecord policy_from_json(const json& j, Variant* variant = nullptr) {
  if (!j.is_object() || j.value("format", "") != "eetg-policy") throw std::runtime_error("not a policy file");
  PolicyRecord r;
  if (variant != nullptr) *variant = parse_variant(field<std::string>(j, "variant", "policy"));
  r.cell = field<int>(j, "cell", "policy");
  if (r.cell < -1 || r.cell >= kNumCells) throw std::runtime_error("policy: cell out of range");
  r.iterations = field<long>(j, "iterations", "policy");
  r.rollouts = field<long>(j, "rollouts", "policy");
  r.policy.layout = layout_from_json(j.at("layout"));
  r.policy.params = vec_from_json(j.at("params"), "policy params");
  const json& n = j.at("normalizer");
  r.policy.normalizer = RunningStats(field<double>(n, "count", "normalizer"), vec_from_json(n.at("mean"), "normalizer"),
                                     vec_from_json(n.at("m2"), "normalizer"));
  r.policy.check();
  return r;
}

// ---------------------------------------------------------------------- cma

inline json cma_to_json(const CmaRecord& r) {
  const CmaState& s = r.state;
  return {{"cell", r.cell},           {"lambda", s.lambda},         {"generation", s.generation},
          {"evaluations", s.evaluations}, {"sigma", s.sigma},       {"mean", to_json_vec(s.mean)},
          {"cov", to_json_mat(s.cov)},    {"p_sigma", to_json_vec(s.p_sigma)}, {"p_c", to_json_vec(s.p_c)},
          {"best_x", to_json_vec(s.best_x)}, {"best_f", std::isfinite(s.best_f) ? json(s.best_f) : json(nullptr)}};
}

inline CmaRecord cma_from_json(const json& j) {
  CmaRecord r;
  r.cell = field<int>(j, "cell", "cma");
  const Eigen::VectorXd mean = vec_from_json(j.at("mean"), "cma mean");
  r.state = cma_init(mean, field<double>(j, "sigma", "cma"), field<int>(j, "lambda", "cma"));
  r.state.generation = field<long>(j, "generation", "cma");
  r.state.evaluations = field<long>(j, "evaluations", "cma");
  r.state.cov = mat_from_json(j.at("cov"), "cma cov");
  r.state.p_sigma = vec_from_json(j.at("p_sigma"), "cma p_sigma");
  r.state.p_c = vec_from_json(j.at("p_c"), "cma p_c");
  r.state.best_x = vec_from_json(j.at("best_x"), "cma best_x");
  r.state.best_f = j.at("best_f").is_null() ? -std::numeric_limits<double>::infinity() : j.at("best_f").get<double>();
  return r;
}

// -------------------------------------------------------------- run config

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ExperimentConfig exp;
  std::string output_dir;
  double snapshot_fraction = 0.1;
};

namespace detail {

inline std::string at_line(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? " (line " + std::to_string(m.line + 1) + ")" : "";
}

template <typename T>
T yaml_scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw ConfigError("'" + key + "' must be a scalar" + at_line(n));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has an invalid value '" + n.Scalar() + "'" + at_line(n));
  }
}

// One entry per configurable leaf, keyed by its dotted path. The same table
// drives parsing, emission and hashing, so they cannot drift apart.
struct Field {
  std::function<void(const YAML::Node&)> set;
  std::function<json()> get;
};

template <typename T>
Field bind_field(T& ref, const std::string& key) {
  return {[&ref, key](const YAML::Node& n) { ref = yaml_scalar<T>(n, key); }, [&ref] { return json(ref); }};
}

inline std::map<std::string, Field> config_fields(RunConfig& rc) {
  ExperimentConfig& e = rc.exp;
  std::map<std::string, Field> f;
  f["variant"] = {[&e](const YAML::Node& n) {
                    try {
                      e.variant = parse_variant(yaml_scalar<std::string>(n, "variant"));
                    } catch (const std::invalid_argument& ex) {
                      throw ConfigError(std::string(ex.what()) + at_line(n));
                    }
                  },
                  [&e] { return json(variant_name(e.variant)); }};
  f["master_seed"] = bind_field(e.master_seed, "master_seed");
  f["scale_factor"] = bind_field(e.scale_factor, "scale_factor");
  f["output_dir"] = bind_field(rc.output_dir, "output_dir");
  f["snapshot_fraction"] = bind_field(rc.snapshot_fraction, "snapshot_fraction");
  f["workers"] = bind_field(e.workers, "workers");
  f["train_noise_std"] = bind_field(e.train_noise_std, "train_noise_std");
  f["ablation_loops"] = bind_field(e.ablation_loops, "ablation_loops");

  f["qd.init_fraction"] = bind_field(e.qd.init_fraction, "qd.init_fraction");
  f["qd.p_same_type"] = bind_field(e.qd.p_same_type, "qd.p_same_type");
  f["qd.iso_sigma"] = bind_field(e.qd.iso_sigma, "qd.iso_sigma");
  f["qd.line_sigma"] = bind_field(e.qd.line_sigma, "qd.line_sigma");
  f["qd.batch_size"] = bind_field(e.qd.batch_size, "qd.batch_size");
  f["qd.eval_noise_std"] = bind_field(e.qd.eval_noise_std, "qd.eval_noise_std");

  f["ars.directions"] = bind_field(e.ars.directions, "ars.directions");
  f["ars.top"] = bind_field(e.ars.top, "ars.top");
  f["ars.step_size"] = bind_field(e.ars.step_size, "ars.step_size");
  f["ars.noise"] = bind_field(e.ars.noise, "ars.noise");

  f["cma.sigma"] = bind_field(e.cma.sigma, "cma.sigma");
  f["cma.lambda"] = bind_field(e.cma.lambda, "cma.lambda");
  f["cma.cells_per_generation"] = bind_field(e.cma.cells_per_generation, "cma.cells_per_generation");

  f["policy.encoding"] = {[&e](const YAML::Node& n) {
                            try {
                              e.enc_encoding = parse_env_encoding(yaml_scalar<std::string>(n, "policy.encoding"));
                            } catch (const std::invalid_argument& ex) {
                              throw ConfigError(std::string(ex.what()) + at_line(n));
                            }
                          },
                          [&e] { return json(env_encoding_name(e.enc_encoding)); }};
  f["policy.hidden"] = bind_field(e.policy_hidden, "policy.hidden");
  f["policy.foot_scale"] = bind_field(e.foot_scale, "policy.foot_scale");
  f["policy.freq_scale"] = bind_field(e.freq_scale, "policy.freq_scale");

  SimConfig& s = e.sim;
  f["sim.mass"] = bind_field(s.mass, "sim.mass");
  for (int i = 0; i < 3; ++i) {
    const std::string k = std::string("sim.inertia_") + "xyz"[i];
    f[k] = bind_field(s.inertia[i], k);
  }
  f["sim.leg_length"] = bind_field(s.leg_length, "sim.leg_length");
  f["sim.contact_stiffness"] = bind_field(s.contact_stiffness, "sim.contact_stiffness");
  f["sim.contact_damping"] = bind_field(s.contact_damping, "sim.contact_damping");
  f["sim.friction"] = bind_field(s.friction, "sim.friction");
  f["sim.contact_tolerance"] = bind_field(s.contact_tolerance, "sim.contact_tolerance");
  f["sim.gravity"] = bind_field(s.gravity, "sim.gravity");
  f["sim.control_dt"] = bind_field(s.control_dt, "sim.control_dt");
  f["sim.physics_dt"] = bind_field(s.physics_dt, "sim.physics_dt");
  f["sim.max_episode_s"] = bind_field(s.max_episode_s, "sim.max_episode_s");
  f["sim.fall_height"] = bind_field(s.fall_height, "sim.fall_height");
  f["sim.tilt_limit_deg"] = bind_field(s.tilt_limit_deg, "sim.tilt_limit_deg");
  f["sim.offbeam_z"] = bind_field(s.offbeam_z, "sim.offbeam_z");
  f["sim.horizontal_targets"] = bind_field(s.horizontal_targets, "sim.horizontal_targets");
  f["sim.tg.base_freq"] = bind_field(s.tg.base_freq, "sim.tg.base_freq");
  f["sim.tg.nominal_height"] = bind_field(s.tg.nominal_height, "sim.tg.nominal_height");
  f["sim.tg.lateral_offset"] = bind_field(s.tg.lateral_offset, "sim.tg.lateral_offset");
  f["sim.terrain.onset_x"] = bind_field(s.terrain.onset_x, "sim.terrain.onset_x");
  f["sim.terrain.stair_depth"] = bind_field(s.terrain.stair_depth, "sim.terrain.stair_depth");
  f["sim.terrain.tile_size"] = bind_field(s.terrain.tile_size, "sim.terrain.tile_size");
  f["sim.terrain.unsupported_height"] = bind_field(s.terrain.unsupported_height, "sim.terrain.unsupported_height");
  f["sim.terrain.layout_seed"] = bind_field(s.terrain.layout_seed, "sim.terrain.layout_seed");

  RewardWeights& w = e.reward;
  f["reward.w_lv"] = bind_field(w.w_lv, "reward.w_lv");
  f["reward.w_avt"] = bind_field(w.w_avt, "reward.w_avt");
  f["reward.w_avp"] = bind_field(w.w_avp, "reward.w_avp");
  f["reward.w_s"] = bind_field(w.w_s, "reward.w_s");
  f["reward.w_tp"] = bind_field(w.w_tp, "reward.w_tp");
  f["reward.v_target"] = bind_field(w.v_target, "reward.v_target");
  f["reward.sigma_v"] = bind_field(w.sigma_v, "reward.sigma_v");
  f["reward.sigma_w"] = bind_field(w.sigma_w, "reward.sigma_w");

  f["eval.reps"] = bind_field(e.eval.reps, "eval.reps");
  f["eval.noise_std"] = bind_field(e.eval.noise_std, "eval.noise_std");
  f["eval.seed"] = bind_field(e.eval.seed, "eval.seed");
  return f;
}

inline void walk(const YAML::Node& node, const std::string& prefix, std::map<std::string, Field>& fields) {
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    auto it = fields.find(path);
    if (it != fields.end()) {
      it->second.set(kv.second);
      continue;
    }
    if (kv.second.IsMap()) {
      bool known_prefix = false;
      for (const auto& f : fields)
        if (f.first.rfind(path + ".", 0) == 0) known_prefix = true;
      if (known_prefix) {
        walk(kv.second, path, fields);
        continue;
      }
    }
    throw ConfigError("unknown key '" + path + "'" + at_line(kv.first));
  }
}

}  // namespace detail

inline void validate(const RunConfig& rc) {
  const ExperimentConfig& e = rc.exp;
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(e.scale_factor > 0.0 && std::isfinite(e.scale_factor), "scale_factor must be positive");
  need(!rc.output_dir.empty(), "output_dir must not be empty");
  need(rc.snapshot_fraction > 0.0 && rc.snapshot_fraction <= 1.0, "snapshot_fraction must be in (0, 1]");
  need(e.workers >= 0, "workers must be non-negative (0 = all cores)");
  need(e.train_noise_std >= 0.0, "train_noise_std must be non-negative");
  need(e.qd.init_fraction > 0.0 && e.qd.init_fraction <= 1.0, "qd.init_fraction must be in (0, 1]");
  need(e.qd.p_same_type >= 0.0 && e.qd.p_same_type <= 1.0, "qd.p_same_type must be a probability");
  need(e.qd.iso_sigma >= 0.0 && e.qd.line_sigma >= 0.0, "qd sigmas must be non-negative");
  need(e.qd.batch_size >= 1, "qd.batch_size must be positive");
  need(e.qd.eval_noise_std >= 0.0, "qd.eval_noise_std must be non-negative");
  need(e.ars.directions >= 1 && e.ars.top >= 1 && e.ars.top <= e.ars.directions, "ars: need 1 <= top <= directions");
  need(e.ars.step_size > 0.0 && e.ars.noise > 0.0, "ars step_size and noise must be positive");
  need(e.cma.sigma > 0.0 && e.cma.lambda >= 0 && e.cma.cells_per_generation >= 1, "cma settings out of range");
  need(e.policy_hidden >= 0, "policy.hidden must be non-negative");
  need(e.foot_scale > 0.0 && e.freq_scale > 0.0, "policy output scales must be positive");
  need(e.eval.reps >= 1 && e.eval.noise_std >= 0.0, "eval.reps must be positive and eval.noise_std non-negative");
  if (e.variant == Variant::EETG_Itr || e.variant == Variant::EETG_ItrPolicy)
    need(e.ablation_loops >= 2, "ablation_loops must be at least 2");
  try {
    e.sim.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("sim: ") + ex.what());
  }
}

inline RunConfig parse_run_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("syntax error at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping of keys to values");
  for (const char* key : {"variant", "master_seed", "scale_factor", "output_dir"})
    if (!root[key]) throw ConfigError(std::string("missing required key '") + key + "'");
  RunConfig rc;
  auto fields = detail::config_fields(rc);
  detail::walk(root, "", fields);
  validate(rc);
  return rc;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text);
}

// Nested JSON view of every field (JSON is valid YAML, so this is also the
// canonical saved form of a config).
inline json run_config_to_json(const RunConfig& rc) {
  RunConfig copy = rc;
  json out = json::object();
  for (auto& [path, f] : detail::config_fields(copy)) {
    json* node = &out;
    std::size_t start = 0;
    for (std::size_t dot = path.find('.'); dot != std::string::npos; dot = path.find('.', start)) {
      node = &(*node)[path.substr(start, dot - start)];
      start = dot + 1;
    }
    (*node)[path.substr(start)] = f.get();
  }
  return out;
}

// Hash of everything that can change results: worker count and output
// location are excluded.
inline std::string config_hash(const RunConfig& rc) {
  json j = run_config_to_json(rc);
  j.erase("workers");
  j.erase("output_dir");
  return hex64(fnv1a(j.dump()));
}

// ------------------------------------------------------------------ reports

inline std::string results_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "variant,env_type,variation_index,replication,seed,return,termination\n";
  for (const CellResult& c : r.cells) {
    const EnvCell cell = cell_from_index(c.cell);
    for (int k = 0; k < r.protocol.reps; ++k) {
      out << variant_name(r.variant) << ',' << env_type_name(cell.type) << ',' << cell.variation << ',' << k << ',';
      if (c.failed) {
        out << eval_seed(r.protocol, c.cell, k) << ",,failed\n";
        continue;
      }
      out << c.seeds[k] << ',' << fmt_double(c.returns[k]) << ',' << termination_name(c.terminations[k]) << '\n';
    }
  }
  return out.str();
}

inline std::string summary_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "variant,env_type,median,q1,q3,min,max,cells,failed_cells\n";
  for (int t = 0; t < kNumEnvTypes; ++t) {
    const Summary& s = r.types[t];
    out << variant_name(r.variant) << ',' << env_type_name(kEnvTypes[t]) << ',' << fmt_double(s.median) << ','
        << fmt_double(s.q1) << ',' << fmt_double(s.q3) << ',' << fmt_double(s.min) << ',' << fmt_double(s.max) << ','
        << s.count << ',' << r.failed[t] << '\n';
  }
  return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

// Rebuilds reports (one per variant, in order of first appearance) from a
// results CSV. Every row must be well formed.
inline std::vector<EvalReport> parse_results_csv(const std::string& text, const std::string& name = "results") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line.substr(0, line.find_last_not_of("\r") + 1) != "variant,env_type,variation_index,replication,seed,return,termination")
    throw std::runtime_error(name + ": header does not match the results schema");
  std::vector<EvalReport> reports;
  std::map<std::string, std::size_t> index;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cols = split_csv_line(line);
    const std::string where = name + " row " + std::to_string(row);
    if (cols.size() != 7) throw std::runtime_error(where + ": expected 7 columns");
    try {
      const Variant v = parse_variant(cols[0]);
      const EnvCell cell = make_cell(parse_env_type(cols[1]), std::stoi(cols[2]));
      const int rep = std::stoi(cols[3]);
      if (rep < 0) throw std::runtime_error("negative replication");
      auto it = index.find(cols[0]);
      if (it == index.end()) {
        it = index.emplace(cols[0], reports.size()).first;
        EvalReport r;
        r.variant = v;
        for (int c = 0; c < kNumCells; ++c) r.cells[c].cell = c;
        reports.push_back(r);
      }
      CellResult& cr = reports[it->second].cells[cell.index()];
      const bool failed_row = cols[6] == "failed";
      if (failed_row != cr.failed && !(failed_row && cr.returns.empty()))
        throw std::runtime_error("cell mixes failed and completed rows");
      if (!failed_row && rep != static_cast<int>(cr.returns.size()))
        throw std::runtime_error("replications out of order");
      if (failed_row) {
        cr.failed = true;
        cr.reason = "failed in source";
        continue;
      }
      cr.seeds.push_back(std::stoull(cols[4]));
      cr.returns.push_back(std::stod(cols[5]));
      cr.terminations.push_back(parse_termination(cols[6]));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  for (auto& r : reports) {
    int reps = 0;
    for (auto& c : r.cells) {
      if (!c.returns.empty()) {
        c.mean = mean(c.returns);
        reps = std::max(reps, static_cast<int>(c.returns.size()));
      } else {
        c.failed = true;
        if (c.reason.empty()) c.reason = "no rows";
      }
    }
    r.protocol.reps = reps;
    r = summarize_cells(std::move(r));
  }
  return reports;
}

// ------------------------------------------------------------------ manifest

struct Manifest {
  bool complete = false;
  std::string variant;
  std::uint64_t master_seed = 0;
  double scale_factor = 0.0;
  std::string config_hash;
  std::string code_version = kVersion;
  std::string started;
  std::string finished;
  std::vector<std::string> files;  // relative to the run directory
  BudgetPlan plan;
  BudgetUsage used;
  std::string error;
};

inline json manifest_to_json(const Manifest& m) {
  return {{"format", "eetg-manifest"},
          {"complete", m.complete},
          {"variant", m.variant},
          {"master_seed", m.master_seed},
          {"scale_factor", m.scale_factor},
          {"config_hash", m.config_hash},
          {"code_version", m.code_version},
          {"started", m.started},
          {"finished", m.finished},
          {"files", m.files},
          {"budget",
           {{"plan", {{"tg_opt_evals", m.plan.tg_opt_evals}, {"policy_opt_evals", m.plan.policy_opt_evals}}},
            {"used", {{"tg_opt_evals", m.used.tg_evals}, {"policy_opt_evals", m.used.policy_evals}}}}},
          {"error", m.error}};
}

inline Manifest manifest_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "eetg-manifest") throw std::runtime_error("not a manifest file");
  Manifest m;
  m.complete = field<bool>(j, "complete", "manifest");
  m.variant = field<std::string>(j, "variant", "manifest");
  m.master_seed = field<std::uint64_t>(j, "master_seed", "manifest");
  m.scale_factor = field<double>(j, "scale_factor", "manifest");
  m.config_hash = field<std::string>(j, "config_hash", "manifest");
  m.code_version = field<std::string>(j, "code_version", "manifest");
  m.started = field<std::string>(j, "started", "manifest");
  m.finished = field<std::string>(j, "finished", "manifest");
  m.files = field<std::vector<std::string>>(j, "files", "manifest");
  const json& b = j.at("budget");
  m.plan.tg_opt_evals = b.at("plan").at("tg_opt_evals").get<long>();
  m.plan.policy_opt_evals = b.at("plan").at("policy_opt_evals").get<long>();
  m.plan.scale_factor = m.scale_factor;
  m.used.tg_evals = b.at("used").at("tg_opt_evals").get<long>();
  m.used.policy_evals = b.at("used").at("policy_opt_evals").get<long>();
  m.error = j.value("error", "");
  return m;
}

// --------------------------------------------------------------- artifacts

inline std::string policy_file_name(const PolicyRecord& r) {
  if (r.cell < 0) return "policies/policy.json";
  char buf[48];
  std::snprintf(buf, sizeof buf, "policies/cell_%02d.json", r.cell);
  return buf;
}

inline json tgs_to_json(const Artifacts& a) {
  json cells = json::array();
  for (int c = 0; c < kNumCells; ++c) {
    const EnvCell cell = cell_from_index(c);
    cells.push_back({{"env_type", env_type_name(cell.type)},
                     {"variation_index", cell.variation},
                     {"tg", a.tgs[c] ? tg_to_json(*a.tgs[c]) : json(nullptr)}});
  }
  return {{"format", "eetg-tgs"}, {"variant", variant_name(a.variant)}, {"cells", cells}};
}

// Writes every artifact of a run; returns the relative paths written.
inline std::vector<std::string> save_artifacts(const fs::path& dir, const Artifacts& a, const std::string& hash) {
  std::vector<std::string> files;
  auto put = [&](const std::string& rel, const json& j) {
    write_json(dir / rel, j);
    files.push_back(rel);
  };
  put("tgs.json", tgs_to_json(a));
  if (is_eetg_family(a.variant)) put("archive.json", archive_to_json(a.archive, a.master_seed, hash));
  for (const auto& p : a.policies) put(policy_file_name(p), policy_to_json(p, a.variant));
  if (!a.cma.empty()) {
    json states = json::array();
    for (const auto& c : a.cma) states.push_back(cma_to_json(c));
    put("cma.json", {{"format", "eetg-cma"}, {"states", states}});
  }
  return files;
}

// Reads back what save_artifacts wrote, guided by the manifest inventory.
inline Artifacts load_artifacts(const fs::path& dir, const Manifest& m) {
  Artifacts a;
  a.variant = parse_variant(m.variant);
  a.master_seed = m.master_seed;
  a.scale_factor = m.scale_factor;
  a.plan = m.plan;
  a.used = m.used;
  const json tgs = read_json(dir / "tgs.json");
  const json& cells = tgs.at("cells");
  if (!cells.is_array() || cells.size() != kNumCells) throw std::runtime_error("tgs.json: expected 80 cells");
  for (int c = 0; c < kNumCells; ++c)
    if (!cells[c].at("tg").is_null()) a.tgs[c] = tg_from_json(cells[c].at("tg"), "tgs.json cell " + std::to_string(c));
  for (const auto& f : m.files) {
    if (f.rfind("policies/", 0) == 0) {
      Variant v{};
      a.policies.push_back(policy_from_json(read_json(dir / f), &v));
      if (v != a.variant) throw std::runtime_error(f + ": policy belongs to variant " + variant_name(v));
    } else if (f == "archive.json") {
      a.archive = archive_from_json(read_json(dir / f)).archive;
    } else if (f == "cma.json") {
      const json doc = read_json(dir / f);  // keep alive: the loop below iterates into it
      for (const auto& s : doc.at("states")) a.cma.push_back(cma_from_json(s));
    }
  }
  return a;
}

}  // namespace eetg
