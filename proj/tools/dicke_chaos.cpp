// dicke_chaos <task> --config <file> [--override key=value ...] --out <dir>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dicke/dicke.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dicke;

namespace {

constexpr int csv_schema_version = 1;

const std::vector<std::string> tasks{"chaos-map",   "poincare",   "lyapunov-point", "lyapunov-section",
                                     "pr-section",  "pr-scaling", "compare-sections", "lmg-pr-map",
                                     "lmg-scaling", "diagonalize"};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json defaults() {
  const json point = json::array();
  return {
      {"model", "dicke"},
      {"params", {{"omega", 1.0}, {"omega0", 1.0}, {"gamma_over_gc", 2.0}, {"gamma", nullptr}, {"j", 20.0}}},
      {"lmg", {{"gamma_x", -3.0}, {"gamma_y", -5.0}, {"J", 100.0}}},
      {"seed", 1},
      {"threads", 0},
      {"cache_dir", ""},
      {"trajectory",
       {{"t_max", 2.0e4},
        {"dt_init", 0.01},
        {"rel_tol", 1e-13},
        {"abs_tol", 1e-13},
        {"renorm_interval", 1.0},
        {"energy_drift_max", 1e-8},
        {"h_max", 0.5},
        {"sample_interval", 1.0}}},
      {"spectrum",
       {{"n_max", 0},
        {"parity_blocks", true},
        {"epsilon_max", nullptr},
        {"width_sigmas", 5.0},
        {"tail_tol", 1e-8},
        {"stability_shift", 10},
        {"stability_tol", 1e-6},
        {"check_stability", true},
        {"max_bytes", 4.0e9}}},
      {"chaos_map",
       {{"gamma_over_gc_min", 0.0},
        {"gamma_over_gc_max", 3.0},
        {"n_gamma", 40},
        {"epsilon_min", -2.0},
        {"epsilon_max", 0.0},
        {"n_epsilon", 40},
        {"n_samples", 20}}},
      {"poincare", {{"epsilon", -1.8}, {"branch", "plus"}, {"n_orbits", 20}}},
      {"lyapunov_point", {{"points", point}, {"sali", true}}},
      {"section",
       {{"epsilon", -0.5}, {"phi", 0.0}, {"branches", {"plus", "minus"}}, {"n_grid", 201}, {"norm_tol", 1e-4}}},
      {"compare", {{"lyapunov_csv", ""}, {"pr_csv", ""}}},
      {"pr_scaling",
       {{"points", point}, {"j_list", {10, 20, 30, 40, 50, 60}}, {"model", "pure_power"}, {"norm_tol", 1e-4}}},
      {"lmg_pr_map", {{"n_jz", 101}, {"n_phi", 101}}},
      {"lmg_scaling",
       {{"phi", std::numbers::pi / 2},
        {"jz_min", -1.0},
        {"jz_max", 1.0},
        {"n_jz", 41},
        {"J_list", {20, 50, 80, 110, 140, 170, 200, 230, 260, 290, 320, 350, 380, 410, 440, 470}}}},
  };
}

std::string type_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool compatible(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number();
  if (def.is_number()) return v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  return v.is_object();
}

// copies `user` over `def`, rejecting unknown fields and type mismatches
void merge_checked(json& def, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("field '" + path + "': expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!def.contains(it.key())) throw ConfigError("unknown field '" + p + "'");
    json& slot = def[it.key()];
    if (slot.is_object() && !slot.empty()) {
      merge_checked(slot, it.value(), p);
      continue;
    }
    if (!compatible(slot, it.value()))
      throw ConfigError("field '" + p + "': expected " + type_name(slot) + ", got " + type_name(it.value()));
    slot = it.value();
  }
}

void apply_override(json& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' is not key=value");
  const std::string key = spec.substr(0, eq), text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &cfg;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

template <class T>
T get(const json& cfg, const std::string& dotted) {
  const json* node = &cfg;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) node = &node->at(part);
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + dotted + "' has the wrong type");
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Csv {
public:
  Csv(const fs::path& file, const std::vector<std::string>& header) : os_(file) {
    if (!os_) throw std::runtime_error("cannot write " + file.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

private:
  std::ofstream os_;
};

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read " + file.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t pos; (pos = s.find(',', start)) != std::string::npos; start = pos + 1)
      out.push_back(s.substr(start, pos - start));
    out.push_back(s.substr(start));
    return out;
  };
  if (!std::getline(is, line)) throw ConfigError(file.string() + " is empty");
  header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ConfigError(file.string() + ": ragged row");
    std::map<std::string, std::string> r;
    for (std::size_t i = 0; i < cells.size(); ++i) r[header[i]] = cells[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << j.dump(2) << '\n';
}

struct Run {
  json cfg;
  fs::path out;
  json outputs = json::array();
  json notes = json::object();
  unsigned threads = 0;

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
};

DickeParams dicke_params(const json& cfg) {
  const double w = get<double>(cfg, "params.omega"), w0 = get<double>(cfg, "params.omega0");
  const double j = get<double>(cfg, "params.j");
  if (!cfg["params"]["gamma"].is_null()) return DickeParams::make(w, w0, get<double>(cfg, "params.gamma"), j);
  return DickeParams::with_ratio(w, w0, get<double>(cfg, "params.gamma_over_gc"), j);
}

LMGParams lmg_params(const json& cfg) {
  return LMGParams::make(get<double>(cfg, "lmg.gamma_x"), get<double>(cfg, "lmg.gamma_y"), get<double>(cfg, "lmg.J"));
}

TrajectoryConfig trajectory_config(const json& cfg) {
  TrajectoryConfig c;
  c.t_max = get<double>(cfg, "trajectory.t_max");
  c.dt_init = get<double>(cfg, "trajectory.dt_init");
  c.rel_tol = get<double>(cfg, "trajectory.rel_tol");
  c.abs_tol = get<double>(cfg, "trajectory.abs_tol");
  c.renorm_interval = get<double>(cfg, "trajectory.renorm_interval");
  c.energy_drift_max = get<double>(cfg, "trajectory.energy_drift_max");
  c.h_max = get<double>(cfg, "trajectory.h_max");
  c.sample_interval = get<double>(cfg, "trajectory.sample_interval");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Branch branch_field(const json& v, const std::string& field) {
  try {
    return branch_from_string(v.get<std::string>());
  } catch (const std::exception&) {
    throw ConfigError("field '" + field + "': expected \"plus\" or \"minus\"");
  }
}

// Spectrum good up to raw per-particle energy eps_top (omega0 units already applied).
Spectrum provision_spectrum(Run& run, const DickeParams& P, double eps_top) {
  const json& s = run.cfg["spectrum"];
  if (!s["epsilon_max"].is_null()) eps_top = get<double>(run.cfg, "spectrum.epsilon_max") * P.omega0();
  int n_max = get<int>(run.cfg, "spectrum.n_max");
  if (n_max <= 0) n_max = suggested_cutoff(P, eps_top);
  SolveOptions o;
  o.parity_blocks = get<bool>(run.cfg, "spectrum.parity_blocks");
  o.energy_max = eps_top * P.j();
  o.tail_tol = get<double>(run.cfg, "spectrum.tail_tol");
  o.stability_shift = get<int>(run.cfg, "spectrum.stability_shift");
  o.stability_tol = get<double>(run.cfg, "spectrum.stability_tol");
  o.check_stability = get<bool>(run.cfg, "spectrum.check_stability");
  const auto spec = ECBasisSpec::make(P.j(), n_max);
  const double bytes = estimate_solve_bytes(spec, o.parity_blocks, spec.dimension() / 2, o.stability_shift);
  if (bytes > get<double>(run.cfg, "spectrum.max_bytes"))
    throw ConfigError("spectrum: j=" + num(P.j()) + ", n_max=" + std::to_string(n_max) + " needs about " +
                      num(std::round(bytes / 1e6)) + " MB, above spectrum.max_bytes");
  fs::path dir = get<std::string>(run.cfg, "cache_dir");
  if (dir.empty()) dir = run.out / "cache";
  fs::create_directories(dir);
  CacheStatus st;
  Spectrum sp = cached_spectrum(P, spec, o, dir, &st);
  if (st == CacheStatus::version_mismatch || st == CacheStatus::corrupt || st == CacheStatus::key_mismatch)
    std::cerr << "warning: spectrum cache entry unusable (" << to_string(st) << "), recomputed\n";
  json info = {{"j", P.j()},          {"n_max", n_max},
               {"dimension", spec.dimension()}, {"energy_max", *o.energy_max},
               {"stored_states", sp.size()},    {"converged_count", sp.converged_count},
               {"cache", std::string(to_string(st))}};
  run.notes["spectra"].push_back(info);
  return sp;
}

// ---------------------------------------------------------------------------------

void task_chaos_map(Run& run) {
  const auto base = dicke_params(run.cfg);
  const auto c = trajectory_config(run.cfg);
  const double gc = critical_coupling(base), w0 = base.omega0();
  const auto ratios = uniform_grid(get<double>(run.cfg, "chaos_map.gamma_over_gc_min"),
                                   get<double>(run.cfg, "chaos_map.gamma_over_gc_max"),
                                   get<std::size_t>(run.cfg, "chaos_map.n_gamma"));
  const auto eps = uniform_grid(get<double>(run.cfg, "chaos_map.epsilon_min"),
                                get<double>(run.cfg, "chaos_map.epsilon_max"),
                                get<std::size_t>(run.cfg, "chaos_map.n_epsilon"));
  std::vector<double> gammas, raw_eps;
  for (double r : ratios) gammas.push_back(r * gc);
  for (double e : eps) raw_eps.push_back(e * w0);
  const auto grid = chaos_map(base, gammas, raw_eps, get<std::size_t>(run.cfg, "chaos_map.n_samples"), c,
                              get<std::uint64_t>(run.cfg, "seed"), run.threads);
  Csv csv(run.output("chaos_map.csv"),
          {"gamma_over_gc", "gamma", "epsilon", "mean_lambda", "n_accepted", "drift_failures", "empty"});
  for (std::size_t ig = 0; ig < gammas.size(); ++ig)
    for (std::size_t ie = 0; ie < eps.size(); ++ie) {
      const auto k = grid.index(ig, ie);
      csv.row({num(ratios[ig]), num(gammas[ig]), num(eps[ie]), grid.empty[k] ? "nan" : num(grid.mean_lambda[k]),
               std::to_string(grid.n_accepted[k]), std::to_string(grid.drift_failures[k]),
               std::to_string(int(grid.empty[k]))});
    }
}

void task_poincare(Run& run) {
  const auto P = dicke_params(run.cfg);
  const auto c = trajectory_config(run.cfg);
  const double eps = get<double>(run.cfg, "poincare.epsilon");
  const Branch b = branch_field(run.cfg["poincare"]["branch"], "poincare.branch");
  const auto sec = poincare_section(P, eps * P.omega0(), b, get<std::size_t>(run.cfg, "poincare.n_orbits"), c,
                                    run.threads);
  Csv csv(run.output("poincare.csv"), {"orbit", "jz_tilde", "phi", "q", "time"});
  for (std::size_t i = 0; i < sec.crossings.size(); ++i) {
    const auto& x = sec.crossings[i];
    csv.row({std::to_string(sec.orbit_ids[i]), num(x.jz_tilde), num(x.phi), num(x.point.q), num(x.time)});
  }
  run.notes["crossings"] = sec.crossings.size();
  run.notes["drift_failures"] = sec.drift_failures;
}

void task_lyapunov_point(Run& run) {
  const auto P = dicke_params(run.cfg);
  const auto c = trajectory_config(run.cfg);
  const json& pts = run.cfg["lyapunov_point"]["points"];
  if (pts.empty()) throw ConfigError("field 'lyapunov_point.points': needs at least one point");
  const bool with_sali = get<bool>(run.cfg, "lyapunov_point.sali");
  struct In {
    double eps, jz, phi;
    Branch b;
  };
  std::vector<In> in;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string f = "lyapunov_point.points[" + std::to_string(i) + "]";
    const json& p = pts[i];
    if (!p.is_object() || !p.contains("epsilon") || !p.contains("jz_tilde"))
      throw ConfigError("field '" + f + "': needs epsilon and jz_tilde");
    in.push_back({p["epsilon"].get<double>(), p["jz_tilde"].get<double>(), p.value("phi", 0.0),
                  branch_field(p.value("branch", json("plus")), f + ".branch")});
  }
  std::vector<json> res(in.size());
  parallel_for(
      in.size(),
      [&](std::size_t i) {
        const auto& p = in[i];
        json r = {{"epsilon", p.eps}, {"jz_tilde", p.jz}, {"phi", p.phi}, {"branch", to_string(p.b)}};
        auto pt = surface_point(P, {p.eps * P.omega0(), p.jz, p.phi, p.b});
        if (!pt) {
          r["valid"] = false;
          res[i] = r;
          return;
        }
        r["valid"] = true;
        r["q"] = pt->q;
        LyapunovResult L;
        try {
          L = lyapunov_exponent(P, to_regularized(*pt), c);
        } catch (const DriftError& e) {
          r["drift_failure"] = e.what();
          res[i] = r;
          return;
        }
        r["lambda"] = L.lambda;
        r["binary"] = L.binary;
        r["converged"] = L.converged;
        r["max_relative_drift"] = L.max_relative_drift;
        if (with_sali) {
          const auto S = sali(P, to_regularized(*pt), c);
          r["sali_class"] = to_string(S.classification);
          r["sali_final"] = S.sali_final;
          r["sali_decay_rate"] = S.decay_rate;
          r["sali_t_final"] = S.t_final;
        }
        res[i] = r;
      },
      run.threads);
  write_json(run.output("lyapunov_points.json"), json(res));
}

struct SectionGrid {
  double eps_raw;
  double phi;
  std::vector<Branch> branches;
  std::vector<double> jz;
};

SectionGrid section_setup(const Run& run, const DickeParams& P) {
  SectionGrid g;
  g.eps_raw = get<double>(run.cfg, "section.epsilon") * P.omega0();
  g.phi = get<double>(run.cfg, "section.phi");
  const json& br = run.cfg["section"]["branches"];
  for (std::size_t i = 0; i < br.size(); ++i)
    g.branches.push_back(branch_field(br[i], "section.branches[" + std::to_string(i) + "]"));
  if (g.branches.empty()) throw ConfigError("field 'section.branches': needs at least one branch");
  g.jz = section_grid(P, g.eps_raw, g.phi, get<std::size_t>(run.cfg, "section.n_grid"));
  if (g.jz.empty()) throw ConfigError("section: the energy shell does not reach phi = section.phi");
  return g;
}

void task_lyapunov_section(Run& run) {
  const auto P = dicke_params(run.cfg);
  const auto c = trajectory_config(run.cfg);
  const auto g = section_setup(run, P);
  const std::size_t n = g.jz.size();
  std::vector<std::optional<LyapunovResult>> res(n * g.branches.size());
  std::vector<char> drifted(res.size(), 0);
  parallel_for(
      res.size(),
      [&](std::size_t k) {
        const Branch b = g.branches[k / n];
        auto pt = surface_point(P, {g.eps_raw, g.jz[k % n], g.phi, b});
        if (!pt) return;
        try {
          res[k] = lyapunov_exponent(P, to_regularized(*pt), c);
        } catch (const DriftError&) {
          drifted[k] = 1;
        }
      },
      run.threads);
  Csv csv(run.output("lyapunov_section.csv"), {"jz_tilde", "branch", "valid", "lambda", "binary", "converged"});
  std::size_t n_drift = 0;
  for (std::size_t k = 0; k < res.size(); ++k) {
    const auto& r = res[k];
    n_drift += drifted[k];
    csv.row({num(g.jz[k % n]), std::string(to_string(g.branches[k / n])), r ? "1" : "0",
             r ? num(r->lambda) : "nan", r ? std::to_string(r->binary) : "", r ? (r->converged ? "1" : "0") : ""});
  }
  run.notes["drift_failures"] = n_drift;
}

void task_pr_section(Run& run) {
  const auto P = dicke_params(run.cfg);
  const auto g = section_setup(run, P);
  double width = 0.0;
  for (Branch b : g.branches)
    for (double jz : g.jz)
      if (auto pt = surface_point(P, {g.eps_raw, jz, g.phi, b})) width = std::max(width, coherent_energy_width(P, *pt));
  const double top = g.eps_raw + get<double>(run.cfg, "spectrum.width_sigmas") * width / P.j();
  const Spectrum sp = provision_spectrum(run, P, top);
  const double tol = get<double>(run.cfg, "section.norm_tol");
  Csv csv(run.output("pr_section.csv"),
          {"jz_tilde", "branch", "valid", "pr", "pr_over_n", "binary", "captured_norm", "norm_deficit"});
  for (Branch b : g.branches) {
    const auto sec = pr_section(P, sp, g.eps_raw, g.phi, b, g.jz, tol, run.threads);
    for (const auto& pt : sec) {
      const auto& r = pt.result;
      if (!pt.valid) {
        csv.row({num(pt.jz_tilde), std::string(to_string(b)), "0", "nan", "nan", "", "", ""});
        continue;
      }
      csv.row({num(pt.jz_tilde), std::string(to_string(b)), "1", num(r.pr), num(r.pr_over_n),
               std::to_string(r.binary), num(r.captured_norm), r.norm_deficit ? "1" : "0"});
    }
  }
}

void task_compare_sections(Run& run) {
  const auto L = read_csv(get<std::string>(run.cfg, "compare.lyapunov_csv"));
  const auto Q = read_csv(get<std::string>(run.cfg, "compare.pr_csv"));
  if (L.size() != Q.size()) throw ConfigError("compare: the two sections have different grids");
  Csv csv(run.output("compare.csv"), {"jz_tilde", "branch", "lambda_bin", "pr_bin", "agree"});
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_branch;
  std::map<std::string, json> windows;
  std::map<std::string, std::optional<std::pair<double, double>>> open;
  std::size_t total = 0, agree = 0;
  auto close = [&](const std::string& b) {
    if (open[b]) windows[b].push_back({open[b]->first, open[b]->second});
    open[b].reset();
  };
  for (std::size_t i = 0; i < L.size(); ++i) {
    const auto &a = L[i], &b = Q[i];
    if (a.at("branch") != b.at("branch") ||
        std::abs(std::stod(a.at("jz_tilde")) - std::stod(b.at("jz_tilde"))) > 1e-12)
      throw ConfigError("compare: grid mismatch at row " + std::to_string(i + 2));
    const std::string br = a.at("branch");
    const double jz = std::stod(a.at("jz_tilde"));
    if (a.at("valid") != "1" || b.at("valid") != "1") {
      close(br);
      continue;
    }
    const int lb = std::stoi(a.at("binary")), pb = std::stoi(b.at("binary"));
    const bool same = lb == pb;
    csv.row({num(jz), br, std::to_string(lb), std::to_string(pb), same ? "1" : "0"});
    ++total;
    agree += same;
    per_branch[br].first += 1;
    per_branch[br].second += same;
    if (same) {
      close(br);
    } else if (open[br]) {
      open[br]->second = jz;
    } else {
      open[br] = std::make_pair(jz, jz);
    }
  }
  for (auto& [b, w] : open) close(b);
  json rep = {{"points", total}, {"agreement", total ? double(agree) / total : 0.0}, {"branches", json::object()}};
  for (const auto& [b, c] : per_branch)
    rep["branches"][b] = {{"points", c.first},
                          {"agreement", c.first ? double(c.second) / c.first : 0.0},
                          {"mismatch_windows", windows.count(b) ? windows[b] : json::array()}};
  write_json(run.output("compare.json"), rep);
}

void task_pr_scaling(Run& run) {
  const auto base = dicke_params(run.cfg);
  const json& pts = run.cfg["pr_scaling"]["points"];
  if (pts.empty()) throw ConfigError("field 'pr_scaling.points': needs at least one point");
  const auto j_list = get<std::vector<double>>(run.cfg, "pr_scaling.j_list");
  const std::string model_name = get<std::string>(run.cfg, "pr_scaling.model");
  if (model_name != "pure_power" && model_name != "power_offset")
    throw ConfigError("field 'pr_scaling.model': expected \"pure_power\" or \"power_offset\"");
  const auto model = model_name == "pure_power" ? ScalingModel::pure_power : ScalingModel::power_offset;
  const double tol = get<double>(run.cfg, "pr_scaling.norm_tol");
  struct In {
    double eps, jz, phi;
    Branch b;
  };
  std::vector<In> in;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const json& p = pts[i];
    const std::string f = "pr_scaling.points[" + std::to_string(i) + "]";
    if (!p.is_object() || !p.contains("epsilon") || !p.contains("jz_tilde"))
      throw ConfigError("field '" + f + "': needs epsilon and jz_tilde");
    in.push_back({p["epsilon"].get<double>(), p["jz_tilde"].get<double>(), p.value("phi", 0.0),
                  branch_field(p.value("branch", json("plus")), f + ".branch")});
  }
  std::vector<std::vector<std::pair<double, double>>> series(in.size());
  Csv csv(run.output("pr_scaling.csv"),
          {"epsilon", "jz_tilde", "phi", "branch", "j", "n_atoms", "pr", "pr_over_n", "captured_norm"});
  for (double j : j_list) {
    const auto P = base.with_j(j);
    std::vector<std::optional<PhasePoint>> x(in.size());
    double top = -1e300;
    for (std::size_t i = 0; i < in.size(); ++i) {
      x[i] = surface_point(P, {in[i].eps * P.omega0(), in[i].jz, in[i].phi, in[i].b});
      if (!x[i]) throw ConfigError("pr_scaling: point " + std::to_string(i) + " is off the energy shell");
      top = std::max(top, in[i].eps * P.omega0() +
                              get<double>(run.cfg, "spectrum.width_sigmas") * coherent_energy_width(P, *x[i]) / j);
    }
    const Spectrum sp = provision_spectrum(run, P, top);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const auto r = participation_ratio(coherent_in_ecb(*x[i], sp), P.n_atoms(), tol);
      csv.row({num(in[i].eps), num(in[i].jz), num(in[i].phi), std::string(to_string(in[i].b)), num(j),
               std::to_string(P.n_atoms()), num(r.pr), num(r.pr_over_n), num(r.captured_norm)});
      series[i].emplace_back(P.n_atoms(), r.pr);
    }
  }
  json fits = json::array();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto f = scaling_fit(series[i], model);
    fits.push_back({{"epsilon", in[i].eps},
                    {"jz_tilde", in[i].jz},
                    {"phi", in[i].phi},
                    {"branch", to_string(in[i].b)},
                    {"model", to_string(f.model)},
                    {"a", f.a},
                    {"b", f.b},
                    {"exponent", f.c},
                    {"residual_rms", f.residual_rms},
                    {"degenerate", f.degenerate}});
  }
  write_json(run.output("pr_scaling_fits.json"), fits);
}

void task_lmg_pr_map(Run& run) {
  const auto p = lmg_params(run.cfg);
  const auto jz = uniform_grid(-1.0, 1.0, get<std::size_t>(run.cfg, "lmg_pr_map.n_jz"));
  const auto phi = uniform_grid(-std::numbers::pi, std::numbers::pi, get<std::size_t>(run.cfg, "lmg_pr_map.n_phi"));
  const auto m = lmg_pr_map(p, jz, phi, run.threads);
  Csv csv(run.output("lmg_pr_map.csv"), {"jz_tilde", "phi", "energy", "pr"});
  std::size_t best = 0;
  for (std::size_t i = 0; i < jz.size(); ++i)
    for (std::size_t k = 0; k < phi.size(); ++k) {
      csv.row({num(jz[i]), num(phi[k]), num(lmg_classical_energy(p, jz[i], phi[k])), num(m.at(i, k))});
      if (m.pr[i * phi.size() + k] > m.pr[best]) best = i * phi.size() + k;
    }
  const double bj = jz[best / phi.size()], bp = phi[best % phi.size()];
  run.notes["max_pr"] = {{"jz_tilde", bj}, {"phi", bp}, {"pr", m.pr[best]},
                         {"energy", lmg_classical_energy(p, bj, bp)}};
  if (p.gamma_x < -1.0 && p.gamma_y < -1.0) {
    const auto e = lmg_critical_energies(p);
    run.notes["critical_energies"] = {{"e_min", e.e_min}, {"e_cr", e.e_cr}, {"e_join", e.e_join}};
  }
}

void task_lmg_scaling(Run& run) {
  const auto p = lmg_params(run.cfg);
  const auto jz = uniform_grid(get<double>(run.cfg, "lmg_scaling.jz_min"), get<double>(run.cfg, "lmg_scaling.jz_max"),
                               get<std::size_t>(run.cfg, "lmg_scaling.n_jz"));
  const auto Js = get<std::vector<double>>(run.cfg, "lmg_scaling.J_list");
  const double phi = get<double>(run.cfg, "lmg_scaling.phi");
  std::vector<LMGScalingPoint> pts;
  try {
    pts = lmg_pr_scaling(p, phi, jz, Js, run.threads);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Csv csv(run.output("lmg_scaling.csv"), {"jz_tilde", "J", "pr"});
  json fits = json::array();
  for (const auto& pt : pts) {
    for (std::size_t k = 0; k < Js.size(); ++k) csv.row({num(pt.jz_tilde), num(Js[k]), num(pt.pr[k])});
    fits.push_back({{"jz_tilde", pt.jz_tilde},
                    {"energy", lmg_classical_energy(p, pt.jz_tilde, phi)},
                    {"flat", pt.flat},
                    {"a", pt.fit.a},
                    {"b", pt.fit.b},
                    {"c", pt.fit.c},
                    {"residual_rms", pt.fit.residual_rms}});
  }
  write_json(run.output("lmg_scaling_fits.json"), fits);
}

void task_diagonalize(Run& run) {
  const auto P = dicke_params(run.cfg);
  const json& s = run.cfg["spectrum"];
  const double top = s["epsilon_max"].is_null() ? 0.0 : get<double>(run.cfg, "spectrum.epsilon_max");
  const Spectrum sp = provision_spectrum(run, P, top * P.omega0());
  Csv csv(run.output("spectrum.csv"), {"k", "energy", "epsilon", "parity", "converged"});
  for (Index k = 0; k < sp.size(); ++k)
    csv.row({std::to_string(k), num(sp.energies[k]), num(sp.energies[k] / (P.j() * P.omega0())),
             std::string(to_string(sp.parity[k])), sp.converged[k] ? "1" : "0"});
}

int run_task(const std::string& task, Run& run) {
  const std::string model = get<std::string>(run.cfg, "model");
  const bool lmg_task = task.rfind("lmg-", 0) == 0;
  if (task != "compare-sections" && (model == "lmg") != lmg_task)
    throw ConfigError("field 'model': task " + task + " needs model \"" + (lmg_task ? "lmg" : "dicke") + "\"");
  if (task == "chaos-map") task_chaos_map(run);
  else if (task == "poincare") task_poincare(run);
  else if (task == "lyapunov-point") task_lyapunov_point(run);
  else if (task == "lyapunov-section") task_lyapunov_section(run);
  else if (task == "pr-section") task_pr_section(run);
  else if (task == "pr-scaling") task_pr_scaling(run);
  else if (task == "compare-sections") task_compare_sections(run);
  else if (task == "lmg-pr-map") task_lmg_pr_map(run);
  else if (task == "lmg-scaling") task_lmg_scaling(run);
  else task_diagonalize(run);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classical and quantum chaos indicators for the Dicke and LMG models"};
  std::string task, config_file, out_dir;
  std::vector<std::string> overrides;
  app.add_option("task", task, "Task to run")->required()->check(CLI::IsMember(tasks));
  app.add_option("--config", config_file, "JSON configuration file")->required();
  app.add_option("--override", overrides, "Dotted key=value replacing a config entry");
  app.add_option("--out", out_dir, "Output directory")->required();
  CLI11_PARSE(app, argc, argv);

  const auto start = std::chrono::steady_clock::now();
  Run run;
  try {
    json user;
    {
      std::ifstream is(config_file);
      if (!is) throw ConfigError("cannot open config file " + config_file);
      try {
        user = json::parse(is);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    for (const auto& o : overrides) apply_override(user, o);
    run.cfg = defaults();
    merge_checked(run.cfg, user, "");
    const std::string model = get<std::string>(run.cfg, "model");
    if (model != "dicke" && model != "lmg") throw ConfigError("field 'model': expected \"dicke\" or \"lmg\"");
    if (get<int>(run.cfg, "threads") < 0) throw ConfigError("field 'threads': must be >= 0");
    run.threads = get<unsigned>(run.cfg, "threads");
    run.out = out_dir;
    fs::create_directories(run.out);
    run_task(task, run);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest = {{"tool", "dicke_chaos"},
                   {"version", DICKE_VERSION},
                   {"task", task},
                   {"csv_schema_version", csv_schema_version},
                   {"config", run.cfg},
                   {"outputs", run.outputs},
                   {"notes", run.notes},
                   {"wall_clock_seconds", secs}};
  write_json(run.out / "manifest.json", manifest);
  return 0;
}
