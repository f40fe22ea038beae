#include "strata/config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "strata/analysis.hpp"
#include "strata/oracle.hpp"
#include "strata/solver.hpp"

namespace strata {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(int line, const std::string& msg) {
  throw SpecError("config line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

double to_double(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    config_error(line, "expected a number, got '" + s + "'");
  }
}

CurveDesc parse_curve(const std::vector<std::string>& toks, int line) {
  if (toks.empty()) config_error(line, "empty curve spec");
  CurveDesc c;
  c.kind = toks[0];
  if (c.kind != "flat" && c.kind != "sine" && c.kind != "cosine" && c.kind != "mixed")
    config_error(line, "unknown curve kind '" + c.kind + "'");
  for (std::size_t i = 1; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq == std::string::npos) config_error(line, "expected key=value, got '" + toks[i] + "'");
    const std::string key = toks[i].substr(0, eq), val = toks[i].substr(eq + 1);
    if (key == "seed")
      c.seed = static_cast<std::uint64_t>(std::stoull(val));
    else if (key == "modes")
      c.modes = static_cast<int>(to_double(val, line));
    else if (key == "amp")
      c.amp = to_double(val, line);
    else if (key == "offset")
      c.offset = to_double(val, line);
    else if (key == "sin-coeffs" || key == "cos-coeffs") {
      std::vector<double> v;
      std::istringstream is(val);
      std::string item;
      while (std::getline(is, item, ',')) v.push_back(to_double(item, line));
      (key[0] == 's' ? c.sin_coeffs : c.cos_coeffs) = v;
    } else {
      config_error(line, "unknown curve key '" + key + "'");
    }
  }
  return c;
}

}  // namespace

Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = trim(raw);
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') config_error(line, "malformed section header");
      section = s.substr(1, s.size() - 2);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) config_error(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    const auto toks = tokens(val);

    if (section == "period" && key == "d") {
      cfg.period = to_double(val, line);
    } else if (section == "layers" && key == "omega") {
      for (const auto& t : toks) cfg.omega.push_back(to_double(t, line));
    } else if (section == "interfaces" && key == "curve") {
      cfg.curves.push_back(parse_curve(toks, line));
    } else if (section == "discretization" && key == "n") {
      for (const auto& t : toks) cfg.n_points.push_back(static_cast<int>(to_double(t, line)));
    } else if (section == "auxiliary") {
      const int v = static_cast<int>(to_double(val, line));
      if (key == "proxy_points")
        cfg.aux.proxy_points = v;
      else if (key == "wall_points")
        cfg.aux.wall_points = v;
      else if (key == "top_points")
        cfg.aux.top_points = v;
      else if (key == "rb_terms")
        cfg.aux.rb_terms = v;
      else
        config_error(line, "unknown auxiliary key '" + key + "'");
    } else if (section == "tolerances") {
      const double v = to_double(val, line);
      if (key == "lowrank")
        cfg.tol.lowrank = v;
      else if (key == "schur")
        cfg.tol.schur = v;
      else if (key == "hbs")
        cfg.tol.hbs = v;
      else
        config_error(line, "unknown tolerance '" + key + "'");
    } else if (section == "sweep" && key == "angles") {
      if (toks.empty()) config_error(line, "empty angle list");
      if (toks[0] == "linspace") {
        if (toks.size() != 4) config_error(line, "linspace needs: lo hi count (in units of pi)");
        const double lo = to_double(toks[1], line) * kPi, hi = to_double(toks[2], line) * kPi;
        const int n = static_cast<int>(to_double(toks[3], line));
        for (int i = 0; i < n; ++i)
          cfg.sweep_angles.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
      } else if (toks[0] == "list") {
        for (std::size_t i = 1; i < toks.size(); ++i)
          cfg.sweep_angles.push_back(to_double(toks[i], line) * kPi);
      } else {
        config_error(line, "angles must be 'linspace lo hi n' or 'list ...'");
      }
    } else if (section == "convergence" && key == "n") {
      for (const auto& t : toks) cfg.converge_n.push_back(static_cast<int>(to_double(t, line)));
    } else if (section == "output" && key == "dir") {
      cfg.out_dir = val;
    } else if (section == "seed" && key == "base") {
      cfg.base_seed = static_cast<std::uint64_t>(std::stoull(val));
    } else {
      config_error(line, "unknown key '" + key + "' in section [" + section + "]");
    }
  }
  if (cfg.omega.empty()) throw SpecError("config: missing [layers] omega");
  if (cfg.curves.empty()) throw SpecError("config: missing [interfaces] curves");
  if (cfg.n_points.empty()) cfg.n_points.assign(cfg.curves.size(), 320);
  if (cfg.n_points.size() == 1 && cfg.curves.size() > 1)
    cfg.n_points.assign(cfg.curves.size(), cfg.n_points[0]);
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SpecError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t Config::effective_seed(int i) const {
  if (curves[i].seed) return *curves[i].seed;
  return base_seed * 1000003ULL + static_cast<std::uint64_t>(i);
}

std::shared_ptr<const Curve> make_curve(const CurveDesc& desc, double period,
                                        std::uint64_t effective_seed) {
  FourierCurveSpec spec;
  spec.period = period;
  spec.scale = desc.amp;
  spec.offset = desc.offset;
  if (!desc.sin_coeffs.empty() || !desc.cos_coeffs.empty()) {
    spec.sin_coeffs = desc.sin_coeffs;
    spec.cos_coeffs = desc.cos_coeffs;
  } else if (desc.kind == "sine") {
    spec.sin_coeffs = sorted_random_coeffs(effective_seed, desc.modes);
  } else if (desc.kind == "cosine") {
    spec.cos_coeffs = sorted_random_coeffs(effective_seed, desc.modes);
  } else if (desc.kind == "mixed") {
    spec.sin_coeffs = sorted_random_coeffs(effective_seed, desc.modes);
    spec.cos_coeffs = sorted_random_coeffs(effective_seed ^ 0x9e3779b97f4a7c15ULL, desc.modes);
  }
  return std::make_shared<FourierCurve>(spec);
}

ProblemSpec Config::to_spec() const {
  ProblemSpec spec;
  spec.period = period;
  spec.omega = omega;
  spec.n_points = n_points;
  spec.aux = aux;
  spec.tol = tol;
  for (std::size_t i = 0; i < curves.size(); ++i)
    spec.interfaces.push_back(make_curve(curves[i], period, effective_seed(static_cast<int>(i))));
  spec.validate();
  return spec;
}

namespace {

json echo_config(const Config& cfg) {
  json j;
  j["period"] = cfg.period;
  j["omega"] = cfg.omega;
  j["n_points"] = cfg.n_points;
  j["auxiliary"] = {{"proxy_points", cfg.aux.proxy_points},
                    {"wall_points", cfg.aux.wall_points},
                    {"top_points", cfg.aux.top_points},
                    {"rb_terms", cfg.aux.rb_terms}};
  j["tolerances"] = {{"lowrank", cfg.tol.lowrank}, {"schur", cfg.tol.schur}, {"hbs", cfg.tol.hbs}};
  json curves = json::array();
  for (std::size_t i = 0; i < cfg.curves.size(); ++i) {
    const CurveDesc& c = cfg.curves[i];
    json jc = {{"kind", c.kind},     {"modes", c.modes},
               {"amp", c.amp},       {"offset", c.offset},
               {"seed", cfg.effective_seed(static_cast<int>(i))}};
    if (!c.sin_coeffs.empty()) jc["sin_coeffs"] = c.sin_coeffs;
    if (!c.cos_coeffs.empty()) jc["cos_coeffs"] = c.cos_coeffs;
    curves.push_back(jc);
  }
  j["interfaces"] = curves;
  j["out_dir"] = cfg.out_dir;
  return j;
}

json solution_json(const ScatteringSolution& sol) {
  json j;
  j["theta"] = sol.wave.theta;
  j["alpha"] = {sol.wave.alpha.real(), sol.wave.alpha.imag()};
  j["kappa0"] = sol.kappa0;
  j["order_shift"] = sol.order_shift;
  j["flux_error"] = sol.flux_error;
  json up = json::array(), down = json::array();
  const int terms = static_cast<int>(sol.a_up.size() - 1) / 2;
  for (int i = 0; i < sol.a_up.size(); ++i) {
    up.push_back({{"n", i - terms}, {"re", sol.a_up[i].real()}, {"im", sol.a_up[i].imag()}});
    down.push_back({{"n", i - terms}, {"re", sol.a_down[i].real()}, {"im", sol.a_down[i].imag()}});
  }
  j["a_up"] = up;
  j["a_down"] = down;
  return j;
}

json timings_json(const StageTimings& t) {
  return {{"stage1", t.stage1}, {"stage2", t.stage2},           {"stage3", t.stage3},
          {"solve", t.solve},   {"stage3_builds", t.stage3_builds}, {"solves", t.solves}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw SpecError("cannot write output file '" + path + "'");
  f << text;
}

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool dense_fallback = false;
  std::string tol_overrides;
  double angle_pi = -0.5;  // units of pi
  std::vector<std::string> set_omega, set_interface;
  std::vector<int> n_list;
  int nx = 80, ny = 60;
};

void apply_overrides(Config& cfg, const CliOptions& opt) {
  if (opt.seed_set) cfg.base_seed = opt.seed;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (!opt.tol_overrides.empty()) {
    std::istringstream is(opt.tol_overrides);
    std::string item;
    while (std::getline(is, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw SpecError("bad --tolerance-overrides entry: " + item);
      const std::string key = item.substr(0, eq);
      const double v = std::stod(item.substr(eq + 1));
      if (key == "lowrank")
        cfg.tol.lowrank = v;
      else if (key == "schur")
        cfg.tol.schur = v;
      else if (key == "hbs")
        cfg.tol.hbs = v;
      else
        throw SpecError("unknown tolerance '" + key + "'");
    }
  }
}

int command_solve(Config cfg, const CliOptions& opt) {
  ProblemSpec spec = cfg.to_spec();
  spec.dense_fallback = opt.dense_fallback;
  SolverState state = SolverState::build(spec);
  const ScatteringSolution sol = state.solve(opt.angle_pi * kPi);
  json j;
  j["command"] = "solve";
  j["config"] = echo_config(cfg);
  j["result"] = solution_json(sol);
  j["timings"] = timings_json(state.timings());
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir + "/summary.json", j.dump(2) + "\n");
  std::cout << "flux_error " << sol.flux_error << "\n";
  return 0;
}

int command_sweep(Config cfg, const CliOptions& opt) {
  ProblemSpec spec = cfg.to_spec();
  spec.dense_fallback = opt.dense_fallback;
  if (cfg.sweep_angles.empty()) throw SpecError("sweep: config has no [sweep] angles");
  SolverState state = SolverState::build(spec);
  const auto sols = state.sweep(cfg.sweep_angles);
  json j;
  j["command"] = "sweep";
  j["config"] = echo_config(cfg);
  j["angle_count"] = sols.size();
  j["bloch_phase_groups"] = state.phase_cache_size();
  json results = json::array();
  std::ostringstream csv;
  csv << "theta,flux_error\n";
  for (const auto& s : sols) {
    results.push_back(solution_json(s));
    csv << s.wave.theta << "," << s.flux_error << "\n";
  }
  j["results"] = results;
  j["timings"] = timings_json(state.timings());
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir + "/summary.json", j.dump(2) + "\n");
  write_text(cfg.out_dir + "/sweep.csv", csv.str());
  std::cout << "angles " << sols.size() << " groups " << state.phase_cache_size() << "\n";
  return 0;
}

int command_update(Config cfg, const CliOptions& opt) {
  ProblemSpec spec = cfg.to_spec();
  spec.dense_fallback = opt.dense_fallback;
  SolverState state = SolverState::build(spec);
  const ScatteringSolution before = state.solve(opt.angle_pi * kPi);
  state.reset_timings();
  for (const std::string& s : opt.set_omega) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw SpecError("--set-omega needs layer:value");
    state.update_wavenumber(std::stoi(s.substr(0, colon)) - 1, std::stod(s.substr(colon + 1)));
  }
  for (const std::string& s : opt.set_interface) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw SpecError("--set-interface needs index:curve-spec");
    const int i = std::stoi(s.substr(0, colon)) - 1;
    std::istringstream rest(s.substr(colon + 1));
    std::vector<std::string> toks;
    std::string t;
    while (rest >> t) toks.push_back(t);
    const CurveDesc desc = parse_curve(toks, 0);
    const std::uint64_t seed = desc.seed ? *desc.seed : cfg.base_seed * 1000003ULL + 977;
    state.update_interface(i, make_curve(desc, cfg.period, seed));
  }
  const ScatteringSolution after = state.solve(opt.angle_pi * kPi);
  json j;
  j["command"] = "update";
  j["config"] = echo_config(cfg);
  j["before"] = solution_json(before);
  j["after"] = solution_json(after);
  j["update_timings"] = timings_json(state.timings());
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir + "/summary.json", j.dump(2) + "\n");
  std::cout << "flux_error " << after.flux_error << "\n";
  return 0;
}

int command_converge(Config cfg, const CliOptions& opt) {
  ProblemSpec spec = cfg.to_spec();
  spec.dense_fallback = opt.dense_fallback;
  std::vector<int> ns = opt.n_list.empty() ? cfg.converge_n : opt.n_list;
  if (ns.empty()) throw SpecError("converge: no N list (flag --n-list or [convergence] n)");
  const auto rows = convergence_study(spec, ns, opt.angle_pi * kPi);
  json j;
  j["command"] = "converge";
  j["config"] = echo_config(cfg);
  std::ostringstream csv;
  csv << "n,flux_error,stage1,stage2,stage3,solve\n";
  json jr = json::array();
  for (const auto& r : rows) {
    csv << r.n_per_interface << "," << r.flux_error << "," << r.timings.stage1 << ","
        << r.timings.stage2 << "," << r.timings.stage3 << "," << r.timings.solve << "\n";
    jr.push_back({{"n", r.n_per_interface},
                  {"flux_error", r.flux_error},
                  {"timings", timings_json(r.timings)}});
  }
  j["rows"] = jr;
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir + "/summary.json", j.dump(2) + "\n");
  write_text(cfg.out_dir + "/convergence.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int command_field(Config cfg, const CliOptions& opt) {
  ProblemSpec spec = cfg.to_spec();
  spec.dense_fallback = opt.dense_fallback;
  SolverState state = SolverState::build(spec);
  const ScatteringSolution sol = state.solve(opt.angle_pi * kPi);
  const Geometry& geo = state.geometry();
  std::vector<Point> pts;
  const double x0 = -0.5 * cfg.period, x1 = 0.5 * cfg.period;
  const double y0 = geo.cell.y_down - 0.2, y1 = geo.cell.y_up + 0.2;
  for (int iy = 0; iy < opt.ny; ++iy)
    for (int ix = 0; ix < opt.nx; ++ix)
      pts.emplace_back(x0 + (x1 - x0) * (ix + 0.5) / opt.nx, y0 + (y1 - y0) * (iy + 0.5) / opt.ny);
  const FieldEval fe = evaluate_field(geo, sol, pts);
  std::ostringstream grid;
  grid << "# x y re_u im_u (flagged points written as nan)\n";
  grid << "# nx " << opt.nx << " ny " << opt.ny << "\n";
  for (std::size_t i = 0; i < pts.size(); ++i)
    grid << pts[i].x << " " << pts[i].y << " " << fe.values[i].real() << " "
         << fe.values[i].imag() << "\n";
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir + "/field.txt", grid.str());
  json j;
  j["command"] = "field";
  j["config"] = echo_config(cfg);
  j["flux_error"] = sol.flux_error;
  j["grid_file"] = cfg.out_dir + "/field.txt";
  write_text(cfg.out_dir + "/summary.json", j.dump(2) + "\n");
  return 0;
}

int command_verify(Config cfg, const CliOptions& opt) {
  Config reduced = cfg;
  for (auto& n : reduced.n_points) n = std::min(n, 256);
  ProblemSpec spec = reduced.to_spec();
  spec.dense_fallback = opt.dense_fallback;
  SolverState state = SolverState::build(spec);
  const double theta = opt.angle_pi * kPi;
  const ScatteringSolution fast = state.solve(theta);
  const IncidentWave wave = make_incident(theta, spec.omega[0], spec.period);
  const ScatteringSolution dense = dense_solve(state.geometry(), wave);
  const ScatteringSolution part1 = part1_block_solve(state.geometry(), wave);

  auto rel = [](const CVec& a, const CVec& b) {
    const double nb = std::max(b.norm(), 1e-300);
    return (a - b).norm() / nb;
  };
  const double d_fd = std::max(rel(fast.a_up, dense.a_up), rel(fast.a_down, dense.a_down));
  const double d_fp = std::max(rel(fast.a_up, part1.a_up), rel(fast.a_down, part1.a_down));
  const double d_dp = std::max(rel(dense.a_up, part1.a_up), rel(dense.a_down, part1.a_down));
  const double worst = std::max({d_fd, d_fp, d_dp});
  json j;
  j["command"] = "verify";
  j["config"] = echo_config(reduced);
  j["disagreement"] = {{"fast_vs_dense", d_fd}, {"fast_vs_part1", d_fp}, {"dense_vs_part1", d_dp}};
  j["flux_error"] = {{"fast", fast.flux_error},
                     {"dense", dense.flux_error},
                     {"part1", part1.flux_error}};
  std::filesystem::create_directories(reduced.out_dir);
  write_text(reduced.out_dir + "/summary.json", j.dump(2) + "\n");
  std::cout << "worst oracle disagreement " << worst << "\n";
  return worst <= 1e-7 ? 0 : 4;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"strata: fast direct solver for quasi-periodic multilayer Helmholtz scattering"};
  app.require_subcommand(1);
  CliOptions opt;
  app.add_option("--config", opt.config_path, "configuration file")->required();
  app.add_option("--threads", opt.threads, "worker threads");
  app.add_option("--seed", opt.seed, "base seed for seeded interface coefficients")
      ->each([&](const std::string&) { opt.seed_set = true; });
  app.add_flag("--dense-fallback", opt.dense_fallback, "use dense factorizations of A0");
  app.add_option("--out-dir", opt.out_dir, "output directory override");
  app.add_option("--tolerance-overrides", opt.tol_overrides, "e.g. lowrank=1e-8,schur=1e-10");

  auto* solve = app.add_subcommand("solve", "solve one incident angle");
  solve->add_option("--angle", opt.angle_pi, "incident angle in units of pi (in (-1,0))");
  auto* sweep = app.add_subcommand("sweep", "solve the configured angle grid");
  auto* update = app.add_subcommand("update", "apply local updates, then re-solve");
  update->add_option("--angle", opt.angle_pi, "incident angle in units of pi");
  update->add_option("--set-omega", opt.set_omega, "layer:value (1-based layer)");
  update->add_option("--set-interface", opt.set_interface, "index:curve-spec (1-based)");
  auto* converge = app.add_subcommand("converge", "N-doubling flux study");
  converge->add_option("--angle", opt.angle_pi, "incident angle in units of pi");
  converge->add_option("--n-list", opt.n_list, "per-interface point counts");
  auto* field = app.add_subcommand("field", "evaluate the total field on a grid");
  field->add_option("--angle", opt.angle_pi, "incident angle in units of pi");
  field->add_option("--nx", opt.nx, "grid columns");
  field->add_option("--ny", opt.ny, "grid rows");
  auto* verify = app.add_subcommand("verify", "cross-check the oracles at reduced N");
  verify->add_option("--angle", opt.angle_pi, "incident angle in units of pi");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Eigen::setNbThreads(opt.threads);
    Config cfg = load_config_file(opt.config_path);
    apply_overrides(cfg, opt);
    if (solve->parsed()) return command_solve(cfg, opt);
    if (sweep->parsed()) return command_sweep(cfg, opt);
    if (update->parsed()) return command_update(cfg, opt);
    if (converge->parsed()) return command_converge(cfg, opt);
    if (field->parsed()) return command_field(cfg, opt);
    if (verify->parsed()) return command_verify(cfg, opt);
    return 2;
  } catch (const SpecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace strata
