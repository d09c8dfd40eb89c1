#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ch2/cli.hpp"

namespace ch2::cli {

using nlohmann::json;

namespace {

constexpr double kDefaultGlobalTEnd = 10.0;

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw OutputError("cannot create output directory '" + p.string() + "': " + ec.message());
  return p;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot open '" + path.string() + "' for writing");
  f << content;
  if (!f) throw OutputError("write to '" + path.string() + "' failed");
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json params_json(const RunConfig& c) {
  json p;
  if (c.sigma) p["sigma"] = *c.sigma;
  p["xi"] = c.xi;
  p["alpha"] = c.alpha;
  p["a0"] = c.a0;
  p["a1"] = c.a1;
  p["tol"] = c.tol;
  return p;
}

json case_label(const RunConfig& c) {
  if (!c.sigma) return nullptr;
  return selfsim::to_string(c.solution_case().id());
}

json blowup_json(const emden::BlowupReport& r) {
  json j;
  j["classification"] = emden::to_string(r.classification);
  j["theta"] = r.theta;
  // Optional fields are omitted, not null, when absent.
  if (r.s_collapse_numeric) j["s_collapse_numeric"] = *r.s_collapse_numeric;
  if (r.s_collapse_quadrature) {
    j["s_collapse_quadrature"] = *r.s_collapse_quadrature;
    j["t_collapse"] = *r.s_collapse_quadrature / 3.0;
  }
  if (r.a_turning) j["a_turning"] = *r.a_turning;
  if (r.rate_limit_estimate) j["rate_limit_estimate"] = *r.rate_limit_estimate;
  return j;
}

json residual_json(const verify::ResidualReport& r) {
  json j;
  j["eq_label"] = verify::to_string(r.eq);
  j["interior_max_residual"] = r.interior_max_residual;
  j["interior_l2_residual"] = r.interior_l2_residual;
  j["estimated_order"] = opt(r.estimated_order);
  j["exact"] = r.exact;
  json levels = json::array();
  for (const auto& l : r.levels)
    levels.push_back({{"dx", l.dx}, {"dt", l.dt}, {"max_residual", l.max_residual},
                      {"l2_residual", l.l2_residual}, {"interior_nodes", l.interior_nodes}});
  j["levels"] = levels;
  return j;
}

double max_energy_drift(const emden::Trajectory& traj) {
  const auto& p = traj.params();
  const double e0 = emden::initial_energy(p);
  double worst = 0.0;
  for (const auto& st : traj.states()) {
    const double scale = std::max(1.0 + std::abs(e0), emden::energy_scale(p, st));
    worst = std::max(worst, std::abs(emden::energy(p, st) - e0) / scale);
  }
  return worst;
}

json suite_json(const verify::SuiteResult& s, const emden::BlowupReport& blowup, double velocity_scale) {
  json r;
  r["blowup"] = blowup_json(blowup);
  r["grid"] = {{"t0", s.grid.t0}, {"t1", s.grid.t1}, {"nt", s.grid.nt},
               {"x0", s.grid.x0}, {"x1", s.grid.x1}, {"nx", s.grid.nx}};
  r["residual_mass"] = residual_json(s.mass_eq);
  json mom = json::array();
  for (const auto& run : s.momentum) {
    json m = residual_json(run.report);
    m["alpha_d"] = run.alpha_d;
    mom.push_back(m);
  }
  r["residual_momentum"] = mom;
  r["dispersion_spread"] = s.dispersion_spread;

  json mass;
  mass["divergent"] = s.mass0.divergent;
  if (!s.mass0.divergent) mass["value"] = s.mass0.value;
  mass["analytic"] = opt(s.analytic_mass);
  r["mass"] = mass;

  if (s.conservation) {
    json c;
    c["times"] = s.conservation->times;
    c["masses"] = s.conservation->masses;
    c["analytic_mass"] = opt(s.conservation->analytic_mass);
    c["divergent"] = s.conservation->divergent;
    if (s.conservation->divergent) {
      c["skipped"] = true;
      c["note"] = "noncompact profile: mass is +infinity, conservation not checked";
    } else {
      c["max_relative_drift"] = s.conservation->max_relative_drift;
    }
    r["mass_conservation"] = c;
  }
  if (s.rate) {
    json samples = json::array();
    for (const auto& p : s.rate->samples) samples.push_back({{"s", p.s}, {"product", p.product}});
    r["blowup_rate"] = {{"samples", samples},
                        {"predicted_limit", s.rate->predicted_limit},
                        {"extrapolated_limit", s.rate->extrapolated_limit},
                        {"max_relative_deviation", s.rate->max_relative_deviation},
                        {"min_ratio", s.rate->min_ratio}};
  }
  if (s.decay) {
    r["origin_decay"] = {{"times", s.decay->times},
                         {"rho0", s.decay->rho0},
                         {"predicted_scaled_limit", s.decay->predicted_scaled_limit},
                         {"last_scaled", s.decay->last_scaled},
                         {"relative_error", s.decay->relative_error},
                         {"decreasing_after_turn", s.decay->decreasing_after_turn}};
  }
  json checks = json::array();
  for (const auto& c : s.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"skipped", c.skipped}, {"note", c.note}});
  r["checks"] = checks;
  if (velocity_scale != 1.0) r["debug"] = {{"velocity_scale", velocity_scale}};
  return r;
}

emden::Analysis analyze_for_suite(const RunConfig& cfg, const selfsim::SolutionCase& c) {
  emden::IntegratorOptions io;
  io.tol = cfg.tol;
  return emden::analyze(c.emden(), verify::required_s_end(c, cfg.suite_options()), io);
}

std::string csv_field(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

std::string sweep_row(const RunConfig& cfg) {
  const auto c = cfg.solution_case();
  std::ostringstream row;
  row << selfsim::to_string(c.id()) << ',' << c.sigma() << ',' << format_number(c.xi()) << ','
      << format_number(c.alpha()) << ',' << format_number(cfg.a0) << ',' << format_number(cfg.a1) << ',';
  try {
    const auto an = analyze_for_suite(cfg, c);
    const auto& rep = an.report;
    row << emden::to_string(rep.classification) << ','
        << (rep.s_collapse_quadrature ? format_number(*rep.s_collapse_quadrature) : "") << ','
        << format_number(rep.theta) << ',';
    const auto m = verify::mass(c, an.trajectory, 0.0);
    row << (m.divergent ? std::string("div") : format_number(m.value)) << ',';
    const bool has_rate = rep.classification == emden::Classification::Collapse && c.alpha() > 0.0 && rep.theta > 0.0;
    row << (has_rate ? format_number(verify::predicted_rate_limit(c, rep)) : "") << ',';
    const auto suite = verify::run_suite(c, an.trajectory, rep, cfg.suite_options());
    std::string failed;
    for (const auto& ch : suite.checks)
      if (!ch.skipped && !ch.pass) failed += (failed.empty() ? "failed: " : " ") + ch.name;
    row << (suite.pass ? "true" : "false") << ',' << csv_field(failed);
  } catch (const std::exception& e) {
    // Keep the row shape; the failure is recorded in the note column.
    std::ostringstream partial;
    partial << selfsim::to_string(c.id()) << ',' << c.sigma() << ',' << format_number(c.xi()) << ','
            << format_number(c.alpha()) << ',' << format_number(cfg.a0) << ',' << format_number(cfg.a1)
            << ",error,,,,,false," << csv_field(std::string("error: ") + e.what());
    return partial.str();
  }
  return row.str();
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // no "-0" in output
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_emden(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const auto dir = prepare_dir(out_dir);
  emden::IntegratorOptions io;
  io.tol = cfg.tol;
  const auto an = emden::analyze(cfg.emden(), 3.0 * cfg.t_end.value_or(kDefaultGlobalTEnd), io);

  std::string csv = "s,a,a_dot,energy\n";
  for (const auto& st : an.trajectory.states()) {
    csv += format_number(st.s) + ',' + format_number(st.a) + ',' + format_number(st.a_dot) + ',' +
           format_number(emden::energy(cfg.emden(), st)) + '\n';
  }
  write_file(dir / "trajectory.csv", csv);

  json j;
  j["case"] = case_label(cfg);
  j["params"] = params_json(cfg);
  json blowup = blowup_json(an.report);
  blowup["s_max"] = an.trajectory.s_max();
  blowup["states"] = an.trajectory.states().size();
  blowup["stop_reason"] = an.trajectory.stop_reason() == emden::StopReason::Collapse ? "collapse" : "end";
  j["reports"] = {{"blowup", blowup}, {"energy", {{"max_relative_drift", max_energy_drift(an.trajectory)}}}};
  j["pass"] = true;
  write_file(dir / "report.json", j.dump(2) + "\n");
  out << "wrote " << (dir / "trajectory.csv").string() << " and " << (dir / "report.json").string() << '\n';
  return kOk;
}

int cmd_construct(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const auto c = cfg.solution_case();
  const auto dir = prepare_dir(out_dir);
  const double t1 = cfg.t_end.value_or(0.5);
  if (!(t1 > cfg.t0)) throw ConfigError("t_end must exceed t0");

  emden::IntegratorOptions io;
  io.tol = cfg.tol;
  const auto an = emden::analyze(c.emden(), 3.0 * t1, io);
  if (3.0 * t1 >= an.trajectory.s_max() && an.trajectory.stop_reason() == emden::StopReason::Collapse)
    throw verify::PreconditionError("grid end t = " + format_number(t1) + " reaches the collapse time T = " +
                                    format_number(*an.report.s_collapse_quadrature / 3.0));

  const verify::SpaceTimeGrid g{cfg.t0, t1, cfg.nt, cfg.x_min.value_or(-2.0), cfg.x_max.value_or(2.0), cfg.nx};
  if (!(g.x1 > g.x0)) throw ConfigError("x_max must exceed x_min");
  const auto edge = c.eta_boundary();

  std::string csv = "t,x,rho,u,eta,in_support\n";
  for (int i = 0; i < g.nt; ++i) {
    const double t = g.t(i);
    const auto st = selfsim::scale_at(an.trajectory, t);
    const double root = std::cbrt(st.a);
    for (int j = 0; j < g.nx; ++j) {
      const double x = g.x(j);
      const double eta = x / root;
      const bool inside = !edge || eta * eta < *edge * *edge;
      csv += format_number(t) + ',' + format_number(x) + ',' +
             format_number(selfsim::density_at_scale(c, st.a, x)) + ',' +
             format_number(selfsim::velocity_at_scale(st.a, st.a_dot, x)) + ',' + format_number(eta) + ',' +
             (inside ? "true" : "false") + '\n';
    }
  }
  write_file(dir / "fields.csv", csv);
  out << "wrote " << (dir / "fields.csv").string() << '\n';
  return kOk;
}

int cmd_verify(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  const auto c = cfg.solution_case();
  const auto dir = prepare_dir(out_dir);
  const auto an = analyze_for_suite(cfg, c);
  const auto suite = verify::run_suite(c, an.trajectory, an.report, cfg.suite_options());

  json j;
  j["case"] = case_label(cfg);
  j["params"] = params_json(cfg);
  j["reports"] = suite_json(suite, an.report, cfg.velocity_scale);
  j["reports"]["energy"] = {{"max_relative_drift", max_energy_drift(an.trajectory)}};
  j["pass"] = suite.pass;
  write_file(dir / "verify.json", j.dump(2) + "\n");

  for (const auto& ch : suite.checks)
    out << (ch.skipped ? "SKIP " : ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.note << '\n';
  return suite.pass ? kOk : kVerificationFailure;
}

int cmd_sweep(const std::vector<RunConfig>& cases, const std::string& out_dir, std::ostream& out) {
  const auto dir = prepare_dir(out_dir);
  std::vector<std::future<std::string>> rows;
  rows.reserve(cases.size());
  for (const auto& cfg : cases) rows.push_back(std::async(std::launch::async, sweep_row, std::cref(cfg)));

  std::string csv = "case_id,sigma,xi,alpha,a0,a1,classification,S,theta,mass,rate_limit,all_pass,note\n";
  for (auto& r : rows) csv += r.get() + '\n';
  write_file(dir / "sweep.csv", csv);
  out << "wrote " << (dir / "sweep.csv").string() << " (" << cases.size() << " cases)\n";
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-similar solutions of the 2-component Camassa-Holm system"};
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<double> tol;
  std::string grid_arg;
  std::string corrupt_arg;
  std::vector<std::string> sets;

  app.add_option("command", command, "emden | construct | verify | sweep")
      ->required()
      ->check(CLI::IsMember({"emden", "construct", "verify", "sweep"}));
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--tol", tol, "integrator tolerance");
  app.add_option("--grid", grid_arg, "grid size as nx,nt");
  app.add_option("--seed-corrupt", corrupt_arg, "debug: scale the velocity field, u=<factor>");
  app.add_option("--set", sets, "override a config key, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }

  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    auto blocks = parse_blocks(buf.str());

    KeyValues overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (tol) overrides["tol"] = format_number(*tol);
    if (!grid_arg.empty()) {
      const auto comma = grid_arg.find(',');
      if (comma == std::string::npos) throw ConfigError("--grid expects nx,nt");
      overrides["nx"] = grid_arg.substr(0, comma);
      overrides["nt"] = grid_arg.substr(comma + 1);
    }
    if (!corrupt_arg.empty()) {
      if (corrupt_arg.rfind("u=", 0) != 0) throw ConfigError("--seed-corrupt expects u=<factor>");
      overrides["velocity_scale"] = corrupt_arg.substr(2);
    }
    for (auto& b : blocks)
      for (const auto& [k, v] : overrides) b[k] = v;

    if (command == "sweep") {
      std::vector<RunConfig> cases;
      for (const auto& b : blocks) cases.push_back(make_config(b, true));
      return cmd_sweep(cases, out_dir, out);
    }
    if (blocks.size() != 1)
      throw ConfigError("command '" + command + "' expects exactly one configuration block, got " +
                        std::to_string(blocks.size()));
    if (command == "emden") return cmd_emden(make_config(blocks.front(), false), out_dir, out);
    const RunConfig cfg = make_config(blocks.front(), true);
    if (command == "construct") return cmd_construct(cfg, out_dir, out);
    return cmd_verify(cfg, out_dir, out);
  } catch (const emden::IntegrationFailure& e) {
    err << "numerical failure: " << e.what() << " (last state s=" << format_number(e.last_state.s)
        << ", a=" << format_number(e.last_state.a) << ")\n";
    return kNumericalFailure;
  } catch (const OutputError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::invalid_argument& e) {
    // ConfigError, InvalidCase, PreconditionError and parameter validation.
    err << "invalid input: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const emden::OutOfRange& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("ch2sim");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ch2::cli
