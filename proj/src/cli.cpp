#include "ptctc/cli.hpp"

#include "ptctc/errors.hpp"
#include "ptctc/io.hpp"
#include "ptctc/liouville.hpp"
#include "ptctc/meanfield.hpp"
#include "ptctc/spinops.hpp"
#include "ptctc/stability.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace ptctc::cli {

namespace {

using meanfield::MeanFieldModel;
using meanfield::State;
using ParamMap = std::map<std::string, double>;

constexpr Eigen::Index kDenseLimit = 10000;
constexpr double kLptThreshold = 1e-10;
constexpr double kNptThreshold = 1e-12;

const std::map<std::string, ParamMap>& model_defaults() {
  static const std::map<std::string, ParamMap> defaults = {
      {"ddm", {{"g", 2.0}, {"omega", 1.0}, {"kappa", 1.0}}},
      {"lmg", {{"g", 1.0}, {"kappa", 0.8}}},
      {"waveguide", {{"g", 1.0}, {"omega", 0.3}, {"gamma", 0.5}}},
      {"lattice", {{"g", 1.0}, {"omega", 0.5}, {"kappa", 1.0}, {"d", 1.0}}},
      {"pt-demo", {{"g", 1.0}, {"gamma", 0.5}}},
  };
  return defaults;
}

enum class KeyType { Number, Integer, String, NumberList, StringList, Bool };

const std::map<std::string, KeyType>& known_keys() {
  static const std::map<std::string, KeyType> keys = {
      {"model", KeyType::String},        {"g", KeyType::Number},
      {"omega", KeyType::Number},        {"kappa", KeyType::Number},
      {"gamma", KeyType::Number},        {"d", KeyType::Integer},
      {"spin", KeyType::Number},         {"spins", KeyType::NumberList},
      {"sweep", KeyType::StringList},    {"t_end", KeyType::Number},
      {"dt", KeyType::Number},           {"initial", KeyType::NumberList},
      {"abs_tol", KeyType::Number},      {"rel_tol", KeyType::Number},
      {"break_symmetry", KeyType::Number}, {"extra_jump", KeyType::StringList},
      {"samples", KeyType::Integer},     {"refine", KeyType::Bool},
      {"seed", KeyType::Integer},        {"threads", KeyType::Integer},
      {"output", KeyType::String},       {"format", KeyType::String},
  };
  return keys;
}

bool is_param_key(const std::string& key) {
  return key == "g" || key == "omega" || key == "kappa" || key == "gamma" || key == "d";
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError(what + ": '" + text + "' is not a number");
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw UsageError(what + ": '" + text + "' is not a finite number");
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream is(text);
  while (std::getline(is, part, sep)) out.push_back(part);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

// Converts a raw flag string into the JSON form used by config files.
nlohmann::json typed_flag(const std::string& key, const std::vector<std::string>& raw) {
  const KeyType type = known_keys().at(key);
  const std::string flag = "--" + key;
  switch (type) {
    case KeyType::Number:
      return parse_number(raw.back(), flag);
    case KeyType::Integer: {
      const double v = parse_number(raw.back(), flag);
      if (v != std::floor(v)) throw UsageError(flag + ": expected an integer");
      return static_cast<long long>(v);
    }
    case KeyType::String:
      return raw.back();
    case KeyType::Bool:
      return true;
    case KeyType::NumberList: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : raw) {
        for (const auto& part : split(r, ',')) arr.push_back(parse_number(part, flag));
      }
      return arr;
    }
    case KeyType::StringList:
      return raw;
  }
  return nullptr;
}

double json_number(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw UsageError(key + " must be finite");
    return d;
  }
  if (v.is_string()) return parse_number(v.get<std::string>(), key);
  throw UsageError(key + " must be a number");
}

long long json_integer(const nlohmann::json& v, const std::string& key) {
  const double d = json_number(v, key);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw UsageError(key + " must be an integer");
  return static_cast<long long>(d);
}

std::vector<double> json_numbers(const nlohmann::json& v, const std::string& key) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(json_number(e, key));
  } else if (v.is_string()) {
    for (const auto& part : split(v.get<std::string>(), ',')) out.push_back(parse_number(part, key));
  } else {
    out.push_back(json_number(v, key));
  }
  return out;
}

std::vector<std::string> json_strings(const nlohmann::json& v, const std::string& key) {
  std::vector<std::string> out;
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw UsageError(key + " must be a string or a list of strings");
  for (const auto& e : v) {
    if (!e.is_string()) throw UsageError(key + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::string param_base(const std::string& name) {
  const auto slash = name.find('/');
  return slash == std::string::npos ? name : name.substr(0, slash);
}

int twice_spin_of(double s) {
  try {
    return spinops::SpinBasis::from_spin(s).twice_spin();
  } catch (const DomainError& e) {
    throw UsageError(std::string("--spin: ") + e.what());
  }
}

// --- shared helpers -------------------------------------------------------

std::string describe_params(const ParamMap& p) {
  std::string out;
  for (const auto& [k, v] : p) {
    if (!out.empty()) out += " ";
    out += k + "=" + io::format_double(v);
  }
  return out;
}

ParamMap resolve_params(const RunConfig& cfg) {
  const std::string key = cfg.command == "pt-demo" ? "pt-demo" : cfg.model;
  ParamMap p = model_defaults().at(key);
  for (const auto& [k, v] : cfg.params) p[k] = v;
  return p;
}

ParamMap with_sweep_value(ParamMap p, const Sweep& sweep, double x) {
  const std::string base = param_base(sweep.param);
  p[base] = sweep.param == base ? x : x * p.at("g");
  return p;
}

MeanFieldModel meanfield_model(const std::string& model, const ParamMap& p, double epsilon) {
  MeanFieldModel m = [&] {
    if (model == "ddm") return MeanFieldModel::ddm(p.at("g"), p.at("omega"), p.at("kappa"));
    if (model == "lmg") return MeanFieldModel::lmg(p.at("g"), p.at("kappa"));
    if (model == "waveguide") {
      return MeanFieldModel::waveguide(p.at("g"), p.at("omega"), p.at("gamma"));
    }
    const double d = p.at("d");
    if (d != std::floor(d)) throw DomainError("lattice: d must be an integer");
    return MeanFieldModel::lattice(p.at("g"), p.at("omega"), p.at("kappa"), static_cast<int>(d));
  }();
  if (epsilon != 0.0) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a(2, 2) = epsilon;
    m = m.with_perturbation(a);
  }
  return m;
}

spinops::SpinModel spin_model(const RunConfig& cfg, const ParamMap& p, int twice_spin) {
  const auto basis = spinops::SpinBasis::from_twice_spin(twice_spin);
  spinops::SpinModel m = [&] {
    if (cfg.model == "ddm") return spinops::make_ddm(basis, p.at("g"), p.at("omega"), p.at("kappa"));
    if (cfg.model == "lmg") return spinops::make_lmg(basis, p.at("g"), p.at("kappa"));
    return spinops::make_waveguide(basis, p.at("g"), p.at("omega"), p.at("gamma"));
  }();
  const auto ops = spinops::build_spin_operators(basis);
  const double s = basis.spin();
  if (cfg.break_symmetry != 0.0) m.hamiltonian += cfg.break_symmetry * s * ops.m_z;
  for (const auto& [name, rate] : cfg.extra_jumps) {
    const ComplexMatrix& op = name == "pump"        ? ops.m_plus
                              : name == "decay"     ? ops.m_minus
                              : name == "dephase-x" ? ops.m_x
                              : name == "dephase-y" ? ops.m_y
                                                    : ops.m_z;
    m.jumps.push_back(std::sqrt(rate * s) * op);
  }
  return m;
}

// Runs f(0..n-1) on `threads` workers; results keep index order.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, int threads, F&& f) {
  std::vector<std::unique_ptr<R>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i] = std::make_unique<R>(f(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, threads));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(count, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<R> out;
  out.reserve(n);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

struct Output {
  std::string content;
};

io::Metadata metadata(const RunConfig& cfg) {
  io::Metadata meta;
  meta.command = cfg.command;
  meta.config_hash = io::config_hash(cfg.canonical);
  if (cfg.command != "pt-demo") meta.extra.emplace_back("model", cfg.model);
  meta.extra.emplace_back("params", describe_params(resolve_params(cfg)));
  return meta;
}

Output emit_table(const RunConfig& cfg, const io::Table& table, const io::Metadata& meta) {
  if (cfg.format == "json") return {io::table_json(table, meta).dump(2) + "\n"};
  return {io::render_csv(table, meta)};
}

io::Cell maybe(const std::optional<double>& v) {
  return v ? io::Cell(*v) : io::Cell(std::monostate{});
}

std::vector<std::string> state_names(const MeanFieldModel& m) {
  if (m.coordinates() == meanfield::Coordinates::Polar) return {"r_A", "r_B", "dtheta"};
  return {"m_x", "m_y", "m_z"};
}

// |max Re λ| at the stable fixed point of the fully broken phase, else 0.
double meanfield_gap(const MeanFieldModel& m) {
  const auto phase = stability::phase_classify(m);
  if (phase.phase != stability::Phase::FPTB) return 0.0;
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& fp : phase.fixed_points) {
    const auto r = stability::analyze_fixed_point(m, fp);
    if (r.classification.kind != stability::Kind::Stable) continue;
    const double rate = -std::max(r.classification.eigenvalues[0].real(),
                                  r.classification.eigenvalues[1].real());
    if (!(rate >= best)) best = std::isnan(best) ? rate : std::min(best, rate);
  }
  return best;
}

// --- commands -------------------------------------------------------------

Output cmd_evolve(const RunConfig& cfg) {
  const ParamMap p = resolve_params(cfg);
  io::Table table;
  io::Metadata meta = metadata(cfg);

  if (!cfg.twice_spins.empty()) {
    const auto model = spin_model(cfg, p, cfg.twice_spins.front());
    const auto ops = spinops::build_spin_operators(model.basis);
    Eigen::Vector3d dir(1.0, 0.0, 0.0);
    if (cfg.initial) dir = Eigen::Vector3d((*cfg.initial)[0], (*cfg.initial)[1], (*cfg.initial)[2]);
    const ComplexMatrix rho0 = spinops::coherent_state(model.basis, dir);
    liouville::EvolveOptions opts;
    opts.sample_dt = cfg.dt;
    if (cfg.abs_tol) opts.tolerances.abs_tol = *cfg.abs_tol;
    if (cfg.rel_tol) opts.tolerances.rel_tol = *cfg.rel_tol;
    table.columns = {"t", "m_x", "m_y", "m_z", "trace_residual"};
    liouville::evolve_density(model, rho0, cfg.t_end, opts, [&](double t, const ComplexMatrix& rho) {
      table.rows.push_back({t, liouville::expectation(rho, ops.m_x).real(),
                            liouville::expectation(rho, ops.m_y).real(),
                            liouville::expectation(rho, ops.m_z).real(),
                            std::abs(rho.trace() - Complex(1.0, 0.0))});
    });
    meta.extra.emplace_back("spin", io::format_double(model.basis.spin()));
    return emit_table(cfg, table, meta);
  }

  const MeanFieldModel model = meanfield_model(cfg.model, p, cfg.break_symmetry);
  const bool polar = model.coordinates() == meanfield::Coordinates::Polar;
  State q0(1.0, 0.0, 0.0);
  if (cfg.initial) q0 = State((*cfg.initial)[0], (*cfg.initial)[1], (*cfg.initial)[2]);
  if (polar) {
    if (!cfg.initial) q0 = meanfield::schwinger_map(State(1.0, 0.0, 0.0)).q;
    const double r = std::hypot(q0(0), q0(1));
    if (!(r > 0.0)) throw UsageError("--initial: r_A and r_B cannot both vanish");
    q0.head<2>() /= r;
  } else {
    if (!(q0.norm() > 0.0)) throw UsageError("--initial: direction must be non-zero");
    q0.normalize();
  }
  meanfield::IntegrateOptions opts;
  opts.sample_dt = cfg.dt;
  if (cfg.abs_tol) opts.tolerances.abs_tol = *cfg.abs_tol;
  if (cfg.rel_tol) opts.tolerances.rel_tol = *cfg.rel_tol;
  const auto traj = meanfield::integrate(model, q0, cfg.t_end, opts);
  table.columns = {"t"};
  for (const auto& n : state_names(model)) table.columns.push_back(n);
  table.columns.push_back("norm_residual");
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const State& q = traj.states[i];
    const double norm = polar ? std::hypot(q(0), q(1)) : q.norm();
    table.rows.push_back({traj.times[i], q(0), q(1), q(2), std::abs(norm - 1.0)});
  }
  return emit_table(cfg, table, meta);
}

struct GridPoint {
  std::vector<double> coords;
  std::string phase;
  long long n_symmetric = 0;
  long long n_broken = 0;
  std::optional<double> cep_metric;
  std::string status = "ok";
};

GridPoint classify_point(const RunConfig& cfg, const ParamMap& p, std::vector<double> coords) {
  GridPoint out;
  out.coords = std::move(coords);
  try {
    const MeanFieldModel m = meanfield_model(cfg.model, p, cfg.break_symmetry);
    const auto phase = stability::phase_classify(m);
    out.phase = stability::to_string(phase.phase);
    out.n_symmetric = phase.n_symmetric;
    out.n_broken = phase.n_broken;
    for (const auto& fp : phase.fixed_points) {
      if (!fp.pt_symmetric) continue;
      const double metric = stability::analyze_fixed_point(m, fp).cep.metric;
      out.cep_metric = std::max(out.cep_metric.value_or(0.0), metric);
    }
    if (!out.cep_metric) out.cep_metric = 0.0;
  } catch (const Error& e) {
    out.phase = "error";
    out.status = e.what();
  }
  return out;
}

Output cmd_phase_diagram(const RunConfig& cfg) {
  const ParamMap base = resolve_params(cfg);
  io::Metadata meta = metadata(cfg);

  if (cfg.refine) {
    const Sweep& s = cfg.sweeps.front();
    auto family = [&](double x) {
      return meanfield_model(cfg.model, with_sweep_value(base, s, x), cfg.break_symmetry);
    };
    const auto boundaries = stability::scan_phase_boundaries(family, s.from, s.to, s.steps);
    io::Table table;
    table.columns = {s.param,     "bracket_width", "below", "above",
                     "cep_metric", "cep",          "degenerate", "lambda_abs_max"};
    for (const auto& b : boundaries) {
      table.rows.push_back({b.location, b.bracket_width, std::string(stability::to_string(b.below)),
                            std::string(stability::to_string(b.above)), b.cep.metric,
                            static_cast<long long>(b.cep.cep),
                            static_cast<long long>(b.cep.degenerate),
                            std::max(std::abs(b.eigenvalues[0]), std::abs(b.eigenvalues[1]))});
    }
    return emit_table(cfg, table, meta);
  }

  const Sweep& s0 = cfg.sweeps[0];
  const int n0 = s0.steps;
  const int n1 = cfg.sweeps.size() > 1 ? cfg.sweeps[1].steps : 1;
  const auto n = static_cast<std::size_t>(n0) * static_cast<std::size_t>(n1);
  auto points = parallel_map<GridPoint>(n, cfg.threads, [&](std::size_t k) {
    const int i = static_cast<int>(k) / n1, j = static_cast<int>(k) % n1;
    ParamMap p = with_sweep_value(base, s0, s0.value(i));
    std::vector<double> coords{s0.value(i)};
    if (cfg.sweeps.size() > 1) {
      p = with_sweep_value(p, cfg.sweeps[1], cfg.sweeps[1].value(j));
      coords.push_back(cfg.sweeps[1].value(j));
    }
    return classify_point(cfg, p, coords);
  });

  auto at = [&](int i, int j) -> const GridPoint& { return points[i * n1 + j]; };
  io::Table table;
  for (const auto& s : cfg.sweeps) table.columns.push_back(s.param);
  for (const char* c : {"phase", "n_fp_symmetric", "n_fp_broken", "cep_metric_at_boundary", "status"}) {
    table.columns.emplace_back(c);
  }
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const GridPoint& g = at(i, j);
      bool boundary = false;
      for (const auto& [di, dj] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        const int a = i + di, b = j + dj;
        if (a >= 0 && a < n0 && b >= 0 && b < n1 && at(a, b).phase != g.phase) boundary = true;
      }
      std::vector<io::Cell> row;
      for (const double c : g.coords) row.push_back(c);
      row.push_back(g.phase);
      if (g.phase == "error") {
        row.insert(row.end(), 3, std::monostate{});
      } else {
        row.push_back(g.n_symmetric);
        row.push_back(g.n_broken);
        row.push_back(boundary ? maybe(g.cep_metric) : io::Cell(std::monostate{}));
      }
      row.push_back(g.status);
      table.rows.push_back(std::move(row));
    }
  }
  return emit_table(cfg, table, meta);
}

struct GapRow {
  double spin = 0.0;
  double x = 0.0;
  std::optional<double> gap_finite;
  std::optional<double> gap_meanfield;
  std::optional<double> mz_steady;
  std::optional<double> steady_count;
  std::string status = "ok";
};

Output cmd_gap_sweep(const RunConfig& cfg) {
  const ParamMap base = resolve_params(cfg);
  const bool swept = !cfg.sweeps.empty();
  const int nx = swept ? cfg.sweeps[0].steps : 1;
  const std::size_t n = cfg.twice_spins.size() * static_cast<std::size_t>(nx);
  auto rows = parallel_map<GapRow>(n, cfg.threads, [&](std::size_t k) {
    const int twice = cfg.twice_spins[k / nx];
    const int i = static_cast<int>(k % nx);
    GapRow row;
    row.spin = 0.5 * twice;
    ParamMap p = base;
    if (swept) {
      row.x = cfg.sweeps[0].value(i);
      p = with_sweep_value(base, cfg.sweeps[0], row.x);
    }
    try {
      row.gap_meanfield = meanfield_gap(meanfield_model(cfg.model, p, cfg.break_symmetry));
    } catch (const Error& e) {
      row.status = std::string("meanfield: ") + e.what();
    }
    try {
      const auto model = spin_model(cfg, p, twice);
      const auto sup = liouville::build_liouvillian(model, kDenseLimit);
      const auto spectrum = liouville::spectrum(sup);
      row.gap_finite = spectrum.gap;
      row.steady_count = spectrum.steady_count;
      const auto ss = liouville::steady_state(sup, spectrum);
      const auto ops = spinops::build_spin_operators(model.basis);
      row.mz_steady = liouville::expectation(ss.rho, ops.m_z).real();
    } catch (const Error& e) {
      row.status = std::string("finite: ") + e.what();
    }
    return row;
  });

  io::Table table;
  table.columns = {"S"};
  if (swept) table.columns.push_back(cfg.sweeps[0].param);
  for (const char* c : {"gap_finite", "gap_meanfield", "mz_steady", "steady_count", "status"}) {
    table.columns.emplace_back(c);
  }
  for (const auto& r : rows) {
    std::vector<io::Cell> row{r.spin};
    if (swept) row.push_back(r.x);
    row.push_back(maybe(r.gap_finite));
    row.push_back(maybe(r.gap_meanfield));
    row.push_back(maybe(r.mz_steady));
    row.push_back(r.steady_count ? io::Cell(static_cast<long long>(*r.steady_count))
                                 : io::Cell(std::monostate{}));
    row.push_back(r.status);
    table.rows.push_back(std::move(row));
  }
  return emit_table(cfg, table, metadata(cfg));
}

std::vector<State> random_states(const MeanFieldModel& model, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<State> out;
  while (static_cast<int>(out.size()) < count) {
    State m(normal(rng), normal(rng), normal(rng));
    if (m.norm() < 1e-6) continue;
    m.normalize();
    if (model.coordinates() == meanfield::Coordinates::Polar) {
      const auto p = meanfield::schwinger_map(m);
      if (p.pole || p.q(0) < 1e-6 || p.q(1) < 1e-6) continue;
      out.push_back(p.q);
    } else {
      out.push_back(m);
    }
  }
  return out;
}

Output cmd_symmetry_check(const RunConfig& cfg, std::ostream& err) {
  const ParamMap p = resolve_params(cfg);
  const MeanFieldModel mf = meanfield_model(cfg.model, p, cfg.break_symmetry);
  double npt = 0.0;
  for (const State& q : random_states(mf, cfg.samples, cfg.seed)) {
    npt = std::max(npt, meanfield::npt_residual(mf, q));
  }
  const bool npt_pass = npt < kNptThreshold;

  std::optional<double> lpt;
  std::optional<double> spin;
  if (cfg.model != "lattice") {
    const auto model = spin_model(cfg, p, cfg.twice_spins.front());
    lpt = spinops::check_lpt_symmetry(model, kLptThreshold, kDenseLimit).residual;
    spin = model.basis.spin();
  }
  const bool lpt_pass = !lpt || *lpt < kLptThreshold;
  const bool pass = npt_pass && lpt_pass;
  if (!pass) {
    err << "ptctc: symmetry-check: FAIL model=" << cfg.model
        << " npt_max_residual=" << io::format_double(npt)
        << " lpt_residual=" << (lpt ? io::format_double(*lpt) : "n/a") << "\n";
  }

  io::Metadata meta = metadata(cfg);
  if (cfg.format == "json") {
    nlohmann::json report;
    report["model"] = cfg.model;
    report["spin"] = spin ? nlohmann::json(*spin) : nlohmann::json(nullptr);
    report["lpt_residual"] = lpt ? nlohmann::json(*lpt) : nlohmann::json(nullptr);
    report["lpt_threshold"] = kLptThreshold;
    report["lpt_pass"] = lpt_pass;
    report["npt_max_residual"] = npt;
    report["npt_threshold"] = kNptThreshold;
    report["npt_samples"] = cfg.samples;
    report["npt_pass"] = npt_pass;
    report["pass"] = pass;
    nlohmann::json doc;
    doc["meta"] = io::metadata_json(meta, {});
    doc["report"] = report;
    return {doc.dump(2) + "\n"};
  }
  io::Table table;
  table.columns = {"model",           "spin",         "lpt_residual", "lpt_pass",
                   "npt_max_residual", "npt_samples", "npt_pass",     "pass"};
  table.rows.push_back({cfg.model, maybe(spin), maybe(lpt), static_cast<long long>(lpt_pass), npt,
                        static_cast<long long>(cfg.samples), static_cast<long long>(npt_pass),
                        static_cast<long long>(pass)});
  return emit_table(cfg, table, meta);
}

nlohmann::json report_json(const MeanFieldModel& m, const stability::StabilityReport& r) {
  nlohmann::json fp;
  const auto names = state_names(m);
  nlohmann::json coords;
  for (int i = 0; i < 3; ++i) coords[names[i]] = r.fixed_point.coords(i);
  fp["coords"] = coords;
  fp["residual"] = r.fixed_point.residual;
  fp["pt_symmetric"] = r.fixed_point.pt_symmetric;
  fp["source"] = r.fixed_point.source == stability::Source::ClosedForm ? "closed_form" : "newton";
  fp["classification"] = stability::to_string(r.classification.kind);
  fp["eigenvalues"] = nlohmann::json::array();
  for (const auto& z : r.classification.eigenvalues) fp["eigenvalues"].push_back({z.real(), z.imag()});
  const auto& j = r.jacobian.matrix;
  fp["jacobian"] = {{j(0, 0), j(0, 1)}, {j(1, 0), j(1, 1)}};
  fp["chart"] = {names[r.jacobian.coordinates[0]], names[r.jacobian.coordinates[1]]};
  fp["alpha"] = r.classification.alpha ? nlohmann::json(*r.classification.alpha) : nullptr;
  fp["beta"] = r.classification.beta ? nlohmann::json(*r.classification.beta) : nullptr;
  fp["cep_metric"] = r.cep.metric;
  fp["cep"] = r.cep.cep;
  fp["degenerate"] = r.cep.degenerate;
  return fp;
}

Output cmd_stability_report(const RunConfig& cfg) {
  const ParamMap base = resolve_params(cfg);
  const bool swept = !cfg.sweeps.empty();
  const int nx = swept ? cfg.sweeps[0].steps : 1;

  struct PointReport {
    ParamMap params;
    double x = 0.0;
    std::string phase;
    std::vector<stability::StabilityReport> reports;
    std::string status = "ok";
  };
  auto points = parallel_map<PointReport>(static_cast<std::size_t>(nx), cfg.threads, [&](std::size_t i) {
    PointReport pr;
    pr.params = base;
    if (swept) {
      pr.x = cfg.sweeps[0].value(static_cast<int>(i));
      pr.params = with_sweep_value(base, cfg.sweeps[0], pr.x);
    }
    try {
      const MeanFieldModel m = meanfield_model(cfg.model, pr.params, cfg.break_symmetry);
      const auto phase = stability::phase_classify(m);
      pr.phase = stability::to_string(phase.phase);
      for (const auto& fp : phase.fixed_points) pr.reports.push_back(stability::analyze_fixed_point(m, fp));
    } catch (const Error& e) {
      pr.phase = "error";
      pr.status = e.what();
    }
    return pr;
  });

  const MeanFieldModel proto = meanfield_model(cfg.model, base, 0.0);
  const auto names = state_names(proto);
  io::Metadata meta = metadata(cfg);
  if (cfg.format == "json") {
    nlohmann::json doc;
    doc["meta"] = io::metadata_json(meta, {});
    doc["points"] = nlohmann::json::array();
    for (const auto& pr : points) {
      nlohmann::json point;
      point["params"] = pr.params;
      point["phase"] = pr.phase;
      point["status"] = pr.status;
      point["fixed_points"] = nlohmann::json::array();
      for (const auto& r : pr.reports) point["fixed_points"].push_back(report_json(proto, r));
      doc["points"].push_back(point);
    }
    return {doc.dump(2) + "\n"};
  }

  io::Table table;
  if (swept) table.columns.push_back(cfg.sweeps[0].param);
  table.columns.insert(table.columns.end(), {"phase", "index", names[0], names[1], names[2],
                                             "residual", "pt_symmetric", "source", "classification",
                                             "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im",
                                             "alpha", "beta", "cep_metric", "cep", "degenerate",
                                             "status"});
  for (const auto& pr : points) {
    if (pr.reports.empty()) {
      std::vector<io::Cell> row;
      if (swept) row.push_back(pr.x);
      row.push_back(pr.phase);
      row.insert(row.end(), 17, std::monostate{});
      row.push_back(pr.status);
      table.rows.push_back(std::move(row));
      continue;
    }
    long long index = 0;
    for (const auto& r : pr.reports) {
      std::vector<io::Cell> row;
      if (swept) row.push_back(pr.x);
      const auto& c = r.classification;
      row.insert(row.end(),
                 {pr.phase, index++, r.fixed_point.coords(0), r.fixed_point.coords(1),
                  r.fixed_point.coords(2), r.fixed_point.residual,
                  static_cast<long long>(r.fixed_point.pt_symmetric),
                  std::string(r.fixed_point.source == stability::Source::ClosedForm ? "closed_form"
                                                                                    : "newton"),
                  std::string(stability::to_string(c.kind)), c.eigenvalues[0].real(),
                  c.eigenvalues[0].imag(), c.eigenvalues[1].real(), c.eigenvalues[1].imag(),
                  maybe(c.alpha), maybe(c.beta), r.cep.metric, static_cast<long long>(r.cep.cep),
                  static_cast<long long>(r.cep.degenerate), pr.status});
      table.rows.push_back(std::move(row));
    }
  }
  return emit_table(cfg, table, meta);
}

Output cmd_pt_demo(const RunConfig& cfg) {
  const ParamMap base = resolve_params(cfg);
  const bool swept = !cfg.sweeps.empty();
  const int nx = swept ? cfg.sweeps[0].steps : 1;
  io::Table table;
  table.columns = {"g", "gamma", "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im", "regime"};
  for (int i = 0; i < nx; ++i) {
    const ParamMap p = swept ? with_sweep_value(base, cfg.sweeps[0], cfg.sweeps[0].value(i)) : base;
    const auto demo = stability::nonhermitian_pt_demo(p.at("g"), p.at("gamma"));
    table.rows.push_back({p.at("g"), p.at("gamma"), demo.eigenvalues[0].real(),
                          demo.eigenvalues[0].imag(), demo.eigenvalues[1].real(),
                          demo.eigenvalues[1].imag(), std::string(stability::to_string(demo.regime))});
  }
  return emit_table(cfg, table, metadata(cfg));
}

// --- argument wiring -------------------------------------------------------

struct Captured {
  std::map<std::string, std::vector<std::string>> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
};

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

void add_keys(CLI::App* app, Captured& cap, const std::vector<std::pair<std::string, std::string>>& keys) {
  for (const auto& [key, help] : keys) {
    CLI::Option* opt = nullptr;
    if (known_keys().at(key) == KeyType::Bool) {
      opt = app->add_flag(flag_name(key), help);
    } else {
      opt = app->add_option(flag_name(key), cap.values[key], help)->allow_extra_args(false);
      if (known_keys().at(key) != KeyType::StringList && known_keys().at(key) != KeyType::NumberList) {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
    }
    cap.options.emplace_back(key, opt);
  }
}

const std::vector<std::pair<std::string, std::string>> kModelKeys = {
    {"model", "ddm | lmg | waveguide | lattice"},
    {"g", "coherent drive / coupling g"},
    {"omega", "omega"},
    {"kappa", "collective decay rate kappa"},
    {"gamma", "waveguide decay rate gamma"},
    {"d", "lattice dimension d"},
};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

void report_error(std::ostream& err, const char* kind, int code, const std::string& message) {
  err << "ptctc: error: kind=" << kind << " code=" << code << " message=\"" << escape(message)
      << "\"\n";
}

}  // namespace

Sweep parse_sweep(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 4 || parts[0].empty()) {
    throw UsageError("--sweep: expected name:from:to:steps, got '" + text + "'");
  }
  Sweep s;
  s.param = parts[0];
  s.from = parse_number(parts[1], "--sweep from");
  s.to = parse_number(parts[2], "--sweep to");
  const double steps = parse_number(parts[3], "--sweep steps");
  if (steps != std::floor(steps) || steps < 2 || steps > 1e6) {
    throw UsageError("--sweep: steps must be an integer >= 2");
  }
  s.steps = static_cast<int>(steps);
  if (!(s.from < s.to)) throw UsageError("--sweep: need from < to");
  return s;
}

RunConfig make_config(const std::string& command, const nlohmann::json& settings) {
  if (!settings.is_object()) throw UsageError("configuration must be a JSON object");
  RunConfig cfg;
  cfg.command = command;
  for (const auto& [key, value] : settings.items()) {
    if (!known_keys().count(key)) throw UsageError("unknown configuration key '" + key + "'");
  }
  if (settings.contains("model")) {
    if (!settings["model"].is_string()) throw UsageError("model must be a string");
    cfg.model = settings["model"].get<std::string>();
  }
  const bool demo = command == "pt-demo";
  if (!demo && !model_defaults().count(cfg.model)) {
    throw UsageError("unknown model '" + cfg.model + "' (expected ddm, lmg, waveguide, lattice)");
  }
  const ParamMap& allowed = model_defaults().at(demo ? "pt-demo" : cfg.model);
  const std::string owner = demo ? "pt-demo" : "model " + cfg.model;

  for (const auto& [key, value] : settings.items()) {
    if (!is_param_key(key)) continue;
    if (!allowed.count(key)) throw UsageError("parameter '" + key + "' does not apply to " + owner);
    cfg.params[key] = key == "d" ? static_cast<double>(json_integer(value, key)) : json_number(value, key);
  }
  if (settings.contains("sweep")) {
    for (const auto& s : json_strings(settings["sweep"], "sweep")) {
      Sweep sweep = parse_sweep(s);
      if (!allowed.count(param_base(sweep.param)) ||
          (sweep.param != param_base(sweep.param) && sweep.param != param_base(sweep.param) + "/g")) {
        throw UsageError("--sweep: '" + sweep.param + "' is not a parameter of " + owner);
      }
      cfg.sweeps.push_back(sweep);
    }
  }
  std::vector<double> spins;
  if (settings.contains("spins")) spins = json_numbers(settings["spins"], "spins");
  if (settings.contains("spin")) {
    if (!settings.contains("spins")) spins = {json_number(settings["spin"], "spin")};
  }
  for (const double s : spins) {
    const int twice = twice_spin_of(s);
    if (static_cast<Eigen::Index>(twice + 1) * (twice + 1) > kDenseLimit) {
      throw UsageError("spin " + io::format_double(s) + " exceeds the dense limit (2S+1)^2 <= " +
                       std::to_string(kDenseLimit));
    }
    cfg.twice_spins.push_back(twice);
  }
  auto number = [&](const char* key, double& target) {
    if (settings.contains(key)) target = json_number(settings[key], key);
  };
  number("t_end", cfg.t_end);
  number("dt", cfg.dt);
  number("break_symmetry", cfg.break_symmetry);
  if (!(cfg.t_end > 0.0)) throw UsageError("t_end must be > 0");
  if (!(cfg.dt > 0.0)) throw UsageError("dt must be > 0");
  for (const char* key : {"abs_tol", "rel_tol"}) {
    if (!settings.contains(key)) continue;
    const double v = json_number(settings[key], key);
    if (!(v > 0.0)) throw UsageError(std::string(key) + " must be > 0");
    (std::string(key) == "abs_tol" ? cfg.abs_tol : cfg.rel_tol) = v;
  }
  if (settings.contains("initial")) {
    cfg.initial = json_numbers(settings["initial"], "initial");
    if (cfg.initial->size() != 3) throw UsageError("initial must have three components");
  }
  if (settings.contains("extra_jump")) {
    for (const auto& s : json_strings(settings["extra_jump"], "extra_jump")) {
      const auto parts = split(s, ':');
      static const std::vector<std::string> names = {"pump", "decay", "dephase-x", "dephase-y",
                                                     "dephase-z"};
      if (parts.size() != 2 || std::find(names.begin(), names.end(), parts[0]) == names.end()) {
        throw UsageError("--extra-jump: expected one of pump|decay|dephase-x|dephase-y|dephase-z "
                         "followed by :rate, got '" + s + "'");
      }
      const double rate = parse_number(parts[1], "--extra-jump rate");
      if (rate < 0.0) throw UsageError("--extra-jump: rate must be >= 0");
      cfg.extra_jumps.emplace_back(parts[0], rate);
    }
  }
  if (settings.contains("samples")) {
    const long long v = json_integer(settings["samples"], "samples");
    if (v < 1 || v > 10'000'000) throw UsageError("samples must be in [1, 1e7]");
    cfg.samples = static_cast<int>(v);
  }
  if (settings.contains("refine")) {
    if (!settings["refine"].is_boolean()) throw UsageError("refine must be true or false");
    cfg.refine = settings["refine"].get<bool>();
  }
  if (settings.contains("seed")) {
    const long long v = json_integer(settings["seed"], "seed");
    if (v < 0) throw UsageError("seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(v);
  }
  if (settings.contains("threads")) {
    const long long v = json_integer(settings["threads"], "threads");
    if (v < 0 || v > 1024) throw UsageError("threads must be in [0, 1024]");
    cfg.threads = v == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                         : static_cast<int>(v);
  }
  if (settings.contains("output")) {
    if (!settings["output"].is_string()) throw UsageError("output must be a path string");
    cfg.output = settings["output"].get<std::string>();
  }
  if (settings.contains("format")) {
    if (!settings["format"].is_string()) throw UsageError("format must be csv or json");
    cfg.format = settings["format"].get<std::string>();
  }
  if (cfg.format != "csv" && cfg.format != "json") throw UsageError("format must be csv or json");

  // Per-command requirements.
  const bool finite_capable = cfg.model != "lattice";
  if (command == "evolve") {
    if (cfg.twice_spins.size() > 1) throw UsageError("evolve takes a single --spin");
    if (!cfg.twice_spins.empty() && !finite_capable) {
      throw UsageError("the lattice model has no finite-spin form; drop --spin");
    }
  } else if (command == "phase-diagram") {
    if (cfg.sweeps.empty() || cfg.sweeps.size() > 2) {
      throw UsageError("phase-diagram needs one or two --sweep axes");
    }
    if (cfg.refine && cfg.sweeps.size() != 1) throw UsageError("--refine needs exactly one --sweep");
  } else if (command == "gap-sweep") {
    if (!finite_capable) throw UsageError("gap-sweep needs a finite-spin model (ddm, lmg, waveguide)");
    if (cfg.twice_spins.empty()) throw UsageError("gap-sweep needs --spin or --spins");
    if (cfg.sweeps.size() > 1) throw UsageError("gap-sweep takes at most one --sweep");
  } else if (command == "symmetry-check") {
    if (cfg.twice_spins.size() > 1) throw UsageError("symmetry-check takes a single --spin");
    if (cfg.twice_spins.empty() && finite_capable) cfg.twice_spins.push_back(10);  // S = 5
    if (!cfg.extra_jumps.empty() && !finite_capable) {
      throw UsageError("--extra-jump needs a finite-spin model");
    }
  } else if (command == "stability-report" || command == "pt-demo") {
    if (cfg.sweeps.size() > 1) throw UsageError(command + " takes at most one --sweep");
  }

  cfg.canonical = settings;
  cfg.canonical.erase("output");
  cfg.canonical.erase("threads");
  cfg.canonical["command"] = command;
  return cfg;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collective-spin PT symmetry toolkit: mean-field flows, fixed-point stability and "
               "finite-S Lindbladian spectra.",
               "ptctc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kVersion);

  Captured global;
  std::string config_path;
  add_keys(&app, global,
           {{"output", "output file (stdout when omitted)"},
            {"format", "csv | json"},
            {"threads", "worker threads (0 = all cores)"},
            {"seed", "seed for random sampling"}});
  CLI::Option* config_opt = app.add_option("--config", config_path, "JSON config; flags override it");

  struct Sub {
    std::string name;
    std::string help;
    std::vector<std::pair<std::string, std::string>> keys;
  };
  const std::vector<Sub> subs = {
      {"evolve", "integrate the mean-field flow, or the density matrix with --spin",
       {{"spin", "finite spin S"}, {"t_end", "final time"}, {"dt", "sampling interval"},
        {"initial", "initial state x,y,z (or r_A,r_B,dtheta)"}, {"abs_tol", "absolute tolerance"},
        {"rel_tol", "relative tolerance"}, {"break_symmetry", "add eps*S*m_z / eps*(0,0,m_z)"}}},
      {"phase-diagram", "label PT / PPTB / FPTB phases on a 1-D or 2-D grid",
       {{"sweep", "name:from:to:steps (name may be x/g)"},
        {"refine", "bisect label changes of a 1-D sweep and report boundaries"},
        {"break_symmetry", "add eps*(0,0,m_z) to the flow"}}},
      {"gap-sweep", "Lindbladian gap at finite S against the mean-field decay rate",
       {{"spin", "finite spin S"}, {"spins", "comma-separated list of S"},
        {"sweep", "name:from:to:steps"}, {"break_symmetry", "add eps*S*m_z"}}},
      {"symmetry-check", "L-PT residual of the Lindbladian and n-PT residual of the flow",
       {{"spin", "finite spin S (default 5)"}, {"samples", "random states for the n-PT check"},
        {"break_symmetry", "add eps*S*m_z / eps*(0,0,m_z)"},
        {"extra_jump", "extra jump kind:rate (pump, decay, dephase-x|y|z)"}}},
      {"stability-report", "fixed points, reduced Jacobians, classification and CEP metric",
       {{"sweep", "name:from:to:steps"}, {"break_symmetry", "add eps*(0,0,m_z) to the flow"}}},
      {"pt-demo", "2x2 gain/loss Hamiltonian [[-i Gamma, g], [g, i Gamma]]",
       {{"g", "coupling g"}, {"gamma", "gain/loss Gamma"}, {"sweep", "name:from:to:steps"}}},
  };
  std::map<std::string, std::unique_ptr<Captured>> captured;
  std::map<std::string, CLI::App*> apps;
  for (const auto& sub : subs) {
    CLI::App* s = app.add_subcommand(sub.name, sub.help);
    s->fallthrough();
    auto cap = std::make_unique<Captured>();
    if (sub.name != "pt-demo") add_keys(s, *cap, kModelKeys);
    add_keys(s, *cap, sub.keys);
    captured[sub.name] = std::move(cap);
    apps[sub.name] = s;
  }

  std::string command;
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }
    command = app.get_subcommands().front()->get_name();

    nlohmann::json settings = nlohmann::json::object();
    if (config_opt->count() > 0) {
      std::ifstream f(config_path);
      if (!f) throw UsageError("cannot read config file '" + config_path + "'");
      try {
        settings = nlohmann::json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file '" + config_path + "' is not valid JSON: " + e.what());
      }
      if (!settings.is_object()) throw UsageError("config file must hold a JSON object");
    }
    for (const Captured* cap : {&global, captured.at(command).get()}) {
      for (const auto& [key, opt] : cap->options) {
        if (opt->count() == 0) continue;
        settings[key] = known_keys().at(key) == KeyType::Bool ? nlohmann::json(true)
                                                               : typed_flag(key, cap->values.at(key));
      }
    }
    const RunConfig cfg = make_config(command, settings);

    Output result;
    if (command == "evolve") result = cmd_evolve(cfg);
    else if (command == "phase-diagram") result = cmd_phase_diagram(cfg);
    else if (command == "gap-sweep") result = cmd_gap_sweep(cfg);
    else if (command == "symmetry-check") result = cmd_symmetry_check(cfg, err);
    else if (command == "stability-report") result = cmd_stability_report(cfg);
    else result = cmd_pt_demo(cfg);

    if (cfg.output.empty()) {
      out << result.content;
      out.flush();
    } else {
      try {
        io::write_atomic(cfg.output, result.content);
      } catch (const std::exception& e) {
        report_error(err, "io", 1, e.what());
        return 1;
      }
    }
    return 0;
  } catch (const UsageError& e) {
    report_error(err, "usage", 2, e.what());
    return 2;
  } catch (const DomainError& e) {
    report_error(err, "usage", 2, e.what());
    return 2;
  } catch (const DimensionError& e) {
    report_error(err, "usage", 2, e.what());
    return 2;
  } catch (const Error& e) {
    report_error(err, "numerical", 1, e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error(err, "numerical", 1, e.what());
    return 1;
  }
}

}  // namespace ptctc::cli
