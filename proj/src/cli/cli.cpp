#include "drlab/cli.hpp"

#include "drlab/asymptotics.hpp"
#include "drlab/errors.hpp"
#include "drlab/exp_variant.hpp"
#include "drlab/glaw.hpp"
#include "drlab/oracle.hpp"
#include "drlab/regime.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace drlab {

using Json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string checksum_string(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

namespace {

// Formatting ------------------------------------------------------------------

template <class Real>
std::string cell(const Real& x) {
  return format_real(x);
}

std::string cell(std::size_t x) { return std::to_string(x); }

template <class Real>
Json num(const Real& x) {
  if constexpr (std::is_same_v<Real, double>)
    return std::isfinite(x) ? Json(x) : Json(nullptr);
  else
    return Json(format_real(x));
}

template <class Real>
Json value_log(const Real& value, const Real& log) {
  return Json{{"value", num(value)}, {"log", num(log)}};
}

template <class Real>
Json optional_num(const std::optional<Real>& x) {
  return x ? num(*x) : Json(nullptr);
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string str() const {
    std::string s;
    append(s, header_);
    for (const auto& row : rows_) append(s, row);
    return s;
  }

 private:
  static void append(std::string& s, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) s += ',';
      s += row[i];
    }
    s += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Command context -------------------------------------------------------------

struct Context {
  std::string command;
  std::string out_path;
  std::string manifest_path;
  std::string precision_text = "standard";
  std::optional<std::uint64_t> seed;
  CLI::App* app = nullptr;
  std::ostream* out = nullptr;

  Precision precision() const { return Precision::parse(precision_text); }

  Json parameters() const {
    Json params = Json::object();
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "out" || name == "manifest") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
      } else {
        value = opt->get_default_str();
      }
      params[name] = value;
    }
    return params;
  }

  Json manifest(std::string_view payload) const {
    Json m;
    m["command"] = command;
    m["parameters"] = parameters();
    m["seed"] = seed ? Json(*seed) : Json(nullptr);
    m["precision"] = precision().to_string();
    m["tool_version"] = kToolVersion;
    m["output_checksum"] = checksum_string(payload);
    return m;
  }

  void write_file(const std::string& path, const std::string& text) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
  }

  void emit(const std::string& text, const std::string& manifest_text) const {
    if (out_path.empty()) {
      *out << text;
    } else {
      write_file(out_path, text);
    }
    std::string manifest_target = manifest_path;
    if (manifest_target.empty() && !out_path.empty()) manifest_target = out_path + ".manifest.json";
    if (!manifest_target.empty()) write_file(manifest_target, manifest_text);
  }

  // CSV is accompanied by its manifest (sidecar file).
  void emit_csv(const CsvTable& table) const {
    const std::string text = table.str();
    emit(text, manifest(text).dump(2) + "\n");
  }

  // JSON embeds its manifest; the checksum covers the document without it.
  void emit_json(Json doc) const {
    const std::string payload = doc.dump(2);
    Json m = manifest(payload);
    doc["manifest"] = m;
    emit(doc.dump(2) + "\n", m.dump(2) + "\n");
  }
};

template <class F>
void with_precision(const Context& ctx, F&& f) {
  const Precision precision = ctx.precision();
  if (precision.mode == PrecisionMode::Standard) {
    f.template operator()<double>(precision);
  } else {
    ScopedPrecision scope(precision.digits);
    f.template operator()<Extended>(precision);
  }
}

void require_standard(const Context& ctx) {
  if (ctx.precision().mode != PrecisionMode::Standard)
    throw ArgumentError(ctx.command + " runs in standard precision only");
}

template <class Real>
Real parse_real(const std::string& text, const char* name) {
  try {
    return RealTraits<Real>::parse(text);
  } catch (const std::exception&) {
    throw ArgumentError(std::string("--") + name + ": not a number: '" + text + "'");
  }
}

struct ModelArgs {
  std::string m, r0, p0;
};

void add_common(CLI::App* sub, Context& ctx) {
  sub->add_option("--precision", ctx.precision_text, "standard or extended[:digits]")
      ->capture_default_str();
  sub->add_option("--out", ctx.out_path, "output file (default: standard output)");
  sub->add_option("--manifest", ctx.manifest_path,
                  "manifest file (default: <out>.manifest.json when --out is given)");
}

void add_model(CLI::App* sub, ModelArgs& a, bool with_p0 = true) {
  sub->add_option("--m", a.m, "offspring mean, > 1")->required();
  sub->add_option("--r0", a.r0, "initial r_0 in (0, 1)")->required();
  if (with_p0) sub->add_option("--p0", a.p0, "initial p_0 in (0, 1)")->required();
}

template <class Real>
ModelConfig<Real> make_config(const ModelArgs& a, const Precision& precision) {
  return ModelConfig<Real>(parse_real<Real>(a.m, "m"), precision);
}

template <class Real>
GeometricTypeLaw<Real> make_law(const ModelArgs& a) {
  return GeometricTypeLaw<Real>(parse_real<Real>(a.r0, "r0"), parse_real<Real>(a.p0, "p0"));
}

// iterate ---------------------------------------------------------------------

struct IterateArgs {
  ModelArgs model;
  std::size_t steps = 0;
  std::string format = "csv";
};

template <class Real>
void run_iterate(const Context& ctx, const IterateArgs& a, const Precision& precision) {
  auto config = make_config<Real>(a.model, precision);
  if (a.steps > config.max_steps - 2)
    throw ResourceLimitError("requested steps exceed the step budget");
  // two extra records so that every printed row has all residuals
  auto traj = iterate(make_law<Real>(a.model), config, a.steps + 2);
  auto rows = identity_residuals(traj);

  if (a.format == "json") {
    Json list = Json::array();
    for (std::size_t n = 0; n <= a.steps; ++n) {
      const auto& law = traj[n].law;
      const auto& row = rows[n];
      list.push_back(Json{{"n", n},
                          {"r", value_log(law.r(), law.log_r())},
                          {"p", num(law.p())},
                          {"survival", value_log(survival(law), law.log_one_minus_p())},
                          {"mean", value_log(mean(law), log_mean(law))},
                          {"q_next", num(*traj[n + 1].q_next)},
                          {"R1", num(row.r1_rel)},
                          {"R2", num(*row.r2_rel)},
                          {"R3_corrected", num(*row.r3_corrected_rel)},
                          {"R3_paper", num(*row.r3_paper)}});
    }
    ctx.emit_json(Json{{"rows", list}});
    return;
  }
  CsvTable table({"n", "r", "p", "log_r", "log_one_minus_p", "mean", "survival", "q_next", "R1",
                  "R2", "R3_corrected", "R3_paper"});
  for (std::size_t n = 0; n <= a.steps; ++n) {
    const auto& law = traj[n].law;
    const auto& row = rows[n];
    table.add({cell(n), cell(law.r()), cell(law.p()), cell(law.log_r()),
               cell(law.log_one_minus_p()), cell(mean(law)), cell(survival(law)),
               cell(*traj[n + 1].q_next), cell(row.r1_rel), cell(*row.r2_rel),
               cell(*row.r3_corrected_rel), cell(*row.r3_paper)});
  }
  ctx.emit_csv(table);
}

// classify --------------------------------------------------------------------

struct ClassifyArgs {
  ModelArgs model;
  ClassifyOptions options;
};

template <class Real>
Json report_json(const RegimeReport<Real>& rep) {
  Json j;
  j["regime"] = to_string(rep.regime);
  j["r_star"] = optional_num(rep.r_star);
  j["p_star"] = optional_num(rep.p_star);
  j["gamma_star"] = optional_num(rep.gamma_star);
  if (rep.free_energy)
    j["free_energy"] = value_log(rep.free_energy->value, rep.free_energy->log);
  else if (rep.free_energy_zero)
    j["free_energy"] = Json{{"value", 0}, {"log", nullptr}};
  else
    j["free_energy"] = nullptr;
  j["K"] = rep.K ? value_log(rep.K->value, rep.K->log) : Json(nullptr);
  j["Q"] = rep.Q ? num(rep.Q->value) : Json(nullptr);
  j["iterations_used"] = rep.iterations_used;
  const auto& d = rep.diagnostics;
  j["diagnostics"] = Json{{"final_r", num(d.final_r)},
                          {"final_log_one_minus_p", num(d.final_log_one_minus_p)},
                          {"final_gap", num(d.final_gap)},
                          {"delta", d.delta},
                          {"budget", d.budget}};
  return j;
}

template <class Real>
void run_classify(const Context& ctx, const ClassifyArgs& a, const Precision& precision) {
  auto config = make_config<Real>(a.model, precision);
  auto rep = classify(make_law<Real>(a.model), config, a.options);
  ctx.emit_json(report_json(rep));
}

// critical-locate -------------------------------------------------------------

struct LocateArgs {
  ModelArgs model;
  std::string tol = "1e-12";
  LocateOptions options;
};

template <class Real>
void run_locate(const Context& ctx, const LocateArgs& a, const Precision& precision) {
  auto config = make_config<Real>(a.model, precision);
  auto res = critical_locate(parse_real<Real>(a.model.r0, "r0"), parse_real<Real>(a.tol, "tol"),
                             config, a.options);
  ctx.emit_json(Json{{"r0", num(res.r0)},
                     {"p0_critical", num(res.p0_critical)},
                     {"bracket_lo", num(res.bracket_lo)},
                     {"bracket_hi", num(res.bracket_hi)},
                     {"bracket_width", num(res.bracket_width)},
                     {"monotonicity_violations", res.monotonicity_violations},
                     {"flagged", res.flagged()},
                     {"probes", res.probes},
                     {"iterations", res.iterations}});
}

// phase-scan ------------------------------------------------------------------

struct ScanArgs {
  std::string m;
  GridRange r0{0, 1, 100};
  GridRange p0{0, 1, 100};
  ScanOptions options;
};

template <class Real>
void run_scan(const Context& ctx, const ScanArgs& a, const Precision& precision) {
  ModelConfig<Real> config(parse_real<Real>(a.m, "m"), precision);
  ScanOptions options = a.options;
  options.classify.with_constants = false;
  auto cells = phase_scan(a.r0, a.p0, config, options);
  CsvTable table({"r0", "p0", "regime", "r_star", "iterations_used"});
  for (const auto& c : cells)
    table.add({cell(c.r0), cell(c.p0), regime_code(c.report.regime),
               c.report.r_star ? cell(*c.report.r_star) : std::string(),
               cell(c.report.iterations_used)});
  ctx.emit_csv(table);
}

// expand ----------------------------------------------------------------------

struct ExpandArgs {
  ModelArgs model;
  std::size_t steps = 100;
  std::string variant = "printed";
  std::string regime = "auto";
  bool locate = false;
  std::string tol = "1e-12";
  EstimateOptions sampling;
  ClassifyOptions classify_options;
  std::string format = "csv";
};

template <class Real>
void run_expand(const Context& ctx, const ExpandArgs& a, const Precision& precision) {
  auto config = make_config<Real>(a.model, precision);
  const Variant variant = a.variant == "corrected" ? Variant::Corrected : Variant::Printed;
  const Real r0 = parse_real<Real>(a.model.r0, "r0");

  Real p0 = a.locate ? critical_locate(r0, parse_real<Real>(a.tol, "tol"), config).p0_critical
                     : parse_real<Real>(a.model.p0.empty() ? std::string("nan") : a.model.p0,
                                        "p0");
  GeometricTypeLaw<Real> law0(r0, p0);

  Regime regime = Regime::NearCriticalUndetermined;
  std::size_t decided_at = 0;
  if (a.regime == "critical" || a.locate) {
    regime = Regime::NearCriticalUndetermined;
  } else {
    ClassifyOptions opts = a.classify_options;
    opts.with_constants = false;
    auto rep = classify(law0, config, opts);
    regime = rep.regime;
    decided_at = rep.iterations_used;
  }

  auto traj = iterate(law0, config, a.steps);
  auto constants = constants_from_trajectory(
      regime == Regime::Supercritical && decided_at > a.steps ? iterate(law0, config, decided_at)
                                                              : traj,
      regime);
  auto rows = expansion_table(traj, constants, variant, a.sampling);

  std::vector<EstimatorTarget> targets;
  if (regime == Regime::Supercritical)
    targets = {EstimatorTarget::SupercriticalPCoef};
  else if (regime == Regime::Subcritical)
    targets = {EstimatorTarget::SubcriticalRatio};
  else
    targets = {EstimatorTarget::CriticalNv, EstimatorTarget::CriticalDifference,
               EstimatorTarget::CriticalPgfAtM};

  std::vector<std::map<std::size_t, Real>> columns;
  Json summaries = Json::object();
  for (auto target : targets) {
    std::map<std::size_t, Real> col;
    try {
      auto est = estimate_coefficients(traj, target, a.sampling);
      for (std::size_t i = 0; i < est.ns.size(); ++i) col.emplace(est.ns[i], est.values[i]);
      summaries[to_string(target)] = Json{{"last", num(est.values.back())},
                                          {"aitken", optional_num(est.aitken)},
                                          {"richardson", optional_num(est.richardson)},
                                          {"extrapolated", num(est.extrapolated)},
                                          {"rate", num(est.rate)}};
    } catch (const InsufficientLengthError&) {
      summaries[to_string(target)] = nullptr;
    }
    columns.push_back(std::move(col));
  }

  std::vector<std::string> header = {"n",     "r",          "p",          "r_dev",
                                     "r_pred", "r_residual", "r_normalized", "p_dev",
                                     "p_pred", "p_residual", "p_normalized"};
  for (auto t : targets) header.push_back(to_string(t));

  if (a.format == "json") {
    Json list = Json::array();
    for (const auto& row : rows) {
      Json j{{"n", row.n},
             {"r", num(row.r)},
             {"p", num(row.p)},
             {"r_dev", num(row.r_cmp.exact)},
             {"r_pred", num(row.r_cmp.predicted)},
             {"r_residual", num(row.r_cmp.abs_residual)},
             {"r_normalized", num(row.r_cmp.normalized_residual)},
             {"p_dev", num(row.p_cmp.exact)},
             {"p_pred", num(row.p_cmp.predicted)},
             {"p_residual", num(row.p_cmp.abs_residual)},
             {"p_normalized", num(row.p_cmp.normalized_residual)}};
      for (std::size_t t = 0; t < targets.size(); ++t) {
        auto it = columns[t].find(row.n);
        j[to_string(targets[t])] = it == columns[t].end() ? Json(nullptr) : num(it->second);
      }
      list.push_back(std::move(j));
    }
    Json doc;
    doc["regime"] = to_string(regime);
    doc["variant"] = to_string(variant);
    doc["p0"] = num(p0);
    doc["estimators"] = summaries;
    doc["rows"] = list;
    ctx.emit_json(doc);
    return;
  }

  CsvTable table(header);
  for (const auto& row : rows) {
    std::vector<std::string> cells = {cell(row.n),
                                      cell(row.r),
                                      cell(row.p),
                                      cell(row.r_cmp.exact),
                                      cell(row.r_cmp.predicted),
                                      cell(row.r_cmp.abs_residual),
                                      cell(row.r_cmp.normalized_residual),
                                      cell(row.p_cmp.exact),
                                      cell(row.p_cmp.predicted),
                                      cell(row.p_cmp.abs_residual),
                                      cell(row.p_cmp.normalized_residual)};
    for (const auto& col : columns) {
      auto it = col.find(row.n);
      cells.push_back(it == col.end() ? std::string() : cell(it->second));
    }
    table.add(std::move(cells));
  }
  ctx.emit_csv(table);
}

// mc --------------------------------------------------------------------------

struct McArgs {
  ModelArgs model;
  McConfig config;
  std::uint64_t seed = 0;
};

void run_mc(const Context& ctx, const McArgs& a) {
  require_standard(ctx);
  const double m = parse_real<double>(a.model.m, "m");
  ModelConfig<double> model(m);
  GeometricTypeLaw<double> law0 = make_law<double>(a.model);
  McConfig cfg = a.config;
  cfg.seed = a.seed;
  auto s = mc_sample(law0, m, cfg);
  auto traj = iterate(law0, model, cfg.n);
  const auto& law = traj.back().law;

  CsvTable table({"quantity", "k", "estimate", "standard_error", "exact"});
  table.add({"samples", "", cell(s.samples), "", ""});
  table.add({"survival_frequency", "", cell(s.survival_frequency), cell(s.survival_se),
             cell(survival(law))});
  table.add({"mean", "", cell(s.mean), cell(s.mean_se), cell(mean(law))});
  if (s.survivors > 0) {
    try {
      auto chi = chi_square_geometric(s, law.r());
      table.add({"chi_square_statistic", "", cell(chi.statistic), "", ""});
      table.add({"chi_square_dof", "", cell(chi.dof), "", ""});
      table.add({"chi_square_critical_999", "", cell(chi.critical_value), "", ""});
      table.add({"chi_square_p_value", "", cell(chi.p_value), "", ""});
    } catch (const ArgumentError&) {
      // too few survivors for a pooled test
    }
    const double survivors = static_cast<double>(s.survivors);
    for (std::size_t k = 1; k <= s.conditional_pmf.size(); ++k) {
      const double f = s.conditional_pmf[k - 1];
      table.add({"conditional_pmf", cell(k), cell(f), cell(std::sqrt(f * (1 - f) / survivors)),
                 cell(conditional_pmf(law, static_cast<std::int64_t>(k)))});
    }
  }
  ctx.emit_csv(table);
}

// propagate-pmf ---------------------------------------------------------------

struct PropagateArgs {
  ModelArgs model;
  std::size_t steps = 1;
  double tol = 1e-12;
  PropagateOptions options;
  bool dump = false;
};

void run_propagate(const Context& ctx, const PropagateArgs& a) {
  require_standard(ctx);
  const double m = parse_real<double>(a.model.m, "m");
  ModelConfig<double> model(m);
  auto traj = iterate(make_law<double>(a.model), model, a.steps);
  auto pmf = geometric_type_pmf(traj[0].law, a.tol);

  CsvTable summary({"step", "support_size", "mass_total", "tail_bound", "mass_at_0",
                    "closed_form_p", "tv_to_closed_form"});
  CsvTable dump({"step", "k", "mass", "closed_form_mass"});
  for (std::size_t step = 0; step <= a.steps; ++step) {
    if (step > 0) pmf = propagate_pmf(pmf, m, a.tol, a.options);
    const auto& law = traj[step].law;
    auto closed = geometric_type_pmf(law, a.tol);
    summary.add({cell(step), cell(pmf.support_size()), cell(pmf.total()), cell(pmf.tail_bound),
                 cell(pmf.masses[0]), cell(law.p()), cell(tv_distance(pmf, closed))});
    if (a.dump)
      for (std::size_t k = 0; k < pmf.support_size(); ++k)
        dump.add({cell(step), cell(k), cell(pmf.masses[k]), cell(law.pmf(static_cast<std::int64_t>(k)))});
  }
  ctx.emit_csv(a.dump ? dump : summary);
}

// exp-variant -----------------------------------------------------------------

struct ExpArgs {
  std::string m;
  std::optional<double> alpha;
  double lambda0 = 1;
  double p0 = 0.5;
  std::size_t steps = 10;
};

void run_exp(const Context& ctx, const ExpArgs& a) {
  require_standard(ctx);
  ExpVariantConfig config(parse_real<double>(a.m, "m"), a.alpha);
  auto laws = exp_iterate(ExponentialTypeLaw(a.lambda0, a.p0), config, a.steps);
  CsvTable table({"n", "lambda", "p", "survival", "mean", "alpha"});
  for (std::size_t n = 0; n < laws.size(); ++n) {
    const auto& law = laws[n];
    table.add({cell(n), cell(law.lambda()), cell(law.p()), cell(law.survival()),
               cell(law.mean()), cell(config.alpha)});
  }
  ctx.emit_csv(table);
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical laboratory for the geometric Derrida-Retaux recursion", "drlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Context ctx;
  ctx.out = &out;
  std::function<void()> action;

  IterateArgs it;
  auto* sub = app.add_subcommand("iterate", "iterate the (r, p) recursion with identity residuals");
  add_model(sub, it.model);
  sub->add_option("--steps", it.steps, "number of steps")->required();
  sub->add_option("--format", it.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] { action = [&] { with_precision(ctx, [&]<class R>(const Precision& p) { run_iterate<R>(ctx, it, p); }); }; });

  ClassifyArgs cl;
  sub = app.add_subcommand("classify", "classify the regime and compute limit constants (JSON)");
  add_model(sub, cl.model);
  sub->add_option("--budget", cl.options.budget, "step budget")->capture_default_str();
  sub->add_option("--delta", cl.options.delta, "band half-width around 1 - 1/m")->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] { action = [&] { with_precision(ctx, [&]<class R>(const Precision& p) { run_classify<R>(ctx, cl, p); }); }; });

  LocateArgs lo;
  sub = app.add_subcommand("critical-locate", "bisect p0 onto the critical manifold (JSON)");
  add_model(sub, lo.model, false);
  sub->add_option("--tol", lo.tol, "bracket width")->capture_default_str();
  sub->add_option("--probe-budget", lo.options.probe_budget, "steps per probe")->capture_default_str();
  sub->add_option("--manifold-order", lo.options.manifold_order, "center-manifold series order")
      ->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] { action = [&] { with_precision(ctx, [&]<class R>(const Precision& p) { run_locate<R>(ctx, lo, p); }); }; });

  ScanArgs sc;
  sub = app.add_subcommand("phase-scan", "classify a grid of (r0, p0) cell centres (CSV)");
  sub->add_option("--m", sc.m, "offspring mean, > 1")->required();
  sub->add_option("--r0-lo", sc.r0.lo)->capture_default_str();
  sub->add_option("--r0-hi", sc.r0.hi)->capture_default_str();
  sub->add_option("--r0-count", sc.r0.count)->capture_default_str();
  sub->add_option("--p0-lo", sc.p0.lo)->capture_default_str();
  sub->add_option("--p0-hi", sc.p0.hi)->capture_default_str();
  sub->add_option("--p0-count", sc.p0.count)->capture_default_str();
  sub->add_option("--budget", sc.options.classify.budget)->capture_default_str();
  sub->add_option("--delta", sc.options.classify.delta)->capture_default_str();
  sub->add_option("--max-cells", sc.options.max_cells)->capture_default_str();
  sub->add_option("--threads", sc.options.threads, "0 = hardware concurrency")->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] { action = [&] { with_precision(ctx, [&]<class R>(const Precision& p) { run_scan<R>(ctx, sc, p); }); }; });

  ExpandArgs ex;
  sub = app.add_subcommand("expand", "compare exact trajectories with the asymptotic expansions");
  sub->add_option("--m", ex.model.m, "offspring mean, > 1")->required();
  sub->add_option("--r0", ex.model.r0, "initial r_0 in (0, 1)")->required();
  auto* p0_opt = sub->add_option("--p0", ex.model.p0, "initial p_0 in (0, 1)");
  auto* locate_flag = sub->add_flag("--locate-critical", ex.locate, "place p0 on the critical manifold");
  p0_opt->excludes(locate_flag);
  sub->add_option("--tol", ex.tol, "bracket width for --locate-critical")->capture_default_str();
  sub->add_option("--steps", ex.steps)->capture_default_str();
  sub->add_option("--variant", ex.variant)->check(CLI::IsMember({"printed", "corrected"}))->capture_default_str();
  sub->add_option("--regime", ex.regime)->check(CLI::IsMember({"auto", "critical"}))->capture_default_str();
  sub->add_option("--n-min", ex.sampling.n_min)->capture_default_str();
  sub->add_option("--stride", ex.sampling.stride)->capture_default_str();
  sub->add_option("--budget", ex.classify_options.budget)->capture_default_str();
  sub->add_option("--delta", ex.classify_options.delta)->capture_default_str();
  sub->add_option("--format", ex.format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] {
    if (!ex.locate && ex.model.p0.empty()) throw CLI::RequiredError("--p0 or --locate-critical");
    action = [&] { with_precision(ctx, [&]<class R>(const Precision& p) { run_expand<R>(ctx, ex, p); }); };
  });

  McArgs mc;
  sub = app.add_subcommand("mc", "Monte Carlo tree sampler (CSV)");
  add_model(sub, mc.model);
  sub->add_option("--n", mc.config.n, "depth")->required();
  sub->add_option("--samples", mc.config.samples)->required();
  sub->add_option("--seed", mc.seed)->required();
  sub->add_option("--node-budget", mc.config.node_budget)->capture_default_str();
  sub->add_option("--threads", mc.config.threads, "0 = hardware concurrency")->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] { ctx.seed = mc.seed; action = [&] { run_mc(ctx, mc); }; });

  PropagateArgs pp;
  sub = app.add_subcommand("propagate-pmf", "exact truncated-pmf propagation (CSV)");
  add_model(sub, pp.model);
  sub->add_option("--steps", pp.steps)->capture_default_str();
  sub->add_option("--tol", pp.tol)->capture_default_str();
  sub->add_option("--max-support", pp.options.max_support)->capture_default_str();
  sub->add_flag("--dump-pmf", pp.dump, "emit the full pmf of every step");
  add_common(sub, ctx);
  sub->callback([&] { action = [&] { run_propagate(ctx, pp); }; });

  ExpArgs ea;
  sub = app.add_subcommand("exp-variant", "iterate the exponential-type recursion (CSV)");
  sub->add_option("--m", ea.m, "offspring mean, > 1")->required();
  sub->add_option("--alpha", ea.alpha, "decay exponent (default log m)");
  sub->add_option("--lambda0", ea.lambda0)->capture_default_str();
  sub->add_option("--p0", ea.p0)->capture_default_str();
  sub->add_option("--steps", ea.steps)->capture_default_str();
  add_common(sub, ctx);
  sub->callback([&] { action = [&] { run_exp(ctx, ea); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  for (CLI::App* s : app.get_subcommands()) {
    ctx.command = s->get_name();
    ctx.app = s;
  }
  try {
    action();
  } catch (const ArgumentError& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const BracketError& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const InsufficientLengthError& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitUsage;
  } catch (const ResourceLimitError& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitResource;
  } catch (const PrecisionError& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitPrecision;
  } catch (const std::exception& e) {
    err << "drlab: " << one_line(e.what()) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace drlab
