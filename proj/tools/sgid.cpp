// sgid: command-line driver for both identifiability tracks. Every stage
// reads and writes files under --out and appends to its manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

#include "sgid/config.hpp"
#include "sgid/errors.hpp"
#include "sgid/geodesic.hpp"
#include "sgid/pipeline.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace sgid;
using nlohmann::json;

namespace {

constexpr int kExitDisagreement = 4;

struct Context {
  PipelineConfig cfg;
  fs::path out = "run";
  bool svg = false;
  bool strict = false;
  bool all_stages = false;
  std::optional<std::size_t> depth;
  double t_end = 5.0;
  double dt_out = 0.01;
  std::string params_file;
  bool disagreement = false;
};

using Files = std::vector<fs::path>;

void run_stage(Context& ctx, const std::string& name, const std::function<Files(Context&)>& body) {
  fs::create_directories(ctx.out);
  const auto t0 = std::chrono::steady_clock::now();
  Files files = body(ctx);
  ManifestEntry e;
  e.stage = name;
  e.config = ctx.cfg.to_json();
  e.files = std::move(files);
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_manifest(ctx.out, e);
  std::cerr << name << ": done in " << std::fixed << std::setprecision(1) << e.seconds << " s\n";
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DomainError("missing input " + p.string() + " (run the producing stage first)");
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DomainError("cannot write " + p.string());
  return out;
}

json read_json(const fs::path& p) {
  std::ifstream in = open_in(p);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DomainError("malformed " + p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::string> numbered(const std::string& stem, std::size_t n, std::size_t from = 1) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i + from));
  return out;
}

LimitFlags depth_flags(const Context& ctx) {
  const std::size_t d = ctx.depth.value_or(ctx.cfg.geodesic_depth);
  if (d > limit_chain().size()) throw DomainError("depth must lie in [0, 5]");
  return LimitFlags::chain_prefix(d);
}

IndependentParams base_params(const Context& ctx) {
  if (ctx.params_file.empty()) return IndependentParams::nominal();
  std::ifstream in = open_in(ctx.params_file);
  return read_params_json(in);
}

// model-core ---------------------------------------------------------------

Files simulate(Context& ctx) {
  const LimitFlags flags = depth_flags(ctx);
  const IndependentParams p = effective_params(base_params(ctx), flags);
  const Trajectory traj = integrate(p, flags, StateVector::initial(), ctx.t_end, ctx.cfg.model_integration());
  std::vector<double> times;
  for (double t = 0.0; t <= ctx.t_end + 1e-12; t += ctx.dt_out) times.push_back(std::min(t, ctx.t_end));
  const fs::path f = ctx.out / "trajectory.csv";
  std::ofstream os = open_out(f);
  write_trajectory_csv(os, traj, times);
  os.close();
  Files files{f};
  if (ctx.svg) {
    std::vector<svg::Series> s;
    for (std::size_t k = 0; k < kNumStates; ++k) {
      svg::Series line{std::string(state_name(static_cast<State>(k))), times, {}};
      for (double t : times) line.y.push_back(traj.at(t)[static_cast<State>(k)]);
      s.push_back(line);
    }
    files.push_back(ctx.out / "trajectory.svg");
    svg::line_plot(files.back(), {"Dynamic response", "t [s]", "state [p.u.]"}, s);
  }
  return files;
}

Files reduced_compare(Context& ctx) {
  const ReducedComparison c = compare_reduced(base_params(ctx), ctx.cfg.model_integration(), ctx.cfg.grid.t_start,
                                              ctx.cfg.grid.t_end, ctx.dt_out);
  const fs::path csv = ctx.out / "reduced_compare.csv", js = ctx.out / "reduced_compare.json";
  std::ofstream os = open_out(csv);
  write_reduced_csv(os, c);
  os.close();
  json j;
  for (std::size_t s = 0; s < kNumStates; ++s) j["max_rel_error"][std::string(state_name(static_cast<State>(s)))] = c.max_rel_error[s];
  write_json(js, j);
  for (std::size_t s = 0; s < kNumStates; ++s) {
    std::cout << state_name(static_cast<State>(s)) << " max relative error " << c.max_rel_error[s] << '\n';
  }
  return {csv, js};
}

// ensemble -------------------------------------------------------------------

Files sample(Context& ctx) {
  const Eigen::MatrixXd p = sample_ensemble(ctx.cfg.ensemble_spec(), base_params(ctx));
  const fs::path f = ctx.out / "params.csv";
  std::ofstream os = open_out(f);
  write_matrix_csv(os, param_names(), p);
  return {f};
}

Eigen::MatrixXd load_params(const Context& ctx) {
  std::ifstream in = open_in(ctx.out / "params.csv");
  std::vector<std::string> header;
  Eigen::MatrixXd p = read_matrix_csv(in, &header);
  if (header != param_names()) throw DomainError("params.csv header does not list the independent parameters");
  return p;
}

Files ensemble(Context& ctx) {
  const Eigen::MatrixXd p = load_params(ctx);
  const EnsembleOutputs e = run_ensemble(p, ctx.cfg.grid, LimitFlags::none(), ctx.cfg.effective_workers(),
                                         ctx.cfg.model_integration());
  for (const auto& w : e.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path f = ctx.out / "outputs.csv", meta = ctx.out / "ensemble.json";
  std::ofstream os = open_out(f);
  write_matrix_csv(os, numbered("y_", static_cast<std::size_t>(e.outputs.cols()), 0), e.outputs);
  os.close();
  json j;
  j["rows"] = e.rows;
  j["failures"] = json::array();
  for (const auto& fl : e.failures) j["failures"].push_back({{"row", fl.row}, {"message", fl.message}});
  write_json(meta, j);
  return {f, meta};
}

// information geometry ---------------------------------------------------------

Files fim_stage(Context& ctx) {
  const LimitFlags flags = depth_flags(ctx);
  const IndependentParams base = base_params(ctx);
  const ParametricModel m = generator_model(flags, ctx.cfg.grid, ctx.cfg.fim_integration(), base);
  const SensitivityMatrix J = sensitivities(m, to_log_params(effective_params(base, flags), flags), ctx.cfg.fim_step,
                                            Coordinates::log_parameter, ctx.cfg.effective_workers());
  const InfoSpectrum s = spectrum(fim(J), m.names);
  const fs::path sj = ctx.out / "spectrum.json", pc = ctx.out / "participation.csv", fj = ctx.out / "fim.json";
  std::ofstream a = open_out(sj);
  write_spectrum_json(a, s);
  a.close();
  std::ofstream b = open_out(pc);
  write_participation_csv(b, s);
  b.close();
  const std::size_t dim = effective_dimension(s, ctx.cfg.fim_cutoff);
  const LogSpacing ls = log_spacing(s);
  json j;
  j["flags"] = flags.describe();
  j["effective_dimension"] = dim;
  j["cutoff"] = ctx.cfg.fim_cutoff;
  j["identifiable_set"] = identifiable_set(s, dim, ctx.cfg.identifiable_threshold);
  j["span_decades"] = ls.span_decades;
  j["max_gap_decades"] = ls.max_gap;
  j["median_gap_decades"] = ls.median_gap;
  write_json(fj, j);
  std::cout << "effective dimension " << dim << " at cutoff " << ctx.cfg.fim_cutoff << ", span " << ls.span_decades
            << " decades\n";
  Files files{sj, pc, fj};
  if (ctx.svg) {
    svg::Series e{"", {}, {}};
    for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
      e.x.push_back(static_cast<double>(k + 1));
      e.y.push_back(std::log10(std::max(s.eigenvalues[k], 1e-300)));
    }
    files.push_back(ctx.out / "spectrum.svg");
    svg::line_plot(files.back(), {"Information spectrum", "mode", "log10 eigenvalue", true}, {e});
  }
  return files;
}

InfoSpectrum load_spectrum(const fs::path& p) {
  const json j = read_json(p);
  InfoSpectrum s;
  s.names = j.at("names").get<std::vector<std::string>>();
  const auto ev = j.at("eigenvalues").get<std::vector<double>>();
  s.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  const auto& rows = j.at("participation");
  s.participation.resize(static_cast<Eigen::Index>(rows.size()), s.eigenvalues.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
      s.participation(static_cast<Eigen::Index>(i), k) = rows[i].at(static_cast<std::size_t>(k)).get<double>();
    }
  }
  s.eigenvectors = s.participation.cwiseSqrt();  // magnitudes only
  return s;
}

MbamOptions mbam_options(const Context& ctx) {
  MbamOptions o;
  o.geodesic = ctx.cfg.geodesic;
  o.geodesic.jacobian_step = ctx.cfg.fim_step;
  o.integration = ctx.cfg.geodesic_integration();
  o.base = base_params(ctx);
  return o;
}

json step_json(const MbamStepResult& r) {
  json j;
  j["flags_before"] = r.flags_before.describe();
  j["expected"] = std::string(limit_name(r.expected));
  j["found"] = r.found ? json(std::string(limit_name(*r.found))) : json(nullptr);
  j["divergence"] = r.divergence;
  j["termination"] = to_string(r.trace.terminated);
  j["detail"] = r.trace.detail;
  j["sign"] = r.sign;
  j["lambda_min"] = r.spectrum.eigenvalues[r.spectrum.eigenvalues.size() - 1];
  if (r.trace.terminated == Termination::boundary) {
    j["limit_param"] = r.diagnosis.limit_param;
    j["direction"] = r.diagnosis.direction == LimitDirection::to_zero ? "to_zero" : "to_infinity";
    j["tau_boundary"] = r.diagnosis.tau_boundary;
    j["velocity_alignment"] = r.diagnosis.velocity_alignment;
  }
  return j;
}

Files geodesic_stage(Context& ctx) {
  const MbamStepResult r = mbam_step(depth_flags(ctx), ctx.cfg.grid, mbam_options(ctx));
  const fs::path tc = ctx.out / "trace.csv", dj = ctx.out / "diagnosis.json";
  std::ofstream os = open_out(tc);
  write_trace_csv(os, r.trace);
  os.close();
  write_json(dj, step_json(r));
  std::cout << to_string(r.trace.terminated);
  if (r.trace.terminated == Termination::boundary) {
    std::cout << ": " << r.diagnosis.limit_param << " at tau " << r.diagnosis.tau_boundary;
  }
  std::cout << '\n';
  Files files{tc, dj};
  if (ctx.svg) {
    std::vector<svg::Series> s;
    for (std::size_t i = 0; i < r.trace.names.size(); ++i) {
      svg::Series line{r.trace.names[i], r.trace.taus, {}};
      for (const auto& st : r.trace.states) line.y.push_back(st.theta[static_cast<Eigen::Index>(i)]);
      s.push_back(line);
    }
    files.push_back(ctx.out / "geodesic.svg");
    svg::line_plot(files.back(), {"Sloppiest geodesic", "tau", "log parameter"}, s);
  }
  if (r.trace.terminated == Termination::failure) throw NumericalError("geodesic failed: " + r.trace.detail);
  return files;
}

Files mbam_stage(Context& ctx) {
  const MbamOptions o = mbam_options(ctx);
  json steps = json::array();
  bool diverged = false;
  LimitFlags flags = LimitFlags::none();
  for (std::size_t d = 0; d < limit_chain().size(); ++d) {
    if (diverged && !ctx.all_stages) break;
    const LimitFlags at = ctx.all_stages ? LimitFlags::chain_prefix(d) : flags;
    const MbamStepResult r = mbam_step(at, ctx.cfg.grid, o);
    steps.push_back(step_json(r));
    std::cout << at.describe() << " -> expected " << limit_name(r.expected) << ", found "
              << (r.found ? limit_name(*r.found) : std::string_view("none")) << '\n';
    diverged = diverged || r.divergence;
    flags = r.flags_after;
  }
  const fs::path f = ctx.out / "mbam.json";
  write_json(f, {{"steps", steps}, {"reproduces_chain", !diverged && steps.size() == limit_chain().size()}});
  return {f};
}

// manifold learning ------------------------------------------------------------

Files dmaps_stage(Context& ctx) {
  std::ifstream in = open_in(ctx.out / "outputs.csv");
  const Dataset d = rescale01(read_matrix_csv(in));
  const Bandwidth b = median_epsilon(d.rows, ctx.cfg.dmaps_epsilon_multiplier);
  const double eps = ctx.cfg.dmaps_epsilon > 0.0 ? ctx.cfg.dmaps_epsilon : b.value;
  if (b.degenerate && !(ctx.cfg.dmaps_epsilon > 0.0)) throw DomainError("all ensemble outputs coincide");
  const DMapsEmbedding emb = dmaps(d.rows, eps, ctx.cfg.dmaps_eigenpairs);
  const fs::path ec = ctx.out / "embedding.csv", dj = ctx.out / "dmaps.json";
  std::ofstream os = open_out(ec);
  write_embedding_csv(os, emb);
  os.close();
  write_json(dj, {{"epsilon", eps}, {"median_sq", b.median_sq}, {"eigenvalues", vec(emb.eigenvalues)}});
  std::cout << "epsilon " << eps << ", lambda_1 " << emb.eigenvalues[1] << '\n';
  return {ec, dj};
}

DMapsEmbedding load_embedding(const Context& ctx) {
  std::ifstream in = open_in(ctx.out / "embedding.csv");
  const Eigen::MatrixXd phi = read_matrix_csv(in, nullptr, true);
  const json j = read_json(ctx.out / "dmaps.json");
  DMapsEmbedding emb;
  emb.epsilon = j.at("epsilon").get<double>();
  const auto ev = j.at("eigenvalues").get<std::vector<double>>();
  if (ev.size() != static_cast<std::size_t>(phi.cols()) + 1) throw DomainError("embedding and eigenvalues disagree");
  emb.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
  emb.eigenvectors.resize(phi.rows(), phi.cols() + 1);
  emb.eigenvectors.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(phi.rows())));
  emb.eigenvectors.rightCols(phi.cols()) = phi;
  return emb;
}

Files residuals_stage(Context& ctx) {
  const DMapsEmbedding emb = load_embedding(ctx);
  const ResidualReport rep = local_linear_residuals(emb, ctx.cfg.residual_bandwidth_scale);
  const Selection sel = ctx.cfg.target_dim > 0 ? select_nonharmonic(rep, ctx.cfg.target_dim)
                                               : select_by_gap(rep, ctx.cfg.ambiguity_ratio);
  for (const auto& w : sel.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path f = ctx.out / "residuals.json";
  std::ofstream os = open_out(f);
  write_residuals_json(os, rep, sel);
  os.close();
  std::cout << sel.indices.size() << " non-harmonic coordinates:";
  for (auto i : sel.indices) std::cout << " phi_" << i;
  std::cout << '\n';
  Files files{f};
  if (ctx.svg) {
    svg::Series s{"", {}, vec(rep.residuals)};
    for (Eigen::Index k = 0; k < rep.residuals.size(); ++k) s.x.push_back(static_cast<double>(k + 1));
    files.push_back(ctx.out / "residuals.svg");
    svg::line_plot(files.back(), {"Local linear regression residuals", "eigenvector", "r_k", true}, {s});
  }
  return files;
}

struct GhInputs {
  Eigen::MatrixXd coords;
  Eigen::MatrixXd params;
  std::vector<std::size_t> selected;
};

GhInputs load_gh_inputs(const Context& ctx) {
  GhInputs g;
  const DMapsEmbedding emb = load_embedding(ctx);
  g.selected = read_json(ctx.out / "residuals.json").at("selected").get<std::vector<std::size_t>>();
  DMapsEmbedding sel = emb;
  sel.nonharmonic = g.selected;
  for (auto i : g.selected) {
    if (i == 0 || i >= emb.count()) throw DomainError("selected eigenvector index out of range");
  }
  g.coords = sel.coordinates();
  const Eigen::MatrixXd all = load_params(ctx);
  const auto rows = read_json(ctx.out / "ensemble.json").at("rows").get<std::vector<std::size_t>>();
  g.params = take_rows(all, rows);
  if (g.params.rows() != g.coords.rows()) throw DomainError("embedding and ensemble row counts differ");
  return g;
}

void save_model(const fs::path& p, const GHModel& m) {
  std::ofstream os = open_out(p);
  write_gh_json(os, m);
}

GHModel load_model(const fs::path& p) {
  std::ifstream in = open_in(p);
  return read_gh_json(in);
}

Files gh_fit_stage(Context& ctx) {
  const GhInputs g = load_gh_inputs(ctx);
  const GhTrackResult r = gh_track(g.coords, g.params, param_names(), ctx.cfg.gh, ctx.cfg.effective_workers());
  const fs::path a = ctx.out / "gh_params.json", f = ctx.out / "gh_forward.json", i = ctx.out / "gh_inverse.json",
                 s = ctx.out / "split.json";
  save_model(a, r.all_params);
  save_model(f, r.forward);
  save_model(i, r.inverse);
  write_json(s, {{"train", r.split.train},
                 {"test", r.split.test},
                 {"identifiable", r.identifiable},
                 {"identifiable_cols", r.identifiable_cols}});
  for (const auto* m : {&r.all_params, &r.forward, &r.inverse}) {
    for (const auto& w : m->warnings) std::cerr << "warning: " << w << '\n';
  }
  return {a, f, i, s};
}

struct GhSplitData {
  Eigen::MatrixXd coords_test;
  Eigen::MatrixXd params_test;
  std::vector<std::size_t> test;
  std::vector<std::size_t> identifiable_cols;
  std::vector<std::string> identifiable;
};

GhSplitData load_split_data(const Context& ctx) {
  const GhInputs g = load_gh_inputs(ctx);
  const json s = read_json(ctx.out / "split.json");
  GhSplitData d;
  d.test = s.at("test").get<std::vector<std::size_t>>();
  d.identifiable_cols = s.at("identifiable_cols").get<std::vector<std::size_t>>();
  d.identifiable = s.at("identifiable").get<std::vector<std::string>>();
  d.coords_test = take_rows(rescale01(g.coords).rows, d.test);
  d.params_test = take_rows(rescale01(g.params).rows, d.test);
  return d;
}

Files gh_eval_stage(Context& ctx) {
  const GhSplitData d = load_split_data(ctx);
  const GHModel m = load_model(ctx.out / "gh_params.json");
  const GHPrediction p = gh_predict(m, d.coords_test, ctx.cfg.effective_workers());
  const Eigen::VectorXd mae = mean_absolute_error(p.values, d.params_test);
  const std::vector<std::string> names = param_names();
  json j;
  for (std::size_t k = 0; k < names.size(); ++k) j["mae"][names[k]] = mae[static_cast<Eigen::Index>(k)];
  j["identifiable"] = lowest_error_set(names, mae, static_cast<std::size_t>(d.coords_test.cols()));
  const fs::path f = ctx.out / "gh_eval.json", pc = ctx.out / "predictions.csv";
  write_json(f, j);
  Eigen::MatrixXd table(d.params_test.rows(), 2 * d.params_test.cols());
  table << d.params_test, p.values;
  std::vector<std::string> header;
  for (const auto& n : names) header.push_back("true_" + n);
  for (const auto& n : names) header.push_back("pred_" + n);
  std::ofstream os = open_out(pc);
  write_matrix_csv(os, header, table, true);
  os.close();
  for (std::size_t k = 0; k < names.size(); ++k) std::cout << names[k] << " MAE " << mae[static_cast<Eigen::Index>(k)] << '\n';
  return {f, pc};
}

Files ift_stage(Context& ctx) {
  const GhSplitData d = load_split_data(ctx);
  const std::size_t w = ctx.cfg.effective_workers();
  const JacobianReport fw = jacobian_report(load_model(ctx.out / "gh_forward.json"), d.coords_test, w);
  const JacobianReport inv =
      jacobian_report(load_model(ctx.out / "gh_inverse.json"), take_cols(d.params_test, d.identifiable_cols), w);
  const fs::path a = ctx.out / "jacobian_forward.json", b = ctx.out / "jacobian_inverse.json";
  std::ofstream oa = open_out(a);
  write_jacobian_json(oa, fw);
  oa.close();
  std::ofstream ob = open_out(b);
  write_jacobian_json(ob, inv);
  ob.close();
  std::cout << "forward: sign consistent " << fw.sign_consistent << ", min |det| " << fw.min_abs << '\n'
            << "inverse: sign consistent " << inv.sign_consistent << ", min |det| " << inv.min_abs << '\n';
  Files files{a, b};
  if (ctx.svg) {
    files.push_back(ctx.out / "det_forward.svg");
    svg::histogram(files.back(), {"det J (coordinates to parameters)", "determinant", "count"}, fw.determinants);
    files.push_back(ctx.out / "det_inverse.svg");
    svg::histogram(files.back(), {"det J (parameters to coordinates)", "determinant", "count"}, inv.determinants);
  }
  return files;
}

Files compare_stage(Context& ctx) {
  const InfoSpectrum s = load_spectrum(ctx.out / "spectrum.json");
  const auto dim = read_json(ctx.out / "residuals.json").at("selected").size();
  const json ev = read_json(ctx.out / "gh_eval.json");
  const std::vector<std::string> names = param_names();
  Eigen::VectorXd mae(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) mae[static_cast<Eigen::Index>(k)] = ev.at("mae").at(names[k]).get<double>();
  if (s.names != names) throw DomainError("spectrum.json must come from the full model (depth 0)");
  const ComparisonReport r = compare_tracks(s, ctx.cfg.fim_cutoff, ctx.cfg.identifiable_threshold, dim, names, mae);
  const fs::path f = ctx.out / "comparison.json";
  std::ofstream os = open_out(f);
  write_comparison_json(os, r);
  os.close();
  std::cout << "information dimension " << r.fim_effective_dim << ", diffusion dimension " << r.dmaps_dim
            << ", agreement " << (r.agreement ? "yes" : "no") << '\n';
  ctx.disagreement = !r.agreement;
  return {f};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter identifiability of the infinite-bus synchronous generator"};
  app.require_subcommand(1);
  Context ctx;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool paper_scale = false;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one configuration key (key=value)");
  app.add_option("--seed", seed, "ensemble seed");
  app.add_option("--workers", workers, "worker threads (0: all cores)");
  app.add_option("--out", ctx.out, "run directory")->capture_default_str();
  app.add_flag("--paper-scale", paper_scale, "10000 ensemble members instead of 2000");
  app.add_flag("--svg", ctx.svg, "also write SVG line plots");
  app.add_flag("--strict", ctx.strict, "exit 4 when the two tracks disagree");

  struct Sub {
    const char* name;
    const char* help;
    std::function<Files(Context&)> body;
  };
  const std::vector<Sub> subs = {
      {"simulate", "one trajectory to CSV", simulate},
      {"sample", "ensemble parameters to CSV", sample},
      {"ensemble", "simulate every ensemble member", ensemble},
      {"fim", "information spectrum and participation", fim_stage},
      {"geodesic", "sloppiest-direction geodesic and boundary diagnosis", geodesic_stage},
      {"mbam", "boundary-approximation reduction chain", mbam_stage},
      {"reduced-compare", "full versus reduced trajectories", reduced_compare},
      {"dmaps", "diffusion maps embedding of the ensemble outputs", dmaps_stage},
      {"residuals", "local linear regression residuals and selection", residuals_stage},
      {"gh-fit", "geometric harmonics fits", gh_fit_stage},
      {"gh-eval", "test-set errors of the parameter regression", gh_eval_stage},
      {"ift", "Jacobian determinant checks", ift_stage},
      {"compare", "cross-track comparison", compare_stage},
  };
  std::map<std::string, CLI::App*> handles;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->fallthrough();
    handles[s.name] = sub;
  }
  CLI::App* pipeline = app.add_subcommand("pipeline", "every stage in order");
  pipeline->fallthrough();
  for (const char* n : {"simulate", "fim", "geodesic"}) {
    handles[n]->add_option("--depth", ctx.depth, "number of chain limits applied")->check(CLI::Range(0, 5));
  }
  for (const char* n : {"simulate", "sample", "fim", "geodesic", "mbam", "reduced-compare"}) {
    handles[n]->add_option("--params", ctx.params_file, "parameter JSON keyed by name")->check(CLI::ExistingFile);
  }
  handles["simulate"]->add_option("--t-end", ctx.t_end, "final time")->capture_default_str();
  for (const char* n : {"simulate", "reduced-compare"}) {
    handles[n]->add_option("--dt", ctx.dt_out, "output spacing")->capture_default_str();
  }
  handles["mbam"]->add_flag("--all-stages", ctx.all_stages, "run every stage at its prescribed flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) ctx.cfg.load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw DomainError("--set expects key=value, got '" + kv + "'");
      ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (paper_scale) ctx.cfg.n_samples = 10000;
    if (seed) ctx.cfg.seed = *seed;
    if (workers) ctx.cfg.workers = *workers;
    if (!(ctx.dt_out > 0.0) || !(ctx.t_end >= 0.0)) throw DomainError("output spacing and final time must be positive");

    for (const auto& s : subs) {
      if (handles[s.name]->parsed()) run_stage(ctx, s.name, s.body);
    }
    if (pipeline->parsed()) {
      for (const char* n : {"simulate", "sample", "ensemble", "fim", "mbam", "reduced-compare", "dmaps", "residuals", "gh-fit",
                            "gh-eval", "ift", "compare"}) {
        for (const auto& s : subs) {
          if (std::string(s.name) == n) run_stage(ctx, s.name, s.body);
        }
      }
    }
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  if (ctx.strict && ctx.disagreement) {
    std::cerr << "the two tracks disagree\n";
    return kExitDisagreement;
  }
  return 0;
}
