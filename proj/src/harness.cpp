#include "npace/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace npace {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
  if (j.is_null()) return kNaN;
  if (!j.is_number()) throw ContractError("config: expected a number");
  return j.get<double>();
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Vector read_vector(const json& j) {
  if (!j.is_array()) throw ContractError("config: expected an array");
  Vector v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = read_number(j[i]);
  return v;
}

json pair_json(const IntentPair& p) { return json::array({vector_json(p[0]), vector_json(p[1])}); }

IntentPair read_pair(const json& j) {
  if (!j.is_array() || j.size() != kNumAgents)
    throw ContractError("config: intent pairs need two entries");
  return IntentPair(read_vector(j[0]), read_vector(j[1]));
}

json belief_json(const GaussianBelief& b) {
  json rows = json::array();
  for (int i = 0; i < b.covariance.rows(); ++i) rows.push_back(vector_json(b.covariance.row(i).transpose()));
  return {{"mean", vector_json(b.mean)}, {"covariance", rows}, {"action_noise_std", b.action_noise_std}};
}

GaussianBelief read_belief(const json& j) {
  GaussianBelief b;
  b.mean = read_vector(j.at("mean"));
  const json& rows = j.at("covariance");
  b.covariance.resize(static_cast<int>(rows.size()), b.mean.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    b.covariance.row(static_cast<int>(i)) = read_vector(rows[i]).transpose();
  b.action_noise_std = read_number(j.at("action_noise_std"));
  b.validate();
  return b;
}

json boxes_json(const std::array<std::optional<IntentBox>, kNumAgents>& boxes) {
  json out = json::array();
  for (const auto& box : boxes) {
    if (box)
      out.push_back({{"lower", vector_json(box->lower)}, {"upper", vector_json(box->upper)}});
    else
      out.push_back(nullptr);
  }
  return out;
}

std::array<std::optional<IntentBox>, kNumAgents> read_boxes(const json& j) {
  if (!j.is_array() || j.size() != kNumAgents)
    throw ContractError("config: intent bounds need two entries");
  std::array<std::optional<IntentBox>, kNumAgents> out;
  for (int k = 0; k < kNumAgents; ++k) {
    if (j[k].is_null()) continue;
    IntentBox box{read_vector(j[k].at("lower")), read_vector(j[k].at("upper"))};
    if (box.lower.size() != box.upper.size() || (box.lower.array() > box.upper.array()).any())
      throw ContractError("config: malformed intent box");
    out[k] = std::move(box);
  }
  return out;
}

template <typename T>
void read_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void read_double_if(const json& j, const char* key, double& field) {
  if (j.contains(key)) field = read_number(j.at(key));
}

json scenario_json(const ScenarioConfig& c) {
  return {{"id", to_string(c.id)},
          {"true_intents", pair_json(c.true_intents)},
          {"initial_estimates", pair_json(c.initial_estimates)},
          {"prior_variance", {number(c.prior_variance[0]), number(c.prior_variance[1])}},
          {"action_noise_std", number(c.action_noise_std)},
          {"initial_state", vector_json(c.initial_state)},
          {"dt", number(c.dt)},
          {"horizon_seconds", number(c.horizon_seconds)},
          {"d_safe", number(c.d_safe)},
          {"collision_radius", number(c.collision_radius)},
          {"crossing_threshold", number(c.crossing_threshold)},
          {"intent_bounds", boxes_json(c.intent_bounds)}};
}

ScenarioConfig read_scenario(const json& j, ScenarioId id) {
  ScenarioConfig c = ScenarioConfig::defaults(id);
  if (j.contains("true_intents")) c.true_intents = read_pair(j.at("true_intents"));
  if (j.contains("initial_estimates")) c.initial_estimates = read_pair(j.at("initial_estimates"));
  if (j.contains("prior_variance")) {
    const json& pv = j.at("prior_variance");
    if (!pv.is_array() || pv.size() != kNumAgents)
      throw ContractError("config: prior_variance needs two entries");
    c.prior_variance = {read_number(pv[0]), read_number(pv[1])};
  }
  read_double_if(j, "action_noise_std", c.action_noise_std);
  if (j.contains("initial_state")) c.initial_state = read_vector(j.at("initial_state"));
  read_double_if(j, "dt", c.dt);
  read_double_if(j, "horizon_seconds", c.horizon_seconds);
  read_double_if(j, "d_safe", c.d_safe);
  read_double_if(j, "collision_radius", c.collision_radius);
  read_double_if(j, "crossing_threshold", c.crossing_threshold);
  if (j.contains("intent_bounds")) c.intent_bounds = read_boxes(j.at("intent_bounds"));
  c.validate();
  const ScenarioConfig reference = ScenarioConfig::defaults(id);
  if (c.initial_state.size() != reference.initial_state.size())
    throw ContractError("config: initial_state has the wrong dimension");
  return c;
}

json ilq_json(const IlqOptions& o) {
  return {{"max_iterations", o.max_iterations},
          {"trajectory_tolerance", o.trajectory_tolerance},
          {"initial_step_scale", o.initial_step_scale},
          {"step_backoff", o.step_backoff},
          {"min_step_scale", o.min_step_scale},
          {"regularization_scale", o.lq.regularization_scale},
          {"min_reciprocal_condition", o.lq.min_reciprocal_condition}};
}

IlqOptions read_ilq(const json& j, IlqOptions o) {
  read_if(j, "max_iterations", o.max_iterations);
  read_double_if(j, "trajectory_tolerance", o.trajectory_tolerance);
  read_double_if(j, "initial_step_scale", o.initial_step_scale);
  read_double_if(j, "step_backoff", o.step_backoff);
  read_double_if(j, "min_step_scale", o.min_step_scale);
  read_double_if(j, "regularization_scale", o.lq.regularization_scale);
  read_double_if(j, "min_reciprocal_condition", o.lq.min_reciprocal_condition);
  o.validate();
  return o;
}

json options_json(const RunOptions& o) {
  const NpaceOptions& n = o.npace;
  return {
      {"method", to_string(o.method)},
      {"seed", o.seed},
      {"injected_noise_std", o.injected_noise_std},
      {"ilq", ilq_json(n.ilq)},
      {"jacobian",
       {{"mode", n.jacobian.mode == JacobianMode::kFrozen ? "frozen" : "unfrozen"},
        {"relative_step", n.jacobian.relative_step}}},
      {"learner",
       {{"kind", n.learner.kind == LearnerKind::kBayes ? "bayes" : "gradient"},
        {"learning_rate", n.learner.learning_rate}}},
      {"teaching",
       {{"eta", n.teaching.eta},
        {"max_steps", n.teaching.max_steps},
        {"fd_step", n.teaching.fd_step},
        {"trust_region", n.teaching.trust_region},
        {"stationarity_tolerance", n.teaching.stationarity_tolerance}}},
      {"minmax",
       {{"boxes", boxes_json(o.minmax.boxes)},
        {"tolerance", o.minmax.tolerance},
        {"max_evaluations", o.minmax.max_evaluations},
        {"sweeps", o.minmax.sweeps},
        {"warm_start", o.minmax.warm_start}}},
      {"ekf",
       {{"process_noise", o.ekf.process_noise},
        {"observation_noise", o.ekf.observation_noise},
        {"prior_variance", o.ekf.prior_variance},
        {"policy_prior_variance", o.ekf.policy_prior_variance},
        {"reinflation", o.ekf.reinflation}}}};
}

RunOptions read_options(const json& j, RunOptions o) {
  if (j.contains("method")) o.method = method_from_string(j.at("method").get<std::string>());
  read_if(j, "seed", o.seed);
  read_double_if(j, "injected_noise_std", o.injected_noise_std);
  if (!(o.injected_noise_std >= 0.0))
    throw ContractError("config: injected_noise_std must be non-negative");
  NpaceOptions& n = o.npace;
  if (j.contains("ilq")) n.ilq = read_ilq(j.at("ilq"), n.ilq);
  n.jacobian.ilq = n.ilq;
  if (j.contains("jacobian")) {
    const json& jj = j.at("jacobian");
    if (jj.contains("mode")) {
      const std::string mode = jj.at("mode").get<std::string>();
      if (mode == "frozen")
        n.jacobian.mode = JacobianMode::kFrozen;
      else if (mode == "unfrozen")
        n.jacobian.mode = JacobianMode::kUnfrozen;
      else
        throw ContractError("config: unknown jacobian mode '" + mode + "'");
    }
    read_double_if(jj, "relative_step", n.jacobian.relative_step);
  }
  if (j.contains("learner")) {
    const json& jl = j.at("learner");
    if (jl.contains("kind")) {
      const std::string kind = jl.at("kind").get<std::string>();
      if (kind == "bayes")
        n.learner.kind = LearnerKind::kBayes;
      else if (kind == "gradient")
        n.learner.kind = LearnerKind::kGradient;
      else
        throw ContractError("config: unknown learner '" + kind + "'");
    }
    read_double_if(jl, "learning_rate", n.learner.learning_rate);
  }
  if (j.contains("teaching")) {
    const json& jt = j.at("teaching");
    read_double_if(jt, "eta", n.teaching.eta);
    read_if(jt, "max_steps", n.teaching.max_steps);
    read_double_if(jt, "fd_step", n.teaching.fd_step);
    read_double_if(jt, "trust_region", n.teaching.trust_region);
    read_double_if(jt, "stationarity_tolerance", n.teaching.stationarity_tolerance);
  }
  n.teaching.validate();
  if (j.contains("minmax")) {
    const json& jm = j.at("minmax");
    if (jm.contains("boxes")) o.minmax.boxes = read_boxes(jm.at("boxes"));
    read_double_if(jm, "tolerance", o.minmax.tolerance);
    read_if(jm, "max_evaluations", o.minmax.max_evaluations);
    read_if(jm, "warm_start", o.minmax.warm_start);
    read_if(jm, "sweeps", o.minmax.sweeps);
  }
  o.minmax.validate();
  if (j.contains("ekf")) {
    const json& je = j.at("ekf");
    read_double_if(je, "process_noise", o.ekf.process_noise);
    read_double_if(je, "observation_noise", o.ekf.observation_noise);
    read_double_if(je, "prior_variance", o.ekf.prior_variance);
    read_double_if(je, "policy_prior_variance", o.ekf.policy_prior_variance);
    read_double_if(je, "reinflation", o.ekf.reinflation);
  }
  o.ekf.validate();
  return o;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ContractError("csv: bad number '" + s + "'");
  }
  if (used != s.size()) throw ContractError("csv: bad number '" + s + "'");
  return v;
}

bool has_estimates(const RunLog& log) {
  return !log.steps.empty() && log.steps.front().estimates[0].size() > 0;
}

std::vector<std::string> header_for(const ScenarioConfig& config, bool estimates) {
  const ScenarioInfo info = scenario_info(config.id);
  std::vector<std::string> h{"t"};
  for (const std::string& s : info.state_names) h.push_back(s);
  for (int k = 0; k < kNumAgents; ++k)
    for (const std::string& a : info.action_names[k]) h.push_back(a);
  if (estimates) {
    for (int k = 0; k < kNumAgents; ++k)
      for (int i = 0; i < config.true_intents[other(k)].size(); ++i)
        h.push_back("theta_hat" + std::to_string(k) + "_" + std::to_string(i));
    for (int k = 0; k < kNumAgents; ++k)
      for (int i = 0; i < config.true_intents[other(k)].size(); ++i)
        h.push_back("theta_var" + std::to_string(k) + "_" + std::to_string(i));
  }
  for (int k = 0; k < kNumAgents; ++k) h.push_back("cost" + std::to_string(k));
  h.insert(h.end(), {"control_ms", "estimation_ms", "teaching_fallback", "plan_fallback"});
  return h;
}

std::string run_stem(const MethodVariant& variant, int run) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", run);
  return variant.label() + "_run" + buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json method_summary_json(const MethodSummary& m) {
  return {{"label", m.variant.label()},
          {"method", to_string(m.variant.method)},
          {"eta", m.variant.eta},
          {"requested", m.requested},
          {"samples", m.samples},
          {"hard_failures", m.hard_failures},
          {"collisions", m.collisions},
          {"failure_rate", number(m.failure_rate)},
          {"control_effort_mean", number(m.control_effort_mean)},
          {"crossing_mean", number(m.crossing_mean)},
          {"crossing_std", number(m.crossing_std)},
          {"crossings", m.crossings},
          {"final_error_mean", number(m.final_error_mean)},
          {"final_error_median", number(m.final_error_median)},
          {"log_mse_mean", number(m.log_mse_mean)},
          {"landing_error_mean", number(m.landing_error_mean)}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ContractError(path.string() + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(ScenarioId id) {
  ExperimentConfig c;
  c.scenario = ScenarioConfig::defaults(id);
  return c;
}

json to_json(const ExperimentConfig& config) {
  return {{"scenario", scenario_json(config.scenario)},
          {"options", options_json(config.options)}};
}

ExperimentConfig experiment_from_json(const json& j) {
  try {
    const json empty = json::object();
    const json& js = j.contains("scenario") ? j.at("scenario") : empty;
    if (!js.contains("id")) throw ContractError("config: scenario.id is required");
    const ScenarioId id = scenario_from_string(js.at("id").get<std::string>());
    ExperimentConfig c = ExperimentConfig::defaults(id);
    c.scenario = read_scenario(js, id);
    if (j.contains("options")) c.options = read_options(j.at("options"), c.options);
    return c;
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_experiment(const fs::path& path) {
  return experiment_from_json(read_json_file(path));
}

void save_experiment(const ExperimentConfig& config, const fs::path& path) {
  write_text(path, to_json(config).dump(2) + "\n");
}

std::vector<std::string> csv_header(const ScenarioConfig& config) {
  return header_for(config, true);
}

void write_run_csv(const RunLog& log, std::ostream& out) {
  const bool estimates = has_estimates(log);
  const std::vector<std::string> header = header_for(log.config, estimates);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const StepRecord& r : log.steps) {
    std::vector<double> row{static_cast<double>(r.t)};
    for (int i = 0; i < r.state.size(); ++i) row.push_back(r.state(i));
    for (int k = 0; k < kNumAgents; ++k)
      for (int i = 0; i < r.actions[k].size(); ++i) row.push_back(r.actions[k](i));
    if (estimates) {
      for (int k = 0; k < kNumAgents; ++k)
        for (int i = 0; i < r.estimates[k].size(); ++i) row.push_back(r.estimates[k](i));
      for (int k = 0; k < kNumAgents; ++k)
        for (int i = 0; i < r.variances[k].size(); ++i) row.push_back(r.variances[k](i));
    }
    for (int k = 0; k < kNumAgents; ++k) row.push_back(r.stage_costs[k]);
    row.push_back(r.control_ms);
    row.push_back(r.estimation_ms);
    row.push_back(r.teaching_fallback ? 1.0 : 0.0);
    row.push_back(r.plan_fallback ? 1.0 : 0.0);
    if (row.size() != header.size())
      throw ContractError("write_run_csv: step record does not match the scenario layout");
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

void save_run(const RunLog& log, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  std::ostringstream csv;
  write_run_csv(log, csv);
  write_text(dir / (stem + ".csv"), csv.str());
  json meta{{"scenario", scenario_json(log.config)},
                  {"method", to_string(log.method)},
                  {"eta", log.eta},
                  {"seed", log.seed},
                  {"failed", log.failed},
                  {"error", log.error},
                  {"has_estimates", has_estimates(log)},
                  {"final_state", vector_json(log.final_state)}};
  if (log.initial_estimator) {
    json& ledgers = meta["initial_estimator"] = json::array();
    for (const AgentLedger& a : log.initial_estimator->agents)
      ledgers.push_back({{"peer", belief_json(a.peer)}, {"self_model", belief_json(a.self_model)}});
  }
  write_text(dir / (stem + ".json"), meta.dump(2) + "\n");
}

RunLog load_run(const fs::path& dir, const std::string& stem) {
  const json meta = read_json_file(dir / (stem + ".json"));
  RunLog log;
  try {
    const ScenarioId id = scenario_from_string(meta.at("scenario").at("id").get<std::string>());
    log.config = read_scenario(meta.at("scenario"), id);
    log.method = method_from_string(meta.at("method").get<std::string>());
    log.eta = meta.at("eta").get<double>();
    log.seed = meta.at("seed").get<unsigned long long>();
    log.failed = meta.at("failed").get<bool>();
    log.error = meta.at("error").get<std::string>();
    log.final_state = read_vector(meta.at("final_state"));
    if (meta.contains("initial_estimator")) {
      const json& ledgers = meta.at("initial_estimator");
      if (!ledgers.is_array() || ledgers.size() != kNumAgents)
        throw ContractError(stem + ".json: initial_estimator needs two ledgers");
      EstimatorState est;
      for (int k = 0; k < kNumAgents; ++k)
        est.agents[k] = {read_belief(ledgers[k].at("peer")), read_belief(ledgers[k].at("self_model"))};
      log.initial_estimator = est;
    }
  } catch (const json::exception& e) {
    throw ContractError(stem + ".json: " + e.what());
  }
  const bool estimates = meta.value("has_estimates", false);

  std::ifstream in(dir / (stem + ".csv"));
  if (!in) throw ContractError("cannot read " + (dir / (stem + ".csv")).string());
  std::string line;
  if (!std::getline(in, line)) throw ContractError(stem + ".csv: missing header");
  const std::vector<std::string> header = header_for(log.config, estimates);
  if (split_csv(line) != header) throw ContractError(stem + ".csv: unexpected header");

  const ScenarioInfo info = scenario_info(log.config.id);
  const int n = static_cast<int>(info.state_names.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size()) throw ContractError(stem + ".csv: ragged row");
    std::size_t c = 0;
    const auto next = [&] { return parse_double(cells[c++]); };
    StepRecord r;
    r.t = static_cast<int>(next());
    r.state = Vector(n);
    for (int i = 0; i < n; ++i) r.state(i) = next();
    for (int k = 0; k < kNumAgents; ++k) {
      r.actions[k] = Vector(static_cast<int>(info.action_names[k].size()));
      for (int i = 0; i < r.actions[k].size(); ++i) r.actions[k](i) = next();
    }
    if (estimates) {
      for (int k = 0; k < kNumAgents; ++k) {
        r.estimates[k] = Vector(log.config.true_intents[other(k)].size());
        for (int i = 0; i < r.estimates[k].size(); ++i) r.estimates[k](i) = next();
      }
      for (int k = 0; k < kNumAgents; ++k) {
        r.variances[k] = Vector(log.config.true_intents[other(k)].size());
        for (int i = 0; i < r.variances[k].size(); ++i) r.variances[k](i) = next();
      }
    }
    for (int k = 0; k < kNumAgents; ++k) r.stage_costs[k] = next();
    r.control_ms = next();
    r.estimation_ms = next();
    r.teaching_fallback = next() != 0.0;
    r.plan_fallback = next() != 0.0;
    log.steps.push_back(std::move(r));
  }
  log.metrics = compute_metrics(log);
  return log;
}

std::string MethodVariant::label() const {
  std::string out = to_string(method);
  if (method == Method::kNpaceComm) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_eta%g", eta);
    out += buf;
  }
  return out;
}

const MethodSummary& McSummary::at(const MethodVariant& variant) const {
  for (const MethodSummary& m : methods)
    if (m.variant == variant) return m;
  throw ContractError("McSummary: no entry for " + variant.label());
}

json to_json(const McSummary& summary) {
  json methods = json::array();
  for (const MethodSummary& m : summary.methods) methods.push_back(method_summary_json(m));
  return {{"scenario", to_string(summary.scenario)},
          {"runs", summary.runs},
          {"seed", summary.seed},
          {"methods", methods}};
}

McSummary summary_from_json(const json& j) {
  try {
    McSummary s;
    s.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    s.runs = j.at("runs").get<int>();
    s.seed = j.at("seed").get<unsigned long long>();
    for (const json& jm : j.at("methods")) {
      MethodSummary m;
      m.variant.method = method_from_string(jm.at("method").get<std::string>());
      m.variant.eta = jm.at("eta").get<double>();
      m.requested = jm.at("requested").get<int>();
      m.samples = jm.at("samples").get<int>();
      m.hard_failures = jm.at("hard_failures").get<int>();
      m.collisions = jm.at("collisions").get<int>();
      m.failure_rate = read_number(jm.at("failure_rate"));
      m.control_effort_mean = read_number(jm.at("control_effort_mean"));
      m.crossing_mean = read_number(jm.at("crossing_mean"));
      m.crossing_std = read_number(jm.at("crossing_std"));
      m.crossings = jm.at("crossings").get<int>();
      m.final_error_mean = read_number(jm.at("final_error_mean"));
      m.final_error_median = read_number(jm.at("final_error_median"));
      m.log_mse_mean = read_number(jm.at("log_mse_mean"));
      m.landing_error_mean = read_number(jm.at("landing_error_mean"));
      s.methods.push_back(m);
    }
    return s;
  } catch (const json::exception& e) {
    throw ContractError(std::string("summary: ") + e.what());
  }
}

MethodSummary summarize(const MethodVariant& variant, int requested,
                        const std::vector<RunLog>& logs) {
  MethodSummary m;
  m.variant = variant;
  m.requested = requested;
  std::vector<double> effort, crossing, final_error, log_mse, landing;
  for (const RunLog& log : logs) {
    if (log.failed) {
      ++m.hard_failures;
      continue;
    }
    ++m.samples;
    const RunMetrics& r = log.metrics;
    if (r.collision) ++m.collisions;
    effort.push_back(r.control_effort);
    for (double c : r.crossing_time)
      if (!std::isnan(c)) crossing.push_back(c);
    double err = 0.0;
    int err_count = 0;
    for (double e : r.final_error)
      if (!std::isnan(e)) {
        err += e;
        ++err_count;
      }
    if (err_count > 0) final_error.push_back(err / err_count);
    if (!std::isnan(r.log_mse)) log_mse.push_back(r.log_mse);
    if (!std::isnan(r.landing_error)) landing.push_back(r.landing_error);
  }
  m.failure_rate = m.samples > 0 ? static_cast<double>(m.collisions) / m.samples : kNaN;
  m.control_effort_mean = mean_of(effort);
  m.crossings = static_cast<int>(crossing.size());
  m.crossing_mean = mean_of(crossing);
  if (crossing.empty()) {
    m.crossing_std = kNaN;
  } else {
    double ss = 0.0;
    for (double c : crossing) ss += (c - m.crossing_mean) * (c - m.crossing_mean);
    m.crossing_std = std::sqrt(ss / static_cast<double>(crossing.size()));
  }
  m.final_error_mean = mean_of(final_error);
  m.final_error_median = final_error.empty() ? kNaN : percentile(final_error, 0.5);
  m.log_mse_mean = mean_of(log_mse);
  m.landing_error_mean = mean_of(landing);
  return m;
}

EstimatorState misspecified_estimator(const ScenarioConfig& config, const IntentPair& self_means,
                                      const std::array<double, kNumAgents>& self_variances) {
  EstimatorState est = EstimatorState::shared(config.initial_estimates, config.prior_variance,
                                              config.action_noise_std);
  for (int k = 0; k < kNumAgents; ++k) {
    GaussianBelief& model = est.agents[k].self_model;
    if (self_means[k].size() != model.mean.size() || !(self_variances[k] > 0.0))
      throw ContractError("misspecified_estimator: bad self-model mean or variance");
    model.mean = self_means[k];
    model.covariance = self_variances[k] * Matrix::Identity(model.mean.size(), model.mean.size());
  }
  return est;
}

std::vector<RunSample> draw_samples(const ScenarioConfig& base, int runs,
                                    unsigned long long seed) {
  if (runs < 1) throw ContractError("draw_samples: runs must be >= 1");
  std::vector<RunSample> out(runs, RunSample{base, 0, std::nullopt});
  switch (base.id) {
    case ScenarioId::kIntersection: {
      const auto& box = base.intent_bounds[0];
      const double lower = box ? box->lower(0) : 20.0;
      const double upper = box ? box->upper(0) : 50.0;
      const auto draws = sample_intersection_intents(runs, lower, upper, seed);
      for (int i = 0; i < runs; ++i)
        out[i].config.true_intents = IntentPair::scalar(draws[i].first, draws[i].second);
      break;
    }
    case ScenarioId::kLaneMerge: {
      const auto draws = sample_relative(runs, 100.0, 0.7, seed);
      for (int i = 0; i < runs; ++i)
        out[i].initial_estimator = misspecified_estimator(
            base, IntentPair::scalar(draws[i].first, draws[i].second), base.prior_variance);
      break;
    }
    case ScenarioId::kLunarLander:
    case ScenarioId::kLinearLander:
      break;
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (RunSample& s : out) s.seed = rng();
  return out;
}

MonteCarloResult run_montecarlo(const MonteCarloSpec& spec) {
  if (spec.runs < 1) throw ContractError("run_montecarlo: runs must be >= 1");
  if (spec.methods.empty()) throw ContractError("run_montecarlo: no methods");
  spec.base.scenario.validate();
  const std::vector<RunSample> samples = draw_samples(spec.base.scenario, spec.runs, spec.seed);

  const std::size_t methods = spec.methods.size();
  const std::size_t tasks = methods * samples.size();
  MonteCarloResult result;
  result.logs.assign(methods, std::vector<RunLog>(samples.size()));

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t task = next++; task < tasks; task = next++) {
      const std::size_t m = task / samples.size();
      const std::size_t i = task % samples.size();
      RunOptions options = spec.base.options;
      options.method = spec.methods[m].method;
      options.npace.teaching.eta = spec.methods[m].eta;
      options.seed = samples[i].seed;
      options.initial_estimator = samples[i].initial_estimator;
      RunLog& slot = result.logs[m][i];
      try {
        slot = run_game(samples[i].config, options);
      } catch (const std::exception& e) {
        slot = RunLog{};
        slot.config = samples[i].config;
        slot.method = options.method;
        slot.eta = options.method == Method::kNpaceComm ? options.npace.teaching.eta : 0.0;
        slot.seed = options.seed;
        slot.initial_estimator = options.initial_estimator;
        slot.final_state = samples[i].config.initial_state;
        slot.failed = true;
        slot.error = e.what();
        slot.metrics = compute_metrics(slot);
      }
    }
  };
  int threads = spec.threads > 0 ? spec.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, static_cast<int>(tasks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
  }

  McSummary& summary = result.summary;
  summary.scenario = spec.base.scenario.id;
  summary.runs = spec.runs;
  summary.seed = spec.seed;
  for (std::size_t m = 0; m < methods; ++m)
    summary.methods.push_back(summarize(spec.methods[m], spec.runs, result.logs[m]));

  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    json manifest{{"scenario", to_string(summary.scenario)},
                  {"runs", spec.runs},
                  {"seed", spec.seed},
                  {"methods", json::array()}};
    for (std::size_t m = 0; m < methods; ++m) {
      manifest["methods"].push_back(
          {{"method", to_string(spec.methods[m].method)}, {"eta", spec.methods[m].eta}});
      for (std::size_t i = 0; i < samples.size(); ++i)
        save_run(result.logs[m][i], spec.out_dir, run_stem(spec.methods[m], static_cast<int>(i)));
    }
    save_experiment(spec.base, spec.out_dir / "config.json");
    write_text(spec.out_dir / "manifest.json", manifest.dump(2) + "\n");
    write_text(spec.out_dir / "summary.json", to_json(summary).dump(2) + "\n");
  }
  return result;
}

McSummary summarize_directory(const fs::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  McSummary summary;
  try {
    summary.scenario = scenario_from_string(manifest.at("scenario").get<std::string>());
    summary.runs = manifest.at("runs").get<int>();
    summary.seed = manifest.at("seed").get<unsigned long long>();
    for (const json& jm : manifest.at("methods")) {
      MethodVariant variant{method_from_string(jm.at("method").get<std::string>()),
                            jm.at("eta").get<double>()};
      std::vector<RunLog> logs;
      for (int i = 0; i < summary.runs; ++i) logs.push_back(load_run(dir, run_stem(variant, i)));
      summary.methods.push_back(summarize(variant, summary.runs, logs));
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("manifest: ") + e.what());
  }
  return summary;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  if (!(q >= 0.0 && q <= 1.0)) throw ContractError("percentile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

TimingStats timing_stats(const std::vector<double>& values) {
  return {percentile(values, 0.5), percentile(values, 0.95), static_cast<int>(values.size())};
}

TimingTable benchmark_timing(const ExperimentConfig& config, int runs,
                             unsigned long long seed) {
  std::vector<double> control, estimation, total;
  for (const RunSample& sample : draw_samples(config.scenario, runs, seed)) {
    RunOptions options = config.options;
    options.seed = sample.seed;
    options.initial_estimator = sample.initial_estimator;
    const RunLog log = run_game(sample.config, options);
    for (const StepRecord& r : log.steps) {
      control.push_back(r.control_ms);
      estimation.push_back(r.estimation_ms);
      total.push_back(r.control_ms + r.estimation_ms);
    }
  }
  return {timing_stats(control), timing_stats(estimation), timing_stats(total)};
}

}  // namespace npace
