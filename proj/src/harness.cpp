#include "kuq/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "kuq/dsmc.hpp"
#include "kuq/parallel.hpp"

namespace kuq {

std::string to_string(ReferenceKind kind) {
  switch (kind) {
    case ReferenceKind::SteadyCollocation: return "steady-collocation";
    case ReferenceKind::DsmcCollocation: return "dsmc-collocation";
    case ReferenceKind::FpFine: return "fp-fine";
  }
  return "?";
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string version_string() { return "kinetic-uq 0.1.0"; }

// --- scenario ---------------------------------------------------------------

namespace {

std::string join_doubles(const std::vector<double>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ",";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", xs[i]);
    os << buf;
  }
  return os.str();
}

std::string join_sizes(const std::vector<std::size_t>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ",";
    os << xs[i];
  }
  return os.str();
}

}  // namespace

std::string ScenarioSpec::canonical_text() const {
  std::ostringstream os;
  os << "model.key = " << model_key << "\n";
  os << "output.dir = " << out_dir << "\n";
  os << "output.seed = " << seed << "\n";
  os << "output.threads = " << threads << "\n";
  os << "solver.N = " << N << "\n";
  os << "solver.N_MF = " << N_MF << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", eps);
  os << "solver.eps = " << buf << "\n";
  os << "solver.k = " << k << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", t_final);
  os << "solver.snapshots = " << join_doubles(snapshot_times) << "\n";
  os << "solver.t_final = " << buf << "\n";
  os << "uq.M = " << join_sizes(M_list) << "\n";
  os << "uq.M_MF = " << M_MF << "\n";
  os << "uq.N_Z = " << N_Z << "\n";
  os << "uq.R = " << R << "\n";
  os << "uq.collocation_nodes = " << collocation_nodes << "\n";
  os << "uq.kinds = ";
  for (std::size_t i = 0; i < kinds.size(); ++i) os << (i ? "," : "") << to_string(kinds[i]);
  os << "\n";
  os << "uq.qoi = ";
  for (std::size_t i = 0; i < qois.size(); ++i) os << (i ? "," : "") << qois[i].name();
  os << "\n";
  os << "uq.ref_runs = " << ref_runs << "\n";
  os << "uq.reference = " << to_string(reference) << "\n";
  return os.str();
}

void ScenarioSpec::validate() const {
  make_model(model_key);  // throws on unknown key
  if (kinds.empty()) throw config_error("scenario: no estimator kinds requested");
  if (M_list.empty()) throw config_error("scenario: key 'M' must list at least one value");
  for (std::size_t m : M_list)
    if (m < 1) throw config_error("scenario: key 'M' entries must be positive");
  if (N < 2) throw config_error("scenario: key 'N' must be at least 2");
  if (N_MF < 4) throw config_error("scenario: key 'N_MF' must be at least 4");
  if (N_Z < 4) throw config_error("scenario: key 'N_Z' must be at least 4");
  if (k < 1) throw config_error("scenario: key 'k' must be a positive integer");
  if (R < 1) throw config_error("scenario: key 'R' must be positive");
  if (!(eps > 0.0 && eps <= 1.0)) throw config_error("scenario: key 'eps' must be in (0, 1]");
  if (!(t_final >= 0.0)) throw config_error("scenario: key 't_final' must be nonnegative");
  if (ref_runs < 1) throw config_error("scenario: key 'ref_runs' must be positive");
  if (collocation_nodes < 1)
    throw config_error("scenario: key 'collocation_nodes' must be positive");
  for (double s : snapshot_times)
    if (s > t_final + 1e-12)
      throw config_error("scenario: key 'snapshots' has a time beyond t_final");
  const bool wants_mfcv =
      std::any_of(kinds.begin(), kinds.end(),
                  [](EstimatorKind kd) { return kd == EstimatorKind::MFCV; });
  if (wants_mfcv) {
    if (M_MF < 2) throw config_error("scenario: kind MFCV requires key 'M_MF' >= 2");
    const std::size_t m_min = *std::min_element(M_list.begin(), M_list.end());
    const std::uint64_t bound = budget_max_mmf(N, m_min, N_MF, k);
    if (M_MF > bound)
      throw config_error("scenario: key 'M_MF' = " + std::to_string(M_MF) +
                         " exceeds the cost bound floor(k N M / N_MF) = " +
                         std::to_string(bound) + " at M = " + std::to_string(m_min));
  }
}

namespace {

struct KvDocument {
  std::map<std::string, std::string> entries;  // "section.key" -> value
  std::map<std::string, bool> consumed;

  std::string take(const std::string& key, const std::string& fallback) {
    consumed[key] = true;
    auto it = entries.find(key);
    return it == entries.end() ? fallback : it->second;
  }
  bool has(const std::string& key) const { return entries.count(key) != 0; }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KvDocument parse_kv(const std::string& text) {
  KvDocument doc;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("scenario line " + std::to_string(line_no) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("scenario line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (doc.entries.count(key))
      throw config_error("scenario: duplicated key '" + key + "'");
    doc.entries[key] = value;
  }
  return doc;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream in(s);
  while (std::getline(in, token, ',')) {
    token = trim(token);
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("scenario: key '" + key + "' has a malformed number: " + value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v))
    throw config_error("scenario: key '" + key + "' must be an integer");
  return static_cast<long long>(v);
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text) {
  KvDocument doc = parse_kv(text);
  ScenarioSpec spec;

  if (!doc.has("model.key")) throw config_error("scenario: missing required key 'model.key'");
  spec.model_key = doc.take("model.key", "");

  spec.N = static_cast<std::size_t>(parse_int("solver.N", doc.take("solver.N", "10000")));
  spec.eps = parse_double("solver.eps", doc.take("solver.eps", "0.1"));
  spec.t_final = parse_double("solver.t_final", doc.take("solver.t_final", "5"));
  spec.N_MF = static_cast<int>(parse_int("solver.N_MF", doc.take("solver.N_MF", "20")));
  spec.k = static_cast<int>(parse_int("solver.k", doc.take("solver.k", "1")));
  for (const auto& tok : split_list(doc.take("solver.snapshots", "")))
    spec.snapshot_times.push_back(parse_double("solver.snapshots", tok));

  spec.kinds.clear();
  for (const auto& tok : split_list(doc.take("uq.kinds", "MC")))
    spec.kinds.push_back(estimator_kind_from_string(tok));
  spec.M_list.clear();
  for (const auto& tok : split_list(doc.take("uq.M", "20")))
    spec.M_list.push_back(static_cast<std::size_t>(parse_int("uq.M", tok)));
  spec.M_MF = static_cast<std::size_t>(parse_int("uq.M_MF", doc.take("uq.M_MF", "0")));
  spec.N_Z = static_cast<int>(parse_int("uq.N_Z", doc.take("uq.N_Z", "100")));
  spec.R = static_cast<int>(parse_int("uq.R", doc.take("uq.R", "50")));
  spec.qois.clear();
  for (const auto& tok : split_list(doc.take("uq.qoi", "density")))
    spec.qois.push_back(QoiSpec::parse(tok));
  const std::string ref = doc.take("uq.reference", "steady-collocation");
  if (ref == "steady-collocation") spec.reference = ReferenceKind::SteadyCollocation;
  else if (ref == "dsmc-collocation") spec.reference = ReferenceKind::DsmcCollocation;
  else if (ref == "fp-fine") spec.reference = ReferenceKind::FpFine;
  else throw config_error("scenario: key 'uq.reference' has unknown value: " + ref);
  spec.ref_runs = static_cast<int>(parse_int("uq.ref_runs", doc.take("uq.ref_runs", "200")));
  spec.collocation_nodes = static_cast<int>(
      parse_int("uq.collocation_nodes", doc.take("uq.collocation_nodes", "20")));

  spec.out_dir = doc.take("output.dir", "out");
  spec.seed = static_cast<std::uint64_t>(parse_int("output.seed", doc.take("output.seed", "1")));
  spec.threads = static_cast<int>(parse_int("output.threads", doc.take("output.threads", "0")));

  for (const auto& [key, value] : doc.entries)
    if (!doc.consumed.count(key))
      throw config_error("scenario: unknown key '" + key + "'");

  spec.validate();
  return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("scenario file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

// --- error norms --------------------------------------------------------------

double field_error_norm(const std::vector<std::vector<double>>& estimates,
                        const std::vector<double>& reference, double p,
                        double cell_weight, NormOrdering ordering) {
  if (estimates.empty()) throw argument_error("field_error_norm: no replications");
  const std::size_t n = reference.size();
  for (const auto& e : estimates)
    if (e.size() != n) throw argument_error("field_error_norm: shape mismatch");
  const double r = static_cast<double>(estimates.size());

  if (ordering == NormOrdering::StateThenRandom) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double ms = 0.0;
      for (const auto& e : estimates) {
        const double d = e[i] - reference[i];
        ms += d * d;
      }
      acc += cell_weight * std::pow(std::sqrt(ms / r), p);
    }
    return std::pow(acc, 1.0 / p);
  }
  double acc = 0.0;
  for (const auto& e : estimates) {
    double lp = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      lp += cell_weight * std::pow(std::abs(e[i] - reference[i]), p);
    acc += std::pow(std::pow(lp, 1.0 / p), 2.0);
  }
  return std::sqrt(acc / r);
}

// --- experiment --------------------------------------------------------------

namespace {

using Field = std::vector<double>;

// reference[qoi][snapshot]
std::vector<std::vector<Field>> compute_references(const ScenarioSpec& spec,
                                                   const ModelSpec& model,
                                                   const Grid1D& recon,
                                                   const std::vector<double>& snaps) {
  const CollocationRule rule =
      CollocationRule::for_uniform(spec.collocation_nodes, model.z_law);
  std::vector<std::vector<Field>> ref(spec.qois.size(),
                                      std::vector<Field>(snaps.size()));

  switch (spec.reference) {
    case ReferenceKind::SteadyCollocation: {
      if (!model.steady)
        throw config_error("scenario: model '" + model.key +
                           "' has no analytic steady state; choose another reference");
      for (std::size_t q = 0; q < spec.qois.size(); ++q) {
        const Field mean = collocation_mean(
            [&](double z) {
              SteadyStateDensity steady(model.steady(z), model.domain);
              return evaluate_qoi_density([&](double w) { return steady(w); },
                                          model.window, spec.qois[q], recon, true);
            },
            rule);
        for (std::size_t s = 0; s < snaps.size(); ++s) ref[q][s] = mean;
      }
      return ref;
    }
    case ReferenceKind::DsmcCollocation: {
      // Averaged independent DSMC runs on the collocation nodes; the z
      // integral stays spectral, the state noise averages out over ref_runs.
      // Per-run rows land in preassigned slots so the reduction order is
      // fixed regardless of scheduling.
      const std::size_t nj = rule.nodes.size();
      const std::size_t nr = static_cast<std::size_t>(spec.ref_runs);
      std::vector<std::vector<std::vector<Field>>> rows(
          nj * nr, std::vector<std::vector<Field>>(spec.qois.size(),
                                                   std::vector<Field>(snaps.size())));
      parallel_for(nj * nr, spec.threads, [&](std::size_t idx) {
        const std::size_t j = idx / nr;
        const auto r = static_cast<std::uint32_t>(idx % nr);
        RngStreamSpec seed{spec.seed, 0x80000000u + r, static_cast<std::uint32_t>(j),
                           StreamPurpose::Reference};
        const auto states =
            run_dsmc(model, spec.N, rule.nodes[j], spec.eps, spec.t_final, seed, snaps);
        for (std::size_t q = 0; q < spec.qois.size(); ++q)
          for (std::size_t s = 0; s < snaps.size(); ++s)
            rows[idx][q][s] = evaluate_qoi(states[s], spec.qois[q], recon);
      });
      for (std::size_t q = 0; q < spec.qois.size(); ++q)
        for (std::size_t s = 0; s < snaps.size(); ++s) {
          Field mean(rows[0][q][s].size(), 0.0);
          for (std::size_t j = 0; j < nj; ++j)
            for (std::size_t r = 0; r < nr; ++r) {
              const Field& row = rows[j * nr + r][q][s];
              const double w = rule.weights[j] / static_cast<double>(nr);
              for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += w * row[i];
            }
          ref[q][s] = std::move(mean);
        }
      return ref;
    }
    case ReferenceKind::FpFine: {
      const Grid1D fine{model.window.lo, model.window.hi, 4 * spec.N_MF};
      const double dt = spec.k * spec.eps / 4.0;
      const std::size_t nj = rule.nodes.size();
      std::vector<std::vector<std::vector<Field>>> rows(nj);
      parallel_for(nj, spec.threads, [&](std::size_t j) {
        const auto fp = run_fp(model, fine, rule.nodes[j], spec.t_final, dt, snaps);
        rows[j].assign(spec.qois.size(), std::vector<Field>(snaps.size()));
        for (std::size_t q = 0; q < spec.qois.size(); ++q)
          for (std::size_t s = 0; s < snaps.size(); ++s)
            rows[j][q][s] = evaluate_qoi_grid(fp[s], spec.qois[q], recon);
      });
      for (std::size_t q = 0; q < spec.qois.size(); ++q)
        for (std::size_t s = 0; s < snaps.size(); ++s) {
          Field mean(rows[0][q][s].size(), 0.0);
          for (std::size_t j = 0; j < nj; ++j)
            for (std::size_t i = 0; i < mean.size(); ++i)
              mean[i] += rule.weights[j] * rows[j][q][s][i];
          ref[q][s] = std::move(mean);
        }
      return ref;
    }
  }
  throw config_error("scenario: unhandled reference kind");
}

double weighted_l2(const Field& a, const Field& b, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += w[i] * d * d;
  }
  return std::sqrt(s);
}

std::vector<double> entry_weights_for(const QoiSpec& q, const Grid1D& recon) {
  std::vector<double> w(q.size(recon.n), 1.0);
  if (q.kind == QoiSpec::Kind::Density) w.assign(recon.n, recon.dw());
  if (q.kind == QoiSpec::Kind::Lorenz) w.assign(q.points + 1, 1.0 / (q.points + 1.0));
  return w;
}

}  // namespace

ExperimentReport run_experiment(const ScenarioSpec& spec) {
  spec.validate();
  const ModelSpec model = make_model(spec.model_key);
  model.validate();

  ExperimentReport report;
  report.spec = spec;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(spec.canonical_text())));
  report.config_hash = hash;
  report.version = version_string();

  std::vector<double> snaps = spec.snapshot_times;
  if (snaps.empty()) snaps = {spec.t_final};
  const Grid1D recon{model.window.lo, model.window.hi, spec.N_Z};

  try {
    const auto references = compute_references(spec, model, recon, snaps);

    for (EstimatorKind kind : spec.kinds) {
      for (std::size_t M : spec.M_list) {
        for (std::size_t q = 0; q < spec.qois.size(); ++q) {
          const QoiSpec& qoi = spec.qois[q];
          const std::vector<double> weights = entry_weights_for(qoi, recon);
          const auto t0 = std::chrono::steady_clock::now();

          // R independent replications; per replication one estimate per snapshot.
          std::vector<std::vector<CvEstimate>> reps(spec.R);
          for (int r = 0; r < spec.R; ++r) {
            McvConfig cfg;
            cfg.model = model;
            cfg.kind = kind;
            cfg.N = spec.N;
            cfg.M = M;
            cfg.N_MF = spec.N_MF;
            cfg.M_MF = kind == EstimatorKind::MFCV ? spec.M_MF : 0;
            cfg.k = spec.k;
            cfg.eps = spec.eps;
            cfg.t_final = spec.t_final;
            cfg.snapshot_times = snaps;
            cfg.qoi = qoi;
            cfg.N_Z = spec.N_Z;
            cfg.collocation_nodes = spec.collocation_nodes;
            cfg.seed = spec.seed;
            cfg.replication = static_cast<std::uint32_t>(r);
            cfg.threads = spec.threads;
            reps[r] = run_mfcv(cfg);
          }
          const auto t1 = std::chrono::steady_clock::now();
          const double wall = std::chrono::duration<double>(t1 - t0).count();

          for (std::size_t s = 0; s < snaps.size(); ++s) {
            ErrorPoint pt;
            pt.kind = to_string(kind);
            pt.M = M;
            pt.t = snaps[s];
            pt.qoi = qoi.name();
            pt.wall_seconds = wall / snaps.size();
            double err_sum = 0.0, err_sq = 0.0;
            double lam_sum = 0.0, rho_sum = 0.0;
            for (int r = 0; r < spec.R; ++r) {
              const CvEstimate& est = reps[r][s];
              const double err = weighted_l2(est.value, references[q][s], weights);
              err_sum += err;
              err_sq += err * err;
              pt.var_mc += est.var_mc / spec.R;
              pt.var_cv += est.var_cv / spec.R;
              if (!est.lambda_hat.empty()) {
                double l = 0.0, rho = 0.0;
                for (double v : est.lambda_hat) l += v;
                for (double v : est.rho_hat) rho += v;
                lam_sum += l / est.lambda_hat.size();
                rho_sum += rho / est.rho_hat.size();
              }
              pt.cost = est.cost;
            }
            pt.error_mean = err_sum / spec.R;
            if (spec.R > 1) {
              const double var =
                  std::max(0.0, (err_sq - err_sum * err_sum / spec.R) / (spec.R - 1));
              pt.error_stderr = std::sqrt(var / spec.R);
            }
            pt.lambda_mean = lam_sum / spec.R;
            pt.rho_mean = rho_sum / spec.R;
            report.points.push_back(pt);
          }

          // Replication-averaged fields at the final snapshot for the dumps.
          if (qoi.kind == QoiSpec::Kind::Density || qoi.kind == QoiSpec::Kind::Lorenz) {
            FieldDump dump;
            dump.kind = to_string(kind);
            dump.M = M;
            dump.qoi = qoi.name();
            const std::size_t s = snaps.size() - 1;
            Field mean(reps[0][s].value.size(), 0.0);
            for (int r = 0; r < spec.R; ++r)
              for (std::size_t i = 0; i < mean.size(); ++i)
                mean[i] += reps[r][s].value[i] / spec.R;
            dump.value = std::move(mean);
            if (qoi.kind == QoiSpec::Kind::Density) {
              dump.x.resize(recon.n);
              for (int i = 0; i < recon.n; ++i) dump.x[i] = recon.center(i);
              report.densities.push_back(std::move(dump));
            } else {
              dump.x.resize(qoi.points + 1);
              for (int i = 0; i <= qoi.points; ++i)
                dump.x[i] = static_cast<double>(i) / qoi.points;
              report.lorenz.push_back(std::move(dump));
            }
          }
        }
      }
    }

    // Reference dumps alongside the estimates.
    for (std::size_t q = 0; q < spec.qois.size(); ++q) {
      const QoiSpec& qoi = spec.qois[q];
      if (qoi.kind != QoiSpec::Kind::Density && qoi.kind != QoiSpec::Kind::Lorenz) continue;
      FieldDump dump;
      dump.kind = "reference";
      dump.M = 0;
      dump.qoi = qoi.name();
      dump.value = references[q].back();
      if (qoi.kind == QoiSpec::Kind::Density) {
        dump.x.resize(recon.n);
        for (int i = 0; i < recon.n; ++i) dump.x[i] = recon.center(i);
        report.densities.push_back(std::move(dump));
      } else {
        dump.x.resize(qoi.points + 1);
        for (int i = 0; i <= qoi.points; ++i)
          dump.x[i] = static_cast<double>(i) / qoi.points;
        report.lorenz.push_back(std::move(dump));
      }
    }
  } catch (const std::exception& e) {
    report.failed = true;
    report.failure = e.what();
    emit_report(report, spec.out_dir);  // flush partial results with the marker
    throw;
  }
  return report;
}

// --- emission ---------------------------------------------------------------

namespace {

void write_csv(const std::string& path, const std::string& header,
               const std::function<void(std::FILE*)>& body) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw numeric_error("emit_report: cannot open " + path);
  std::fprintf(f, "%s\n", header.c_str());
  body(f);
  std::fclose(f);
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw numeric_error("emit_report: cannot create directory " + directory);

  nlohmann::json j;
  j["version"] = report.version;
  j["config_hash"] = report.config_hash;
  j["failed"] = report.failed;
  if (report.failed) j["failure"] = report.failure;
  {
    nlohmann::json scenario;
    std::istringstream lines(report.spec.canonical_text());
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) scenario[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["scenario"] = scenario;
  }
  nlohmann::json points = nlohmann::json::array();
  for (const auto& pt : report.points) {
    nlohmann::json p;
    p["kind"] = pt.kind;
    p["M"] = pt.M;
    p["t"] = pt.t;
    p["qoi"] = pt.qoi;
    p["error"] = pt.error_mean;
    p["stderr"] = pt.error_stderr;
    p["lambda_mean"] = pt.lambda_mean;
    p["rho_mean"] = pt.rho_mean;
    p["var_mc"] = pt.var_mc;
    p["var_cv"] = pt.var_cv;
    p["cost"] = {{"N", pt.cost.N},
                 {"M", pt.cost.M},
                 {"N_MF", pt.cost.N_MF},
                 {"M_MF", pt.cost.M_MF},
                 {"k", pt.cost.k},
                 {"control_mean_se", pt.cost.control_mean_se},
                 {"control_time_offset", pt.cost.control_time_offset}};
    points.push_back(p);
  }
  j["points"] = points;
  {
    std::ofstream out(directory + "/report.json");
    if (!out) throw numeric_error("emit_report: cannot write report.json");
    out << j.dump(2) << "\n";
  }

  const double t_last =
      report.points.empty() ? report.spec.t_final
                            : std::max_element(report.points.begin(), report.points.end(),
                                               [](const ErrorPoint& a, const ErrorPoint& b) {
                                                 return a.t < b.t;
                                               })
                                  ->t;
  write_csv(directory + "/error_vs_M.csv", "kind,M,qoi,t,L2_error,stderr", [&](std::FILE* f) {
    for (const auto& pt : report.points)
      if (pt.t == t_last)
        std::fprintf(f, "%s,%zu,%s,%.17g,%.17g,%.17g\n", pt.kind.c_str(), pt.M,
                     pt.qoi.c_str(), pt.t, pt.error_mean, pt.error_stderr);
  });
  write_csv(directory + "/error_vs_t.csv", "kind,M,qoi,t,L2_error,stderr", [&](std::FILE* f) {
    for (const auto& pt : report.points)
      std::fprintf(f, "%s,%zu,%s,%.17g,%.17g,%.17g\n", pt.kind.c_str(), pt.M,
                   pt.qoi.c_str(), pt.t, pt.error_mean, pt.error_stderr);
  });
  write_csv(directory + "/density.csv", "kind,M,w,value", [&](std::FILE* f) {
    for (const auto& d : report.densities)
      for (std::size_t i = 0; i < d.x.size(); ++i)
        std::fprintf(f, "%s,%zu,%.17g,%.17g\n", d.kind.c_str(), d.M, d.x[i], d.value[i]);
  });
  write_csv(directory + "/lorenz.csv", "kind,M,F,L", [&](std::FILE* f) {
    for (const auto& d : report.lorenz)
      for (std::size_t i = 0; i < d.x.size(); ++i)
        std::fprintf(f, "%s,%zu,%.17g,%.17g\n", d.kind.c_str(), d.M, d.x[i], d.value[i]);
  });
  // Wall times live in a sidecar so report.json stays byte-reproducible.
  write_csv(directory + "/timings.csv", "kind,M,qoi,t,wall_seconds", [&](std::FILE* f) {
    for (const auto& pt : report.points)
      std::fprintf(f, "%s,%zu,%s,%.17g,%.6f\n", pt.kind.c_str(), pt.M, pt.qoi.c_str(),
                   pt.t, pt.wall_seconds);
  });
}

}  // namespace kuq
