#pragma once

// Experiment driver behind the polarchan CLI: gate/circuit construction,
// MatrixFile JSON interchange, trace CSV emission and the solve /
// reconstruct / repro-ex1 / repro-ex2 commands. Commands return process
// exit codes: 0 success, 1 invalid input or runtime failure, 2 finished
// without meeting the convergence or accuracy target.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "polarchan/equiv.hpp"
#include "polarchan/matkit.hpp"
#include "polarchan/search.hpp"
#include "polarchan/tomo.hpp"

namespace polarchan::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- gates

inline ComplexMatrix hadamard() {
  const double s = 1.0 / std::sqrt(2.0);
  ComplexMatrix h(2, 2);
  h << s, s, s, -s;
  return h;
}

/// Control on the first (most significant) qubit: |10> <-> |11>.
inline ComplexMatrix cnot() {
  ComplexMatrix c = ComplexMatrix::Zero(4, 4);
  c(0, 0) = 1.0;
  c(1, 1) = 1.0;
  c(2, 3) = 1.0;
  c(3, 2) = 1.0;
  return c;
}

inline std::map<std::string, ComplexMatrix> gate_library() {
  return {{"H", hadamard()}, {"CNOT", cnot()}, {"I", identity(2)}};
}

/// The three-qubit circuit of the second reproduction experiment.
inline ComplexMatrix build_example2_circuit() {
  static constexpr int kEntries[8][8] = {
      {1, 0, 1, 0, 1, 0, 1, 0},   {0, 1, 0, 1, 0, 1, 0, 1},
      {0, 1, 0, -1, 0, 1, 0, -1}, {1, 0, -1, 0, 1, 0, -1, 0},
      {1, 0, 1, 0, -1, 0, -1, 0}, {0, 1, 0, 1, 0, -1, 0, -1},
      {0, -1, 0, 1, 0, 1, 0, -1}, {-1, 0, 1, 0, 1, 0, -1, 0}};
  ComplexMatrix u(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) u(i, j) = 0.5 * kEntries[i][j];
  }
  return u;
}

// ---------------------------------------------------------------- seeds

/// splitmix64 finalizer; maps (base seed, stream id) to independent seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kDefaultSeed = 1;
inline constexpr const char* kSeedEnv = "POLARCHAN_SEED";

/// Flag value, else $POLARCHAN_SEED, else kDefaultSeed.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv(kSeedEnv); env && *env) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(env, &used, 10);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || env[used] != '\0') {
      throw PreconditionError(std::string(kSeedEnv) +
                              " is not an unsigned integer: " + env);
    }
    return v;
  }
  return kDefaultSeed;
}

// ---------------------------------------------------------------- files

class FileFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// {"n": n, "re": [[...], ...], "im": [[...], ...]}, row-major.
inline json matrix_to_json(const ComplexMatrix& a) {
  json re = json::array();
  json im = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json rr = json::array();
    json ri = json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      rr.push_back(a(i, j).real());
      ri.push_back(a(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  return json{{"n", a.rows()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline ComplexMatrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("re") ||
      !j.contains("im")) {
    throw FileFormatError("matrix: expected object with n, re, im");
  }
  if (!j["n"].is_number_integer() || j["n"].get<long long>() < 1) {
    throw FileFormatError("matrix: n must be a positive integer");
  }
  const auto n = static_cast<Eigen::Index>(j["n"].get<long long>());
  auto check_rows = [n](const json& arr, const char* name) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != n) {
      throw FileFormatError(std::string("matrix: ") + name +
                            " must have n rows");
    }
    for (const auto& row : arr) {
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
        throw FileFormatError(std::string("matrix: ") + name +
                              " rows must have n entries");
      }
      for (const auto& x : row) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) {
          throw FileFormatError(std::string("matrix: ") + name +
                                " has a non-finite or non-numeric entry");
        }
      }
    }
  };
  check_rows(j["re"], "re");
  check_rows(j["im"], "im");
  ComplexMatrix a(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      a(r, c) = Complex(j["re"][r][c].get<double>(),
                        j["im"][r][c].get<double>());
    }
  }
  return a;
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FileFormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FileFormatError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline ComplexMatrix read_matrix_file(const fs::path& path) {
  return matrix_from_json(read_json(path));
}

inline void write_matrix_file(const fs::path& path, const ComplexMatrix& a) {
  write_json(path, matrix_to_json(a));
}

/// {"pairs": [{"rho": MatrixFile, "sigma": MatrixFile}, ...]}
inline json instance_to_json(const ChannelInstance& inst) {
  json pairs = json::array();
  for (const auto& p : inst.pairs()) {
    pairs.push_back({{"rho", matrix_to_json(p.rho)},
                     {"sigma", matrix_to_json(p.sigma)}});
  }
  return json{{"pairs", std::move(pairs)}};
}

inline ChannelInstance instance_from_json(const json& j) {
  if (!j.is_object() || !j.contains("pairs") || !j["pairs"].is_array()) {
    throw FileFormatError("instance: expected object with a pairs array");
  }
  std::vector<StatePair> pairs;
  for (const auto& p : j["pairs"]) {
    if (!p.is_object() || !p.contains("rho") || !p.contains("sigma")) {
      throw FileFormatError("instance: each pair needs rho and sigma");
    }
    pairs.push_back({matrix_from_json(p["rho"]), matrix_from_json(p["sigma"])});
  }
  return ChannelInstance(std::move(pairs));
}

inline json vector_to_json(const ComplexVector& v) {
  json re = json::array();
  json im = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    re.push_back(v(k).real());
    im.push_back(v(k).imag());
  }
  return json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline constexpr const char* kTraceHeader = "iter,objective,step_norm,residual";

/// Writes the trace CSV one flushed row at a time.
class TraceCsvWriter {
public:
  explicit TraceCsvWriter(const fs::path& path) : out_(path) {
    if (!out_) throw FileFormatError("cannot write " + path.string());
    out_ << kTraceHeader << '\n' << std::flush;
  }
  void operator()(const IterationRecord& r) {
    out_ << r.iter << ',' << format_double(r.objective) << ','
         << format_double(r.step_norm) << ',' << format_double(r.residual)
         << '\n'
         << std::flush;
  }

private:
  std::ofstream out_;
};

inline void write_trace_csv(const fs::path& path, const IterationTrace& trace) {
  TraceCsvWriter w(path);
  for (const auto& r : trace.records) w(r);
}

// ---------------------------------------------------------------- commands

enum class Command { solve, reconstruct, repro_ex1, repro_ex2 };

struct RunSpec {
  Command command = Command::solve;
  Eigen::Index n = 10;
  std::uint64_t seed = kDefaultSeed;
  int pairs = 1;
  SolverConfig solver;
  std::optional<std::string> circuit;
  std::optional<fs::path> in;
  std::optional<fs::path> rho0;
  fs::path out = ".";
  int jobs = 1;
  int runs = 20;
  bool degenerate_rho0 = false;
  /// --tol was given; otherwise reconstruction uses kReconstructTol.
  bool tol_set = false;

  void validate() const {
    if (n < 1) throw PreconditionError("--n must be >= 1");
    if (pairs < 1) throw PreconditionError("--pairs must be >= 1");
    if (jobs < 1) throw PreconditionError("--jobs must be >= 1");
    if (runs < 1) throw PreconditionError("--runs must be >= 1");
    if (circuit && *circuit != "example2") {
      throw PreconditionError("unknown circuit '" + *circuit + "'");
    }
    solver.validate();
  }
};

/// Seed streams used for generated data.
enum : std::uint64_t {
  kStreamHidden = 0,
  kStreamInit = 1,
  kStreamRho0 = 2,
  kStreamTests = 3,
  kStreamInputs = 1000,
  kStreamRuns = 100000,
};

/// Exact instance sigma_k = U rho_k U* with a seeded hidden U and
/// random_density inputs.
inline ChannelInstance generate_instance(Eigen::Index n, int pairs,
                                         std::uint64_t seed,
                                         ComplexMatrix* hidden = nullptr) {
  const ComplexMatrix u = random_unitary(n, derive_seed(seed, kStreamHidden));
  std::vector<ComplexMatrix> inputs;
  for (int k = 0; k < pairs; ++k) {
    inputs.push_back(random_density(
        n, derive_seed(seed, kStreamInputs + static_cast<std::uint64_t>(k))));
  }
  if (hidden) *hidden = u;
  return ChannelInstance::exact(u, inputs);
}

inline SolverConfig seeded(SolverConfig c, std::uint64_t seed) {
  c.init_seed = derive_seed(seed, kStreamInit);
  return c;
}

inline SolverConfig reconstruction_config(const RunSpec& spec,
                                          std::uint64_t seed) {
  SolverConfig c = seeded(spec.solver, seed);
  if (!spec.tol_set) c.tol = kReconstructTol;
  return c;
}

inline void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw FileFormatError("cannot create output directory " + dir.string());
  }
}

inline json summarize(const SolveResult& r) {
  const IterationRecord& last = r.last();
  return json{{"status", to_string(r.status)},
              {"iterations", last.iter},
              {"final_objective", last.objective},
              {"final_residual", last.residual},
              {"final_step_norm", last.step_norm},
              {"monotonicity_violations", r.trace.monotonicity_violations.size()},
              {"singular_gradient_iters", r.trace.singular_gradient_iters.size()}};
}

inline int exit_code(SolveStatus s) {
  return s == SolveStatus::max_iters ? 2 : 0;
}

template <class Fn>
int guarded(std::ostream& log, const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const DegenerateStateError& e) {
    log << name << ": degenerate state: " << e.what() << '\n';
  } catch (const std::exception& e) {
    log << name << ": error: " << e.what() << '\n';
  }
  return 1;
}

/// Solves an instance read from --in (pairs JSON) or generated from the
/// seed. Writes trace.csv and summary.json (plus instance.json and
/// hidden_u.json for generated input).
inline int cmd_solve(const RunSpec& spec, std::ostream& log) {
  return guarded(log, "solve", [&] {
    spec.validate();
    prepare_out(spec.out);
    std::optional<ChannelInstance> inst;
    if (spec.in) {
      inst.emplace(instance_from_json(read_json(*spec.in)));
    } else {
      ComplexMatrix hidden;
      inst.emplace(generate_instance(spec.n, spec.pairs, spec.seed, &hidden));
      write_json(spec.out / "instance.json", instance_to_json(*inst));
      write_matrix_file(spec.out / "hidden_u.json", hidden);
    }
    TraceCsvWriter csv(spec.out / "trace.csv");
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult r =
        solve(*inst, seeded(spec.solver, spec.seed),
              [&csv](const IterationRecord& rec) { csv(rec); });
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    json summary = summarize(r);
    summary["n"] = inst->dim();
    summary["pairs"] = inst->size();
    summary["wall_time_s"] = wall;
    write_json(spec.out / "summary.json", summary);
    write_matrix_file(spec.out / "u_hat.json", r.u_hat);
    log << "solve: " << to_string(r.status) << " after " << r.iterations()
        << " iterations, objective " << r.last().objective << '\n';
    return exit_code(r.status);
  });
}

/// normalized_diff with the (1,1) pivot, or the max-modulus pivot when
/// the hidden unitary's (1,1) entry vanishes.
inline std::pair<double, Pivot> phase_free_error(const ComplexMatrix& hidden,
                                                 const ComplexMatrix& recovered) {
  const Pivot pv = std::abs(hidden(0, 0)) > kMinPivot &&
                           std::abs(recovered(0, 0)) > kMinPivot
                       ? Pivot::entry11
                       : Pivot::max_modulus;
  return {normalized_diff(hidden, recovered, pv), pv};
}

inline json report_to_json(const ReconstructionReport& rep,
                           const ComplexMatrix& hidden) {
  const auto n = rep.u0.rows();
  const auto [diff, pivot] = phase_free_error(hidden, rep.u_recovered);
  return json{{"n", n},
              {"u0", matrix_to_json(rep.u0)},
              {"v", matrix_to_json(rep.v)},
              {"d", vector_to_json(rep.d)},
              {"u_recovered", matrix_to_json(rep.u_recovered)},
              {"budget_used", rep.budget_used},
              {"budget_ceiling", n * n + 3 * n},
              {"eigengap", rep.eigengap},
              {"residual_on_tests", rep.residual_on_tests},
              {"verified", rep.verified},
              {"normalized_diff", diff},
              {"pivot", pivot == Pivot::entry11 ? "entry11" : "max-modulus"},
              {"solver", summarize(rep.solve)}};
}

inline constexpr double kEx2DiffTarget = 1e-9;

/// Hidden channel from --circuit example2, --in (MatrixFile) or a seeded
/// random unitary; rho0 from --rho0, the identity (--degenerate-rho0) or a
/// seeded random non-degenerate state. Writes report.json and trace.csv.
inline int cmd_reconstruct(const RunSpec& spec, std::ostream& log) {
  return guarded(log, "reconstruct", [&] {
    spec.validate();
    prepare_out(spec.out);
    ComplexMatrix hidden;
    if (spec.circuit) {
      hidden = build_example2_circuit();
    } else if (spec.in) {
      hidden = read_matrix_file(*spec.in);
    } else {
      hidden = random_unitary(spec.n, derive_seed(spec.seed, kStreamHidden));
    }
    const Eigen::Index n = hidden.rows();
    ComplexMatrix rho0;
    if (spec.degenerate_rho0) {
      rho0 = identity(n) / static_cast<double>(n);
    } else if (spec.rho0) {
      rho0 = read_matrix_file(*spec.rho0);
    } else {
      rho0 = random_nondegenerate_state(n, derive_seed(spec.seed, kStreamRho0));
    }
    ChannelOracle oracle(hidden);
    ReconstructOptions opts;
    opts.test_seed = derive_seed(spec.seed, kStreamTests);
    const ReconstructionReport rep =
        reconstruct(oracle, rho0, reconstruction_config(spec, spec.seed), opts);
    const json j = report_to_json(rep, hidden);
    write_json(spec.out / "report.json", j);
    write_trace_csv(spec.out / "trace.csv", rep.solve.trace);
    log << "reconstruct: n=" << n << " budget " << rep.budget_used << "/"
        << n * n + 3 * n << ", normalized_diff "
        << j["normalized_diff"].get<double>() << ", residual_on_tests "
        << rep.residual_on_tests << '\n';
    return rep.verified ? 0 : 2;
  });
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.
template <class Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min(jobs, count);
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline constexpr int kEx1MultiPairs = 20;

/// Single-pair and multi-pair exact instances of dimension n (default 10,
/// 20 pairs unless --pairs > 1). Writes ex1_single_trace.csv,
/// ex1_multi_trace.csv and ex1_summary.json.
inline int cmd_repro_ex1(const RunSpec& spec, std::ostream& log) {
  return guarded(log, "repro-ex1", [&] {
    spec.validate();
    prepare_out(spec.out);
    const int multi = spec.pairs > 1 ? spec.pairs : kEx1MultiPairs;
    const std::vector<int> pair_counts{1, multi};
    const std::vector<std::string> names{"single", "multi"};
    std::vector<SolveResult> results(2);
    parallel_for(2, spec.jobs, [&](int k) {
      const auto idx = static_cast<std::size_t>(k);
      const ChannelInstance inst =
          generate_instance(spec.n, pair_counts[idx], spec.seed);
      TraceCsvWriter csv(spec.out / ("ex1_" + names[idx] + "_trace.csv"));
      results[idx] = solve(inst, seeded(spec.solver, spec.seed),
                           [&csv](const IterationRecord& r) { csv(r); });
    });
    json summary = json::object();
    bool ok = true;
    for (std::size_t k = 0; k < 2; ++k) {
      json s = summarize(results[k]);
      s["pairs"] = pair_counts[k];
      summary[names[k]] = s;
      ok = ok && results[k].status != SolveStatus::max_iters &&
           results[k].trace.monotonicity_violations.empty();
      log << "repro-ex1 " << names[k] << ": " << to_string(results[k].status)
          << " after " << results[k].iterations() << " iterations, objective "
          << results[k].last().objective << '\n';
    }
    summary["n"] = spec.n;
    write_json(spec.out / "ex1_summary.json", summary);
    return ok ? 0 : 2;
  });
}

/// --runs reconstructions (default 20) of the Example 2 circuit, each with
/// its own random non-degenerate rho0. Writes ex2_hist.csv (one row per
/// run), ex2_report_<k>.json, ex2_trace.csv (run 0) and ex2_summary.json.
inline int cmd_repro_ex2(const RunSpec& spec, std::ostream& log) {
  return guarded(log, "repro-ex2", [&] {
    spec.validate();
    prepare_out(spec.out);
    const ComplexMatrix hidden = build_example2_circuit();
    const Eigen::Index n = hidden.rows();
    std::vector<ReconstructionReport> reports(static_cast<std::size_t>(spec.runs));
    std::vector<std::uint64_t> seeds(reports.size());
    parallel_for(spec.runs, spec.jobs, [&](int k) {
      const auto idx = static_cast<std::size_t>(k);
      seeds[idx] = derive_seed(spec.seed, kStreamRuns + idx);
      ChannelOracle oracle(hidden);
      ReconstructOptions opts;
      opts.test_seed = derive_seed(seeds[idx], kStreamTests);
      reports[idx] = reconstruct(
          oracle, random_nondegenerate_state(n, derive_seed(seeds[idx], kStreamRho0)),
          reconstruction_config(spec, seeds[idx]), opts);
      write_json(spec.out / ("ex2_report_" + std::to_string(k) + ".json"),
                 report_to_json(reports[idx], hidden));
    });
    write_trace_csv(spec.out / "ex2_trace.csv", reports.front().solve.trace);

    std::ofstream hist(spec.out / "ex2_hist.csv");
    if (!hist) throw FileFormatError("cannot write ex2_hist.csv");
    hist << "run,seed,normalized_diff,final_objective,iterations,budget_used,"
            "eigengap\n";
    double worst = 0.0;
    for (std::size_t k = 0; k < reports.size(); ++k) {
      const auto& r = reports[k];
      const double diff = phase_free_error(hidden, r.u_recovered).first;
      worst = std::max(worst, diff);
      hist << k << ',' << seeds[k] << ',' << format_double(diff) << ','
           << format_double(r.solve.last().objective) << ','
           << r.solve.iterations() << ',' << r.budget_used << ','
           << format_double(r.eigengap) << '\n';
    }
    const bool ok = worst < kEx2DiffTarget;
    write_json(spec.out / "ex2_summary.json",
               json{{"runs", spec.runs},
                    {"max_normalized_diff", worst},
                    {"below_target", ok},
                    {"target", kEx2DiffTarget}});
    log << "repro-ex2: " << spec.runs << " runs, max normalized_diff " << worst
        << '\n';
    return ok ? 0 : 2;
  });
}

inline int run(const RunSpec& spec, std::ostream& log) {
  switch (spec.command) {
  case Command::solve: return cmd_solve(spec, log);
  case Command::reconstruct: return cmd_reconstruct(spec, log);
  case Command::repro_ex1: return cmd_repro_ex1(spec, log);
  case Command::repro_ex2: return cmd_repro_ex2(spec, log);
  }
  return 1;
}

} // namespace polarchan::harness
