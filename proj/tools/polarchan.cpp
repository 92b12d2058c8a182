// polarchan: identify a unitary channel from state pairs, reconstruct a
// hidden channel under a counted measurement budget, and reproduce the
// reference experiments.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "polarchan/harness.hpp"

namespace {

using polarchan::InitKind;
using polarchan::harness::Command;
using polarchan::harness::RunSpec;

struct Flags {
  std::optional<std::uint64_t> seed;
  std::string init = "identity";
  std::string in;
  std::string rho0;
  std::string circuit;
};

void add_common(CLI::App* sub, RunSpec& spec, Flags& flags) {
  sub->add_option("--n", spec.n, "Matrix dimension")->check(CLI::PositiveNumber);
  sub->add_option("--seed", flags.seed,
                  "Base seed (falls back to $POLARCHAN_SEED, then 1)");
  sub->add_option("--max-iters", spec.solver.max_iters, "Iteration cap")
      ->check(CLI::PositiveNumber);
  sub->add_option("--tol", spec.solver.tol, "Stop when the objective drops below");
  sub->add_option("--stall-tol", spec.solver.stall_tol,
                  "Stop when ||U_{s+1} - U_s||_F drops below");
  sub->add_option("--init", flags.init, "Start point")
      ->check(CLI::IsMember({"identity", "random"}));
  sub->add_option("--out", spec.out, "Output directory");
  sub->add_option("--jobs", spec.jobs, "Parallel repetitions")
      ->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unitary channel identification by polar-decomposition "
               "fixed-point iteration"};
  app.require_subcommand(1);

  RunSpec spec;
  Flags flags;

  auto* solve = app.add_subcommand("solve", "Solve for U with sigma = U rho U*");
  add_common(solve, spec, flags);
  solve->add_option("--pairs", spec.pairs, "Generated state pairs")
      ->check(CLI::PositiveNumber);
  solve->add_option("--in", flags.in, "Instance JSON {\"pairs\": [...]}");

  auto* rec = app.add_subcommand("reconstruct",
                                 "Recover a hidden channel from measurements");
  add_common(rec, spec, flags);
  rec->add_option("--in", flags.in, "Hidden unitary MatrixFile");
  rec->add_option("--circuit", flags.circuit, "Built-in hidden circuit")
      ->check(CLI::IsMember({"example2"}));
  rec->add_option("--rho0", flags.rho0, "Input state MatrixFile");
  rec->add_flag("--degenerate-rho0", spec.degenerate_rho0,
                "Use the maximally mixed state (rejected as degenerate)");

  auto* ex1 = app.add_subcommand("repro-ex1",
                                 "Single- and multi-pair convergence traces");
  add_common(ex1, spec, flags);
  ex1->add_option("--pairs", spec.pairs, "Pairs in the multi-pair run (default 20)")
      ->check(CLI::PositiveNumber);

  auto* ex2 = app.add_subcommand("repro-ex2",
                                 "Repeated reconstruction of the 8x8 circuit");
  add_common(ex2, spec, flags);
  ex2->add_option("--runs", spec.runs, "Repetitions")->check(CLI::PositiveNumber);
  ex2->add_option("--circuit", flags.circuit, "Hidden circuit")
      ->check(CLI::IsMember({"example2"}));

  CLI11_PARSE(app, argc, argv);

  for (const auto* sub : {solve, rec, ex1, ex2}) {
    if (sub->parsed()) spec.tol_set = sub->count("--tol") > 0;
  }

  if (solve->parsed()) spec.command = Command::solve;
  if (rec->parsed()) spec.command = Command::reconstruct;
  if (ex1->parsed()) spec.command = Command::repro_ex1;
  if (ex2->parsed()) spec.command = Command::repro_ex2;

  try {
    spec.seed = polarchan::harness::resolve_seed(flags.seed);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  spec.solver.init = flags.init == "random" ? InitKind::random : InitKind::identity;
  if (!flags.in.empty()) spec.in = flags.in;
  if (!flags.rho0.empty()) spec.rho0 = flags.rho0;
  if (!flags.circuit.empty()) spec.circuit = flags.circuit;

  return polarchan::harness::run(spec, std::cerr);
}
