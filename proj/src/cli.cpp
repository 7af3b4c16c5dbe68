#include "indimart/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "indimart/decompose.hpp"
#include "indimart/errors.hpp"
#include "indimart/io.hpp"
#include "indimart/verify.hpp"

namespace indimart {

namespace {

namespace fs = std::filesystem;

struct GeneratorFlags {
  std::uint64_t seed = 0;
  std::size_t K = 2;
  std::size_t m = 1;
  std::size_t branching = 2;
  std::string weights = "uniform";
  std::string values = "normal";
};

struct RunConfig {
  std::string input;
  GeneratorFlags gen;
  DecomposeOptions options;
  std::string out_dir = ".";
  std::string format = "table";
};

void add_generator_flags(CLI::App* cmd, GeneratorFlags& g) {
  cmd->add_option("--seed", g.seed, "random seed (INDIMART_SEED overrides)");
  cmd->add_option("--K", g.K, "number of time steps")->check(CLI::Range(1, 64));
  cmd->add_option("--m", g.m, "dimension of the values")->check(CLI::Range(1, 64));
  cmd->add_option("--branching", g.branching, "children per tree node")->check(CLI::Range(2, 36));
  cmd->add_option("--weights", g.weights, "branch probabilities")
      ->check(CLI::IsMember({"uniform", "random"}));
  cmd->add_option("--values", g.values, "terminal value distribution")
      ->check(CLI::IsMember({"normal", "integer"}));
}

void add_output_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--out-dir", c.out_dir, "directory for output files");
  cmd->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "table"}));
}

GeneratorOptions generator_options(const GeneratorFlags& g) {
  GeneratorOptions o;
  o.seed = g.seed;
  if (const char* env = std::getenv("INDIMART_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      o.seed = std::stoull(env, &used);
      if (env[used] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw SchemaError(std::string("INDIMART_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  o.K = g.K;
  o.m = g.m;
  o.branching = g.branching;
  o.weights = g.weights == "random" ? WeightProfile::random : WeightProfile::uniform;
  o.values = g.values == "integer" ? ValueDistribution::integer : ValueDistribution::normal;
  return o;
}

FilteredMartingale generated(const GeneratorFlags& g) {
  GeneratedMartingale gm = generate_random_martingale(generator_options(g));
  return FilteredMartingale{std::move(gm.space), std::move(gm.filtration), g.m, std::move(gm.X)};
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

fs::path prepare(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

int cmd_generate(const RunConfig& c) {
  const FilteredMartingale fm = generated(c.gen);
  const fs::path out = prepare(c.out_dir) / "martingale.json";
  write_file(out.string(), dump(to_json(fm)));
  if (c.format == "json") {
    std::cout << dump(nlohmann::ordered_json{{"points", fm.space.size()},
                                             {"horizon", fm.filtration.horizon()},
                                             {"m", fm.m},
                                             {"output", out.string()}});
  } else {
    std::cout << "wrote " << out.string() << " (" << fm.space.size() << " points, K="
              << fm.filtration.horizon() << ", m=" << fm.m << ")\n";
  }
  return kExitOk;
}

int cmd_decompose(const RunConfig& c) {
  validate(c.options);
  const fs::path dir = prepare(c.out_dir);
  std::optional<FilteredMartingale> fm;
  if (!c.input.empty()) {
    fm = martingale_from_json(parse_json(read_file(c.input)));
  } else {
    fm = generated(c.gen);
    write_file((dir / "martingale.json").string(), dump(to_json(*fm)));
  }
  const Decomposition d = decompose_martingale(fm->X, fm->filtration, fm->space, c.options);
  write_file((dir / "decomposition.json").string(), dump(to_json(d)));
  write_file((dir / "norms.csv").string(), norms_csv(d));
  write_file((dir / "stages.csv").string(), stages_csv(d));

  if (c.format == "json") {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const StepSummary& s : d.steps) {
      steps.push_back({{"k", s.k},
                       {"stages", s.stages.size()},
                       {"stop", to_string(s.stop)},
                       {"residual_norm_sq", s.residual_norm_sq}});
    }
    std::cout << dump(nlohmann::ordered_json{{"points", d.space.size()},
                                             {"terms", d.terms},
                                             {"converged", d.converged()},
                                             {"steps", std::move(steps)}});
  } else {
    std::cout << "final space: " << d.space.size() << " points, N = " << d.terms << " terms\n";
    for (const StepSummary& s : d.steps) {
      std::cout << "  k=" << s.k << "  stages=" << s.stages.size() << "  stop=" << to_string(s.stop)
                << "  residual_norm_sq=" << format_double(s.residual_norm_sq) << "\n";
    }
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& c) {
  if (c.input.empty()) throw SchemaError("verify needs --input <decomposition.json>");
  const Decomposition d = decomposition_from_json(parse_json(read_file(c.input)));
  const Report report = run_full_report(d);
  const fs::path dir = prepare(c.out_dir);
  const std::string table = format_table(report);
  write_file((dir / "report.json").string(), dump(to_json(report)));
  write_file((dir / "report.txt").string(), table);
  if (c.format == "json") {
    std::cout << dump(to_json(report));
  } else {
    std::cout << table;
  }
  if (!report.pass()) {
    for (const Check& check : report.checks) {
      if (!check.pass) std::cerr << "failed check: " << check.name << "\n";
    }
    return kExitCheckFailed;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Split a discrete martingale into a sum of martingales whose increments are independent"};
  app.name("indimart");
  app.require_subcommand(1);

  RunConfig config;
  CLI::App* generate = app.add_subcommand("generate", "write a random filtered martingale");
  add_generator_flags(generate, config.gen);
  add_output_flags(generate, config);

  CLI::App* decompose = app.add_subcommand("decompose", "decompose a martingale");
  decompose->add_option("--input", config.input, "filtered martingale JSON");
  add_generator_flags(decompose, config.gen);
  decompose->add_option("--tol-rel", config.options.tol_rel, "relative residual target");
  decompose->add_option("--n-max", config.options.n_max, "maximum stages per time step");
  decompose->add_option("--max-points", config.options.max_points, "point budget per time step");
  add_output_flags(decompose, config);

  CLI::App* verify = app.add_subcommand("verify", "check a decomposition");
  verify->add_option("--input", config.input, "decomposition JSON")->required();
  add_output_flags(verify, config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    if (generate->parsed()) return cmd_generate(config);
    if (decompose->parsed()) return cmd_decompose(config);
    return cmd_verify(config);
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("indimart");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace indimart
