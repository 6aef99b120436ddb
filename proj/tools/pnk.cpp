// pnk: probabilistic N-k interdiction from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pnk/pnk.hpp"

namespace {

using namespace pnk;

enum Exit : int {
  kOk = 0,
  kTimeLimit = 2,
  kNoShed = 3,
  kUsage = 4,
  kIo = 5,
  kData = 6,
  kNumerical = 7,
};

struct ProbSource {
  std::string prob_path;
  std::optional<double> constant;
  std::string gen_mode;
  std::uint64_t seed = 0;
  int severity = 1;
  std::string region_path;
};

struct ProblemConfig {
  std::string case_path;
  ProbSource prob;
  std::string form_name = "nf";
  double epsilon = 0.01;
  double time_limit = std::numeric_limits<double>::infinity();
  std::int64_t node_limit = MasterOptions{}.node_limit;
  bool respect_pg_min = false;
  bool dc_angle_limits = true;
  bool bound_from_z = false;
  std::string out;
};

void add_case_options(CLI::App& cmd, ProblemConfig& cfg) {
  cmd.add_option("--case", cfg.case_path, "Matpower .m or native .json network")->required()->check(CLI::ExistingFile);
  auto* prob = cmd.add_option("--prob", cfg.prob.prob_path, "Line probability CSV")->check(CLI::ExistingFile);
  auto* cst = cmd.add_option("--const-prob", cfg.prob.constant, "Same failure probability on every line");
  prob->excludes(cst);
  cmd.add_option("--gen", cfg.prob.gen_mode, "Derive probabilities from --prob: range-uniform, severe, det, uniform, texp")
      ->needs(prob);
  cmd.add_option("--severity", cfg.prob.severity, "Severe-event level n");
  cmd.add_option("--region", cfg.prob.region_path, "Severe-event line ids, one per line")->check(CLI::ExistingFile);
  cmd.add_option("--seed", cfg.prob.seed, "Seed for every random draw");
}

void add_solver_options(CLI::App& cmd, ProblemConfig& cfg) {
  cmd.add_option("--form", cfg.form_name, "nf, dc or soc")->check(CLI::IsMember({"nf", "dc", "soc"}));
  cmd.add_option("--eps", cfg.epsilon, "Relative optimality tolerance")->check(CLI::PositiveNumber);
  cmd.add_option("--time-limit", cfg.time_limit, "Seconds");
  cmd.add_option("--node-limit", cfg.node_limit, "Branch-and-bound nodes per master solve");
  cmd.add_flag("--respect-pg-min", cfg.respect_pg_min, "Keep literal generator lower bounds");
  cmd.add_option("--dc-angle-limits", cfg.dc_angle_limits, "Enforce angle-difference limits in DC (default true)");
  cmd.add_flag("--bound-from-z", cfg.bound_from_z, "Upper bound from p + log z of the master solution");
}

Network load_case(const ProblemConfig& cfg) {
  std::vector<std::string> warnings;
  auto net = load_network(cfg.case_path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  const auto& src = cfg.prob;
  if (src.constant) {
    if (!src.gen_mode.empty()) throw UsageError("--gen needs --prob");
    return net.with_probabilities(std::vector<double>(net.num_lines(), *src.constant));
  }
  if (!src.prob_path.empty()) {
    net = parse_probabilities(read_file(src.prob_path), net);
    if (!src.gen_mode.empty()) {
      ProbabilitySpec spec;
      spec.mode = parse_prob_mode(src.gen_mode);
      spec.seed = src.seed;
      spec.severity = src.severity;
      if (spec.mode == ProbMode::SevereEvent) {
        if (src.region_path.empty()) throw UsageError("--gen severe needs --region");
        spec.region = parse_region(read_file(src.region_path));
      }
      if (spec.nonstandard()) std::cerr << "warning: severe-event level " << spec.severity << " is nonstandard\n";
      net = net.with_probabilities(generate_probabilities(net, spec));
    }
    return net;
  }
  if (net.has_probabilities()) return net;
  throw UsageError("no probability source: give --prob or --const-prob, or a network file that carries them");
}

CuttingPlaneOptions solver_options(const ProblemConfig& cfg) {
  CuttingPlaneOptions opt;
  opt.epsilon = cfg.epsilon;
  opt.time_limit = cfg.time_limit;
  opt.inner.respect_pg_min = cfg.respect_pg_min;
  opt.inner.dc_angle_limits = cfg.dc_angle_limits;
  opt.bound_from_z = cfg.bound_from_z;
  opt.master.node_limit = cfg.node_limit;
  return opt;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << text;
}

SolveReport run_solve(const Network& net, const ProblemConfig& cfg, int k) {
  auto rep = cutting_plane(net, k, parse_formulation(cfg.form_name), solver_options(cfg));
  rep.case_name = std::filesystem::path(cfg.case_path).stem().string();
  rep.seed = cfg.prob.seed;
  return rep;
}

int exit_code(const SolveReport& rep) {
  switch (rep.status) {
    case Termination::Converged: return kOk;
    case Termination::TimeLimit: return kTimeLimit;
    case Termination::Exhausted: return rep.has_incumbent() ? kOk : kNoShed;
  }
  return kOk;
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kData;
  } catch (const ReferenceError& e) {
    std::cerr << "reference error: " << e.what() << '\n';
    return kData;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic N-k interdiction on transmission networks"};
  app.require_subcommand(1);

  ProblemConfig cfg;
  int k = 2;
  int k_min = 2, k_max = 2;
  int workers = 1;
  std::uint64_t cap = EnumerateOptions{}.cap;
  std::string report_a, report_b;
  std::string gen_mode = "passthrough";
  std::string ref_case, ref_prob;

  auto* solve = app.add_subcommand("solve", "Run the cutting-plane algorithm and print a JSON report");
  add_case_options(*solve, cfg);
  add_solver_options(*solve, cfg);
  solve->add_option("--k", k, "Number of interdicted lines")->required();
  solve->add_option("--out", cfg.out, "Report path (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Solve for every k in a range and print CSV");
  add_case_options(*sweep, cfg);
  add_solver_options(*sweep, cfg);
  sweep->add_option("--k-min", k_min)->required();
  sweep->add_option("--k-max", k_max)->required();
  sweep->add_option("--out", cfg.out, "CSV path (default stdout)");

  auto* enumerate_cmd = app.add_subcommand("enumerate", "Solve every k-line scenario and print CSV");
  add_case_options(*enumerate_cmd, cfg);
  enumerate_cmd->add_option("--form", cfg.form_name)->check(CLI::IsMember({"nf", "dc", "soc"}));
  enumerate_cmd->add_option("--k", k)->required();
  enumerate_cmd->add_option("--workers", workers)->check(CLI::PositiveNumber);
  enumerate_cmd->add_option("--cap", cap, "Refuse to enumerate more scenarios than this");
  enumerate_cmd->add_flag("--respect-pg-min", cfg.respect_pg_min);
  enumerate_cmd->add_option("--dc-angle-limits", cfg.dc_angle_limits);
  enumerate_cmd->add_option("--out", cfg.out, "CSV path (default stdout)");

  auto* compare = app.add_subcommand("compare", "Hamming distance and objective delta between two reports");
  compare->add_option("report_a", report_a)->required()->check(CLI::ExistingFile);
  compare->add_option("report_b", report_b)->required()->check(CLI::ExistingFile);

  auto* probgen = app.add_subcommand("probgen", "Write a probability CSV for a case");
  probgen->add_option("--case", cfg.case_path)->required()->check(CLI::ExistingFile);
  probgen->add_option("--prob", cfg.prob.prob_path, "Reference probabilities for this case")->check(CLI::ExistingFile);
  probgen->add_option("--mode", gen_mode, "passthrough, range-uniform, severe, det, uniform, texp");
  probgen->add_option("--ref-case", ref_case, "Case whose probabilities give the range-uniform extremes")
      ->check(CLI::ExistingFile);
  probgen->add_option("--ref-prob", ref_prob, "Probability CSV for --ref-case")->check(CLI::ExistingFile);
  probgen->add_option("--seed", cfg.prob.seed);
  probgen->add_option("--severity", cfg.prob.severity);
  probgen->add_option("--region", cfg.prob.region_path)->check(CLI::ExistingFile);
  probgen->add_option("--out", cfg.out, "CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (*solve) {
    return guarded([&] {
      const auto net = load_case(cfg);
      const auto rep = run_solve(net, cfg, k);
      write_output(cfg.out, report_to_json(rep).dump(2) + "\n");
      return exit_code(rep);
    });
  }

  if (*sweep) {
    return guarded([&] {
      if (k_min > k_max) throw UsageError("--k-min exceeds --k-max");
      const auto net = load_case(cfg);
      std::ostringstream csv;
      csv.precision(10);
      csv << "k,weighted_mw,z_pu,iterations,wall_seconds,status\n";
      int code = kOk;
      for (int kk = k_min; kk <= k_max; ++kk) {
        const auto rep = run_solve(net, cfg, kk);
        csv << kk << ',' << rep.weighted_mw << ',' << rep.z_pu << ',' << rep.iterations << ',' << rep.wall_seconds
            << ',' << to_string(rep.status) << '\n';
        code = std::max(code, exit_code(rep));
      }
      write_output(cfg.out, csv.str());
      return code;
    });
  }

  if (*enumerate_cmd) {
    return guarded([&] {
      const auto net = load_case(cfg);
      EnumerateOptions opt;
      opt.workers = workers;
      opt.cap = cap;
      opt.inner.respect_pg_min = cfg.respect_pg_min;
      opt.inner.dc_angle_limits = cfg.dc_angle_limits;
      const auto table = enumerate(net, k, parse_formulation(cfg.form_name), opt);
      write_output(cfg.out, enumeration_csv(table));
      std::cerr << table.total() << " scenarios in " << table.wall_seconds << " s\n";
      if (!table.best) {
        std::cerr << "no scenario sheds load\n";
        return static_cast<int>(kNoShed);
      }
      const auto& b = table.best_record();
      std::cerr << "best {";
      for (std::size_t i = 0; i < b.scenario.interdicted.size(); ++i) std::cerr << (i ? "," : "") << b.scenario.interdicted[i];
      std::cerr << "} z_pu " << b.z << " weighted_mw " << b.weighted_mw << '\n';
      return static_cast<int>(kOk);
    });
  }

  if (*compare) {
    return guarded([&] {
      const auto a = report_from_json(nlohmann::json::parse(read_file(report_a)));
      const auto b = report_from_json(nlohmann::json::parse(read_file(report_b)));
      if (a.case_name != b.case_name) throw UsageError("reports are for different cases");
      const int d = hamming(Scenario{a.best_scenario, 0.0}, Scenario{b.best_scenario, 0.0});
      std::printf("hamming %d\n", d);
      std::printf("%s weighted_mw %.6f\n", to_string(a.formulation), a.weighted_mw);
      std::printf("%s weighted_mw %.6f\n", to_string(b.formulation), b.weighted_mw);
      std::printf("delta_mw %.6f\n", b.weighted_mw - a.weighted_mw);
      return static_cast<int>(kOk);
    });
  }

  if (*probgen) {
    return guarded([&] {
      auto net = load_network(cfg.case_path);
      const auto mode = parse_prob_mode(gen_mode);
      std::vector<double> pr;
      if (mode == ProbMode::RangeUniform && !ref_case.empty()) {
        if (ref_prob.empty()) throw UsageError("--ref-case needs --ref-prob");
        const auto ref = parse_probabilities(read_file(ref_prob), load_network(ref_case));
        std::vector<double> values;
        for (const auto& l : ref.lines()) values.push_back(l.pr);
        pr = range_uniform(values, net.num_lines(), cfg.prob.seed);
      } else {
        if (cfg.prob.prob_path.empty()) throw UsageError("--prob is required for this mode");
        net = parse_probabilities(read_file(cfg.prob.prob_path), net);
        ProbabilitySpec spec{mode, cfg.prob.seed, cfg.prob.severity, {}};
        if (mode == ProbMode::SevereEvent) {
          if (cfg.prob.region_path.empty()) throw UsageError("--mode severe needs --region");
          spec.region = parse_region(read_file(cfg.prob.region_path));
        }
        if (spec.nonstandard()) std::cerr << "warning: severe-event level " << spec.severity << " is nonstandard\n";
        pr = generate_probabilities(net, spec);
      }
      write_output(cfg.out, write_probabilities(net, pr));
      return static_cast<int>(kOk);
    });
  }
  return kUsage;
}
