#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "bandit_forest/config.hpp"
#include "bandit_forest/csv.hpp"
#include "bandit_forest/environments.hpp"
#include "bandit_forest/harness.hpp"
#include "bandit_forest/kernels.hpp"
#include "bandit_forest/ope.hpp"

namespace bf = bandit_forest;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << "error kind=" << kind << " message=" << quote(message) << "\n";
  return code;
}

// Options shared by the run-* subcommands; each is applied only when given.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> settings;
  std::string agents;
  long horizon = -1;
  int reps = -1;
  std::string seed;
  std::string out;
  bool dump_forest = false;
  bool no_wall_time = false;
  bool serial = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Config file (key = value lines)");
    app->add_option("--set", settings, "Override one setting, e.g. --set bart.n_trees=50");
    app->add_option("--agents", agents, "Comma-separated agents: bfts,fg-bfts,lints,linucb,uniform");
    app->add_option("--horizon", horizon, "Rounds per replication");
    app->add_option("--reps", reps, "Replications");
    app->add_option("--seed", seed, "Global seed");
    app->add_option("--out", out, "Output directory");
    app->add_flag("--dump-forest", dump_forest, "Write forest serializations at refresh rounds");
    app->add_flag("--no-wall-time", no_wall_time, "Write 0 in cum_wall_time for byte-stable output");
    app->add_flag("--serial", serial, "Use the serial reference kernels");
  }

  bf::ExperimentConfig build() const {
    bf::ExperimentConfig c;
    if (!config_path.empty()) c = bf::load_config(config_path);
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw bf::ConfigError("--set expects key=value, got '" + s + "'");
      bf::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (!agents.empty()) bf::apply_setting(c, "agent.kind", agents);
    if (horizon >= 0) c.horizon = horizon;
    if (reps >= 0) c.reps = reps;
    if (!seed.empty()) bf::apply_setting(c, "experiment.seed", seed);
    if (!out.empty()) c.out = out;
    if (dump_forest) c.dump_forest = true;
    if (no_wall_time) c.wall_time = false;
    return c;
  }

  bf::ExecutionPolicy policy() const {
    return serial ? bf::ExecutionPolicy::Serial : bf::ExecutionPolicy::Parallel;
  }
};

void print_summary(const bf::RunArtifact& art) {
  for (const auto& r : art.summary)
    std::cout << r.agent << " " << r.scenario << " mean_final_regret=" << bf::format_double(r.mean_final_regret)
              << " sd=" << bf::format_double(r.sd_final_regret) << " reps=" << r.reps << "\n";
}

std::vector<long> parse_longs(const std::string& text) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    double v = 0.0;
    if (!bf::parse_double(item, v) || v < 1 || v != static_cast<double>(static_cast<long>(v)))
      throw bf::ConfigError("expected positive integers, got '" + item + "'");
    out.push_back(static_cast<long>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  bf::configure_threads_from_env();
  CLI::App app{"Bayesian forest Thompson sampling experiments"};
  app.require_subcommand(1);

  CommonOptions syn_opts;
  std::string scenario;
  auto* syn = app.add_subcommand("run-synthetic", "Run agents on a synthetic scenario");
  syn->add_option("--scenario", scenario, "Scenario name");
  syn_opts.attach(syn);

  CommonOptions data_opts;
  std::string csv_path, label;
  auto* data = app.add_subcommand("run-dataset", "Run agents on a classification CSV");
  data->add_option("--csv", csv_path, "CSV file with a header row")->required();
  data->add_option("--label", label, "Label column")->required();
  data_opts.attach(data);

  std::string panel_path, ope_agent = "bfts", checkpoints, ope_out = "ope_out", ope_config;
  std::vector<std::string> estimators, ope_settings;
  int bootstrap = 0;
  std::uint64_t ope_seed = 42;
  bool ope_serial = false;
  auto* ope = app.add_subcommand("run-ope", "Replay an agent on a logged panel and estimate its value");
  ope->add_option("--panel", panel_path, "Panel CSV")->required();
  ope->add_option("--estimator", estimators, "snips or dr (repeatable)");
  ope->add_option("--bootstrap", bootstrap, "Cluster bootstrap replicates");
  ope->add_option("--agent", ope_agent, "bfts, fg-bfts, lints, linucb, uniform or behavior");
  ope->add_option("--checkpoints", checkpoints, "Comma-separated prefix lengths");
  ope->add_option("--seed", ope_seed, "Seed");
  ope->add_option("--out", ope_out, "Output directory");
  ope->add_option("--config", ope_config, "Config file for agent settings");
  ope->add_option("--set", ope_settings, "Override one setting");
  ope->add_flag("--serial", ope_serial, "Use the serial reference kernels");

  std::string run_dir;
  auto* diag = app.add_subcommand("diagnose", "Recompute diagnostics from a finished run");
  diag->add_option("--run", run_dir, "Run directory")->required();

  std::string dump_path;
  auto* dump = app.add_subcommand("dump-config", "Print the full configuration");
  dump->add_option("--config", dump_path, "Config file to merge over the defaults");

  std::string panel_out;
  bf::SyntheticPanelSpec panel_spec;
  std::uint64_t panel_seed = 42;
  auto* gen = app.add_subcommand("gen-panel", "Write a synthetic logged panel");
  gen->add_option("--out", panel_out, "Output CSV")->required();
  gen->add_option("--rows", panel_spec.rows, "Rows");
  gen->add_option("--features", panel_spec.num_features, "Context dimension");
  gen->add_option("--seed", panel_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), kExitConfig);
  }

  try {
    if (*syn) {
      bf::ExperimentConfig c = syn_opts.build();
      if (!scenario.empty()) c.scenario = scenario;
      c.dataset.clear();
      print_summary(bf::run_experiment(c, {syn_opts.policy(), true}));
    } else if (*data) {
      bf::ExperimentConfig c = data_opts.build();
      c.dataset = csv_path;
      c.label = label;
      if (data_opts.horizon < 0 && data_opts.config_path.empty()) c.horizon = 0;
      print_summary(bf::run_experiment(c, {data_opts.policy(), true}));
    } else if (*ope) {
      bf::ExperimentConfig c;
      if (!ope_config.empty()) c = bf::load_config(ope_config);
      for (const auto& s : ope_settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw bf::ConfigError("--set expects key=value, got '" + s + "'");
        bf::apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
      }
      bf::OpeRunConfig run;
      run.estimators.clear();
      if (estimators.empty()) estimators = {"snips"};
      for (const auto& e : estimators) {
        try {
          run.estimators.push_back(bf::parse_estimator(e));
        } catch (const std::invalid_argument& err) {
          throw bf::ConfigError(err.what());
        }
      }
      if (!checkpoints.empty()) run.checkpoints = parse_longs(checkpoints);
      run.bootstrap = bootstrap;
      run.seed = ope_seed;
      const bf::LoggedPanel panel = bf::load_panel_csv(panel_path);
      const int K = panel.num_arms();
      const int P = static_cast<int>(panel.contexts.cols());
      const auto policy = ope_serial ? bf::ExecutionPolicy::Serial : bf::ExecutionPolicy::Parallel;
      bf::AgentFactory factory;
      if (ope_agent == "behavior") {
        std::vector<double> probs(K);
        for (int a = 0; a < K; ++a) probs[a] = panel.propensities(0, a);
        factory = [probs](std::uint64_t seed) { return std::make_unique<bf::FixedPolicyAgent>(probs, seed); };
      } else {
        c.validate();
        bf::make_agent(ope_agent, c, K, P, 0, policy);  // rejects unknown names up front
        factory = [&, K, P](std::uint64_t seed) { return bf::make_agent(ope_agent, c, K, P, seed, policy); };
      }
      const auto rows = bf::run_ope(panel, factory, run, policy);
      fs::create_directories(ope_out);
      bf::CsvWriter out((fs::path(ope_out) / "ope.csv").string(), "bandit-forest/ope/v1",
                        {"estimator", "checkpoint", "value", "ess", "match_rate", "replicate"});
      for (const auto& r : rows) {
        out.write_row({r.estimator, std::to_string(r.checkpoint), bf::format_double(r.value),
                       bf::format_double(r.ess), bf::format_double(r.match_rate),
                       r.replicate < 0 ? "full" : std::to_string(r.replicate)});
        if (r.replicate < 0)
          std::cout << r.estimator << " checkpoint=" << r.checkpoint << " value=" << bf::format_double(r.value)
                    << " ess=" << bf::format_double(r.ess) << " match_rate=" << bf::format_double(r.match_rate)
                    << "\n";
      }
    } else if (*diag) {
      const auto tables = bf::diagnose_run(run_dir);
      std::cout << "coverage rows=" << tables.coverage.size() << " policy_tv rows=" << tables.policy_tv.size()
                << " acceptance rows=" << tables.acceptance.size() << "\n";
    } else if (*dump) {
      bf::ExperimentConfig c;
      if (!dump_path.empty()) c = bf::load_config(dump_path);
      std::cout << bf::dump_config(c);
    } else if (*gen) {
      bf::Rng rng(panel_seed);
      const bf::LoggedPanel panel = bf::generate_synthetic_panel(panel_spec, rng, nullptr);
      if (fs::path(panel_out).has_parent_path()) fs::create_directories(fs::path(panel_out).parent_path());
      bf::write_panel_csv(panel_out, panel);
    }
  } catch (const bf::ConfigError& e) {
    return fail("config", e.what(), kExitConfig);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), kExitRuntime);
  }
  return 0;
}
