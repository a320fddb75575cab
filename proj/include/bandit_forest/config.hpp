#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bandit_forest/agents.hpp"
#include "bandit_forest/mcmc.hpp"

namespace bandit_forest {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BartKnobs {
  int n_trees = 100;
  int nskip = 500;
  int ndpost = 500;
  int chains = 4;
  double tree_alpha = 0.45;     // depth-geometric base when quick_decay is on
  double original_alpha = 0.95; // alpha * (1 + d)^-beta otherwise
  double tree_beta = 2.0;
  double f_k = 2.0;             // kappa in the leaf prior scale
  int max_bins = 100;
  bool dirichlet_prior = true;
  bool quick_decay = true;
  double sigma_nu = 3.0;
  double sigma_q = 0.9;
  int min_leaf_size = 1;

  SamplerConfig sampler() const;
};

struct ExperimentConfig {
  std::string scenario = "friedman";
  std::string dataset;  // CSV path; replaces the synthetic scenario when set
  std::string label;    // label column for dataset runs
  std::vector<std::string> agents = {"bfts", "lints", "linucb"};
  long horizon = 10000;  // 0 on a dataset run means every row
  int reps = 12;
  std::uint64_t seed = 42;
  std::vector<long> eval_rounds = {200, 500, 1000, 2000, 5000, 10000};
  std::string out = "out";
  int probes = 40;
  bool snapshots = true;
  bool dump_forest = false;
  bool wall_time = true;

  BartKnobs bart;
  int tau = 5;
  RefreshSchedule refresh;
  Encoding encoding = Encoding::Separate;
  FgConfig fg;
  double lints_nu = 1.0;
  double linucb_alpha = 1.0;
  double linear_lambda = 1.0;
  Encoding linear_encoding = Encoding::Multi;
  int policy_samples = 256;
  double noise_sd = -1.0;  // < 0 keeps the scenario default
  int linear_d = 0;

  // Throws ConfigError on out-of-range values or unknown names.
  void validate() const;
};

// Applies one `key = value` setting; throws ConfigError for unknown keys or
// malformed values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

// Grammar: one `key = value` per line, '#' starts a comment, blank lines are
// ignored, lists are comma-separated.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

// Every key with its current value, in parse_config's grammar.
std::string dump_config(const ExperimentConfig& config);
std::vector<std::string> config_keys();

std::string encoding_name(Encoding encoding);
Encoding parse_encoding(const std::string& name);
std::string refresh_kind_name(RefreshKind kind);
RefreshKind parse_refresh_kind(const std::string& name);

}  // namespace bandit_forest
