#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bandit_forest/agents.hpp"
#include "bandit_forest/config.hpp"
#include "bandit_forest/diagnostics.hpp"
#include "bandit_forest/kernels.hpp"

namespace bandit_forest {

// Agent names: bfts, fg-bfts, lints, linucb, uniform.
std::unique_ptr<Agent> make_agent(const std::string& name, const ExperimentConfig& config, int num_arms,
                                  int num_features, std::uint64_t seed,
                                  ExecutionPolicy policy = ExecutionPolicy::Parallel);

// Seed of replication r: derive_seed(global_seed, {r}).
std::uint64_t replication_seed(std::uint64_t global_seed, int replication);

struct RoundRecord {
  int replication = 0;
  long t = 0;
  std::string agent;
  int action = 0;
  double reward = 0.0;
  double regret = 0.0;
  double cum_regret = 0.0;
  double cum_wall_time = 0.0;
};

struct StreamRecord {
  int replication = 0;
  std::string agent;
  std::uint64_t context_hash = 0;
  std::uint64_t reward_hash = 0;
};

struct VoteRecord {
  int replication = 0;
  std::string agent;
  long round = 0;
  int probe = 0;
  int arm = 0;
  double prob = 0.0;
};

struct CellRecord {
  int replication = 0;
  std::string agent;
  long round = 0;
  IntervalCell cell;
};

struct McmcRecord {
  int replication = 0;
  std::string agent;
  long round = 0;
  long refresh_round = 0;
  int arm = 0;
  std::string move_kind;
  std::int64_t attempted = 0;
  std::int64_t accepted = 0;
};

struct RhatRecord {
  int replication = 0;
  std::string agent;
  long round = 0;
  double median = 0.0;
  double mean = 0.0;
};

struct InclusionRecord {
  int replication = 0;
  std::string agent;
  int feature = 0;
  double inclusion = 0.0;
};

struct RunRecords {
  std::string scenario;
  std::vector<std::string> agents;
  std::vector<RoundRecord> rounds;
  std::vector<StreamRecord> streams;
  std::vector<VoteRecord> votes;
  std::vector<CellRecord> cells;
  std::vector<McmcRecord> mcmc;
  std::vector<RhatRecord> rhat;
  std::vector<InclusionRecord> inclusion;
};

struct SummaryRow {
  std::string agent;
  std::string scenario;
  double mean_final_regret = 0.0;
  double sd_final_regret = 0.0;  // sample SD; NaN when R = 1
  int reps = 0;
};

struct CoverageRow {
  std::string agent;
  long round = 0;
  double coverage = 0.0;
  double mean_length = 0.0;
};

struct EceRow {
  std::string agent;
  long round = 0;
  double ece = 0.0;
};

struct PolicyTvRow {
  std::string agent;
  long round = 0;
  long prev_round = 0;
  double mean_tv = 0.0;
};

struct AcceptanceRow {
  std::string agent;
  long round = 0;
  std::string move_kind;  // a move name or "overall"
  double rate = 0.0;
};

struct RhatRow {
  std::string agent;
  long round = 0;
  double median = 0.0;
  double mean = 0.0;
};

struct InclusionRow {
  std::string agent;
  int feature = 0;
  double inclusion = 0.0;
  double frontier = 0.0;  // cumulative mass at this rank after sorting
};

// Aggregates over replications, probes and arms.
struct DiagnosticsTables {
  std::vector<CoverageRow> coverage;
  std::vector<EceRow> ece;
  std::vector<PolicyTvRow> policy_tv;
  std::vector<AcceptanceRow> acceptance;
  std::vector<RhatRow> rhat;
  std::vector<InclusionRow> inclusion;
};

struct RunArtifact {
  RunRecords records;
  std::vector<SummaryRow> summary;
  DiagnosticsTables diagnostics;
  // final_regret[agent][replication]
  std::map<std::string, std::vector<double>> final_regret;
};

struct RunOptions {
  ExecutionPolicy policy = ExecutionPolicy::Parallel;
  bool write_files = true;
};

// Runs every agent against one pre-materialized stream per replication and
// writes the CSV artifacts into config.out.  Throws ConfigError before any run
// when the configuration is invalid.
RunArtifact run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Rounds at which probe snapshots are taken: tau * K, the evaluation rounds up
// to the horizon, and the horizon itself.
std::vector<long> snapshot_rounds(const ExperimentConfig& config, int num_arms, long horizon);

std::vector<SummaryRow> summarize(const RunRecords& records);
DiagnosticsTables compute_diagnostics(const RunRecords& records);

void write_records(const std::string& dir, const RunRecords& records);
void write_summary(const std::string& dir, const std::vector<SummaryRow>& summary);
void write_diagnostics(const std::string& dir, const DiagnosticsTables& tables);

// Loads the raw records of a finished run.
RunRecords read_records(const std::string& dir);

// Recomputes and rewrites the diagnostics CSVs of a finished run.
DiagnosticsTables diagnose_run(const std::string& dir);

}  // namespace bandit_forest
