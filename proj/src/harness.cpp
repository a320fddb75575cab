#include "bandit_forest/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include "bandit_forest/csv.hpp"
#include "bandit_forest/environments.hpp"

namespace bandit_forest {

namespace fs = std::filesystem;

std::unique_ptr<Agent> make_agent(const std::string& name, const ExperimentConfig& config, int num_arms,
                                  int num_features, std::uint64_t seed, ExecutionPolicy policy) {
  if (name == "bfts" || name == "fg-bfts") {
    BftsConfig c;
    c.num_arms = num_arms;
    c.num_features = num_features;
    c.sampler = config.bart.sampler();
    c.refresh = config.refresh;
    c.tau = config.tau;
    c.encoding = config.encoding;
    if (name == "fg-bfts") c.fg = config.fg;
    c.seed = seed;
    c.policy = policy;
    return std::make_unique<BftsAgent>(c);
  }
  if (name == "lints" || name == "linucb") {
    LinearConfig c;
    c.num_arms = num_arms;
    c.num_features = num_features;
    c.encoding = config.linear_encoding;
    c.lambda_ridge = config.linear_lambda;
    c.nu = config.lints_nu;
    c.alpha = config.linucb_alpha;
    c.policy_samples = config.policy_samples;
    c.seed = seed;
    if (name == "lints") return std::make_unique<LinTsAgent>(c);
    return std::make_unique<LinUcbAgent>(c);
  }
  if (name == "uniform") return std::make_unique<UniformAgent>(num_arms, seed);
  throw ConfigError("unknown agent '" + name + "'");
}

std::uint64_t replication_seed(std::uint64_t global_seed, int replication) {
  return derive_seed(global_seed, {std::uint64_t(replication)});
}

std::vector<long> snapshot_rounds(const ExperimentConfig& config, int num_arms, long horizon) {
  std::set<long> rounds;
  const long tau_k = long(config.tau) * num_arms;
  if (tau_k <= horizon) rounds.insert(tau_k);
  for (long r : config.eval_rounds)
    if (r <= horizon) rounds.insert(r);
  rounds.insert(horizon);
  return {rounds.begin(), rounds.end()};
}

namespace {

struct Scenario {
  std::string name;
  std::optional<ScenarioSpec> spec;
  std::optional<TabularData> data;
  long horizon = 0;
  int num_arms = 0;
  int num_features = 0;
  Matrix probes;
};

Scenario prepare_scenario(const ExperimentConfig& config) {
  Scenario s;
  if (config.dataset.empty()) {
    ScenarioSpec spec = scenario_by_name(config.scenario);
    if (config.noise_sd >= 0.0) spec.noise_sd = config.noise_sd;
    if (config.linear_d > 0) spec.linear_active = config.linear_d;
    s.name = config.scenario;
    s.num_arms = spec.num_arms;
    s.num_features = spec.num_features;
    s.horizon = config.horizon;
    s.probes = make_probe_set(config.scenario, config.seed, spec.num_features, config.probes);
    s.spec = spec;
    return s;
  }
  s.data = load_tabular_csv(config.dataset, config.label);
  s.name = fs::path(config.dataset).stem().string();
  s.num_arms = s.data->num_classes();
  s.num_features = static_cast<int>(s.data->features.cols());
  const long rows = static_cast<long>(s.data->features.rows());
  s.horizon = config.horizon > 0 ? config.horizon : rows;
  Rng rng(derive_seed(config.seed, {0x9b0be, fnv1a(config.dataset)}));
  s.probes = Matrix(config.probes, s.num_features);
  for (int j = 0; j < config.probes; ++j) {
    const std::size_t r = uniform_index(rows, rng);
    for (int v = 0; v < s.num_features; ++v) s.probes(j, v) = s.data->features(r, v);
  }
  return s;
}

std::string dump_name(const std::string& dir, int rep, const std::string& agent, long t, int arm, int chain) {
  return (fs::path(dir) / "forests" /
          ("rep" + std::to_string(rep) + "_" + agent + "_t" + std::to_string(t) + "_arm" +
           std::to_string(arm) + "_chain" + std::to_string(chain) + ".forest"))
      .string();
}

// Last draw of each chain, converted to original response units.
void dump_forests(const std::string& dir, int rep, const std::string& agent, long t, const BftsAgent& bfts) {
  fs::create_directories(fs::path(dir) / "forests");
  const auto& pools = bfts.pools();
  for (std::size_t a = 0; a < pools.size(); ++a) {
    const DrawPool& pool = pools[a];
    for (int c = 0; c < pool.n_chains; ++c) {
      const Draw& draw = pool.draws[std::size_t(c + 1) * pool.n_post - 1];
      Forest forest = draw.forest.expand();
      const double shift = pool.rescale.center / double(std::max<std::size_t>(forest.trees.size(), 1));
      for (Tree& tree : forest.trees)
        for (int id : tree.leaves()) tree.node(id).value = shift + pool.rescale.scale() * tree.node(id).value;
      std::ofstream out(dump_name(dir, rep, agent, t, int(a), c));
      if (!out) throw std::runtime_error("cannot write forest dump in '" + dir + "'");
      write_forest(out, forest);
    }
  }
}

void record_snapshot(RunRecords& rec, int rep, const std::string& name, long t, Agent& agent,
                     const Scenario& scenario, const std::optional<SyntheticEnv>& env, const ExperimentConfig& config) {
  const Matrix& probes = scenario.probes;
  for (std::size_t j = 0; j < probes.rows(); ++j) {
    const auto dist = agent.policy_distribution(probes.row(j));
    for (std::size_t a = 0; a < dist.size(); ++a)
      rec.votes.push_back({rep, name, t, int(j), int(a), dist[a]});
  }
  auto* bfts = dynamic_cast<BftsAgent*>(&agent);
  if (!bfts || !bfts->has_pools()) return;

  if (config.snapshots && env) {
    std::vector<double> levels = ece_levels();
    levels.push_back(0.95);
    Matrix truth(probes.rows(), scenario.num_arms);
    std::vector<std::vector<std::vector<double>>> draws(probes.rows());
    for (std::size_t j = 0; j < probes.rows(); ++j) {
      const auto mu = env->arm_means(probes.row(j));
      for (int a = 0; a < scenario.num_arms; ++a) {
        truth(j, a) = mu[a];
        draws[j].push_back(bfts->arm_draws(a, probes.row(j)));
      }
    }
    const IntervalSnapshot snap = interval_snapshot(t, draws, truth, levels);
    for (const auto& cell : snap.cells) rec.cells.push_back({rep, name, t, cell});
  }

  std::vector<double> rhats;
  const auto& pools = bfts->pools();
  for (std::size_t a = 0; a < pools.size(); ++a) {
    for (int k = 0; k < kNumMoveKinds; ++k) {
      McmcRecord m;
      m.replication = rep;
      m.agent = name;
      m.round = t;
      m.refresh_round = pools[a].refresh_round;
      m.arm = int(a);
      m.move_kind = move_kind_name(MoveKind(k));
      m.attempted = pools[a].counters.attempted[k];
      m.accepted = pools[a].counters.accepted[k];
      rec.mcmc.push_back(m);
    }
    const auto values = pool_r_hat_values(pools[a], probes);
    rhats.insert(rhats.end(), values.begin(), values.end());
  }
  const RhatSummary s = summarize_r_hat(rhats);
  rec.rhat.push_back({rep, name, t, s.median, s.mean});
}

RunRecords run_replication(const ExperimentConfig& config, const Scenario& scenario, int rep,
                           ExecutionPolicy policy) {
  RunRecords rec;
  const std::uint64_t seed = replication_seed(config.seed, rep);
  std::optional<SyntheticEnv> env;
  InteractionStream stream;
  Rng stream_rng(derive_seed(seed, {2}));
  if (scenario.spec) {
    Rng env_rng(derive_seed(seed, {1}));
    env.emplace(*scenario.spec, env_rng);
    stream = env->materialize(scenario.horizon, stream_rng);
  } else {
    stream = ClassificationBanditEnv(*scenario.data, scenario.name).materialize(scenario.horizon, stream_rng);
  }
  const std::vector<long> snaps = snapshot_rounds(config, scenario.num_arms, scenario.horizon);
  const int K = scenario.num_arms;

  for (std::size_t g = 0; g < config.agents.size(); ++g) {
    const std::string& name = config.agents[g];
    auto agent = make_agent(name, config, K, scenario.num_features, derive_seed(seed, {3, g}), policy);
    auto* bfts = dynamic_cast<BftsAgent*>(agent.get());
    double cum_regret = 0.0, wall = 0.0;
    std::uint64_t ctx_hash = 0xcbf29ce484222325ULL, reward_hash = 0xcbf29ce484222325ULL;
    std::size_t next_snap = 0;
    for (long t = 1; t <= scenario.horizon; ++t) {
      const auto x = stream.contexts.row(t - 1);
      const auto start = std::chrono::steady_clock::now();
      const int a = agent->select(x);
      const double reward = stream.rewards(t - 1, a);
      agent->update(x, a, reward);
      wall += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

      double best = stream.means(t - 1, 0);
      for (int k = 1; k < K; ++k) best = std::max(best, stream.means(t - 1, k));
      const double regret = best - stream.means(t - 1, a);
      cum_regret += regret;
      ctx_hash = fnv1a_bytes(x.data(), x.size_bytes(), ctx_hash);
      reward_hash = fnv1a_bytes(&stream.rewards(t - 1, 0), sizeof(double) * K, reward_hash);
      rec.rounds.push_back({rep, t, name, a, reward, regret, cum_regret, config.wall_time ? wall : 0.0});

      if (config.dump_forest && bfts && bfts->refreshed_last_update())
        dump_forests(config.out, rep, name, t, *bfts);
      if (next_snap < snaps.size() && snaps[next_snap] == t) {
        record_snapshot(rec, rep, name, t, *agent, scenario, env, config);
        ++next_snap;
      }
    }
    rec.streams.push_back({rep, name, ctx_hash, reward_hash});
    if (bfts && bfts->has_pools()) {
      const auto incl = feature_inclusion(bfts->pools(), scenario.num_features);
      for (std::size_t v = 0; v < incl.size(); ++v) rec.inclusion.push_back({rep, name, int(v), incl[v]});
    }
  }
  return rec;
}

template <typename T>
void append(std::vector<T>& dst, std::vector<T>& src) {
  dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

std::string fmt(double v) { return format_double(v); }

const char* kRoundsSchema = "bandit-forest/rounds/v1";

std::vector<std::string> rounds_header() {
  return {"replication", "t", "agent", "action", "reward", "regret", "cum_regret", "cum_wall_time"};
}

std::vector<std::string> round_cells(const RoundRecord& r) {
  return {std::to_string(r.replication), std::to_string(r.t), r.agent, std::to_string(r.action),
          fmt(r.reward), fmt(r.regret), fmt(r.cum_regret), fmt(r.cum_wall_time)};
}

// Writers for the raw per-replication records, filled as replications finish.
struct RecordWriters {
  explicit RecordWriters(const std::string& dir)
      : rounds((fs::path(dir) / "rounds.csv").string(), kRoundsSchema, rounds_header()),
        streams((fs::path(dir) / "streams.csv").string(), "bandit-forest/streams/v1",
                {"replication", "agent", "context_hash", "reward_hash"}),
        votes((fs::path(dir) / "votes.csv").string(), "bandit-forest/votes/v1",
              {"replication", "agent", "round", "probe", "arm", "prob"}),
        snapshots((fs::path(dir) / "snapshots.csv").string(), "bandit-forest/snapshots/v1",
                  {"replication", "agent", "round", "probe", "arm", "level", "lo", "hi", "truth"}),
        mcmc((fs::path(dir) / "mcmc.csv").string(), "bandit-forest/mcmc/v1",
             {"replication", "agent", "round", "refresh_round", "arm", "move_kind", "attempted", "accepted"}),
        rhat((fs::path(dir) / "rhat_raw.csv").string(), "bandit-forest/rhat-raw/v1",
             {"replication", "agent", "round", "median", "mean"}),
        inclusion((fs::path(dir) / "inclusion_raw.csv").string(), "bandit-forest/inclusion-raw/v1",
                  {"replication", "agent", "feature", "inclusion"}) {}

  void write(const RunRecords& r) {
    for (const auto& x : r.rounds) rounds.write_row(round_cells(x));
    for (const auto& x : r.streams)
      streams.write_row({std::to_string(x.replication), x.agent, std::to_string(x.context_hash),
                         std::to_string(x.reward_hash)});
    for (const auto& x : r.votes)
      votes.write_row({std::to_string(x.replication), x.agent, std::to_string(x.round), std::to_string(x.probe),
                       std::to_string(x.arm), fmt(x.prob)});
    for (const auto& x : r.cells)
      snapshots.write_row({std::to_string(x.replication), x.agent, std::to_string(x.round),
                           std::to_string(x.cell.probe), std::to_string(x.cell.arm), fmt(x.cell.level),
                           fmt(x.cell.interval.lo), fmt(x.cell.interval.hi), fmt(x.cell.truth)});
    for (const auto& x : r.mcmc)
      mcmc.write_row({std::to_string(x.replication), x.agent, std::to_string(x.round),
                      std::to_string(x.refresh_round), std::to_string(x.arm), x.move_kind,
                      std::to_string(x.attempted), std::to_string(x.accepted)});
    for (const auto& x : r.rhat)
      rhat.write_row({std::to_string(x.replication), x.agent, std::to_string(x.round), fmt(x.median), fmt(x.mean)});
    for (const auto& x : r.inclusion)
      inclusion.write_row({std::to_string(x.replication), x.agent, std::to_string(x.feature), fmt(x.inclusion)});
    for (CsvWriter* w : {&rounds, &streams, &votes, &snapshots, &mcmc, &rhat, &inclusion}) w->flush();
  }

  CsvWriter rounds, streams, votes, snapshots, mcmc, rhat, inclusion;
};

}  // namespace

RunArtifact run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const Scenario scenario = prepare_scenario(config);
  if (scenario.horizon < 1) throw ConfigError("horizon must be >= 1");

  std::unique_ptr<RecordWriters> writers;
  if (options.write_files) {
    fs::create_directories(config.out);
    std::ofstream cfg(fs::path(config.out) / "run.cfg");
    if (!cfg) throw std::runtime_error("cannot write into '" + config.out + "'");
    cfg << dump_config(config);
    writers = std::make_unique<RecordWriters>(config.out);
  }

  RunArtifact art;
  art.records.scenario = scenario.name;
  art.records.agents = config.agents;
  std::vector<std::exception_ptr> errors(config.reps);
  bool failed = false;

  auto finish = [&](int rep, RunRecords& rec) {
    if (failed || errors[rep]) {
      failed = true;
      return;
    }
    if (writers) writers->write(rec);
    append(art.records.rounds, rec.rounds);
    append(art.records.streams, rec.streams);
    append(art.records.votes, rec.votes);
    append(art.records.cells, rec.cells);
    append(art.records.mcmc, rec.mcmc);
    append(art.records.rhat, rec.rhat);
    append(art.records.inclusion, rec.inclusion);
  };

  if (options.policy == ExecutionPolicy::Parallel && config.reps > 1) {
#pragma omp parallel for ordered schedule(dynamic, 1)
    for (int rep = 0; rep < config.reps; ++rep) {
      RunRecords rec;
      try {
        rec = run_replication(config, scenario, rep, options.policy);
      } catch (...) {
        errors[rep] = std::current_exception();
      }
#pragma omp ordered
      finish(rep, rec);
    }
  } else {
    for (int rep = 0; rep < config.reps; ++rep) {
      RunRecords rec;
      try {
        rec = run_replication(config, scenario, rep, options.policy);
      } catch (...) {
        errors[rep] = std::current_exception();
      }
      finish(rep, rec);
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  art.summary = summarize(art.records);
  art.diagnostics = compute_diagnostics(art.records);
  for (const auto& r : art.records.rounds) {
    auto& v = art.final_regret[r.agent];
    if (v.size() <= std::size_t(r.replication)) v.resize(r.replication + 1, 0.0);
    v[r.replication] = r.cum_regret;
  }
  if (options.write_files) {
    write_summary(config.out, art.summary);
    write_diagnostics(config.out, art.diagnostics);
  }
  return art;
}

std::vector<SummaryRow> summarize(const RunRecords& records) {
  // Final cumulative regret is the value at the largest t per (agent, replication).
  std::map<std::string, std::map<int, std::pair<long, double>>> last;
  for (const auto& r : records.rounds) {
    auto& slot = last[r.agent][r.replication];
    if (r.t >= slot.first) slot = {r.t, r.cum_regret};
  }
  std::vector<SummaryRow> out;
  for (const auto& agent : records.agents) {
    const auto it = last.find(agent);
    if (it == last.end()) continue;
    std::vector<double> finals;
    for (const auto& [rep, v] : it->second) finals.push_back(v.second);
    SummaryRow row;
    row.agent = agent;
    row.scenario = records.scenario;
    row.reps = static_cast<int>(finals.size());
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= double(finals.size());
    row.mean_final_regret = mean;
    if (finals.size() < 2) {
      row.sd_final_regret = std::nan("");
    } else {
      double ss = 0.0;
      for (double f : finals) ss += (f - mean) * (f - mean);
      row.sd_final_regret = std::sqrt(ss / double(finals.size() - 1));
    }
    out.push_back(row);
  }
  return out;
}

DiagnosticsTables compute_diagnostics(const RunRecords& records) {
  DiagnosticsTables out;
  const std::vector<double> levels = ece_levels();

  for (const auto& agent : records.agents) {
    // Interval cells pooled over replications per round.
    std::map<long, IntervalSnapshot> pooled;
    for (const auto& c : records.cells) {
      if (c.agent != agent) continue;
      auto& snap = pooled[c.round];
      snap.round = c.round;
      snap.cells.push_back(c.cell);
    }
    for (const auto& [round, snap] : pooled) {
      const auto cov = coverage_and_length(std::span(&snap, 1), 0.95);
      out.coverage.push_back({agent, round, cov[0].coverage, cov[0].mean_length});
      out.ece.push_back({agent, round, ece(snap, levels)});
    }

    // Votes keyed by (replication, round) as probe x arm matrices.
    std::map<int, std::map<long, std::vector<std::vector<double>>>> votes;
    for (const auto& v : records.votes) {
      if (v.agent != agent) continue;
      auto& rows = votes[v.replication][v.round];
      if (rows.size() <= std::size_t(v.probe)) rows.resize(v.probe + 1);
      auto& row = rows[v.probe];
      if (row.size() <= std::size_t(v.arm)) row.resize(v.arm + 1, 0.0);
      row[v.arm] = v.prob;
    }
    std::map<long, std::pair<long, std::vector<double>>> tv;  // round -> (prev, per-rep values)
    for (const auto& [rep, by_round] : votes) {
      const std::vector<std::vector<double>>* prev = nullptr;
      long prev_round = 0;
      for (const auto& [round, rows] : by_round) {
        if (prev && prev->size() == rows.size()) {
          double total = 0.0;
          for (std::size_t j = 0; j < rows.size(); ++j) total += policy_delta_tv(rows[j], (*prev)[j]);
          auto& slot = tv[round];
          slot.first = prev_round;
          slot.second.push_back(total / double(rows.size()));
        }
        prev = &rows;
        prev_round = round;
      }
    }
    for (const auto& [round, slot] : tv) {
      double mean = 0.0;
      for (double v : slot.second) mean += v;
      out.policy_tv.push_back({agent, round, slot.first, mean / double(slot.second.size())});
    }

    std::map<long, std::map<std::string, std::pair<std::int64_t, std::int64_t>>> acc;
    for (const auto& m : records.mcmc) {
      if (m.agent != agent) continue;
      auto& k = acc[m.round][m.move_kind];
      k.first += m.attempted;
      k.second += m.accepted;
      auto& all = acc[m.round]["overall"];
      all.first += m.attempted;
      all.second += m.accepted;
    }
    for (const auto& [round, kinds] : acc) {
      for (int k = 0; k < kNumMoveKinds; ++k) {
        const std::string name = move_kind_name(MoveKind(k));
        const auto it = kinds.find(name);
        if (it == kinds.end()) continue;
        out.acceptance.push_back(
            {agent, round, name, it->second.first ? double(it->second.second) / double(it->second.first) : 0.0});
      }
      const auto& all = kinds.at("overall");
      out.acceptance.push_back({agent, round, "overall", all.first ? double(all.second) / double(all.first) : 0.0});
    }

    std::map<long, std::vector<const RhatRecord*>> rh;
    for (const auto& r : records.rhat)
      if (r.agent == agent) rh[r.round].push_back(&r);
    for (const auto& [round, rows] : rh) {
      double med = 0.0, mean = 0.0;
      for (const auto* r : rows) {
        med += r->median;
        mean += r->mean;
      }
      out.rhat.push_back({agent, round, med / double(rows.size()), mean / double(rows.size())});
    }

    std::map<int, std::vector<double>> incl;
    for (const auto& r : records.inclusion)
      if (r.agent == agent) incl[r.feature].push_back(r.inclusion);
    if (!incl.empty()) {
      std::vector<double> mean_incl;
      for (const auto& [feature, values] : incl) {
        double s = 0.0;
        for (double v : values) s += v;
        mean_incl.push_back(s / double(values.size()));
      }
      std::vector<std::size_t> order(mean_incl.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return mean_incl[a] > mean_incl[b]; });
      double cum = 0.0;
      std::vector<double> frontier(mean_incl.size());
      for (std::size_t rank = 0; rank < order.size(); ++rank) {
        cum += mean_incl[order[rank]];
        frontier[order[rank]] = cum;
      }
      for (std::size_t v = 0; v < mean_incl.size(); ++v)
        out.inclusion.push_back({agent, int(v), mean_incl[v], frontier[v]});
    }
  }
  return out;
}

void write_records(const std::string& dir, const RunRecords& records) {
  fs::create_directories(dir);
  RecordWriters(dir).write(records);
}

void write_summary(const std::string& dir, const std::vector<SummaryRow>& summary) {
  CsvWriter out((fs::path(dir) / "summary.csv").string(), "bandit-forest/summary/v1",
                {"agent", "scenario", "mean_final_regret", "sd_final_regret", "reps"});
  for (const auto& r : summary)
    out.write_row({r.agent, r.scenario, fmt(r.mean_final_regret), fmt(r.sd_final_regret), std::to_string(r.reps)});
}

void write_diagnostics(const std::string& dir, const DiagnosticsTables& t) {
  const fs::path d(dir);
  {
    CsvWriter out((d / "coverage_length.csv").string(), "bandit-forest/coverage-length/v1",
                  {"agent", "round", "coverage", "mean_length"});
    for (const auto& r : t.coverage)
      out.write_row({r.agent, std::to_string(r.round), fmt(r.coverage), fmt(r.mean_length)});
  }
  {
    CsvWriter out((d / "ece.csv").string(), "bandit-forest/ece/v1", {"agent", "round", "ece"});
    for (const auto& r : t.ece) out.write_row({r.agent, std::to_string(r.round), fmt(r.ece)});
  }
  {
    CsvWriter out((d / "policy_tv.csv").string(), "bandit-forest/policy-tv/v1",
                  {"agent", "round", "prev_round", "mean_tv"});
    for (const auto& r : t.policy_tv)
      out.write_row({r.agent, std::to_string(r.round), std::to_string(r.prev_round), fmt(r.mean_tv)});
  }
  {
    CsvWriter out((d / "acceptance.csv").string(), "bandit-forest/acceptance/v1",
                  {"agent", "round", "move_kind", "rate"});
    for (const auto& r : t.acceptance) out.write_row({r.agent, std::to_string(r.round), r.move_kind, fmt(r.rate)});
  }
  {
    CsvWriter out((d / "rhat.csv").string(), "bandit-forest/rhat/v1", {"agent", "round", "median", "mean"});
    for (const auto& r : t.rhat) out.write_row({r.agent, std::to_string(r.round), fmt(r.median), fmt(r.mean)});
  }
  {
    CsvWriter out((d / "feature_inclusion.csv").string(), "bandit-forest/feature-inclusion/v1",
                  {"agent", "feature", "inclusion", "frontier"});
    for (const auto& r : t.inclusion)
      out.write_row({r.agent, std::to_string(r.feature), fmt(r.inclusion), fmt(r.frontier)});
  }
}

namespace {

double num(const CsvTable& t, std::size_t row, const std::string& col) {
  const int c = t.column(col);
  if (c < 0) throw std::runtime_error("missing column '" + col + "'");
  double v = 0.0;
  if (!parse_double(t.rows[row][c], v))
    throw std::runtime_error("cannot parse '" + t.rows[row][c] + "' in column '" + col + "' at line " +
                             std::to_string(t.line_numbers[row]));
  return v;
}

std::string str(const CsvTable& t, std::size_t row, const std::string& col) {
  const int c = t.column(col);
  if (c < 0) throw std::runtime_error("missing column '" + col + "'");
  return t.rows[row][c];
}

}  // namespace

RunRecords read_records(const std::string& dir) {
  const fs::path d(dir);
  const ExperimentConfig config = load_config((d / "run.cfg").string());
  RunRecords rec;
  rec.scenario = config.dataset.empty() ? config.scenario : fs::path(config.dataset).stem().string();
  rec.agents = config.agents;

  const CsvTable rounds = read_csv((d / "rounds.csv").string());
  for (std::size_t i = 0; i < rounds.rows.size(); ++i)
    rec.rounds.push_back({int(num(rounds, i, "replication")), long(num(rounds, i, "t")), str(rounds, i, "agent"),
                          int(num(rounds, i, "action")), num(rounds, i, "reward"), num(rounds, i, "regret"),
                          num(rounds, i, "cum_regret"), num(rounds, i, "cum_wall_time")});
  const CsvTable votes = read_csv((d / "votes.csv").string());
  for (std::size_t i = 0; i < votes.rows.size(); ++i)
    rec.votes.push_back({int(num(votes, i, "replication")), str(votes, i, "agent"), long(num(votes, i, "round")),
                         int(num(votes, i, "probe")), int(num(votes, i, "arm")), num(votes, i, "prob")});
  const CsvTable snaps = read_csv((d / "snapshots.csv").string());
  for (std::size_t i = 0; i < snaps.rows.size(); ++i) {
    CellRecord c;
    c.replication = int(num(snaps, i, "replication"));
    c.agent = str(snaps, i, "agent");
    c.round = long(num(snaps, i, "round"));
    c.cell.probe = int(num(snaps, i, "probe"));
    c.cell.arm = int(num(snaps, i, "arm"));
    c.cell.level = num(snaps, i, "level");
    c.cell.interval = {num(snaps, i, "lo"), num(snaps, i, "hi")};
    c.cell.truth = num(snaps, i, "truth");
    rec.cells.push_back(c);
  }
  const CsvTable mcmc = read_csv((d / "mcmc.csv").string());
  for (std::size_t i = 0; i < mcmc.rows.size(); ++i)
    rec.mcmc.push_back({int(num(mcmc, i, "replication")), str(mcmc, i, "agent"), long(num(mcmc, i, "round")),
                        long(num(mcmc, i, "refresh_round")), int(num(mcmc, i, "arm")), str(mcmc, i, "move_kind"),
                        std::int64_t(num(mcmc, i, "attempted")), std::int64_t(num(mcmc, i, "accepted"))});
  const CsvTable rhat = read_csv((d / "rhat_raw.csv").string());
  for (std::size_t i = 0; i < rhat.rows.size(); ++i)
    rec.rhat.push_back({int(num(rhat, i, "replication")), str(rhat, i, "agent"), long(num(rhat, i, "round")),
                        num(rhat, i, "median"), num(rhat, i, "mean")});
  const CsvTable incl = read_csv((d / "inclusion_raw.csv").string());
  for (std::size_t i = 0; i < incl.rows.size(); ++i)
    rec.inclusion.push_back({int(num(incl, i, "replication")), str(incl, i, "agent"), int(num(incl, i, "feature")),
                             num(incl, i, "inclusion")});
  return rec;
}

DiagnosticsTables diagnose_run(const std::string& dir) {
  const RunRecords rec = read_records(dir);
  DiagnosticsTables tables = compute_diagnostics(rec);
  write_diagnostics(dir, tables);
  write_summary(dir, summarize(rec));
  return tables;
}

}  // namespace bandit_forest
