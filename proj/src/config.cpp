#include "bandit_forest/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "bandit_forest/csv.hpp"
#include "bandit_forest/environments.hpp"

namespace bandit_forest {

SamplerConfig BartKnobs::sampler() const {
  SamplerConfig s;
  s.n_burn = nskip;
  s.n_post = ndpost;
  s.n_chains = chains;
  s.min_leaf_size = min_leaf_size;
  s.prior.m = n_trees;
  s.prior.structure = quick_decay ? StructurePrior::depth_geometric(tree_alpha)
                                  : StructurePrior::original(original_alpha, tree_beta);
  s.prior.kappa = f_k;
  s.prior.n_max = max_bins;
  s.prior.nu = sigma_nu;
  s.prior.q = sigma_q;
  s.prior.split_axis.kind =
      dirichlet_prior ? SplitAxisPriorKind::DirichletSparse : SplitAxisPriorKind::Uniform;
  return s;
}

std::string encoding_name(Encoding encoding) {
  switch (encoding) {
    case Encoding::Separate: return "separate";
    case Encoding::OneHot: return "one-hot";
    case Encoding::Multi: return "multi";
  }
  return "separate";
}

Encoding parse_encoding(const std::string& name) {
  if (name == "separate") return Encoding::Separate;
  if (name == "one-hot" || name == "onehot") return Encoding::OneHot;
  if (name == "multi") return Encoding::Multi;
  throw ConfigError("unknown encoding '" + name + "'");
}

std::string refresh_kind_name(RefreshKind kind) {
  switch (kind) {
    case RefreshKind::Logarithmic: return "log";
    case RefreshKind::SquareRoot: return "sqrt";
    case RefreshKind::EveryN: return "every";
  }
  return "log";
}

RefreshKind parse_refresh_kind(const std::string& name) {
  if (name == "log") return RefreshKind::Logarithmic;
  if (name == "sqrt") return RefreshKind::SquareRoot;
  if (name == "every") return RefreshKind::EveryN;
  throw ConfigError("unknown refresh kind '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define BF_DOUBLE(KEY, FIELD)                                                              \
  Entry{KEY, [](const ExperimentConfig& c) { return format_double(c.FIELD); },             \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_double(k, v); }}
#define BF_INT(KEY, FIELD)                                                                 \
  Entry{KEY, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },            \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {              \
          c.FIELD = static_cast<decltype(c.FIELD)>(to_long(k, v));                         \
        }}
#define BF_BOOL(KEY, FIELD)                                                                \
  Entry{KEY, [](const ExperimentConfig& c) { return from_bool(c.FIELD); },                 \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_bool(k, v); }}
#define BF_STRING(KEY, FIELD)                                                              \
  Entry{KEY, [](const ExperimentConfig& c) { return c.FIELD; },                            \
        [](ExperimentConfig& c, const std::string&, const std::string& v) { c.FIELD = v; }}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      BF_STRING("experiment.scenario", scenario),
      BF_STRING("experiment.dataset", dataset),
      BF_STRING("experiment.label", label),
      Entry{"agent.kind", [](const ExperimentConfig& c) { return join(c.agents); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.agents = split_list(v); }},
      BF_INT("experiment.horizon", horizon),
      BF_INT("experiment.reps", reps),
      Entry{"experiment.seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      Entry{"experiment.eval_rounds",
            [](const ExperimentConfig& c) {
              std::vector<std::string> items;
              for (long r : c.eval_rounds) items.push_back(std::to_string(r));
              return join(items);
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.eval_rounds.clear();
              for (const auto& item : split_list(v)) c.eval_rounds.push_back(to_long(k, item));
            }},
      BF_STRING("experiment.out", out),
      BF_INT("experiment.probes", probes),
      BF_BOOL("experiment.snapshots", snapshots),
      BF_BOOL("experiment.dump_forest", dump_forest),
      BF_BOOL("experiment.wall_time", wall_time),
      BF_INT("bart.n_trees", bart.n_trees),
      BF_INT("bart.nskip", bart.nskip),
      BF_INT("bart.ndpost", bart.ndpost),
      BF_INT("bart.chains", bart.chains),
      BF_DOUBLE("bart.tree_alpha", bart.tree_alpha),
      BF_DOUBLE("bart.original_alpha", bart.original_alpha),
      BF_DOUBLE("bart.tree_beta", bart.tree_beta),
      BF_DOUBLE("bart.f_k", bart.f_k),
      BF_INT("bart.max_bins", bart.max_bins),
      BF_BOOL("bart.dirichlet_prior", bart.dirichlet_prior),
      BF_BOOL("bart.quick_decay", bart.quick_decay),
      BF_DOUBLE("bart.sigma_nu", bart.sigma_nu),
      BF_DOUBLE("bart.sigma_q", bart.sigma_q),
      BF_INT("bart.min_leaf_size", bart.min_leaf_size),
      BF_INT("agent.tau", tau),
      Entry{"refresh.kind", [](const ExperimentConfig& c) { return refresh_kind_name(c.refresh.kind); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.refresh.kind = parse_refresh_kind(v);
            }},
      BF_DOUBLE("refresh.c", refresh.c),
      Entry{"encoding", [](const ExperimentConfig& c) { return encoding_name(c.encoding); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.encoding = parse_encoding(v); }},
      BF_DOUBLE("fg.eta", fg.eta),
      BF_DOUBLE("fg.lambda", fg.lambda),
      BF_DOUBLE("fg.b", fg.b),
      BF_DOUBLE("lints.nu", lints_nu),
      BF_DOUBLE("linucb.alpha", linucb_alpha),
      BF_DOUBLE("linear.lambda", linear_lambda),
      Entry{"linear.encoding", [](const ExperimentConfig& c) { return encoding_name(c.linear_encoding); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.linear_encoding = parse_encoding(v);
            }},
      BF_INT("policy.samples", policy_samples),
      BF_DOUBLE("env.noise_sd", noise_sd),
      BF_INT("env.linear_d", linear_d),
  };
  return entries;
}

#undef BF_DOUBLE
#undef BF_INT
#undef BF_BOOL
#undef BF_STRING

const std::vector<std::string>& known_agents() {
  static const std::vector<std::string> names = {"bfts", "fg-bfts", "lints", "linucb", "uniform"};
  return names;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.empty()) {
    try {
      scenario_by_name(scenario);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (label.empty()) {
    throw ConfigError("dataset runs need a label column");
  }
  if (agents.empty()) throw ConfigError("no agents configured");
  for (const auto& a : agents)
    if (std::find(known_agents().begin(), known_agents().end(), a) == known_agents().end())
      throw ConfigError("unknown agent '" + a + "'");
  if (horizon < 0 || (horizon == 0 && dataset.empty())) throw ConfigError("horizon must be >= 1");
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (probes < 1) throw ConfigError("probes must be >= 1");
  if (tau < 1) throw ConfigError("agent.tau must be >= 1");
  if (!(refresh.c > 0.0)) throw ConfigError("refresh.c must be > 0");
  if (!(fg.eta > 0.0) || fg.lambda < 0.0 || !(fg.b > 0.0)) throw ConfigError("fg settings out of range");
  if (lints_nu < 0.0 || linucb_alpha < 0.0 || !(linear_lambda > 0.0))
    throw ConfigError("linear baseline settings out of range");
  if (policy_samples < 1) throw ConfigError("policy.samples must be >= 1");
  for (long r : eval_rounds)
    if (r < 1) throw ConfigError("evaluation rounds must be >= 1");
  try {
    bart.sampler().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bart: ") + e.what());
  }
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : registry()) {
    if (e.key == key) {
      e.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string dump_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& e : registry()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.push_back(e.key);
  return keys;
}

}  // namespace bandit_forest
