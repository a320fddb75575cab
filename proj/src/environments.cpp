#include "bandit_forest/environments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "bandit_forest/csv.hpp"

namespace bandit_forest {

namespace {

constexpr double kPi = std::numbers::pi;

struct Rescaled4 {
  double x1, x2, x3, x4;
};

Rescaled4 friedman_rescale(std::span<const double> x) {
  return {100.0 * x[0], 40.0 * kPi + 520.0 * kPi * x[1], x[2], 1.0 + 10.0 * x[3]};
}

}  // namespace

double friedman1(std::span<const double> x) {
  return 10.0 * std::sin(kPi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] +
         5.0 * x[4];
}

double friedman2(std::span<const double> x) {
  const Rescaled4 r = friedman_rescale(x);
  const double inner = r.x2 * r.x3 - 1.0 / (r.x2 * r.x4);
  return std::sqrt(r.x1 * r.x1 + inner * inner) / 125.0;
}

double friedman3(std::span<const double> x) {
  const Rescaled4 r = friedman_rescale(x);
  const double num = r.x2 * r.x3 - 1.0 / (r.x2 * r.x4);
  double angle;
  if (r.x1 == 0.0) {
    angle = num > 0.0 ? kPi / 2.0 : (num < 0.0 ? -kPi / 2.0 : 0.0);
  } else {
    angle = std::atan(num / r.x1);
  }
  return angle / 0.1;
}

std::vector<double> BanditEnvironment::arm_means(std::span<const double>) const {
  throw std::logic_error(name() + ": mean rewards are not known");
}

std::vector<std::string> scenario_names() {
  return {"linear",          "friedman",
          "friedman2",       "friedman3",
          "friedman_sparse", "friedman_sparse_disjoint",
          "friedman_heteroscedastic", "synbart"};
}

ScenarioSpec scenario_by_name(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "linear") {
    s.kind = SyntheticKind::Linear;
    s.num_features = 10;
    s.num_arms = 3;
  } else if (name == "friedman") {
    s.kind = SyntheticKind::Friedman1;
  } else if (name == "friedman2") {
    s.kind = SyntheticKind::Friedman2;
  } else if (name == "friedman3") {
    s.kind = SyntheticKind::Friedman3;
  } else if (name == "friedman_sparse") {
    s.kind = SyntheticKind::Friedman1;
    s.num_features = 20;
  } else if (name == "friedman_sparse_disjoint") {
    s.kind = SyntheticKind::Friedman1;
    s.variant = ArmVariant::Disjoint;
    s.num_features = 20;
  } else if (name == "friedman_heteroscedastic") {
    s.kind = SyntheticKind::Friedman1;
    s.heteroscedastic = true;
  } else if (name == "synbart") {
    s.kind = SyntheticKind::SynBart;
    s.num_features = 4;
    s.num_arms = 3;
    s.noise_sd = 0.1;
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "'");
  }
  return s;
}

PriorConfig synbart_prior() {
  PriorConfig prior;
  prior.m = 100;
  prior.structure = StructurePrior::depth_geometric(0.45);
  prior.kappa = 2.0;
  prior.n_max = 100;
  prior.split_axis = SplitAxisPrior{SplitAxisPriorKind::DirichletSparse, 1.0, 1.0};
  return prior;
}

SyntheticEnv::SyntheticEnv(ScenarioSpec spec, Rng& rng) : spec_(std::move(spec)) {
  const int P = spec_.num_features;
  const int K = spec_.num_arms;
  if (K < 1 || P < 1) throw std::invalid_argument("scenario needs arms and features");
  if ((spec_.kind == SyntheticKind::Friedman1 && P < 5) ||
      ((spec_.kind == SyntheticKind::Friedman2 || spec_.kind == SyntheticKind::Friedman3) && P < 4))
    throw std::invalid_argument(spec_.name + ": too few features for the Friedman function");
  if (spec_.kind != SyntheticKind::Linear && spec_.kind != SyntheticKind::SynBart && K != 2)
    throw std::invalid_argument(spec_.name + ": Friedman scenarios have exactly 2 arms");

  noise_sd_.assign(K, spec_.noise_sd);
  if (spec_.heteroscedastic) {
    for (int a = 0; a < K; ++a) noise_sd_[a] = std::sqrt(std::pow(10.0, 2.0 * uniform01(rng) - 1.0));
  }
  if (spec_.kind == SyntheticKind::Linear) {
    const int active = spec_.linear_active > 0 ? std::min(spec_.linear_active, P) : P;
    beta_.assign(K, std::vector<double>(P, 0.0));
    for (int a = 0; a < K; ++a)
      for (int j = 0; j < active; ++j) beta_[a][j] = standard_normal(rng);
  }
  if (spec_.kind == SyntheticKind::SynBart) {
    const PriorConfig prior = synbart_prior();
    Matrix probe(10000, P);
    for (std::size_t i = 0; i < probe.rows(); ++i)
      for (int v = 0; v < P; ++v) probe(i, v) = uniform01(rng);
    const SplitGrid grid = build_split_grid(probe, prior.n_max);
    for (int a = 0; a < K; ++a) {
      const std::vector<double> s = sample_split_axis_probs(prior.split_axis, P, rng);
      Forest forest;
      for (int j = 0; j < prior.m; ++j) forest.trees.push_back(sample_tree_from_prior(prior, grid, s, rng));
      arm_forests_.emplace_back(forest);
    }
  }
}

double SyntheticEnv::base_function(std::span<const double> x) const {
  switch (spec_.kind) {
    case SyntheticKind::Friedman1: return friedman1(x);
    case SyntheticKind::Friedman2: return friedman2(x);
    case SyntheticKind::Friedman3: return friedman3(x);
    default: break;
  }
  throw std::logic_error("base_function on a non-Friedman scenario");
}

std::vector<double> SyntheticEnv::arm_means(std::span<const double> x) const {
  const int K = spec_.num_arms;
  std::vector<double> mu(K);
  switch (spec_.kind) {
    case SyntheticKind::Linear:
      for (int a = 0; a < K; ++a) {
        double v = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) v += beta_[a][j] * x[j];
        mu[a] = v;
      }
      break;
    case SyntheticKind::SynBart:
      for (int a = 0; a < K; ++a) mu[a] = arm_forests_[a].predict(x);
      break;
    default: {
      mu[0] = base_function(x);
      if (spec_.variant == ArmVariant::Disjoint) {
        const std::vector<double> reversed(x.rbegin(), x.rend());
        mu[1] = base_function(reversed);
      } else {
        mu[1] = mu[0] + 5.0 * std::sin(kPi * x[0] * x[1]);
      }
    }
  }
  return mu;
}

InteractionStream SyntheticEnv::materialize(long horizon, Rng& rng) const {
  const int P = spec_.num_features;
  const int K = spec_.num_arms;
  InteractionStream s;
  s.contexts = Matrix(horizon, P);
  s.means = Matrix(horizon, K);
  s.rewards = Matrix(horizon, K);
  for (long t = 0; t < horizon; ++t) {
    for (int v = 0; v < P; ++v) s.contexts(t, v) = uniform01(rng);
    const std::vector<double> mu = arm_means(s.contexts.row(t));
    for (int a = 0; a < K; ++a) {
      s.means(t, a) = mu[a];
      s.rewards(t, a) = mu[a] + noise_sd_[a] * standard_normal(rng);
    }
  }
  return s;
}

SyntheticEnv synbart_env_init(int num_features, int num_arms, Rng& rng) {
  ScenarioSpec spec = scenario_by_name("synbart");
  spec.num_features = num_features;
  spec.num_arms = num_arms;
  return SyntheticEnv(spec, rng);
}

TabularData load_tabular_csv(const std::string& path, const std::string& label_column,
                             const TabularOptions& options) {
  const CsvTable table = read_csv(path);
  const int label = table.column(label_column);
  if (label < 0) throw std::runtime_error(path + ": no label column '" + label_column + "'");
  if (table.rows.empty()) throw std::runtime_error(path + ": no data rows");
  const std::size_t n = table.rows.size();

  TabularData out;
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) == label) continue;
    const std::string& name = table.header[c];
    double probe = 0.0;
    const bool forced = std::find(options.categorical.begin(), options.categorical.end(), name) !=
                        options.categorical.end();
    if (forced || !parse_double(table.rows[0][c], probe)) {
      std::vector<std::string> levels;
      std::map<std::string, std::size_t> index;
      for (const auto& row : table.rows) {
        if (index.emplace(row[c], levels.size()).second) levels.push_back(row[c]);
      }
      for (std::size_t l = 0; l < levels.size(); ++l) {
        std::vector<double> col(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          if (table.rows[i][c] == levels[l]) col[i] = 1.0;
        columns.push_back(std::move(col));
        out.feature_names.push_back(name + "=" + levels[l]);
      }
      continue;
    }
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!parse_double(table.rows[i][c], col[i]))
        throw std::runtime_error(path + ": cannot parse '" + table.rows[i][c] + "' at row " +
                                 std::to_string(table.line_numbers[i]) + ", column '" + name + "'");
    }
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double low = *lo, range = *hi - *lo;
    for (double& v : col) v = range > 0.0 ? (v - low) / range : 0.0;
    columns.push_back(std::move(col));
    out.feature_names.push_back(name);
  }

  std::map<std::string, int> classes;
  for (const auto& row : table.rows) {
    const auto [it, inserted] = classes.emplace(row[label], static_cast<int>(out.class_names.size()));
    if (inserted) out.class_names.push_back(row[label]);
    out.labels.push_back(it->second);
  }
  if (out.class_names.size() < 2) throw std::runtime_error(path + ": label column has a single class");

  out.features = Matrix(n, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) out.features(i, c) = columns[c][i];
  return out;
}

ClassificationBanditEnv::ClassificationBanditEnv(TabularData data, std::string name)
    : data_(std::move(data)), name_(std::move(name)) {}

InteractionStream ClassificationBanditEnv::materialize(long horizon, Rng& rng) const {
  const std::size_t n = data_.features.rows();
  if (horizon > static_cast<long>(n))
    throw EnvironmentExhausted(name_ + ": horizon " + std::to_string(horizon) + " exceeds " +
                               std::to_string(n) + " rows");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order, rng);
  const int K = num_arms();
  InteractionStream s;
  s.contexts = Matrix(horizon, data_.features.cols());
  s.means = Matrix(horizon, K);
  s.rewards = Matrix(horizon, K);
  for (long t = 0; t < horizon; ++t) {
    const std::size_t r = order[t];
    for (std::size_t v = 0; v < data_.features.cols(); ++v) s.contexts(t, v) = data_.features(r, v);
    const int y = data_.labels[r];
    s.labels.push_back(y);
    s.means(t, y) = 1.0;
    s.rewards(t, y) = 1.0;
  }
  return s;
}

StepOutcome classification_step(const InteractionStream& stream, long t, int action) {
  if (t < 1 || t > static_cast<long>(stream.labels.size()))
    throw EnvironmentExhausted("classification stream exhausted at round " + std::to_string(t));
  const double reward = action == stream.labels[t - 1] ? 1.0 : 0.0;
  return {reward, 1.0 - reward};
}

LoggedPanel LoggedPanel::subset(std::span<const std::size_t> rows) const {
  LoggedPanel out;
  out.contexts = Matrix(rows.size(), contexts.cols());
  out.propensities = Matrix(rows.size(), propensities.cols());
  out.cluster_names = cluster_names;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    for (std::size_t v = 0; v < contexts.cols(); ++v) out.contexts(k, v) = contexts(i, v);
    for (std::size_t a = 0; a < propensities.cols(); ++a) out.propensities(k, a) = propensities(i, a);
    out.actions.push_back(actions[i]);
    out.rewards.push_back(rewards[i]);
    out.clusters.push_back(clusters[i]);
    out.steps.push_back(steps[i]);
  }
  return out;
}

LoggedPanel load_panel_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  std::vector<int> context_cols, prop_cols;
  for (int j = 0;; ++j) {
    const int c = table.column("context_" + std::to_string(j));
    if (c < 0) break;
    context_cols.push_back(c);
  }
  for (int a = 0;; ++a) {
    const int c = table.column("prop_" + std::to_string(a));
    if (c < 0) break;
    prop_cols.push_back(c);
  }
  const int action_col = table.column("action"), reward_col = table.column("reward");
  const int cluster_col = table.column("cluster_id"), step_col = table.column("step");
  if (context_cols.empty() || prop_cols.empty() || action_col < 0 || reward_col < 0 ||
      cluster_col < 0 || step_col < 0)
    throw std::runtime_error(path + ": panel needs context_*, action, reward, prop_*, cluster_id, step");

  const std::size_t n = table.rows.size();
  LoggedPanel panel;
  panel.contexts = Matrix(n, context_cols.size());
  panel.propensities = Matrix(n, prop_cols.size());
  std::map<std::string, int> cluster_index;
  auto number = [&](std::size_t i, int c) {
    double v = 0.0;
    if (!parse_double(table.rows[i][c], v))
      throw std::runtime_error(path + ": cannot parse '" + table.rows[i][c] + "' at row " +
                               std::to_string(table.line_numbers[i]) + ", column '" +
                               table.header[c] + "'");
    return v;
  };
  const int K = static_cast<int>(prop_cols.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < context_cols.size(); ++v) panel.contexts(i, v) = number(i, context_cols[v]);
    const double a = number(i, action_col);
    if (a != std::floor(a) || a < 0 || a >= K)
      throw std::runtime_error(path + ": action out of range at row " + std::to_string(table.line_numbers[i]));
    panel.actions.push_back(static_cast<int>(a));
    panel.rewards.push_back(number(i, reward_col));
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      const double p = number(i, prop_cols[k]);
      if (p < 0.0)
        throw std::runtime_error(path + ": negative propensity at row " + std::to_string(table.line_numbers[i]));
      panel.propensities(i, k) = p;
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw std::runtime_error(path + ": propensities do not sum to 1 at row " +
                               std::to_string(table.line_numbers[i]));
    const std::string& cid = table.rows[i][cluster_col];
    const auto [it, inserted] = cluster_index.emplace(cid, static_cast<int>(panel.cluster_names.size()));
    if (inserted) panel.cluster_names.push_back(cid);
    panel.clusters.push_back(it->second);
    panel.steps.push_back(static_cast<long>(number(i, step_col)));
  }
  return panel;
}

void write_panel_csv(const std::string& path, const LoggedPanel& panel) {
  std::vector<std::string> header;
  for (std::size_t v = 0; v < panel.contexts.cols(); ++v) header.push_back("context_" + std::to_string(v));
  header.push_back("action");
  header.push_back("reward");
  for (int a = 0; a < panel.num_arms(); ++a) header.push_back("prop_" + std::to_string(a));
  header.push_back("cluster_id");
  header.push_back("step");
  CsvWriter out(path, "bandit-forest/panel/v1", header);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    std::vector<std::string> row;
    for (std::size_t v = 0; v < panel.contexts.cols(); ++v) row.push_back(format_double(panel.contexts(i, v)));
    row.push_back(std::to_string(panel.actions[i]));
    row.push_back(format_double(panel.rewards[i]));
    for (int a = 0; a < panel.num_arms(); ++a) row.push_back(format_double(panel.propensities(i, a)));
    row.push_back(panel.cluster_names[panel.clusters[i]]);
    row.push_back(std::to_string(panel.steps[i]));
    out.write_row(row);
  }
}

double synthetic_panel_mean(const Matrix& truth, int arm, std::span<const double> x) {
  double v = truth(arm, 0);
  for (std::size_t j = 0; j < x.size(); ++j) v += truth(arm, j + 1) * x[j];
  return v;
}

LoggedPanel generate_synthetic_panel(const SyntheticPanelSpec& spec, Rng& rng, Matrix* truth) {
  const int K = static_cast<int>(spec.behavior.size());
  const int P = spec.num_features;
  Matrix coef(K, P + 1);
  for (int a = 0; a < K; ++a) {
    coef(a, 0) = 0.5 * standard_normal(rng);
    for (int j = 0; j < P; ++j) coef(a, j + 1) = standard_normal(rng);
  }
  LoggedPanel panel;
  panel.contexts = Matrix(spec.rows, P);
  panel.propensities = Matrix(spec.rows, K);
  std::size_t row = 0;
  int cluster = 0;
  while (row < spec.rows) {
    const int span = spec.min_cluster +
                     static_cast<int>(uniform_index(spec.max_cluster - spec.min_cluster + 1, rng));
    panel.cluster_names.push_back("u" + std::to_string(cluster));
    for (int step = 0; step < span && row < spec.rows; ++step, ++row) {
      for (int j = 0; j < P; ++j) panel.contexts(row, j) = uniform01(rng);
      const int a = static_cast<int>(sample_categorical(spec.behavior, rng));
      const double mu = synthetic_panel_mean(coef, a, panel.contexts.row(row));
      panel.actions.push_back(a);
      panel.rewards.push_back(mu + spec.noise_sd * standard_normal(rng));
      for (int k = 0; k < K; ++k) panel.propensities(row, k) = spec.behavior[k];
      panel.clusters.push_back(cluster);
      panel.steps.push_back(step);
    }
    ++cluster;
  }
  if (truth) *truth = coef;
  return panel;
}

}  // namespace bandit_forest
