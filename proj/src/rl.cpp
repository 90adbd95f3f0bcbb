#include "rlrelax/rl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "rlrelax/graph.hpp"

namespace rlrelax {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Restores the batch-norm running statistics on scope exit, so that forward
// passes replayed for gradients do not count twice.
class BatchNormGuard {
 public:
  explicit BatchNormGuard(PolicyParameters& p) : params_(p), saved_(p.bn) {}
  ~BatchNormGuard() { params_.bn = saved_; }

 private:
  PolicyParameters& params_;
  ad::BatchNormState saved_;
};

double advantage(const Trajectory& traj, int t, double baseline) {
  return traj.returns[static_cast<std::size_t>(t)] - baseline;
}

}  // namespace

Trajectory rollout(PolicyParameters& params, const Configuration& start,
                   const PotentialModel& model, const RolloutOptions& opt, RngStream& rng) {
  if (opt.horizon < 0) throw std::invalid_argument("rollout: negative horizon");
  Trajectory tr;
  // wrapped up front so a zero action reproduces E_0 bit for bit
  Configuration c = wrap(start);
  GraphState s = make_graph_state(c, model, opt.graph_cutoff);
  if (!std::isfinite(s.energy)) throw NumericalError("rollout: initial energy is not finite");
  tr.configs.push_back(c);
  tr.energies.push_back(s.energy);

  for (int t = 0; t < opt.horizon; ++t) {
    const Matrix mu = predict(params, s, opt.mode);
    if (!mu.allFinite()) {
      tr.truncated = true;
      break;
    }
    Matrix a = opt.stochastic ? sample_action(mu, opt.alpha, rng) : mu;
    Configuration next = c;
    next.positions += a;
    next = wrap(next);
    GraphState ns;
    double e;
    if (t + 1 < opt.horizon) {
      ns = make_graph_state(next, model, opt.graph_cutoff);
      e = ns.energy;
    } else {
      e = model.evaluate(next, false).energy;
    }
    if (!std::isfinite(e)) {
      tr.truncated = true;
      break;
    }
    tr.log_probs.push_back(log_prob(a, mu, opt.alpha));
    tr.actions.push_back(std::move(a));
    tr.states.push_back(std::move(s));
    tr.configs.push_back(next);
    tr.energies.push_back(e);
    c = std::move(next);
    s = std::move(ns);
  }

  for (std::size_t t = 0; t + 1 < tr.energies.size(); ++t) {
    tr.rewards.push_back(tr.energies[t] - tr.energies[t + 1]);
  }
  tr.returns = discounted_returns(tr.rewards, opt.gamma);
  return tr;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  std::vector<double> d(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    d[k] = acc;
  }
  return d;
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "discounted") return BaselineKind::DiscountedReturn;
  if (name == "drop") return BaselineKind::EnergyDrop;
  if (name == "none") return BaselineKind::None;
  throw InputError("unknown baseline '" + name + "' (expected discounted, drop or none)");
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::DiscountedReturn: return "discounted";
    case BaselineKind::EnergyDrop: return "drop";
    case BaselineKind::None: return "none";
  }
  return "?";
}

double fire_baseline(const Configuration& start, const PotentialModel& model, int horizon,
                     double gamma, const FireParams& fire, BaselineKind kind) {
  if (kind == BaselineKind::None || horizon <= 0) return 0.0;
  MinimizerSettings settings;
  settings.fire = fire;
  MinimizeResult run;
  try {
    run = minimize(start, model, Method::Fire, horizon, settings);
  } catch (const NumericalError& e) {
    fmt::print(stderr, "warning: FIRE baseline diverged ({}); using b = 0\n", e.what());
    return 0.0;
  }
  if (kind == BaselineKind::EnergyDrop) return run.energies.front() - run.energies.back();
  std::vector<double> rewards;
  for (std::size_t t = 0; t + 1 < run.energies.size(); ++t) {
    rewards.push_back(run.energies[t] - run.energies[t + 1]);
  }
  return discounted_returns(rewards, gamma).front();
}

ad::Var reinforce_loss(PolicyParameters& params, const Trajectory& traj, double baseline,
                       const PotentialModel&, const RolloutOptions& opt, ad::Tape& tape) {
  if (traj.steps() == 0) throw std::invalid_argument("reinforce_loss: empty trajectory");
  BatchNormGuard guard(params);
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  for (int t = 0; t < traj.steps(); ++t) {
    ad::Var mu = forward(params, traj.states[static_cast<std::size_t>(t)], tape, opt.mode);
    terms.push_back(ad::gaussian_log_prob(mu, traj.actions[static_cast<std::size_t>(t)], opt.alpha));
    weights.push_back(-advantage(traj, t, baseline));
  }
  return ad::weighted_sum(terms, weights);
}

double accumulate_policy_gradient(PolicyParameters& params, const Trajectory& traj,
                                  double baseline, const PotentialModel&,
                                  const RolloutOptions& opt, double weight) {
  BatchNormGuard guard(params);
  double total = 0.0;
  for (int t = 0; t < traj.steps(); ++t) {
    ad::Tape tape;
    ad::Var mu = forward(params, traj.states[static_cast<std::size_t>(t)], tape, opt.mode);
    ad::Var lp = ad::gaussian_log_prob(mu, traj.actions[static_cast<std::size_t>(t)], opt.alpha);
    ad::Var loss = ad::weighted_sum({lp}, {-weight * advantage(traj, t, baseline)});
    tape.backward(loss);
    total += loss.scalar();
  }
  return total;
}

double clip_grad_norm(PolicyParameters& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto* p : params.parameters()) p->grad *= f;
  }
  return norm;
}

PolicyOptimizer::PolicyOptimizer(PolicyParameters& params, double lr) {
  AdamParams ap;
  ap.lr = lr;
  for (auto* p : params.parameters()) states_.emplace_back(p->value.rows(), p->value.cols(), ap);
}

void PolicyOptimizer::step(PolicyParameters& params) {
  auto ps = params.parameters();
  if (ps.size() != states_.size()) throw std::logic_error("optimizer/parameter mismatch");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (ps[k]->grad.size() == 0) continue;
    ps[k]->value += adam_step(states_[k], ps[k]->grad);
  }
}

double validate(PolicyParameters& params, const std::vector<Configuration>& structures,
                const PotentialModel& model, int horizon, double alpha, bool sampled,
                RngStream& rng, double graph_cutoff) {
  if (structures.empty()) throw std::invalid_argument("validate: empty validation set");
  RolloutOptions opt;
  opt.horizon = horizon;
  opt.alpha = alpha;
  opt.stochastic = sampled;
  opt.mode = ad::Mode::Eval;
  opt.graph_cutoff = graph_cutoff;
  double sum = 0.0;
  for (std::size_t k = 0; k < structures.size(); ++k) {
    RngStream r = rng.split(k);
    const Trajectory tr = rollout(params, structures[k], model, opt, r);
    sum += tr.energies.back() - tr.energies.front();
  }
  return sum / static_cast<double>(structures.size());
}

TrainResult train(const PolicyParameters& init, const std::vector<Configuration>& dataset,
                  const PotentialModel& model, const TrainConfig& cfg, const FireParams& fire,
                  RngStream& rng, const ValidationHook& hook) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.epochs < 0 || cfg.horizon < 1 || cfg.batch_size < 1 || cfg.grad_accum < 1 ||
      cfg.val_every < 1 || cfg.val_horizon < 1 || !(cfg.train_fraction > 0.0) ||
      !(cfg.train_fraction <= 1.0) || !(cfg.lr > 0.0) || !(cfg.grad_clip > 0.0)) {
    throw InputError("train: invalid training configuration");
  }
  TrainResult res;
  res.params = init;
  PolicyParameters& params = res.params;
  params.zero_grad();

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream split_rng = rng.split(0);
  split_rng.shuffle(order);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(cfg.train_fraction * static_cast<double>(order.size())));
  n_train = std::max<std::size_t>(1, std::min(n_train, order.size()));
  if (n_train == order.size() && order.size() > 1 && cfg.train_fraction < 1.0) --n_train;
  res.train_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  res.val_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  if (res.val_index.empty()) res.val_index = res.train_index;

  std::vector<Configuration> val_set;
  for (auto i : res.val_index) val_set.push_back(dataset[i]);

  auto run_validation = [&](int epoch) {
    RngStream vr = rng.split(2).split(static_cast<std::uint64_t>(epoch));
    const double m = validate(params, val_set, model, cfg.val_horizon, cfg.alpha,
                              cfg.sampled_validation, vr, cfg.graph_cutoff);
    if (hook) hook(epoch, params, m);
    return m;
  };

  TrainLogRow first;
  first.epoch = 0;
  first.mean_return = first.mean_baseline = first.loss = first.grad_norm = kNaN;
  first.val_metric = run_validation(0);
  res.log.push_back(first);

  RolloutOptions opt;
  opt.horizon = cfg.horizon;
  opt.gamma = cfg.gamma;
  opt.alpha = cfg.alpha;
  opt.stochastic = true;
  opt.mode = ad::Mode::Train;
  opt.graph_cutoff = cfg.graph_cutoff;

  PolicyOptimizer optimizer(params, cfg.lr);
  const RngStream train_rng = rng.split(1);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                  res.train_index.size());
  const double weight = 1.0 / static_cast<double>(batch * static_cast<std::size_t>(cfg.grad_accum));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream er = train_rng.split(static_cast<std::uint64_t>(epoch));
    TrainLogRow row;
    row.epoch = epoch;
    double ret_sum = 0.0, base_sum = 0.0, loss_sum = 0.0;
    int count = 0;
    for (int g = 0; g < cfg.grad_accum; ++g) {
      std::vector<std::size_t> pick = res.train_index;
      er.shuffle(pick);
      for (std::size_t k = 0; k < batch; ++k) {
        const Configuration& start = dataset[pick[k]];
        RngStream tr_rng = er.split(static_cast<std::uint64_t>(g) * 1000 + k);
        const Trajectory tr = rollout(params, start, model, opt, tr_rng);
        const double b = fire_baseline(start, model, cfg.horizon, cfg.gamma, fire, cfg.baseline);
        if (tr.steps() > 0) {
          loss_sum += accumulate_policy_gradient(params, tr, b, model, opt, weight);
          ret_sum += tr.returns.front();
        }
        base_sum += b;
        ++count;
      }
    }
    row.mean_return = ret_sum / count;
    row.mean_baseline = base_sum / count;
    row.loss = loss_sum;
    row.grad_norm = clip_grad_norm(params, cfg.grad_clip);
    optimizer.step(params);
    params.zero_grad();
    row.val_metric = (epoch % cfg.val_every == 0 || epoch == cfg.epochs) ? run_validation(epoch)
                                                                          : kNaN;
    res.log.push_back(row);
  }
  return res;
}

AdaptResult adapt(const PolicyParameters& params, const Configuration& target,
                  const PotentialModel& model, const AdaptConfig& cfg, const FireParams& fire,
                  RngStream& rng) {
  if (cfg.epochs < 0 || cfg.horizon < 1 || cfg.seeds < 1) {
    throw InputError("adapt: epochs >= 0, horizon >= 1 and seeds >= 1 required");
  }
  const double e0 = model.evaluate(target, false).energy;
  if (!std::isfinite(e0)) throw NumericalError("adapt: target energy is not finite");

  RolloutOptions opt;
  opt.horizon = cfg.horizon;
  opt.gamma = cfg.gamma;
  opt.alpha = cfg.alpha;
  opt.stochastic = true;
  opt.mode = ad::Mode::Train;
  opt.graph_cutoff = cfg.graph_cutoff;

  AdaptResult res;
  res.runs.resize(static_cast<std::size_t>(cfg.seeds));
  std::vector<double> best_e(static_cast<std::size_t>(cfg.seeds), e0);

  parallel_for(cfg.seeds, cfg.threads, [&](int seed) {
    AdaptRun& run = res.runs[static_cast<std::size_t>(seed)];
    PolicyParameters p = params;
    p.zero_grad();
    PolicyOptimizer optimizer(p, cfg.lr);
    const RngStream seed_rng = rng.split(static_cast<std::uint64_t>(seed));
    Configuration current = target;
    run.best = target;
    double best = e0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      RngStream er = seed_rng.split(static_cast<std::uint64_t>(epoch));
      const Trajectory tr = rollout(p, current, model, opt, er);
      if (tr.steps() > 0) {
        const double b = fire_baseline(current, model, cfg.horizon, cfg.gamma, fire, cfg.baseline);
        accumulate_policy_gradient(p, tr, b, model, opt, 1.0);
        clip_grad_norm(p, cfg.grad_clip);
        optimizer.step(p);
        p.zero_grad();
      }
      for (std::size_t k = 0; k < tr.energies.size(); ++k) {
        if (tr.energies[k] < best) {
          best = tr.energies[k];
          run.best = tr.configs[k];
        }
      }
      double next_e;
      if (tr.truncated) {
        current = run.best;
        next_e = best;
        ++run.restarts;
      } else {
        const std::size_t n = tr.energies.size();
        std::size_t pick = n - 1;
        for (std::size_t k = n >= 3 ? n - 3 : 0; k < n; ++k) {
          if (tr.energies[k] < tr.energies[pick]) pick = k;
        }
        current = tr.configs[pick];
        next_e = tr.energies[pick];
      }
      run.target_energy.push_back(next_e);
      run.best_energy.push_back(best);
    }
    best_e[static_cast<std::size_t>(seed)] = best;
  });

  res.best = target;
  res.best_energy = e0;
  for (std::size_t s = 0; s < res.runs.size(); ++s) {
    if (best_e[s] < res.best_energy) {
      res.best_energy = best_e[s];
      res.best = res.runs[s].best;
    }
  }
  return res;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < std::min(threads, n); ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace rlrelax
