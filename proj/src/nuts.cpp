#include "mdgp/nuts.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

constexpr double kMaxDeltaH = 1000.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;  // gradient of the log density at q
  double log_density = -kInf;
};

struct DualAveraging {
  double mu = 0.0;
  double gamma = 0.05;
  double kappa = 0.75;
  double t0 = 10.0;
  double delta = 0.8;
  double counter = 0.0;
  double s_bar = 0.0;
  double x_bar = 0.0;

  void restart() { counter = s_bar = x_bar = 0.0; }

  double learn(double accept) {
    counter += 1.0;
    accept = std::min(accept, 1.0);
    const double eta = 1.0 / (counter + t0);
    s_bar = (1.0 - eta) * s_bar + eta * (delta - accept);
    const double x = mu - s_bar * std::sqrt(counter) / gamma;
    const double x_eta = std::pow(counter, -kappa);
    x_bar = (1.0 - x_eta) * x_bar + x_eta * x;
    return std::exp(x);
  }
};

// Warmup staging: init buffer, doubling slow windows, terminal buffer.
class WindowedAdaptation {
 public:
  explicit WindowedAdaptation(int num_warmup) : num_warmup_(num_warmup) {
    init_buffer_ = 75;
    term_buffer_ = 50;
    base_window_ = 25;
    if (num_warmup < 20) {
      enabled_ = false;
    } else if (init_buffer_ + base_window_ + term_buffer_ > num_warmup) {
      init_buffer_ = static_cast<int>(0.15 * num_warmup);
      term_buffer_ = static_cast<int>(0.1 * num_warmup);
      base_window_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Feeds the state after warmup iteration `counter_`; returns true and
  /// writes the regularized variance when a slow window closes.
  bool learn(const Eigen::VectorXd &q, Eigen::VectorXd &variance) {
    if (!enabled_) return false;
    if (in_window()) add(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(count_);
      variance = m2_ / (n - 1.0);
      variance = (n / (n + 5.0)) * variance +
                 Eigen::VectorXd::Constant(variance.size(), 1e-3 * 5.0 / (n + 5.0));
      count_ = 0;
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ &&
           counter_ != num_warmup_;
  }
  bool end_of_window() const {
    return counter_ == next_window_ && counter_ != num_warmup_;
  }
  void compute_next_window() {
    if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != num_warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= num_warmup_ - term_buffer_)
        next_window_ = num_warmup_ - term_buffer_ - 1;
    }
  }
  void add(const Eigen::VectorXd &q) {
    if (count_ == 0) {
      mean_ = Eigen::VectorXd::Zero(q.size());
      m2_ = Eigen::VectorXd::Zero(q.size());
    }
    ++count_;
    const Eigen::VectorXd d = q - mean_;
    mean_ += d / static_cast<double>(count_);
    m2_ += d.cwiseProduct(q - mean_);
  }

  int num_warmup_;
  bool enabled_ = true;
  int init_buffer_, term_buffer_, base_window_;
  int window_size_, next_window_;
  int counter_ = 0;
  int count_ = 0;
  Eigen::VectorXd mean_, m2_;
};

struct TransitionInfo {
  int depth = 0;
  int leapfrogs = 0;
  bool divergent = false;
  double accept_stat = 0.0;
};

class Chain {
 public:
  Chain(const LogDensity &target, const SamplerConfig &config,
        std::size_t index)
      : target_(target),
        config_(config),
        rng_(make_rng(config.seed, index)),
        inv_metric_(Eigen::VectorXd::Ones(
            static_cast<Eigen::Index>(target.dimension()))) {}

  ChainStats run(Eigen::MatrixXd &out_unconstrained,
                 Eigen::MatrixXd &out_values, Eigen::Index row0);

 private:
  static std::mt19937_64 make_rng(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq);
  }

  double uniform() { return std::uniform_real_distribution<double>(0, 1)(rng_); }

  void initialize();
  void evaluate(PhasePoint &z) {
    z.log_density = target_.log_density(z.q, z.grad);
    if (!std::isfinite(z.log_density) || !z.grad.allFinite())
      z.log_density = -kInf;
  }
  void sample_momentum(PhasePoint &z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < z.p.size(); ++i)
      z.p(i) = normal(rng_) / std::sqrt(inv_metric_(i));
  }
  double hamiltonian(const PhasePoint &z) const {
    if (z.log_density == -kInf) return kInf;
    return -z.log_density + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
  }
  Eigen::VectorXd p_sharp(const PhasePoint &z) const {
    return inv_metric_.cwiseProduct(z.p);
  }
  void leapfrog(PhasePoint &z, double eps) {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    evaluate(z);
    if (z.log_density == -kInf) return;
    z.p += 0.5 * eps * z.grad;
  }
  void init_step_size();
  TransitionInfo transition();
  bool build_tree(int depth, PhasePoint &z_propose, Eigen::VectorXd &p_sharp_beg,
                  Eigen::VectorXd &p_sharp_end, Eigen::VectorXd &rho,
                  Eigen::VectorXd &p_beg, Eigen::VectorXd &p_end, double H0,
                  double sign, int &n_leapfrog, double &log_sum_weight,
                  double &sum_metro_prob);

  static bool criterion(const Eigen::VectorXd &p_sharp_minus,
                        const Eigen::VectorXd &p_sharp_plus,
                        const Eigen::VectorXd &rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  const LogDensity &target_;
  const SamplerConfig &config_;
  std::mt19937_64 rng_;
  Eigen::VectorXd inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  bool divergent_ = false;
  long long total_leapfrogs_ = 0;
};

void Chain::initialize() {
  const auto dim = static_cast<Eigen::Index>(target_.dimension());
  std::uniform_real_distribution<double> u(-config_.init_radius,
                                           config_.init_radius);
  z_.q.resize(dim);
  z_.p.setZero(dim);
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index i = 0; i < dim; ++i) z_.q(i) = u(rng_);
    evaluate(z_);
    if (z_.log_density != -kInf) return;
  }
  throw SamplingError("no finite initial point after 100 attempts");
}

void Chain::init_step_size() {
  if (eps_ == 0 || eps_ > 1e7 || std::isnan(eps_)) return;
  const PhasePoint z_init = z_;
  auto trial = [&]() {
    z_ = z_init;
    sample_momentum(z_);
    const double H0 = hamiltonian(z_);
    leapfrog(z_, eps_);
    ++total_leapfrogs_;
    double h = hamiltonian(z_);
    if (std::isnan(h)) h = kInf;
    return H0 - h;
  };
  const int direction = trial() > std::log(0.8) ? 1 : -1;
  while (true) {
    const double dH = trial();
    if (direction == 1 && !(dH > std::log(0.8))) break;
    if (direction == -1 && !(dH < std::log(0.8))) break;
    eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
    if (eps_ > 1e7 || eps_ < 1e-12) {
      eps_ = std::clamp(eps_, 1e-12, 1e7);
      break;
    }
  }
  z_ = z_init;
}

bool Chain::build_tree(int depth, PhasePoint &z_propose,
                       Eigen::VectorXd &p_sharp_beg,
                       Eigen::VectorXd &p_sharp_end, Eigen::VectorXd &rho,
                       Eigen::VectorXd &p_beg, Eigen::VectorXd &p_end,
                       double H0, double sign, int &n_leapfrog,
                       double &log_sum_weight, double &sum_metro_prob) {
  if (depth == 0) {
    leapfrog(z_, sign * eps_);
    ++n_leapfrog;
    double h = hamiltonian(z_);
    if (std::isnan(h)) h = kInf;
    if (h - H0 > kMaxDeltaH) divergent_ = true;
    log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
    sum_metro_prob += H0 - h > 0 ? 1.0 : std::exp(H0 - h);
    z_propose = z_;
    p_sharp_beg = p_sharp(z_);
    p_sharp_end = p_sharp_beg;
    rho += z_.p;
    p_beg = z_.p;
    p_end = p_beg;
    return !divergent_;
  }

  const Eigen::Index dim = z_.q.size();
  double log_sum_weight_init = -kInf;
  Eigen::VectorXd p_init_end(dim), p_sharp_init_end(dim);
  Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(dim);
  if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end,
                  rho_init, p_beg, p_init_end, H0, sign, n_leapfrog,
                  log_sum_weight_init, sum_metro_prob))
    return false;

  PhasePoint z_propose_final = z_;
  double log_sum_weight_final = -kInf;
  Eigen::VectorXd p_final_beg(dim), p_sharp_final_beg(dim);
  Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(dim);
  if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end,
                  rho_final, p_final_beg, p_end, H0, sign, n_leapfrog,
                  log_sum_weight_final, sum_metro_prob))
    return false;

  const double log_sum_weight_subtree =
      log_sum_exp(log_sum_weight_init, log_sum_weight_final);
  log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
  if (log_sum_weight_final > log_sum_weight_subtree) {
    z_propose = z_propose_final;
  } else if (uniform() <
             std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
    z_propose = z_propose_final;
  }

  const Eigen::VectorXd rho_subtree = rho_init + rho_final;
  rho += rho_subtree;
  bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
  persist = persist &&
            criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
  persist = persist &&
            criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
  return persist;
}

TransitionInfo Chain::transition() {
  divergent_ = false;
  sample_momentum(z_);
  const double H0 = hamiltonian(z_);
  PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

  Eigen::VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p;
  Eigen::VectorXd p_bck_fwd = z_.p, p_bck_bck = z_.p;
  Eigen::VectorXd p_sharp_fwd_fwd = p_sharp(z_), p_sharp_fwd_bck = p_sharp_fwd_fwd;
  Eigen::VectorXd p_sharp_bck_fwd = p_sharp_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
  Eigen::VectorXd rho = z_.p;

  double log_sum_weight = 0.0;
  int depth = 0;
  int n_leapfrog = 0;
  double sum_metro_prob = 0.0;
  const Eigen::Index dim = z_.q.size();

  while (depth < config_.max_treedepth) {
    Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(dim);
    bool valid = false;
    double log_sum_weight_subtree = -kInf;

    if (uniform() > 0.5) {
      z_ = z_fwd;
      rho_bck = rho;
      p_bck_fwd = p_fwd_bck;
      p_sharp_bck_fwd = p_sharp_fwd_bck;
      valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd,
                         rho_fwd, p_fwd_bck, p_fwd_fwd, H0, 1.0, n_leapfrog,
                         log_sum_weight_subtree, sum_metro_prob);
      z_fwd = z_;
    } else {
      z_ = z_bck;
      rho_fwd = rho;
      p_fwd_bck = p_bck_fwd;
      p_sharp_fwd_bck = p_sharp_bck_fwd;
      valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck,
                         rho_bck, p_bck_fwd, p_bck_bck, H0, -1.0, n_leapfrog,
                         log_sum_weight_subtree, sum_metro_prob);
      z_bck = z_;
    }
    if (!valid) break;
    ++depth;

    if (log_sum_weight_subtree > log_sum_weight) {
      z_sample = z_propose;
    } else if (uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
      z_sample = z_propose;
    }
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

    rho = rho_bck + rho_fwd;
    bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
    persist = persist &&
              criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
    persist = persist &&
              criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
    if (!persist) break;
  }

  z_ = z_sample;
  total_leapfrogs_ += n_leapfrog;
  TransitionInfo info;
  info.depth = depth;
  info.leapfrogs = n_leapfrog;
  info.divergent = divergent_;
  info.accept_stat =
      n_leapfrog > 0 ? sum_metro_prob / static_cast<double>(n_leapfrog) : 0.0;
  return info;
}

ChainStats Chain::run(Eigen::MatrixXd &out_unconstrained,
                      Eigen::MatrixXd &out_values, Eigen::Index row0) {
  const auto start = std::chrono::steady_clock::now();
  initialize();
  init_step_size();
  DualAveraging da;
  da.delta = config_.target_accept;
  da.mu = std::log(10.0 * eps_);
  da.restart();
  WindowedAdaptation windows(config_.warmup);

  ChainStats stats;
  for (int it = 0; it < config_.warmup; ++it) {
    const TransitionInfo info = transition();
    eps_ = da.learn(info.accept_stat);
    Eigen::VectorXd variance;
    if (windows.learn(z_.q, variance)) {
      inv_metric_ = variance;
      init_step_size();
      da.mu = std::log(10.0 * eps_);
      da.restart();
    }
  }
  if (config_.warmup > 0) eps_ = std::exp(da.x_bar);

  const int kept = config_.kept();
  for (int it = 0; it < kept; ++it) {
    const TransitionInfo info = transition();
    stats.treedepth.push_back(info.depth);
    stats.leapfrogs.push_back(info.leapfrogs);
    stats.divergent.push_back(info.divergent ? 1 : 0);
    stats.accept_stat.push_back(info.accept_stat);
    out_unconstrained.row(row0 + it) = z_.q.transpose();
    out_values.row(row0 + it) = target_.constrain(z_.q).transpose();
  }
  stats.step_size = eps_;
  stats.inverse_metric = inv_metric_;
  stats.total_leapfrogs = total_leapfrogs_;
  stats.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  return stats;
}

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw InvalidArgument("chains must be at least 1");
  if (warmup < 0) throw InvalidArgument("warmup must be non-negative");
  if (iterations <= warmup)
    throw InvalidArgument("iterations must exceed warmup");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw InvalidArgument("target_accept must lie in (0, 1)");
  if (max_treedepth < 1) throw InvalidArgument("max_treedepth must be >= 1");
  if (!(init_radius > 0.0)) throw InvalidArgument("init_radius must be > 0");
}

std::size_t ChainStats::divergences() const {
  return static_cast<std::size_t>(
      std::count(divergent.begin(), divergent.end(), 1));
}

std::size_t PosteriorDraws::divergences() const {
  std::size_t n = 0;
  for (const auto &s : stats) n += s.divergences();
  return n;
}

std::size_t PosteriorDraws::column(const std::string &name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("no parameter named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

int worker_count(int requested, int tasks) {
  int n = requested > 0 ? requested : tasks;
  if (const char *env = std::getenv("MDGP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::clamp(n, 1, std::max(tasks, 1));
}

PosteriorDraws hmc_sample(const LogDensity &target,
                          const SamplerConfig &config) {
  config.validate();
  const auto chains = static_cast<std::size_t>(config.chains);
  const Eigen::Index kept = config.kept();
  const auto dim = static_cast<Eigen::Index>(target.dimension());

  PosteriorDraws out;
  out.names = target.output_names();
  out.chains = chains;
  out.draws_per_chain = static_cast<std::size_t>(kept);
  out.stats.resize(chains);
  out.unconstrained.resize(static_cast<Eigen::Index>(chains) * kept, dim);
  out.values.resize(static_cast<Eigen::Index>(chains) * kept,
                    static_cast<Eigen::Index>(out.names.size()));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(chains);
  auto worker = [&]() {
    for (std::size_t c = next++; c < chains; c = next++) {
      try {
        Chain chain(target, config, c);
        out.stats[c] = chain.run(out.unconstrained, out.values,
                                 static_cast<Eigen::Index>(c) * kept);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int workers = worker_count(config.threads, config.chains);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t c = 0; c < chains; ++c)
    if (out.stats[c].divergences() == static_cast<std::size_t>(kept))
      throw SamplingError("chain " + std::to_string(c + 1) +
                          " diverged on every kept iteration (step size " +
                          std::to_string(out.stats[c].step_size) + ")");

  if (chains >= 2 && kept >= 100)
    out.diagnostics = compute_diagnostics(out.values, chains);
  out.diagnostics.divergences = out.divergences();
  return out;
}

}  // namespace mdgp
