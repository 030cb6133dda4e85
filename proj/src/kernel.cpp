#include "snn/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace snn {

RfsEmbedding sample_embedding(int m, int d, double b0, Rng& rng) {
  if (m < 1 || d < 1)
    throw std::invalid_argument("sample_embedding: require m, d >= 1");
  RfsEmbedding emb;
  emb.b0 = b0;
  emb.w.resize(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) emb.w(i, j) = rng.gaussian();
  return emb;
}

double m_kernel(const RfsEmbedding& emb, const Vector& x1, const Vector& x2) {
  if (x1.size() != emb.dim() || x2.size() != emb.dim())
    throw ShapeError("m_kernel: dimension mismatch");
  Vector p1 = emb.w * x1;
  Vector p2 = emb.w * x2;
  long cofire = 0;
  for (int i = 0; i < emb.features(); ++i)
    if (p1[i] > emb.b0 && p2[i] > emb.b0) ++cofire;
  return static_cast<double>(cofire) / emb.features() * x1.dot(x2);
}

double RfsModel::predict(const Vector& x) const {
  Vector proj = emb.w * x;   // gate activations
  Vector vx = v * x;         // per-feature linear responses
  double sum = 0.0;
  for (int i = 0; i < emb.features(); ++i)
    if (proj[i] > emb.b0) sum += vx[i];
  return sum / std::sqrt(static_cast<double>(emb.features()));
}

RfsTrainResult rfs_train(const RfsEmbedding& emb, RfsLoss loss, double eta,
                         int batch, int steps, const LabelFn& target,
                         const Distribution& input, Rng& rng) {
  if (batch < 1 || steps < 1)
    throw std::invalid_argument("rfs_train: require batch, steps >= 1");
  const int m = emb.features();
  const int d = emb.dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Rng batch_rng = rng.split("rfs-batch");
  Rng tstar_rng = rng.split("rfs-tstar");
  const int t_star =
      1 + static_cast<int>(tstar_rng.next_u64() % static_cast<unsigned>(steps));

  RfsModel model{Matrix::Zero(m, d), emb};
  RfsTrainResult result;
  result.t_star = t_star;
  Matrix snapshot;

  for (int t = 1; t <= steps; ++t) {
    if (t == t_star) snapshot = model.v;
    Matrix grad = Matrix::Zero(m, d);
    double batch_loss = 0.0;
    for (int i = 0; i < batch; ++i) {
      Vector x = input.sample(batch_rng);
      double y = target(x);
      Vector proj = emb.w * x;
      Vector vx = model.v * x;
      double pred = 0.0;
      for (int r = 0; r < m; ++r)
        if (proj[r] > emb.b0) pred += vx[r];
      pred *= scale;

      double coef = 0.0;
      if (loss == RfsLoss::Absolute) {
        batch_loss += std::abs(pred - y);
        coef = pred > y ? 1.0 : (pred < y ? -1.0 : 0.0);
      } else {
        double margin = 1.0 - y * pred;
        batch_loss += std::max(0.0, margin);
        coef = margin > 0.0 ? -y : 0.0;
      }
      if (coef != 0.0) {
        const Vector gx = (coef * scale) * x;
        for (int r = 0; r < m; ++r)
          if (proj[r] > emb.b0) grad.row(r) += gx.transpose();
      }
    }
    batch_loss /= batch;
    if (!std::isfinite(batch_loss)) throw DivergenceError(t);
    result.loss_trace.push_back(batch_loss);
    model.v -= (eta / batch) * grad;
  }

  result.model = RfsModel{std::move(snapshot), emb};
  return result;
}

double kernel_concentration_check(int d, double b0, int m, double eps,
                                  int trials, Rng& rng,
                                  int reference_samples) {
  Rng pool_rng = rng.split("conc-pool");
  Eigen::ArrayXd X(reference_samples), Z(reference_samples);
  for (int i = 0; i < reference_samples; ++i) X[i] = pool_rng.gaussian();
  for (int i = 0; i < reference_samples; ++i) Z[i] = pool_rng.gaussian();
  Eigen::ArrayXd fired_x = (X > b0).cast<double>();

  Rng pair_rng = rng.split("conc-pairs");
  Rng feat_rng = rng.split("conc-features");
  int violations = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Vector x1 = sample_sphere(d, pair_rng);
    Vector x2 = sample_sphere(d, pair_rng);
    double rho = x1.dot(x2);
    double dot = rho;  // unit vectors: <x1,x2> is also the correlation
    Eigen::ArrayXd Y = rho * X + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * Z;
    double cofire_prob = (fired_x * (Y > b0).cast<double>()).mean();
    double k_ref = cofire_prob * dot;

    RfsEmbedding emb = sample_embedding(m, d, b0, feat_rng);
    double k_emp = m_kernel(emb, x1, x2);
    if (std::abs(k_emp - k_ref) >= eps) ++violations;
  }
  return static_cast<double>(violations) / trials;
}

DualActivationEstimate dual_activation_mc(double b0, double rho, int samples,
                                          Rng& rng) {
  if (rho < -1.0 || rho > 1.0)
    throw std::domain_error("dual_activation_mc: rho must be in [-1, 1]");
  const double cross = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < samples; ++i) {
    double x = rng.gaussian();
    double y = rho * x + cross * rng.gaussian();
    double v = shifted_relu(x, b0) * shifted_relu(y, b0);
    sum += v;
    sum2 += v * v;
  }
  DualActivationEstimate est;
  est.mean = sum / samples;
  double var = std::max(0.0, sum2 / samples - est.mean * est.mean);
  est.stderr = std::sqrt(var / samples);
  return est;
}

RfsApproximationResult rfs_approximation_check(int d, double b0, int m,
                                               const Vector& u, int samples,
                                               Rng& rng) {
  if (m < 1) throw std::invalid_argument("rfs_approximation_check: m >= 1");
  const double phi = normal_cdf(-b0);
  RfsApproximationResult res;
  res.at_u_predicted = phi * (1.0 - phi) / m;
  res.sphere_bound = 2.0 * u.squaredNorm() / (static_cast<double>(m) * d);

  // For unit x the feature projections <w_i, x> are i.i.d. N(0,1), so only
  // the projections need sampling, not the full m x d 'w' matrices.
  Rng proj_rng = rng.split("approx-proj");
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < samples; ++s) {
    long fired = 0;
    for (int i = 0; i < m; ++i)
      if (proj_rng.gaussian() > b0) ++fired;
    double dev = u.squaredNorm() * (static_cast<double>(fired) / m - phi);
    sum += dev * dev;
    sum2 += dev * dev * dev * dev;
  }
  res.at_u_empirical = sum / samples;
  double var = std::max(0.0, sum2 / samples - res.at_u_empirical * res.at_u_empirical);
  res.at_u_stderr = std::sqrt(var / samples);

  Rng sphere_rng = rng.split("approx-sphere");
  double sphere_sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vector x = sample_sphere(d, sphere_rng);
    long fired = 0;
    for (int i = 0; i < m; ++i)
      if (sphere_rng.gaussian() > b0) ++fired;
    double dev = u.dot(x) * (static_cast<double>(fired) / m - phi);
    sphere_sum += dev * dev;
  }
  res.sphere_empirical = sphere_sum / samples;
  return res;
}

namespace {

// Linearized model at the shared initialization: g_V(x) = <V, grad_W h(x)>
// with gradient rows (1/sqrt(2m)) s_r 1[<w_r(0), x> > b0] x.
struct NtkTrainer {
  const TwoLayerNet& net0;  // unit-scale signs
  Matrix V;

  double predict(const Vector& x) const {
    Vector proj = net0.W * x;
    Vector vx = V * x;
    const double scale = 1.0 / std::sqrt(2.0 * net0.m);
    double sum = 0.0;
    for (int r = 0; r < net0.neurons(); ++r)
      if (proj[r] > net0.b0) sum += net0.a[r] * vx[r];
    return scale * sum;
  }
};

}  // namespace

std::vector<NtkEquivRow> ntk_equivalence_experiment(
    int d, int m, double eta, int batch, int steps,
    const std::vector<double>& B_grid, const EvenPolynomial& target,
    std::uint64_t seed, int holdout_samples) {
  const double b0 = default_b0(2 * m);
  Distribution input = Distribution::uniform_sphere(d);

  Rng base(seed);
  Rng holdout_rng = base.split("holdout");
  Batch holdout;
  holdout.reserve(holdout_samples);
  for (int i = 0; i < holdout_samples; ++i) {
    Vector x = input.sample(holdout_rng);
    double y = target.eval(x);
    holdout.push_back({std::move(x), y});
  }
  auto holdout_loss = [&](const std::function<double(const Vector&)>& f) {
    double sum = 0.0;
    for (const auto& s : holdout) {
      double r = f(s.x) - s.y;
      sum += 0.5 * r * r;
    }
    return sum / holdout.size();
  };

  // The linearized run is shared across the B grid: it has no dependence on B.
  Rng init_rng = base.split("init");
  TwoLayerNet net0 = init_net(d, m, 1.0, init_rng);
  net0.b0 = b0;
  Rng tstar_rng = base.split("tstar");
  const int t_star =
      1 + static_cast<int>(tstar_rng.next_u64() % static_cast<unsigned>(steps));

  NtkTrainer ntk{net0, Matrix::Zero(2 * m, d)};
  Matrix ntk_snapshot;
  bool ntk_diverged = false;
  {
    const double scale = 1.0 / std::sqrt(2.0 * m);
    Rng batch_rng = base.split("batch");
    for (int t = 1; t <= steps && !ntk_diverged; ++t) {
      if (t == t_star) ntk_snapshot = ntk.V;
      Matrix grad = Matrix::Zero(2 * m, d);
      for (int i = 0; i < batch; ++i) {
        Vector x = input.sample(batch_rng);
        double y = target.eval(x);
        double resid = ntk.predict(x) - y;
        if (!std::isfinite(resid)) {
          ntk_diverged = true;
          break;
        }
        Vector proj = net0.W * x;
        for (int r = 0; r < net0.neurons(); ++r)
          if (proj[r] > b0)
            grad.row(r) += (scale * net0.a[r] * resid) * x.transpose();
      }
      ntk.V -= eta * grad;
    }
  }
  double ntk_loss = 0.0;
  if (!ntk_diverged) {
    NtkTrainer returned{net0, ntk_snapshot};
    ntk_loss = holdout_loss([&](const Vector& x) { return returned.predict(x); });
    if (!std::isfinite(ntk_loss)) ntk_diverged = true;
  }

  std::vector<NtkEquivRow> rows;
  for (double B : B_grid) {
    NtkEquivRow row;
    row.B = B;
    row.ntk_loss = ntk_loss;
    TrainConfig cfg;
    cfg.d = d;
    cfg.m = m;
    cfg.B = B;
    cfg.b0 = b0;
    cfg.eta = eta / (B * B);
    cfg.batch = batch;
    cfg.steps = steps;
    cfg.seed = seed;
    cfg.backend = TrainerBackend::Dense;
    cfg.target = target;
    cfg.input = input;
    try {
      TrainResult net_run = train(cfg);
      row.net_loss =
          holdout_loss([&](const Vector& x) { return forward_dense(net_run.returned, x); });
      row.diverged = ntk_diverged || !std::isfinite(row.net_loss);
    } catch (const DivergenceError&) {
      row.diverged = true;
    }
    if (!row.diverged) row.gap = std::abs(row.net_loss - row.ntk_loss);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace snn
