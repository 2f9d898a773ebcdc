#include "shprobe/spn.hpp"

#include <cmath>
#include <string>

#include "shprobe/errors.hpp"
#include "shprobe/rng.hpp"

namespace shprobe::spn {

namespace {

double act_value(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Square: return x * x;
    case Activation::Silu: return x / (1.0 + std::exp(-x));
  }
  return x;
}

double act_derivative(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Square: return 2.0 * x;
    case Activation::Silu: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 + x * (1.0 - s));
    }
  }
  return 1.0;
}

struct MlpCache {
  std::vector<Eigen::VectorXd> inputs;   // x_{i-1} per layer
  std::vector<Eigen::VectorXd> preacts;  // z_i per layer
  Eigen::VectorXd output;
};

MlpCache mlp_forward(const Mlp& mlp, Activation act, const Eigen::VectorXd& in) {
  MlpCache cache;
  Eigen::VectorXd x = in;
  const std::size_t n_layers = mlp.weights.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    cache.inputs.push_back(x);
    Eigen::VectorXd z = mlp.weights[i] * x + mlp.biases[i];
    cache.preacts.push_back(z);
    if (i + 1 < n_layers) {
      x.resize(z.size());
      for (Eigen::Index j = 0; j < z.size(); ++j) x[j] = act_value(act, z[j]);
    } else {
      x = z;  // linear output layer
    }
  }
  cache.output = x;
  return cache;
}

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void init_like(const Mlp& mlp) {
    weights.clear();
    biases.clear();
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
      weights.push_back(Eigen::MatrixXd::Zero(mlp.weights[i].rows(),
                                              mlp.weights[i].cols()));
      biases.push_back(Eigen::VectorXd::Zero(mlp.biases[i].size()));
    }
  }
};

// Accumulates parameter gradients; returns dL/d(input).
Eigen::VectorXd mlp_backward(const Mlp& mlp, Activation act,
                             const MlpCache& cache,
                             const Eigen::VectorXd& dl_dout, MlpGrads* grads) {
  Eigen::VectorXd delta = dl_dout;
  for (std::size_t i = mlp.weights.size(); i-- > 0;) {
    grads->weights[i].noalias() += delta * cache.inputs[i].transpose();
    grads->biases[i] += delta;
    Eigen::VectorXd prev = mlp.weights[i].transpose() * delta;
    if (i > 0) {
      const Eigen::VectorXd& z = cache.preacts[i - 1];
      for (Eigen::Index j = 0; j < prev.size(); ++j)
        prev[j] *= act_derivative(act, z[j]);
    }
    delta = std::move(prev);
  }
  return delta;
}

long triple_multiset_count(int channels) {
  return static_cast<long>(channels) * (channels + 1) * (channels + 2) / 6;
}

}  // namespace

Features Features::random(int l_max, int channels, std::uint64_t seed) {
  Features f;
  f.l_max = l_max;
  f.channels = channels;
  const CounterRng rng(seed);
  std::uint64_t draw = 0;
  for (int l = 0; l <= l_max; ++l) {
    Eigen::MatrixXd block(channels, 2 * l + 1);
    for (int c = 0; c < channels; ++c)
      for (int m = 0; m < 2 * l + 1; ++m) block(c, m) = rng.normal(draw++);
    f.blocks.push_back(std::move(block));
  }
  return f;
}

Activation activation_from_tag(const std::string& tag) {
  if (tag == "identity") return Activation::Identity;
  if (tag == "square") return Activation::Square;
  if (tag == "silu") return Activation::Silu;
  throw ArgumentError("unknown activation tag '" + tag + "'");
}

std::string activation_tag(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Square: return "square";
    case Activation::Silu: return "silu";
  }
  return "silu";
}

int invariant_count(int d_r, int l_max_feat, int channels) {
  if (d_r < 1 || d_r > 3) throw ArgumentError("invariant_count: d_r not in 1..3");
  int n = channels;  // l = 0 passthrough
  if (d_r >= 2) n += l_max_feat * channels;
  if (d_r >= 3)
    for (int l = 2; l <= l_max_feat; l += 2)
      n += static_cast<int>(triple_multiset_count(channels));
  return n;
}

Eigen::VectorXd extract_invariants(const Features& f, int d_r,
                                   const cg::GauntTable& table) {
  if (static_cast<int>(f.blocks.size()) != f.l_max + 1)
    throw ArgumentError("extract_invariants: block count mismatch");
  for (int l = 0; l <= f.l_max; ++l)
    if (f.blocks[l].rows() != f.channels || f.blocks[l].cols() != 2 * l + 1)
      throw ArgumentError("extract_invariants: block shape mismatch at l = " +
                          std::to_string(l));
  Eigen::VectorXd out(invariant_count(d_r, f.l_max, f.channels));
  Eigen::Index at = 0;
  for (int c = 0; c < f.channels; ++c) out[at++] = f.blocks[0](c, 0);
  if (d_r >= 2)
    for (int l = 1; l <= f.l_max; ++l)
      for (int c = 0; c < f.channels; ++c) out[at++] = f.blocks[l].row(c).norm();
  if (d_r >= 3) {
    for (int l = 2; l <= f.l_max; l += 2) {
      if (l > table.max_degree())
        throw ArgumentError("extract_invariants: Gaunt table too small");
      const auto& block = f.blocks[l];
      for (int a = 0; a < f.channels; ++a)
        for (int b = a; b < f.channels; ++b)
          for (int c = b; c < f.channels; ++c) {
            double inv = 0.0;
            for (int m1 = -l; m1 <= l; ++m1)
              for (int m2 = -l; m2 <= l; ++m2) {
                const auto& coup = table.couplings(
                    static_cast<int>(sh::SHVector::index(l, m1)),
                    static_cast<int>(sh::SHVector::index(l, m2)));
                double s = 0.0;
                for (const auto& e : coup) {
                  const int l3 = static_cast<int>(std::sqrt(e.idx + 0.5));
                  if (l3 != l) continue;
                  s += e.g * block(c, e.idx - l3 * l3 - l3 + l);
                }
                inv += block(a, m1 + l) * block(b, m2 + l) * s;
              }
            out[at++] = inv;
          }
    }
  }
  return out;
}

std::size_t SpnParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : theta.weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : theta.biases) n += static_cast<std::size_t>(b.size());
  for (const auto& w : phi.weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : phi.biases) n += static_cast<std::size_t>(b.size());
  return n;
}

namespace {

Mlp make_mlp(int in, const std::vector<int>& hidden, int out,
             const CounterRng& rng) {
  Mlp mlp;
  std::vector<int> dims;
  dims.push_back(in);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(out);
  std::uint64_t draw = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Eigen::MatrixXd w(dims[i + 1], dims[i]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = scale * rng.normal(draw++);
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(Eigen::VectorXd::Zero(dims[i + 1]));
  }
  return mlp;
}

}  // namespace

SpnParams init_params(int d_r, int l_max_feat, int channels, int l_out,
                      Activation act, std::uint64_t seed,
                      const std::vector<int>& theta_hidden,
                      const std::vector<int>& phi_hidden) {
  if (l_out < 0 || l_out > sh::kMaxDegree)
    throw ArgumentError("init_params: l_out out of range");
  SpnParams p;
  p.d_r = d_r;
  p.l_max_feat = l_max_feat;
  p.channels = channels;
  p.l_out = l_out;
  p.act = act;
  const CounterRng rng(seed);
  p.theta = make_mlp(invariant_count(d_r, l_max_feat, channels), theta_hidden,
                     (l_out + 1) * (l_out + 1), rng.substream(1));
  p.phi = make_mlp(l_out + 1, phi_hidden, 1, rng.substream(2));
  return p;
}

double spn_forward(const Features& f, const SpnParams& params,
                   const cg::GauntTable& table) {
  const Eigen::VectorXd s = extract_invariants(f, params.d_r, table);
  if (s.size() != params.theta.weights.front().cols())
    throw ArgumentError("spn_forward: invariant count does not match theta");
  const MlpCache theta_cache = mlp_forward(params.theta, params.act, s);
  const Eigen::VectorXd& a = theta_cache.output;
  Eigen::VectorXd power(params.l_out + 1);
  for (int l = 0; l <= params.l_out; ++l) {
    double p = 0.0;
    for (int m = -l; m <= l; ++m) {
      const double v = a[static_cast<Eigen::Index>(sh::SHVector::index(l, m))];
      p += v * v;
    }
    power[l] = p;
  }
  const MlpCache phi_cache = mlp_forward(params.phi, params.act, power);
  return phi_cache.output[0];
}

Eigen::VectorXd pack_parameters(const SpnParams& params) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(params.parameter_count()));
  Eigen::Index at = 0;
  auto push = [&](const Mlp& mlp) {
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
      for (Eigen::Index c = 0; c < mlp.weights[i].cols(); ++c)
        for (Eigen::Index r = 0; r < mlp.weights[i].rows(); ++r)
          flat[at++] = mlp.weights[i](r, c);
      for (Eigen::Index r = 0; r < mlp.biases[i].size(); ++r)
        flat[at++] = mlp.biases[i][r];
    }
  };
  push(params.theta);
  push(params.phi);
  return flat;
}

void unpack_parameters(const Eigen::VectorXd& flat, SpnParams& params) {
  Eigen::Index at = 0;
  auto pull = [&](Mlp& mlp) {
    for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
      for (Eigen::Index c = 0; c < mlp.weights[i].cols(); ++c)
        for (Eigen::Index r = 0; r < mlp.weights[i].rows(); ++r)
          mlp.weights[i](r, c) = flat[at++];
      for (Eigen::Index r = 0; r < mlp.biases[i].size(); ++r)
        mlp.biases[i][r] = flat[at++];
    }
  };
  pull(params.theta);
  pull(params.phi);
  if (at != flat.size())
    throw ArgumentError("unpack_parameters: size mismatch");
}

double spn_loss_and_gradient(const std::vector<Features>& batch,
                             const std::vector<double>& targets,
                             const SpnParams& params,
                             const cg::GauntTable& table,
                             Eigen::VectorXd* gradient) {
  if (batch.size() != targets.size() || batch.empty())
    throw ArgumentError("spn_loss_and_gradient: bad batch");
  MlpGrads g_theta, g_phi;
  g_theta.init_like(params.theta);
  g_phi.init_like(params.phi);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Eigen::VectorXd s = extract_invariants(batch[k], params.d_r, table);
    const MlpCache theta_cache = mlp_forward(params.theta, params.act, s);
    const Eigen::VectorXd& a = theta_cache.output;
    Eigen::VectorXd power(params.l_out + 1);
    for (int l = 0; l <= params.l_out; ++l) {
      double p = 0.0;
      for (int m = -l; m <= l; ++m) {
        const double v = a[static_cast<Eigen::Index>(sh::SHVector::index(l, m))];
        p += v * v;
      }
      power[l] = p;
    }
    const MlpCache phi_cache = mlp_forward(params.phi, params.act, power);
    const double e = phi_cache.output[0];
    const double resid = e - targets[k];
    loss += resid * resid * inv_b;
    if (!gradient) continue;

    Eigen::VectorXd dl_de(1);
    dl_de[0] = 2.0 * resid * inv_b;
    const Eigen::VectorXd dl_dpower =
        mlp_backward(params.phi, params.act, phi_cache, dl_de, &g_phi);
    Eigen::VectorXd dl_da(a.size());
    for (int l = 0; l <= params.l_out; ++l)
      for (int m = -l; m <= l; ++m) {
        const auto idx = static_cast<Eigen::Index>(sh::SHVector::index(l, m));
        dl_da[idx] = dl_dpower[l] * 2.0 * a[idx];
      }
    mlp_backward(params.theta, params.act, theta_cache, dl_da, &g_theta);
  }
  if (gradient) {
    SpnParams scratch = params;
    scratch.theta.weights = g_theta.weights;
    scratch.theta.biases = g_theta.biases;
    scratch.phi.weights = g_phi.weights;
    scratch.phi.biases = g_phi.biases;
    *gradient = pack_parameters(scratch);
  }
  return loss;
}

TrainResult spn_train(const std::vector<Features>& samples,
                      const std::vector<double>& targets,
                      const SpnParams& params0, const cg::GauntTable& table,
                      const TrainOptions& opts) {
  if (samples.size() != targets.size() || samples.size() < 2)
    throw ArgumentError("spn_train: need at least two samples");
  std::vector<Features> train, val;
  std::vector<double> y_train, y_val;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i % 2 == 0) {
      train.push_back(samples[i]);
      y_train.push_back(targets[i]);
    } else {
      val.push_back(samples[i]);
      y_val.push_back(targets[i]);
    }
  }
  if (val.empty()) {
    val = train;
    y_val = y_train;
  }

  SpnParams params = params0;
  Eigen::VectorXd w = pack_parameters(params);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(w.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(w.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  TrainResult result;
  result.best = params;
  result.best_val_mse = spn_loss_and_gradient(val, y_val, params, table, nullptr);
  result.best_epoch = -1;

  Eigen::VectorXd grad;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double loss = spn_loss_and_gradient(train, y_train, params, table, &grad);
    if (!std::isfinite(loss))
      throw TrainingError(epoch, loss, "spn_train: loss diverged at epoch " +
                                           std::to_string(epoch));
    if (opts.weight_decay > 0.0) grad += opts.weight_decay * w;
    if (opts.optimizer == Optimizer::Adam) {
      m = beta1 * m + (1.0 - beta1) * grad;
      v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(beta1, epoch + 1);
      const double bc2 = 1.0 - std::pow(beta2, epoch + 1);
      w -= (opts.lr / bc1) *
           (m.array() / ((v.array() / bc2).sqrt() + eps)).matrix();
    } else {
      w -= opts.lr * grad;
    }
    unpack_parameters(w, params);
    const double val_mse = spn_loss_and_gradient(val, y_val, params, table, nullptr);
    if (!std::isfinite(val_mse))
      throw TrainingError(epoch, val_mse, "spn_train: validation loss diverged");
    result.train_loss.push_back(loss);
    result.val_loss.push_back(val_mse);
    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

GradCheck spn_gradient_check(const std::vector<Features>& batch,
                             const std::vector<double>& targets,
                             const SpnParams& params,
                             const cg::GauntTable& table, int probes,
                             std::uint64_t seed) {
  Eigen::VectorXd analytic;
  spn_loss_and_gradient(batch, targets, params, table, &analytic);
  Eigen::VectorXd w = pack_parameters(params);
  SpnParams scratch = params;
  const CounterRng rng(seed);

  // Parameter-group boundaries in the packed order.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
  {
    Eigen::Index at = 0;
    auto walk = [&](const Mlp& mlp) {
      for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
        groups.push_back({at, at + mlp.weights[i].size()});
        at += mlp.weights[i].size();
        groups.push_back({at, at + mlp.biases[i].size()});
        at += mlp.biases[i].size();
      }
    };
    walk(params.theta);
    walk(params.phi);
  }

  GradCheck out;
  const double grad_scale = 1.0 + analytic.cwiseAbs().maxCoeff();
  auto loss_at = [&](Eigen::Index idx, double value) {
    const double orig = w[idx];
    w[idx] = value;
    unpack_parameters(w, scratch);
    const double l = spn_loss_and_gradient(batch, targets, scratch, table, nullptr);
    w[idx] = orig;
    return l;
  };
  std::uint64_t draw = 0;
  for (const auto& [lo, hi] : groups) {
    const Eigen::Index span = hi - lo;
    for (int p = 0; p < probes && span > 0; ++p) {
      const Eigen::Index idx =
          lo + static_cast<Eigen::Index>(
                   rng.below(draw++, static_cast<std::uint64_t>(span)));
      // Fourth-order central stencil keeps the difference noise well below
      // the 1e-5 relative budget even for small-gradient coordinates.
      const double h = 1e-4 * (1.0 + std::abs(w[idx]));
      const double orig = w[idx];
      const double fd = (-loss_at(idx, orig + 2.0 * h) +
                         8.0 * loss_at(idx, orig + h) -
                         8.0 * loss_at(idx, orig - h) +
                         loss_at(idx, orig - 2.0 * h)) /
                        (12.0 * h);
      const double denom = std::max(
          {std::abs(analytic[idx]), std::abs(fd), 1e-6 * grad_scale});
      out.max_rel_error =
          std::max(out.max_rel_error, std::abs(analytic[idx] - fd) / denom);
      ++out.checked;
    }
  }
  unpack_parameters(w, scratch);
  return out;
}

}  // namespace shprobe::spn
