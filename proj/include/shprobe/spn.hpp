#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "shprobe/gaunt.hpp"
#include "shprobe/sh.hpp"

namespace shprobe::spn {

// Equivariant features for one sample: per degree l = 0..l_max, a block of
// shape (channels, 2l+1).
struct Features {
  int l_max = 0;
  int channels = 0;
  std::vector<Eigen::MatrixXd> blocks;  // blocks[l] is channels x (2l+1)

  static Features random(int l_max, int channels, std::uint64_t seed);
};

enum class Activation { Identity, Square, Silu };

Activation activation_from_tag(const std::string& tag);
std::string activation_tag(Activation a);

struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // weights[i]: out x in
  std::vector<Eigen::VectorXd> biases;
  // Hidden layers use the configured activation; the output layer is linear.
};

// Readout head over per-degree invariants:
//   1. invariant extractor of degree d_r
//        d_r = 1: l = 0 channels pass through
//        d_r = 2: adds per-channel norms sqrt(sum_m h^2) for l > 0
//        d_r = 3: adds scalar triple contractions of channel multisets
//                 within each l-block, integral Y Y Y -coupled (these vanish
//                 identically for odd l by parity)
//   2. scalar network theta: invariants -> (l_out+1)^2 weights a^{lm}
//   3. per-degree power P[l] = sum_m (a^{lm})^2
//   4. scalar network phi: P -> energy
struct SpnParams {
  int d_r = 2;
  int l_max_feat = 2;
  int channels = 4;
  int l_out = 6;
  Activation act = Activation::Silu;
  Mlp theta;
  Mlp phi;

  std::size_t parameter_count() const;
};

// Gaussian init scaled by 1/sqrt(fan_in); hidden widths default to 128-128
// for theta and 64 for phi.
SpnParams init_params(int d_r, int l_max_feat, int channels, int l_out,
                      Activation act, std::uint64_t seed,
                      const std::vector<int>& theta_hidden = {128, 128},
                      const std::vector<int>& phi_hidden = {64});

int invariant_count(int d_r, int l_max_feat, int channels);

// The extractor stage alone.
Eigen::VectorXd extract_invariants(const Features& f, int d_r,
                                   const cg::GauntTable& table);

double spn_forward(const Features& f, const SpnParams& params,
                   const cg::GauntTable& table);

// Flat view of all parameters in a fixed order (theta layers then phi
// layers, weights before biases); used by training and gradient checks.
Eigen::VectorXd pack_parameters(const SpnParams& params);
void unpack_parameters(const Eigen::VectorXd& flat, SpnParams& params);

// Mean-squared-error loss over the batch and its exact gradient in the
// packed parameter order.
double spn_loss_and_gradient(const std::vector<Features>& batch,
                             const std::vector<double>& targets,
                             const SpnParams& params,
                             const cg::GauntTable& table,
                             Eigen::VectorXd* gradient);

enum class Optimizer { GradientDescent, Adam };

struct TrainOptions {
  int epochs = 300;
  double lr = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  double weight_decay = 0.0;
  // Samples with even index train, odd index validate.
};

struct TrainResult {
  SpnParams best;          // parameters at the best validation loss
  double best_val_mse = 0.0;
  int best_epoch = -1;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

// Full-batch training; throws TrainingError if the loss turns non-finite.
TrainResult spn_train(const std::vector<Features>& samples,
                      const std::vector<double>& targets,
                      const SpnParams& params0, const cg::GauntTable& table,
                      const TrainOptions& opts);

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
};

// Central finite differences against the analytic gradient on `probes`
// coordinates per parameter group.
GradCheck spn_gradient_check(const std::vector<Features>& batch,
                             const std::vector<double>& targets,
                             const SpnParams& params,
                             const cg::GauntTable& table, int probes,
                             std::uint64_t seed);

}  // namespace shprobe::spn
