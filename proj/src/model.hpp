#pragma once

#include "conv.hpp"
#include "grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dgmrf {

double softplus(double x);
double softplus_inv(double y);
double sigmoid(double x);

enum class LayerKind {
  plus,        // 3x3 cross filter, rho-parameterized (trainable)
  plus_fixed,  // 3x3 cross filter with frozen raw taps (identity, Matern)
  seq,         // one-sided masked filter, center exp(eta) (trainable)
};

// Derived quantities of the + filter reparameterization
//   a1 = sp(r1)+sp(r2),  a2*a4 = (sp(r1)tanh(r3)/2)^2,  a4/a2 = exp(r4),
//   a3*a5 = (sp(r2)tanh(r5)/2)^2,  a5/a3 = exp(r6),
// with the signed square roots s24 = sp(r1)tanh(r3)/2 and
// s35 = sp(r2)tanh(r5)/2 carrying the tap signs. Every eigenvalue
// a1 + 2*p35*cos(pi i/(H+1)) + 2*p24*cos(pi j/(W+1)) is then strictly
// positive for finite rho.
struct PlusDerived {
  double sp1, sp2, sig1, sig2;
  double t3, t5;
  double s24, s35;          // signed roots
  double em4, ep4, em6, ep6;  // exp(-r4/2), exp(r4/2), exp(-r6/2), exp(r6/2)
  double a1, a2, a3, a4, a5;
  double p24, p35;          // |s24|, |s35| = sqrt(a2 a4), sqrt(a3 a5)
};

PlusDerived plus_derived(const Eigen::Matrix<double, 6, 1>& rho);

struct PlusChannel {
  Eigen::Matrix<double, 6, 1> rho = Eigen::Matrix<double, 6, 1>::Zero();
};

struct SeqChannel {
  double eta = 0.0;           // center tap a1 = exp(eta)
  Eigen::VectorXd off;        // free taps on the one-sided mask, canonical order
};

// Offsets (dr, dc) of the seq filter's free taps for the given radius and
// orientation (0..7, the dihedral transforms of the raster-order mask).
std::vector<std::pair<int, int>> seq_offsets(int radius, int orientation);

inline int seq_tap_count(int radius) { return 2 * radius * (radius + 1); }

// One convolutional layer: optional cyclic input-channel rotation, same
// convolution with a lower-block-triangular bank, bias, optional PReLU.
struct Layer {
  LayerKind kind = LayerKind::plus_fixed;
  int radius = 1;
  int channels = 1;
  int input_shift = 0;
  int orientation = 0;  // seq only

  std::vector<PlusChannel> plus;            // diag blocks (kind == plus)
  std::vector<Eigen::VectorXd> fixed_taps;  // diag blocks a1..a5 (kind == plus_fixed)
  std::vector<SeqChannel> seq;              // diag blocks (kind == seq)
  std::vector<Filter2D> sub;                // blocks (i,j), i>j: (1,0),(2,0),(2,1),...

  Eigen::VectorXd bias;
  bool bias_trainable = true;

  bool prelu = false;
  double log_alpha = 0.0;

  double alpha() const;
  bool filters_trainable() const { return kind != LayerKind::plus_fixed; }
  int sub_block_count() const { return channels * (channels - 1) / 2; }
  int filter_param_count() const;

  // Materializes the filter bank from the current parameters.
  FilterBank bank() const;

  // log|det| of the layer's linear map on an H x W grid (sum over the
  // channel-diagonal blocks; rotation and sub-diagonal blocks contribute 0).
  double logdet(int H, int W) const;

  void get_filter_params(double* out) const;
  void set_filter_params(const double* in);
};

Layer make_plus_layer(int channels);
Layer make_seq_layer(int channels, int radius, int orientation);
Layer make_identity_layer(int channels);
Layer make_fixed_plus_layer(double a1, double a2, double a3, double a4, double a5);

struct DgmrfModel {
  int channels = 1;
  std::vector<Layer> layers;
  double log_sigma = 0.0;
  bool sigma_trainable = false;

  double sigma() const { return std::exp(log_sigma); }
  bool linear() const;
  int total_radius() const;
  void validate() const;
};

// z = g(x) with the per-layer conv inputs and pre-activations retained for
// density evaluation and backprop.
struct ForwardTrace {
  GridTensor z;
  std::vector<GridTensor> conv_inputs;  // rotated input to each layer's conv
  std::vector<GridTensor> pre_act;      // h_l = conv + bias
  double log_jacobian = 0.0;            // sum_l sum_i log|psi_l'(h_{l,i})|
};

ForwardTrace forward_g(const DgmrfModel& model, const GridTensor& x,
                       bool keep_trace = true);

// G x and G^T v for the bias-free linear map (linear models only).
GridTensor forward_linear(const DgmrfModel& model, const GridTensor& x);
GridTensor adjoint_linear(const DgmrfModel& model, const GridTensor& v);

// b = g(0) (linear models only).
Eigen::VectorXd model_bias(const DgmrfModel& model, int H, int W);

// Closed-form log-determinants.
double logdet_plus(double a1, double p24, double p35, int H, int W);
double logdet_seq(double a1, long n);
double model_logdet(const DgmrfModel& model, int H, int W);

struct PlusLogdetGrad {
  double d_a1 = 0.0, d_p24 = 0.0, d_p35 = 0.0;
};
PlusLogdetGrad logdet_plus_grad(double a1, double p24, double p35, int H, int W);

// log p(x) under the model prior; adds the activation Jacobian for
// non-linear models.
double log_prior_density(const DgmrfModel& model, const GridTensor& x);

// gamma layers of tau^(1/gamma) * (kappa^2 I + G) plus L-gamma identity
// layers; the composite linear map equals tau (kappa^2 I + G)^gamma.
DgmrfModel matern_layers(double kappa2, double tau, int gamma, int L);

// diag(G^T G): squared column norms of the composite linear map, via impulse
// probing restricted to a window of the composite receptive radius. The
// unwindowed variant probes the full grid (O(N^2), validation only).
Eigen::VectorXd gram_diagonal(const DgmrfModel& model, int H, int W,
                              bool windowed = true);

// Architecture spec for randomly initialized trainable models.
struct ModelSpec {
  LayerKind kind = LayerKind::plus;
  int layers = 1;
  int radius = 1;   // seq only; plus is always radius 1
  int channels = 1;
  bool prelu = false;
  int channel_shift = 1;  // input rotation applied by layers 2..L
  double sigma = 0.001;
  bool sigma_trainable = false;
  bool bias_trainable = true;
  double init_sd = 0.1;
  std::uint64_t seed = 1;
};

// Random initialization around the identity layer (a1 ~ 1, other taps ~ 0);
// seq orientations are drawn uniformly from the spec seed.
DgmrfModel random_init_model(const ModelSpec& spec);

}  // namespace dgmrf
