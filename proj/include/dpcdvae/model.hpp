// Trainable components: graph encoder producing (mu, logvar), decoder heads
// for lattice / atom count / composition, and the equivariant noise-and-type
// denoiser. Everything runs on an autodiff tape so the same code serves
// training (recording) and sampling (non-recording).

#ifndef DPCDVAE_MODEL_HPP_
#define DPCDVAE_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "diffusion.hpp"
#include "graph.hpp"
#include "nn.hpp"

namespace dpcdvae {

using ad::Tape;
using ad::Tensor;
using ad::Var;

inline constexpr int kFourierMinOctave = 3;
inline constexpr int kFourierMaxOctave = 8;
inline constexpr int kFourierDim = 2 * 3 * (kFourierMaxOctave - kFourierMinOctave + 1);  // 36

inline constexpr double kMinAngle = 30.0;
inline constexpr double kMinDecodedLength = 1.0;  // Angstrom; keeps graph image counts bounded
inline constexpr double kAngleRange = 120.0;

struct ModelConfig {
  std::vector<int> elements;  // vocabulary of atomic numbers, sorted
  int latent_dim = 64;
  int hidden = 128;
  int layers = 3;          // denoiser message-passing layers
  int encoder_layers = 3;
  int num_rbf = 16;
  int time_dim = 8;
  int max_atoms = 20;
  double cutoff = 7.0;
  int max_neighbors = 12;
  bool use_num_atoms_input = false;
  double length_scale = 1.0;  // lattice-length normalization in the lattice loss

  int num_types() const { return static_cast<int>(elements.size()); }
  int node_feature_dim() const { return num_types() + kFourierDim + latent_dim + time_dim; }
};

// sin/cos(2^n pi r) for n = 3..8, per component: N x 36.
inline Tensor fourier_features(const Coords& r) {
  if (!r.allFinite())
    throw InvalidInput("fourier_features: non-finite input");
  Tensor f(r.rows(), kFourierDim);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    int c = 0;
    for (int n = kFourierMinOctave; n <= kFourierMaxOctave; ++n) {
      double w = std::ldexp(std::numbers::pi, n);
      for (int k = 0; k < 3; ++k)
        f(i, c++) = std::sin(w * r(i, k));
      for (int k = 0; k < 3; ++k)
        f(i, c++) = std::cos(w * r(i, k));
    }
  }
  return f;
}

// Sinusoidal embedding of t/T: (sin, cos)(2^k pi t/T) for k < dim/2.
inline Tensor time_embedding(int t, int steps, int dim) {
  Tensor e(1, dim);
  double tau = static_cast<double>(t) / steps;
  for (int k = 0; k < dim / 2; ++k) {
    double w = std::ldexp(std::numbers::pi, k);
    e(0, 2 * k) = std::sin(w * tau);
    e(0, 2 * k + 1) = std::cos(w * tau);
  }
  return e;
}

// Constant per-edge inputs: endpoint indices, smoothed Gaussian radial basis,
// unit direction (dst -> neighbor image).
struct EdgeInputs {
  std::vector<int> src, dst;
  Tensor rbf;   // E x num_rbf
  Tensor unit;  // E x 3
};

inline EdgeInputs edge_inputs(const PeriodicGraph& g, double cutoff, int num_rbf) {
  EdgeInputs e;
  const auto ne = static_cast<Eigen::Index>(g.edges.size());
  e.rbf.resize(ne, num_rbf);
  e.unit.resize(ne, 3);
  double spacing = cutoff / std::max(1, num_rbf - 1);
  for (Eigen::Index i = 0; i < ne; ++i) {
    const Edge& ed = g.edges[i];
    e.src.push_back(ed.src);
    e.dst.push_back(ed.dst);
    double env = 0.5 * (std::cos(std::numbers::pi * ed.length / cutoff) + 1.0);
    for (int k = 0; k < num_rbf; ++k) {
      double x = (ed.length - k * spacing) / spacing;
      e.rbf(i, k) = env * std::exp(-x * x);
    }
    e.unit.row(i) = ed.vec / ed.length;
  }
  return e;
}

inline double angle_gram_z2(const LatticeParams& p) {
  double ca = std::cos(rad(p.alpha)), cb = std::cos(rad(p.beta));
  double cg = std::cos(rad(p.gamma)), sg = std::sin(rad(p.gamma));
  double cy = (ca - cb * cg) / sg;
  return 1.0 - cb * cb - cy * cy;
}

// Each decoded angle lies in (30, 150) but the triple may still not describe a
// cell; such triples are contracted toward 90 degrees (bisection on the
// contraction factor) until the normalized cell volume squared reaches `margin`.
inline LatticeParams realizable_angles(LatticeParams p, double margin = 1e-2) {
  if (angle_gram_z2(p) >= margin)
    return p;
  auto at = [&](double s) {
    LatticeParams q = p;
    q.alpha = 90 + s * (p.alpha - 90);
    q.beta = 90 + s * (p.beta - 90);
    q.gamma = 90 + s * (p.gamma - 90);
    return q;
  };
  double lo = 0, hi = 1;
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    (angle_gram_z2(at(mid)) >= margin ? lo : hi) = mid;
  }
  return at(lo);
}

struct DecodedStats {
  LatticeParams params;
  Lattice lattice;
  int num_atoms;
  Eigen::VectorXd composition;  // A_z, sums to 1
};

struct LossWeights {
  double type = 1.0;     // lambda in the diffusion loss
  double kld = 0.01;     // lambda_1
  double lattice = 1.0;  // lambda_2
  double comp = 1.0;     // lambda_3
  double num_atoms = 1.0;  // lambda_4
};

struct LossParts {
  double total = 0, simple = 0, ce = 0, kld = 0, lattice = 0, comp = 0, num_atoms = 0;
};

// Randomness consumed by one training-loss evaluation, drawn up front so the
// loss is a deterministic function of the parameters.
struct LossDraw {
  int t = 1;
  Coords coord_noise;              // eps, N x 3
  Eigen::VectorXd latent_noise;    // eps'', latent_dim
  std::vector<double> type_uniforms;  // one per atom, for Z_t
};

// Ground truth for one structure, precomputed once per dataset.
struct TrainingExample {
  const CrystalStructure* structure = nullptr;
  PeriodicGraph graph;
  EdgeInputs edges;
  std::vector<int> types;   // vocabulary indices
  Tensor one_hot;           // N x K
  Tensor composition;       // 1 x K
  Tensor lattice_target;    // 1 x 6 (normalized lengths, angles in radians)
};

inline std::vector<int> categorical_from_uniforms(const Eigen::MatrixXd& probs,
                                                  const std::vector<double>& u) {
  std::vector<int> out(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double acc = u[i];
    int k = 0;
    for (; k + 1 < probs.cols(); ++k) {
      acc -= probs(i, k);
      if (acc < 0)
        break;
    }
    out[i] = k;
  }
  return out;
}

struct SampleOptions {
  SamplerOptions sampler;
  InitialTypes initial_types = InitialTypes::kCategorical;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    if (cfg_.elements.empty())
      throw InvalidInput("model needs a nonempty element vocabulary");
    if (cfg_.hidden < 1 || cfg_.latent_dim < 1 || cfg_.num_rbf < 2 || cfg_.max_atoms < 1 ||
        cfg_.time_dim < 2 || cfg_.time_dim % 2 != 0)
      throw InvalidInput("invalid model dimensions");
    std::sort(cfg_.elements.begin(), cfg_.elements.end());
    Rng rng(init_seed);
    const int h = cfg_.hidden, k = cfg_.num_types(), dz = cfg_.latent_dim;

    enc_embed_ = nn::Linear::make(params_, "enc.embed", k, h, rng);
    for (int l = 0; l < cfg_.encoder_layers; ++l)
      enc_layers_.push_back(make_block("enc.mp" + std::to_string(l), rng));
    int readout_in = h;
    if (cfg_.use_num_atoms_input) {
      enc_na_ = nn::Mlp::make(params_, "enc.num_atoms", {cfg_.max_atoms, h, h}, rng);
      readout_in += h;
    }
    enc_readout_ = nn::Mlp::make(params_, "enc.readout", {readout_in, h, 2 * dz}, rng, 0.1);

    lattice_head_ = nn::Mlp::make(params_, "head.lattice", {dz, h, h, 6}, rng);
    num_atoms_head_ = nn::Mlp::make(params_, "head.num_atoms", {dz, h, h, cfg_.max_atoms}, rng);
    comp_head_ = nn::Mlp::make(params_, "head.comp", {dz, h, h, k}, rng);

    den_embed_ = nn::Mlp::make(params_, "den.embed", {cfg_.node_feature_dim(), h, h}, rng);
    for (int l = 0; l < cfg_.layers; ++l)
      den_layers_.push_back(make_block("den.mp" + std::to_string(l), rng));
    gate_ = make_edge_mlp("den.gate", 1, rng, 0.01);
    type_head_ = nn::Mlp::make(params_, "den.types", {h, h, k}, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  int type_index(int atomic_number) const {
    auto it = std::lower_bound(cfg_.elements.begin(), cfg_.elements.end(), atomic_number);
    if (it == cfg_.elements.end() || *it != atomic_number)
      throw InvalidInput("element Z=" + std::to_string(atomic_number) +
                         " is not in the model vocabulary");
    return static_cast<int>(it - cfg_.elements.begin());
  }

  std::vector<int> type_indices(const CrystalStructure& s) const {
    std::vector<int> out;
    for (int z : s.atomic_numbers())
      out.push_back(type_index(z));
    return out;
  }

  // Sets the lattice-head output bias so untrained predictions sit at the
  // given mean lengths (Angstrom) and angles (degrees).
  void init_lattice_bias(double mean_length, double mean_angle) {
    Tensor& b = params_.at(lattice_head_.last().bias).value;
    double y = std::max(mean_length / cfg_.length_scale, 1e-3);
    double inv_softplus = y > 30 ? y : std::log(std::expm1(y));
    double p = std::clamp((mean_angle - kMinAngle) / kAngleRange, 1e-3, 1 - 1e-3);
    for (int i = 0; i < 3; ++i) {
      b(0, i) = inv_softplus;
      b(0, 3 + i) = std::log(p / (1 - p));
    }
  }

  TrainingExample make_example(const CrystalStructure& s) const {
    if (s.num_atoms() > cfg_.max_atoms)
      throw InvalidInput("structure has " + std::to_string(s.num_atoms()) +
                         " atoms, above max_atoms=" + std::to_string(cfg_.max_atoms));
    TrainingExample ex;
    ex.structure = &s;
    ex.graph = build_periodic_graph(s, cfg_.cutoff, cfg_.max_neighbors);
    ex.edges = edge_inputs(ex.graph, cfg_.cutoff, cfg_.num_rbf);
    ex.types = type_indices(s);
    ex.one_hot = one_hot(ex.types, cfg_.num_types());
    ex.composition = ex.one_hot.colwise().mean();
    auto p = s.lattice().parameters();
    ex.lattice_target.resize(1, 6);
    ex.lattice_target << p.a / cfg_.length_scale, p.b / cfg_.length_scale,
        p.c / cfg_.length_scale, rad(p.alpha), rad(p.beta), rad(p.gamma);
    return ex;
  }

  // ---- tape-level pieces ---------------------------------------------------

  struct EncoderVars {
    Var mu, logvar;  // 1 x latent_dim each
  };

  EncoderVars encode(nn::Binding& b, const EdgeInputs& e, const std::vector<int>& types) const {
    Tape& tape = b.tape();
    const int n = static_cast<int>(types.size());
    Var h = enc_embed_(b, tape.constant(one_hot(types, cfg_.num_types())));
    Var rbf = tape.constant(e.rbf);
    for (const Block& blk : enc_layers_)
      h = message_pass(b, blk, h, rbf, e, n);
    Var pooled = ad::mean_rows(h);
    if (cfg_.use_num_atoms_input) {
      Tensor na = Tensor::Zero(1, cfg_.max_atoms);
      na(0, std::min(n, cfg_.max_atoms) - 1) = 1.0;
      pooled = ad::concat_cols({pooled, enc_na_(b, tape.constant(na))});
    }
    Var out = enc_readout_(b, pooled);
    return {ad::slice_cols(out, 0, cfg_.latent_dim),
            ad::slice_cols(out, cfg_.latent_dim, cfg_.latent_dim)};
  }

  struct HeadVars {
    Var lattice_raw;     // 1 x 6 pre-squash
    Var lattice_scaled;  // 1 x 6: lengths / length_scale, angles in radians
    Var num_atoms_logits;
    Var comp_logits;
  };

  HeadVars heads(nn::Binding& b, const Var& z) const {
    Var raw = lattice_head_(b, z);
    Var lengths = ad::softplus(ad::slice_cols(raw, 0, 3));
    Var angles = ad::add_scalar(ad::scale(ad::sigmoid(ad::slice_cols(raw, 3, 3)),
                                          rad(kAngleRange)),
                                rad(kMinAngle));
    return {raw, ad::concat_cols({lengths, angles}), num_atoms_head_(b, z), comp_head_(b, z)};
  }

  struct DenoiserVars {
    Var eps;     // N x 3 fractional noise prediction
    Var logits;  // N x K
    Var cart;    // N x 3 Cartesian displacement before the fractional map
  };

  // noise_scale = sqrt(1 - alpha_bar_t): the network predicts a displacement
  // and the noise estimate is that displacement divided by the noise scale.
  DenoiserVars denoise(nn::Binding& b, const Lattice& lattice, const EdgeInputs& e,
                       const Coords& r, const std::vector<int>& types, const Var& z, int t,
                       int steps, double noise_scale) const {
    Tape& tape = b.tape();
    const int n = static_cast<int>(types.size());
    Var feats = ad::concat_cols({tape.constant(one_hot(types, cfg_.num_types())),
                                 tape.constant(fourier_features(r)), ad::broadcast_rows(z, n),
                                 tape.constant(time_embedding(t, steps, cfg_.time_dim)
                                                   .replicate(n, 1))});
    Var h = den_embed_(b, feats);
    Var rbf = tape.constant(e.rbf);
    for (const Block& blk : den_layers_)
      h = message_pass(b, blk, h, rbf, e, n);
    Var gate = edge_mlp(b, gate_, h, rbf, e);
    Var cart = ad::scatter_add_rows(ad::mul_rows(tape.constant(e.unit), gate), e.dst, n);
    Var eps = ad::scale(ad::matmul_const(cart, lattice.inverse()), 1.0 / noise_scale);
    return {eps, type_head_(b, h), cart};
  }

  struct LossVars {
    Var total;
    LossParts parts;
  };

  LossVars loss(nn::Binding& b, const TrainingExample& ex, const LossDraw& draw,
                const NoiseSchedule& schedule, const LossWeights& w) const {
    Tape& tape = b.tape();
    const CrystalStructure& s = *ex.structure;
    EncoderVars enc = encode(b, ex.edges, ex.types);
    Tensor eps2 = draw.latent_noise.transpose();
    Var z = ad::add(enc.mu, ad::mul_const(ad::exp(enc.logvar), eps2));
    HeadVars hv = heads(b, z);

    Eigen::VectorXd comp = ad::softmax_rows(hv.comp_logits.value()).row(0).transpose();
    Eigen::MatrixXd probs = type_probabilities(ex.one_hot, comp, schedule.sigma_prime_at(draw.t));
    std::vector<int> zt = categorical_from_uniforms(probs, draw.type_uniforms);

    DiffusionState st = forward_perturb(s.frac_coords(), draw.t, schedule, draw.coord_noise);
    PeriodicGraph g = build_periodic_graph(s.lattice(), st.r_frac, cfg_.cutoff, cfg_.max_neighbors);
    EdgeInputs e = edge_inputs(g, cfg_.cutoff, cfg_.num_rbf);
    double ns = std::sqrt(1.0 - schedule.alpha_bar(draw.t));
    DenoiserVars dv = denoise(b, s.lattice(), e, st.r, zt, z, draw.t, schedule.steps(), ns);

    Var simple = ad::mse(dv.eps, Tensor(draw.coord_noise));
    Var ce = ad::cross_entropy(dv.logits, ex.one_hot);
    Var kld = ad::kl_normal(enc.mu, enc.logvar);
    Var latt = ad::mse(hv.lattice_scaled, ex.lattice_target);
    Var compl_ = ad::cross_entropy(hv.comp_logits, ex.composition);
    Tensor na = Tensor::Zero(1, cfg_.max_atoms);
    na(0, s.num_atoms() - 1) = 1.0;
    Var nal = ad::cross_entropy(hv.num_atoms_logits, na);

    std::vector<Var> terms{simple, ce, kld, latt, compl_, nal};
    std::vector<double> weights{1.0, w.type, w.kld, w.lattice, w.comp, w.num_atoms};
    Var total = ad::weighted_sum(terms, weights);
    LossParts p{total.scalar(), simple.scalar(), ce.scalar(), kld.scalar(),
                latt.scalar(),  compl_.scalar(), nal.scalar()};
    (void)tape;
    return {total, p};
  }

  LossDraw draw_for(const CrystalStructure& s, const NoiseSchedule& schedule, Rng& rng) const {
    LossDraw d;
    d.t = rng.uniform_int(1, schedule.steps());
    d.coord_noise = rng.normal_coords(s.num_atoms());
    d.latent_noise = rng.normal_vector(cfg_.latent_dim);
    for (int i = 0; i < s.num_atoms(); ++i)
      d.type_uniforms.push_back(rng.uniform());
    return d;
  }

  // ---- inference API ---------------------------------------------------

  std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const CrystalStructure& s) const {
    Tape tape(false);
    nn::Binding b(tape, params_);
    PeriodicGraph g = build_periodic_graph(s, cfg_.cutoff, cfg_.max_neighbors);
    EncoderVars ev = encode(b, edge_inputs(g, cfg_.cutoff, cfg_.num_rbf), type_indices(s));
    return {ev.mu.value().row(0).transpose(), ev.logvar.value().row(0).transpose()};
  }

  DecodedStats decode_heads(const Eigen::VectorXd& z) const {
    if (z.size() != cfg_.latent_dim || !z.allFinite())
      throw InvalidInput("decode_heads: latent vector has wrong size or non-finite entries");
    Tape tape(false);
    nn::Binding b(tape, params_);
    HeadVars hv = heads(b, tape.constant(Tensor(z.transpose())));
    const Tensor& ls = hv.lattice_scaled.value();
    LatticeParams p = realizable_angles(
        {std::max(ls(0, 0) * cfg_.length_scale, kMinDecodedLength),
         std::max(ls(0, 1) * cfg_.length_scale, kMinDecodedLength),
         std::max(ls(0, 2) * cfg_.length_scale, kMinDecodedLength), deg(ls(0, 3)), deg(ls(0, 4)),
         deg(ls(0, 5))});
    Eigen::Index na;
    hv.num_atoms_logits.value().row(0).maxCoeff(&na);
    Eigen::VectorXd comp = ad::softmax_rows(hv.comp_logits.value()).row(0).transpose();
    return {p, lattice_from_params(p), static_cast<int>(na) + 1, comp};
  }

  DenoiserOutput denoise(const Lattice& lattice, const Coords& r, const Coords& r_frac,
                         const std::vector<int>& types, int t, const Eigen::VectorXd& z,
                         const NoiseSchedule& schedule) const {
    Tape tape(false);
    nn::Binding b(tape, params_);
    PeriodicGraph g = build_periodic_graph(lattice, r_frac, cfg_.cutoff, cfg_.max_neighbors);
    double ns = std::sqrt(1.0 - schedule.alpha_bar(t));
    DenoiserVars dv = denoise(b, lattice, edge_inputs(g, cfg_.cutoff, cfg_.num_rbf), r, types,
                              tape.constant(Tensor(z.transpose())), t, schedule.steps(), ns);
    return {Coords(dv.eps.value()), Eigen::MatrixXd(dv.logits.value())};
  }

  // Cartesian displacement output (before the fractional map and noise scaling).
  Coords denoise_cartesian(const Lattice& lattice, const Coords& r_frac,
                           const std::vector<int>& types, int t, const Eigen::VectorXd& z,
                           const NoiseSchedule& schedule) const {
    Tape tape(false);
    nn::Binding b(tape, params_);
    PeriodicGraph g = build_periodic_graph(lattice, r_frac, cfg_.cutoff, cfg_.max_neighbors);
    DenoiserVars dv = denoise(b, lattice, edge_inputs(g, cfg_.cutoff, cfg_.num_rbf), r_frac,
                              types, tape.constant(Tensor(z.transpose())), t, schedule.steps(),
                              1.0);
    return Coords(dv.cart.value());
  }

  CrystalStructure sample(const Eigen::VectorXd& z, const NoiseSchedule& schedule, Rng& rng,
                          const SampleOptions& opt = {}) const {
    DecodedStats stats = decode_heads(z);
    std::vector<int> types = initial_types(stats.composition, stats.num_atoms,
                                           opt.initial_types, rng);
    auto den = [&](const Lattice& l, const Coords& r, const Coords& rf,
                   const std::vector<int>& ty, int t) {
      return denoise(l, r, rf, ty, t, z, schedule);
    };
    return sample_trajectory(den, stats.lattice, std::move(types), cfg_.elements, schedule, rng,
                             opt.sampler);
  }

  // z from the encoder through z = mu + exp(logvar) * eps''.
  CrystalStructure reconstruct(const CrystalStructure& s, const NoiseSchedule& schedule, Rng& rng,
                               const SampleOptions& opt = {}) const {
    auto [mu, logvar] = encode(s);
    Eigen::VectorXd z = reparameterize(mu, logvar, rng.normal_vector(cfg_.latent_dim));
    return sample(z, schedule, rng, opt);
  }

  CrystalStructure generate(const NoiseSchedule& schedule, Rng& rng,
                            const SampleOptions& opt = {}) const {
    return sample(rng.normal_vector(cfg_.latent_dim), schedule, rng, opt);
  }

  static Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                                        const Eigen::VectorXd& eps) {
    if (mu.size() != logvar.size() || mu.size() != eps.size())
      throw InvalidInput("reparameterize: size mismatch");
    return mu.array() + logvar.array().exp() * eps.array();
  }

 private:
  // Edge MLP whose first layer is split so the node projections are computed
  // once per node and gathered.
  struct EdgeMlp {
    int w_dst, w_src, w_rbf, bias;
    nn::Mlp tail;
  };
  struct Block {
    EdgeMlp message;
    nn::Mlp update;
  };

  static Tensor glorot(int in, int out, Rng& rng) {
    double bound = std::sqrt(6.0 / (in + out));
    Tensor w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
    return w;
  }

  EdgeMlp make_edge_mlp(const std::string& name, int out, Rng& rng, double last_gain = 1.0) {
    const int h = cfg_.hidden;
    EdgeMlp m;
    m.w_dst = params_.add(name + ".in.dst", glorot(h, h, rng));
    m.w_src = params_.add(name + ".in.src", glorot(h, h, rng));
    m.w_rbf = params_.add(name + ".in.rbf", glorot(cfg_.num_rbf, h, rng));
    m.bias = params_.add(name + ".in.bias", Tensor::Zero(1, h));
    m.tail = nn::Mlp::make(params_, name + ".out", {h, out}, rng, last_gain);
    return m;
  }

  Block make_block(const std::string& name, Rng& rng) {
    const int h = cfg_.hidden;
    return {make_edge_mlp(name + ".msg", h, rng),
            nn::Mlp::make(params_, name + ".upd", {2 * h, h, h}, rng, 0.5)};
  }

  Var edge_mlp(nn::Binding& b, const EdgeMlp& m, const Var& h, const Var& rbf,
               const EdgeInputs& e) const {
    Var pre = ad::add(ad::gather_rows(ad::matmul(h, b(m.w_dst)), e.dst),
                      ad::gather_rows(ad::matmul(h, b(m.w_src)), e.src));
    pre = ad::add_row(ad::add(pre, ad::matmul(rbf, b(m.w_rbf))), b(m.bias));
    return m.tail(b, ad::silu(pre));
  }

  Var message_pass(nn::Binding& b, const Block& blk, const Var& h, const Var& rbf,
                   const EdgeInputs& e, int n) const {
    Var msg = edge_mlp(b, blk.message, h, rbf, e);
    Var agg = ad::scale(ad::scatter_add_rows(msg, e.dst, n), 1.0 / cfg_.max_neighbors);
    return ad::add(h, blk.update(b, ad::concat_cols({h, agg})));
  }

  ModelConfig cfg_;
  nn::ParamStore params_;
  nn::Linear enc_embed_;
  std::vector<Block> enc_layers_;
  nn::Mlp enc_na_;
  nn::Mlp enc_readout_;
  nn::Mlp lattice_head_, num_atoms_head_, comp_head_;
  nn::Mlp den_embed_;
  std::vector<Block> den_layers_;
  EdgeMlp gate_;
  nn::Mlp type_head_;
};

}  // namespace dpcdvae
#endif
