#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "geoflow/rng.hpp"
#include "geoflow/tape.hpp"

namespace geoflow {

// Denoiser trunk: an MLP whose hidden activations are scaled by (1 + s)
// with s produced from the conditioning signal, before each SiLU.
struct ModulatedMlpConfig {
  int input_dim = 3;
  int hidden_dim = 128;
  int depth = 4;  // hidden layers
  int output_dim = 3;
  int cond_dim = 0;  // 0 = unconditioned
  int time_embed_dim = 32;

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1 || depth < 1 || output_dim < 1 || time_embed_dim < 2 ||
        cond_dim < 0)
      throw UsageError("ModulatedMlpConfig: all dims must be >= 1");
  }
};

// Sinusoidal embedding of t in [0,1] at geometric frequencies.
template <typename T>
TensorT<T> time_embedding(const std::vector<double>& t_rows, int dim) {
  int half = dim / 2;
  TensorT<T> out({int(t_rows.size()), dim});
  for (size_t r = 0; r < t_rows.size(); ++r) {
    for (int k = 0; k < half; ++k) {
      double freq = 6.283185307179586 * std::pow(200.0, half > 1 ? double(k) / (half - 1) : 0.0);
      out.at(int(r), 2 * k) = T(std::sin(freq * t_rows[r]));
      out.at(int(r), 2 * k + 1) = T(std::cos(freq * t_rows[r]));
    }
  }
  return out;
}

template <typename T>
void init_mlp_params(ParameterStoreT<T>& store, const std::string& prefix,
                     const ModulatedMlpConfig& cfg, uint64_t seed) {
  cfg.validate();
  int in0 = cfg.input_dim + cfg.time_embed_dim;
  store.create_gaussian(prefix + "/w0", {in0, cfg.hidden_dim}, mix_seed(seed, 1));
  store.create(prefix + "/b0", {cfg.hidden_dim});
  for (int l = 1; l < cfg.depth; ++l) {
    store.create_gaussian(prefix + "/w" + std::to_string(l), {cfg.hidden_dim, cfg.hidden_dim},
                          mix_seed(seed, 2 + uint64_t(l)));
    store.create(prefix + "/b" + std::to_string(l), {cfg.hidden_dim});
  }
  store.create_gaussian(prefix + "/w_out", {cfg.hidden_dim, cfg.output_dim}, mix_seed(seed, 100));
  store.create(prefix + "/b_out", {cfg.output_dim});
  if (cfg.cond_dim > 0) {
    store.create_gaussian(prefix + "/cond_w", {cfg.cond_dim + cfg.time_embed_dim, cfg.hidden_dim},
                          mix_seed(seed, 200));
    store.create(prefix + "/cond_b", {cfg.hidden_dim});
    for (int l = 0; l < cfg.depth; ++l) {
      // scale heads start at zero so modulation begins as the identity
      store.create(prefix + "/scale_w" + std::to_string(l), {cfg.hidden_dim, cfg.hidden_dim});
      store.create(prefix + "/scale_b" + std::to_string(l), {cfg.hidden_dim});
    }
  }
}

// x: (N, input_dim) node, t_embed: (N, time_embed_dim) node,
// cond: (N, cond_dim) node or -1. Returns the output node id.
template <typename T>
int mlp_forward(TapeT<T>& tape, ParameterStoreT<T>& store, const std::string& prefix,
                const ModulatedMlpConfig& cfg, int x, int t_embed, int cond = -1) {
  if ((cfg.cond_dim > 0) != (cond >= 0))
    throw UsageError("mlp_forward: conditioning arity mismatch for " + prefix);

  int cond_feat = -1;
  if (cond >= 0) {
    int cin = tape.concat_cols(cond, t_embed);
    cond_feat = tape.silu(tape.linear(cin, tape.param(store, prefix + "/cond_w"),
                                      tape.param(store, prefix + "/cond_b")));
  }
  int h = tape.concat_cols(x, t_embed);
  for (int l = 0; l < cfg.depth; ++l) {
    h = tape.linear(h, tape.param(store, prefix + "/w" + std::to_string(l)),
                    tape.param(store, prefix + "/b" + std::to_string(l)));
    if (cond_feat >= 0) {
      int s = tape.linear(cond_feat, tape.param(store, prefix + "/scale_w" + std::to_string(l)),
                          tape.param(store, prefix + "/scale_b" + std::to_string(l)));
      h = tape.modulate(h, s);
    }
    h = tape.silu(h);
  }
  return tape.linear(h, tape.param(store, prefix + "/w_out"), tape.param(store, prefix + "/b_out"));
}

// Feature-map decoder: two (upsample 2x -> concat vertex map -> conv3x3 ->
// SiLU) blocks; 8x8 input becomes a 32x32 dense latent grid.
struct ConvDecoderConfig {
  int in_channels = 8;
  int in_size = 8;  // square H = W
  int out_channels = 16;

  int out_size() const { return in_size * 4; }
};

template <typename T>
void init_decoder_params(ParameterStoreT<T>& store, const std::string& prefix,
                         const ConvDecoderConfig& cfg, uint64_t seed) {
  store.create_gaussian(prefix + "/conv0_w", {cfg.out_channels, cfg.in_channels + 3, 3, 3},
                        mix_seed(seed, 301));
  store.create(prefix + "/conv0_b", {cfg.out_channels});
  store.create_gaussian(prefix + "/conv1_w", {cfg.out_channels, cfg.out_channels + 3, 3, 3},
                        mix_seed(seed, 302));
  store.create(prefix + "/conv1_b", {cfg.out_channels});
}

// z: (C, s, s) node; aux half/full: vertex-map position grids as (3, 2s, 2s)
// and (3, 4s, 4s) input nodes. Returns the (out_channels, 4s, 4s) node.
template <typename T>
int conv_decoder_forward(TapeT<T>& tape, ParameterStoreT<T>& store, const std::string& prefix,
                         const ConvDecoderConfig& cfg, int z, int aux_half, int aux_full) {
  const auto& zv = tape.value(z);
  if (zv.rank() != 3 || zv.shape[0] != cfg.in_channels || zv.shape[1] != cfg.in_size ||
      zv.shape[2] != cfg.in_size)
    throw UsageError("conv_decoder_forward: z shape " + zv.shape_str() + " does not match config");
  int h = tape.upsample2(z);
  h = tape.concat_channels(h, aux_half);
  h = tape.silu(tape.conv3x3(h, tape.param(store, prefix + "/conv0_w"), tape.param(store, prefix + "/conv0_b")));
  h = tape.upsample2(h);
  h = tape.concat_channels(h, aux_full);
  h = tape.silu(tape.conv3x3(h, tape.param(store, prefix + "/conv1_w"), tape.param(store, prefix + "/conv1_b")));
  return h;
}

}  // namespace geoflow
