#pragma once
#include "geoflow/flow.hpp"

namespace geoflow {

// --- latent feature-map helpers (no-gradient forward passes) ---

// (3, h, w) position grid from a rasterized vertex map; invalid texels are 0.
Tensor vertex_map_tensor(const VertexMap& vm);

// Average-pool a vertex map down to (ph, pw); empty pools stay 0.
Tensor pooled_vertex_map(const VertexMap& vm, int ph, int pw);

// Decode a (C, s, s) latent feature map to the dense (out_channels, 4s, 4s)
// grid, conditioning each upsample stage on the template vertex map.
Tensor decode(const ParameterStore& store, const std::string& prefix, const ConvDecoderConfig& cfg,
              const Tensor& z, const Tensor& aux_half, const Tensor& aux_full);

// Bilinear per-point lookup into a (D, H, W) grid: u indexes columns
// (clamped), v indexes rows (wrapped across the seam). Returns (N, D).
Tensor lookup(const Tensor& grid, const std::vector<Vec2>& uvs);

// --- auto-decoder ---

// Joint denoiser / decoder / per-shape latent optimization over a dataset
// with the Normalized formulation (the auto-decoder has no encoder; codes
// are free variables found by gradient descent).
DatasetFitResult train_autodecoder(const ToyDataset& dataset, int64_t iters,
                                   const TrainSchedule& schedule, uint64_t seed,
                                   const TrainOptions& opts);

// Surface points for shape k from its fitted latent code.
std::vector<Vec3> reconstruct(const DatasetFitResult& fit, const ToyDataset& dataset, size_t shape,
                              size_t n_points, const OdeConfig& ode, uint64_t seed);

// --- stage-1 latent generator ---

// Flow over flattened latent codes, conditioned on pose parameters plus an
// average-pooled template vertex map, with condition rows dropped to a
// learned null embedding during training (classifier-free guidance).
struct GeneratorOptions {
  size_t batch = 8;  // latent codes per step
  int hidden_dim = 256;
  int depth = 4;
  int time_embed_dim = 32;
  double drop_prob = 0.1;
  int pooled_size = 4;  // pose vertex map pooled to (pooled_size)^2
  int vmap_size = 16;   // rasterization size before pooling
};

struct GeneratorFitResult {
  ParameterStore store;  // latentgen/*, including latentgen/null_cond
  DenoiserModel model;
  GeneratorOptions opts;
  std::vector<int> z_shape;  // latent feature-map shape (C, s, s)
};

// Condition row for a pose: [bend, twist, taper, pooled vertex map...].
Tensor generator_condition(const PoseParams& pose, const Resolution& res, const GeneratorOptions& opts);

GeneratorFitResult train_latent_generator(const DatasetFitResult& fit, const ToyDataset& dataset,
                                          int64_t iters, const TrainSchedule& schedule, uint64_t seed,
                                          const GeneratorOptions& opts);

// Two-stage generation for a new pose: guided ODE over the latent code,
// decode against the pose's template vertex maps, then the point-level ODE.
// Output points are clamped to the [-1.5, 1.5]^3 working volume.
struct GenerateResult {
  std::vector<Vec3> points;
  Tensor z;  // generated latent feature map (C, s, s)
};
GenerateResult generate(const GeneratorFitResult& gen, const DatasetFitResult& fit,
                        const ToyDataset& dataset, const PoseParams& pose, size_t n_points,
                        const OdeConfig& latent_ode, const OdeConfig& point_ode, uint64_t seed);

}  // namespace geoflow
