#include "geoflow/latentgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "geoflow/metrics.hpp"

namespace geoflow {

Tensor vertex_map_tensor(const VertexMap& vm) {
  Tensor t({3, vm.h, vm.w});
  for (int i = 0; i < vm.h; ++i)
    for (int j = 0; j < vm.w; ++j) {
      if (!vm.valid[size_t(i) * vm.w + j]) continue;
      const Vec3& p = vm.at(i, j);
      t.at(0, i, j) = float(p.x);
      t.at(1, i, j) = float(p.y);
      t.at(2, i, j) = float(p.z);
    }
  return t;
}

Tensor pooled_vertex_map(const VertexMap& vm, int ph, int pw) {
  if (ph < 1 || pw < 1 || vm.h % ph != 0 || vm.w % pw != 0)
    throw UsageError("pooled_vertex_map: pool size must divide the map size");
  int bh = vm.h / ph, bw = vm.w / pw;
  Tensor t({3, ph, pw});
  for (int i = 0; i < ph; ++i)
    for (int j = 0; j < pw; ++j) {
      Vec3 acc{0, 0, 0};
      int count = 0;
      for (int di = 0; di < bh; ++di)
        for (int dj = 0; dj < bw; ++dj) {
          int ii = i * bh + di, jj = j * bw + dj;
          if (!vm.valid[size_t(ii) * vm.w + jj]) continue;
          acc = acc + vm.at(ii, jj);
          ++count;
        }
      if (count > 0) {
        t.at(0, i, j) = float(acc.x / count);
        t.at(1, i, j) = float(acc.y / count);
        t.at(2, i, j) = float(acc.z / count);
      }
    }
  return t;
}

Tensor decode(const ParameterStore& store, const std::string& prefix, const ConvDecoderConfig& cfg,
              const Tensor& z, const Tensor& aux_half, const Tensor& aux_full) {
  auto& mstore = const_cast<ParameterStore&>(store);  // forward-only; nothing is written
  Tape tape;
  int out = conv_decoder_forward(tape, mstore, prefix, cfg, tape.input(z), tape.input(aux_half),
                                 tape.input(aux_full));
  return tape.value(out);
}

Tensor lookup(const Tensor& grid, const std::vector<Vec2>& uvs) {
  Tape tape;
  return tape.value(tape.bilinear_rows(tape.input(grid), uvs));
}

DatasetFitResult train_autodecoder(const ToyDataset& dataset, int64_t iters,
                                   const TrainSchedule& schedule, uint64_t seed,
                                   const TrainOptions& opts) {
  return train_dataset(dataset, Formulation::Normalized, iters, schedule, seed, opts);
}

std::vector<Vec3> reconstruct(const DatasetFitResult& fit, const ToyDataset& dataset, size_t shape,
                              size_t n_points, const OdeConfig& ode, uint64_t seed) {
  if (shape >= dataset.shapes.size()) throw UsageError("reconstruct: shape index out of range");
  const TriMesh& tmpl = dataset.shapes[shape].template_mesh;
  int s = fit.decoder_cfg.in_size;
  Tensor half = vertex_map_tensor(render_vertex_map(tmpl, 2 * s, 2 * s));
  Tensor full = vertex_map_tensor(render_vertex_map(tmpl, 4 * s, 4 * s));
  Tensor grid = decode(fit.store, "decoder", fit.decoder_cfg,
                       fit.store.get("z/" + std::to_string(shape)), half, full);
  ConditionSet conds = conditions_from_template(tmpl, fit.report.formulation, n_points,
                                                mix_seed(seed, 0xa0));
  Tensor latent_rows = lookup(grid, conds.uv);
  return sample_ode(fit.store, fit.model, conds, &latent_rows, ode, mix_seed(seed, 0xa1));
}

Tensor generator_condition(const PoseParams& pose, const Resolution& res, const GeneratorOptions& opts) {
  pose.validate();
  TriMesh tmpl = make_template(pose, res);
  VertexMap vm = render_vertex_map(tmpl, opts.vmap_size, opts.vmap_size);
  Tensor pooled = pooled_vertex_map(vm, opts.pooled_size, opts.pooled_size);
  Tensor row({1, 3 + int(pooled.numel())});
  row.at(0, 0) = float(pose.bend);
  row.at(0, 1) = float(pose.twist);
  row.at(0, 2) = float(pose.taper);
  for (size_t i = 0; i < pooled.numel(); ++i) row.data[3 + i] = pooled.data[i];
  return row;
}

namespace {

// Mean row-wise L2 loss and its gradient seed for arbitrary row width.
double rowwise_loss_seed(const Tensor& pred, const Tensor& target, Tensor& seed) {
  int n = pred.shape[0], c = pred.shape[1];
  seed = Tensor(pred.shape);
  double loss = 0;
  for (int r = 0; r < n; ++r) {
    double norm2 = 0;
    for (int j = 0; j < c; ++j) {
      double d = double(pred.at(r, j)) - double(target.at(r, j));
      norm2 += d * d;
    }
    double norm = std::sqrt(norm2);
    loss += norm / n;
    double scale = 1.0 / (n * std::max(norm, 1e-12));
    for (int j = 0; j < c; ++j)
      seed.at(r, j) = float((double(pred.at(r, j)) - double(target.at(r, j))) * scale);
  }
  return loss;
}

}  // namespace

GeneratorFitResult train_latent_generator(const DatasetFitResult& fit, const ToyDataset& dataset,
                                          int64_t iters, const TrainSchedule& schedule_in,
                                          uint64_t seed, const GeneratorOptions& opts) {
  if (iters < 0) throw UsageError("train_latent_generator: iters must be >= 0");
  size_t n_shapes = dataset.shapes.size();
  if (n_shapes == 0) throw UsageError("train_latent_generator: empty dataset");
  TrainSchedule schedule = schedule_in;
  schedule.total_iters = std::max<int64_t>(iters, 1);
  schedule.validate();

  // Fitted codes, flattened to rows; these are the data the generator learns.
  const Tensor& z0 = fit.store.get("z/0");
  int latent_numel = int(z0.numel());
  std::vector<const Tensor*> codes(n_shapes);
  std::vector<Tensor> conds(n_shapes);
  for (size_t k = 0; k < n_shapes; ++k) {
    codes[k] = &fit.store.get("z/" + std::to_string(k));
    conds[k] = generator_condition(dataset.shapes[k].pose, dataset.config.resolution, opts);
  }
  int cond_dim = conds[0].shape[1];

  GeneratorFitResult res;
  res.opts = opts;
  res.z_shape = z0.shape;
  res.model.prefix = "latentgen";
  res.model.config = {latent_numel, opts.hidden_dim, opts.depth, latent_numel, cond_dim,
                      opts.time_embed_dim};
  init_mlp_params(res.store, res.model.prefix, res.model.config, mix_seed(seed, 0x84));
  res.store.create("latentgen/null_cond", {cond_dim});  // learned null embedding, zero start

  size_t batch = std::min(opts.batch, n_shapes * 4);
  for (int64_t iter = 1; iter <= iters; ++iter) {
    Rng pick(seed, 0x80, uint64_t(iter));
    Rng noise(seed, 0x81, uint64_t(iter));
    Rng trng(seed, 0x82, uint64_t(iter));
    Rng drop(seed, 0x83, uint64_t(iter));

    Tensor xt({int(batch), latent_numel}), vel({int(batch), latent_numel});
    Tensor cond_base({int(batch), cond_dim});
    std::vector<uint8_t> mask(batch, 0);
    std::vector<double> t_rows(batch);
    for (size_t r = 0; r < batch; ++r) {
      size_t k = pick.uniform_index(n_shapes);
      double t = trng.uniform();
      t_rows[r] = t;
      mask[r] = drop.bernoulli(opts.drop_prob) ? 1 : 0;
      for (int j = 0; j < latent_numel; ++j) {
        double x0 = noise.normal();
        double x1 = double(codes[k]->data[size_t(j)]);
        xt.at(int(r), j) = float((1 - t) * x0 + t * x1);
        vel.at(int(r), j) = float(x1 - x0);
      }
      for (int j = 0; j < cond_dim; ++j) cond_base.at(int(r), j) = conds[k].at(0, j);
    }

    Tape tape;
    int cond = tape.blend_rows(tape.input(std::move(cond_base)),
                               tape.param(res.store, "latentgen/null_cond"), mask);
    int x = tape.input(std::move(xt));
    int temb = tape.input(time_embedding<float>(t_rows, opts.time_embed_dim));
    int out = mlp_forward(tape, res.store, res.model.prefix, res.model.config, x, temb, cond);
    Tensor seed_grad;
    double loss = rowwise_loss_seed(tape.value(out), vel, seed_grad);
    if (!std::isfinite(loss))
      throw NumericError("train_latent_generator: non-finite loss at iter " + std::to_string(iter));
    Gradients grads;
    tape.backward(out, seed_grad, grads);
    adamw_step(res.store, grads, schedule, iter);
  }
  return res;
}

GenerateResult generate(const GeneratorFitResult& gen, const DatasetFitResult& fit,
                        const ToyDataset& dataset, const PoseParams& pose, size_t n_points,
                        const OdeConfig& latent_ode, const OdeConfig& point_ode, uint64_t seed) {
  latent_ode.validate();
  point_ode.validate();
  pose.validate();
  int latent_numel = gen.model.config.input_dim;
  Tensor cond = generator_condition(pose, dataset.config.resolution, gen.opts);
  const Tensor& null_cond = gen.store.get("latentgen/null_cond");

  // Stage 1: guided flow over the flattened latent code.
  Rng rng(seed, 0x90);
  Tensor x({1, latent_numel});
  for (auto& v : x.data) v = float(rng.normal());
  integrate_ode(x, latent_ode, [&](const Tensor& xs, double t) {
    std::vector<double> t_rows(1, t);
    return guided_velocity(gen.store, gen.model, xs, t_rows, cond, null_cond,
                           latent_ode.guidance_weight);
  });

  GenerateResult out;
  out.z = Tensor(gen.z_shape);
  out.z.data = x.data;

  // Stage 2: decode against the pose's template and run the point-level flow.
  TriMesh tmpl = make_template(pose, dataset.config.resolution);
  int s = fit.decoder_cfg.in_size;
  Tensor half = vertex_map_tensor(render_vertex_map(tmpl, 2 * s, 2 * s));
  Tensor full = vertex_map_tensor(render_vertex_map(tmpl, 4 * s, 4 * s));
  Tensor grid = decode(fit.store, "decoder", fit.decoder_cfg, out.z, half, full);
  ConditionSet conds = conditions_from_template(tmpl, fit.report.formulation, n_points,
                                                mix_seed(seed, 0x91));
  Tensor latent_rows = lookup(grid, conds.uv);
  out.points = sample_ode(fit.store, fit.model, conds, &latent_rows, point_ode, mix_seed(seed, 0x92));
  // keep the cloud inside the working volume even for poorly trained models
  for (Vec3& p : out.points) {
    p.x = std::clamp(p.x, -1.5, 1.5);
    p.y = std::clamp(p.y, -1.5, 1.5);
    p.z = std::clamp(p.z, -1.5, 1.5);
  }
  return out;
}

}  // namespace geoflow
