#include "geoflow/flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "geoflow/latentgen.hpp"
#include "geoflow/metrics.hpp"

namespace geoflow {

OdeSolver parse_solver(const std::string& name) {
  if (name == "euler") return OdeSolver::Euler;
  if (name == "heun") return OdeSolver::Heun;
  throw UsageError("unknown solver '" + name + "' (valid: euler, heun)");
}

const char* to_string(OdeSolver s) { return s == OdeSolver::Euler ? "euler" : "heun"; }

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Tensor vec3_rows(const std::vector<Vec3>& v) {
  Tensor t({int(v.size()), 3});
  for (size_t i = 0; i < v.size(); ++i) {
    t.at(int(i), 0) = float(v[i].x);
    t.at(int(i), 1) = float(v[i].y);
    t.at(int(i), 2) = float(v[i].z);
  }
  return t;
}

std::vector<Vec3> rows_to_vec3(const Tensor& t) {
  std::vector<Vec3> v(size_t(t.shape[0]));
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = {double(t.at(int(i), 0)), double(t.at(int(i), 1)), double(t.at(int(i), 2))};
  return v;
}

void check_finite(const Tensor& t, double tval, int step) {
  for (float x : t.data) {
    if (!std::isfinite(x)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "NaN in velocity field at t=%.4f, step %d", tval, step);
      throw NumericError(buf);
    }
  }
}

// Residual seed for d(mean ||pred - target||)/d(pred).
struct LossSeed {
  double loss = 0;
  Tensor seed;
};

LossSeed loss_seed(const Tensor& pred, const std::vector<Vec3>& target) {
  int n = pred.shape[0];
  LossSeed out;
  out.seed = Tensor(pred.shape);
  for (int r = 0; r < n; ++r) {
    double rx = double(pred.at(r, 0)) - target[size_t(r)].x;
    double ry = double(pred.at(r, 1)) - target[size_t(r)].y;
    double rz = double(pred.at(r, 2)) - target[size_t(r)].z;
    double norm = std::sqrt(rx * rx + ry * ry + rz * rz);
    out.loss += norm / n;
    double scale = 1.0 / (n * std::max(norm, 1e-12));
    out.seed.at(r, 0) = float(rx * scale);
    out.seed.at(r, 1) = float(ry * scale);
    out.seed.at(r, 2) = float(rz * scale);
  }
  return out;
}

// Forward pass of the denoiser on an interpolated batch; returns the output
// node so callers can attach their own conditioning subgraph upstream.
int denoiser_forward(Tape& tape, ParameterStore& store, const DenoiserModel& model,
                     const std::vector<Vec3>& xt, const std::vector<double>& t_rows, int cond_node) {
  int x = tape.input(vec3_rows(xt));
  int temb = tape.input(time_embedding<float>(t_rows, model.config.time_embed_dim));
  return mlp_forward(tape, store, model.prefix, model.config, x, temb, cond_node);
}

// Reference sets and cached coverage radius for checkpoint evaluation.
struct EvalSet {
  std::vector<Vec3> ref;
  double cov_radius = 0;
  const TriMesh* target = nullptr;

  EvalSet() = default;
  EvalSet(const TriMesh& target_mesh, size_t n, uint64_t seed) : target(&target_mesh) {
    auto samples = sample_surface(target_mesh, n, seed);
    ref.reserve(samples.size());
    for (const auto& s : samples) ref.push_back(s.position);
    cov_radius = 2.0 * mean_point_spacing(ref);
  }
};

struct EvalMetrics {
  double chamfer = 0, surface_dist = 0, coverage_frac = 0;
};

EvalMetrics eval_points_against(const std::vector<Vec3>& synth, const EvalSet& es) {
  EvalMetrics m;
  m.chamfer = chamfer_distance(synth, es.ref);
  size_t sub = std::min<size_t>(synth.size(), 2048);
  std::vector<Vec3> subset(synth.begin(), synth.begin() + std::ptrdiff_t(sub));
  m.surface_dist = surface_distance(subset, *es.target);
  m.coverage_frac = coverage(synth, es.ref, es.cov_radius);
  return m;
}

}  // namespace

int condition_dim(Formulation f, int latent_dim) {
  return (f == Formulation::Normalized ? 9 : 0) + latent_dim;
}

ConditionSet conditions_from_pairs(const TrainingPairSet& pairs, Formulation f, size_t n, uint64_t seed) {
  if (pairs.size() == 0) throw UsageError("conditions_from_pairs: empty pair set");
  Rng rng(seed, 0x51);
  ConditionSet c;
  c.formulation = f;
  c.x0p.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const TrainingPair& p = pairs.pairs[rng.uniform_index(pairs.size())];
    c.x0p.push_back(p.x0p);
    c.normal.push_back(p.normal);
    c.canonical.push_back(p.canonical);
    c.uv.push_back(p.uv);
  }
  return c;
}

ConditionSet conditions_from_template(const TriMesh& tmpl, Formulation f, size_t n, uint64_t seed) {
  auto samples = sample_surface(tmpl, n, mix_seed(seed, 0x52));
  ConditionSet c;
  c.formulation = f;
  c.x0p.reserve(n);
  for (const auto& s : samples) {
    c.x0p.push_back(s.position);
    c.normal.push_back(s.normal);
    c.canonical.push_back(s.canonical);
    c.uv.push_back(s.uv);
  }
  return c;
}

namespace {

Tensor condition_rows(Formulation f, const std::vector<Vec3>& x0p, const std::vector<Vec3>& normal,
                      const std::vector<Vec3>& canonical, const Tensor* latent_rows) {
  int n = int(x0p.size());
  int tuple = f == Formulation::Normalized ? 9 : 0;
  int lat = latent_rows ? latent_rows->shape[1] : 0;
  if (latent_rows && latent_rows->shape[0] != n)
    throw UsageError("condition rows: latent row count " + latent_rows->shape_str() +
                     " does not match batch size");
  Tensor out({n, tuple + lat});
  for (int r = 0; r < n; ++r) {
    float* row = &out.data[size_t(r) * (tuple + lat)];
    if (tuple > 0) {
      row[0] = float(x0p[size_t(r)].x);
      row[1] = float(x0p[size_t(r)].y);
      row[2] = float(x0p[size_t(r)].z);
      row[3] = float(normal[size_t(r)].x);
      row[4] = float(normal[size_t(r)].y);
      row[5] = float(normal[size_t(r)].z);
      row[6] = float(canonical[size_t(r)].x);
      row[7] = float(canonical[size_t(r)].y);
      row[8] = float(canonical[size_t(r)].z);
    }
    for (int j = 0; j < lat; ++j) row[tuple + j] = latent_rows->at(r, j);
  }
  return out;
}

}  // namespace

Tensor assemble_condition_rows(const ConditionSet& conds, const Tensor* latent_rows) {
  return condition_rows(conds.formulation, conds.x0p, conds.normal, conds.canonical, latent_rows);
}

Tensor assemble_condition_rows(const FlowBatch& batch, const Tensor* latent_rows) {
  return condition_rows(batch.formulation, batch.x0p, batch.normal, batch.canonical, latent_rows);
}

LossResult fm_loss(ParameterStore& store, const DenoiserModel& model, const FlowBatch& batch,
                   const std::vector<double>& t_rows, const Tensor* latent_rows) {
  if (t_rows.size() != batch.rows) throw UsageError("fm_loss: t_rows size mismatch");
  std::vector<Vec3> xt, vel;
  interpolate(batch, t_rows, xt, vel);
  Tape tape;
  int cond_node = -1;
  Tensor cond = assemble_condition_rows(batch, latent_rows);
  if (cond.shape[1] != model.config.cond_dim)
    throw UsageError("fm_loss: condition width " + cond.shape_str() + " does not match model cond_dim");
  if (cond.shape[1] > 0) cond_node = tape.input(std::move(cond));
  int out = denoiser_forward(tape, store, model, xt, t_rows, cond_node);
  LossSeed ls = loss_seed(tape.value(out), vel);
  LossResult res;
  res.loss = ls.loss;
  tape.backward(out, ls.seed, res.grads);
  return res;
}

Tensor eval_velocity(const ParameterStore& store, const DenoiserModel& model, const Tensor& xt,
                     const std::vector<double>& t_rows, const Tensor* cond_rows) {
  auto& mstore = const_cast<ParameterStore&>(store);  // forward-only; nothing is written
  Tape tape;
  int cond_node = -1;
  int width = cond_rows ? cond_rows->shape[1] : 0;
  if (width != model.config.cond_dim)
    throw UsageError("eval_velocity: condition width does not match model cond_dim");
  if (cond_rows && width > 0) cond_node = tape.input(*cond_rows);
  int x = tape.input(xt);
  int temb = tape.input(time_embedding<float>(t_rows, model.config.time_embed_dim));
  int out = mlp_forward(tape, mstore, model.prefix, model.config, x, temb, cond_node);
  return tape.value(out);
}

Tensor guided_velocity(const ParameterStore& store, const DenoiserModel& model, const Tensor& xt,
                       const std::vector<double>& t_rows, const Tensor& cond_rows,
                       const Tensor& null_cond, double w) {
  // w == 1 must reproduce the conditional field bit-for-bit.
  if (w == 1.0) return eval_velocity(store, model, xt, t_rows, &cond_rows);
  if (null_cond.rank() != 1 || null_cond.shape[0] != cond_rows.shape[1])
    throw UsageError("guided_velocity: null embedding width mismatch");
  Tensor null_rows(cond_rows.shape);
  for (int r = 0; r < cond_rows.shape[0]; ++r)
    for (int j = 0; j < cond_rows.shape[1]; ++j) null_rows.at(r, j) = null_cond.data[size_t(j)];
  Tensor uc = eval_velocity(store, model, xt, t_rows, &cond_rows);
  Tensor uu = eval_velocity(store, model, xt, t_rows, &null_rows);
  Tensor out(uc.shape);
  for (size_t i = 0; i < out.numel(); ++i)
    out.data[i] = float(double(uu.data[i]) + w * (double(uc.data[i]) - double(uu.data[i])));
  return out;
}

void integrate_ode(Tensor& x, const OdeConfig& ode, const VelocityFn& u) {
  ode.validate();
  double dt = 1.0 / ode.steps;
  for (int step = 0; step < ode.steps; ++step) {
    double t = step * dt;
    Tensor k1 = u(x, t);
    check_finite(k1, t, step);
    if (ode.solver == OdeSolver::Euler) {
      for (size_t i = 0; i < x.numel(); ++i) x.data[i] += float(dt) * k1.data[i];
    } else {
      Tensor xe(x.shape);
      for (size_t i = 0; i < x.numel(); ++i) xe.data[i] = x.data[i] + float(dt) * k1.data[i];
      Tensor k2 = u(xe, t + dt);
      check_finite(k2, t + dt, step);
      for (size_t i = 0; i < x.numel(); ++i)
        x.data[i] += float(0.5 * dt) * (k1.data[i] + k2.data[i]);
    }
  }
}

std::vector<Vec3> sample_ode(const ParameterStore& store, const DenoiserModel& model,
                             const ConditionSet& conds, const Tensor* latent_rows,
                             const OdeConfig& ode, uint64_t seed) {
  ode.validate();
  size_t n = conds.size();
  if (n == 0) throw UsageError("sample_ode: empty condition set");

  Rng rng(seed, 0x50);
  Tensor x({int(n), 3});
  switch (conds.formulation) {
    case Formulation::Original:
    case Formulation::Normalized:
      for (auto& v : x.data) v = float(rng.normal());
      break;
    case Formulation::Naive:
      x = vec3_rows(conds.x0p);
      break;
    case Formulation::PerturbedPairs:
      for (size_t i = 0; i < n; ++i) {
        x.at(int(i), 0) = float(conds.x0p[i].x + conds.sigma * rng.normal());
        x.at(int(i), 1) = float(conds.x0p[i].y + conds.sigma * rng.normal());
        x.at(int(i), 2) = float(conds.x0p[i].z + conds.sigma * rng.normal());
      }
      break;
  }

  Tensor cond = assemble_condition_rows(conds, latent_rows);
  const Tensor* cond_ptr = cond.shape[1] > 0 ? &cond : nullptr;
  if ((cond_ptr ? cond.shape[1] : 0) != model.config.cond_dim)
    throw UsageError("sample_ode: condition width does not match model cond_dim");

  integrate_ode(x, ode, [&](const Tensor& xs, double t) {
    std::vector<double> t_rows(n, t);
    return eval_velocity(store, model, xs, t_rows, cond_ptr);
  });

  std::vector<Vec3> out = rows_to_vec3(x);
  if (conds.formulation == Formulation::Normalized)
    for (size_t i = 0; i < n; ++i) out[i] = conds.x0p[i] + out[i];
  return out;
}

SingleFitResult train_single(const TriMesh& tmpl, const TriMesh& target, Formulation f, int64_t iters,
                             const TrainSchedule& schedule_in, uint64_t seed, const TrainOptions& opts) {
  if (iters < 0) throw UsageError("train_single: iters must be >= 0");
  TrainSchedule schedule = schedule_in;
  schedule.total_iters = std::max<int64_t>(iters, 1);
  schedule.validate();

  SingleFitResult res;
  res.pairs = construct_pairs(tmpl, target, opts.n_template, opts.n_target, opts.strategy,
                              opts.min_sep, mix_seed(seed, 0x60));
  res.model.config = {3, opts.hidden_dim, opts.depth, 3, condition_dim(f, 0), opts.time_embed_dim};
  res.model.prefix = "denoiser";
  init_mlp_params(res.store, res.model.prefix, res.model.config, mix_seed(seed, 0x61));
  res.report.formulation = f;
  res.report.seed = seed;

  EvalSet final_eval(target, opts.eval_points, mix_seed(seed, 0x62));
  EvalSet quick_eval(target, opts.quick_eval_points, mix_seed(seed, 0x63));

  auto t0 = Clock::now();
  auto evaluate = [&](int64_t iter, bool final, double mean_loss) {
    const EvalSet& es = final ? final_eval : quick_eval;
    ConditionSet conds = conditions_from_template(*res.pairs.template_mesh, f, es.ref.size(),
                                                  mix_seed(seed, 0x65, uint64_t(iter)));
    conds.sigma = opts.sigma;
    auto synth = sample_ode(res.store, res.model, conds, nullptr,
                            final ? opts.eval_ode : opts.quick_eval_ode, mix_seed(seed, 0x66, uint64_t(iter)));
    EvalMetrics m = eval_points_against(synth, es);
    res.report.records.push_back({iter, mean_loss, m.chamfer, m.surface_dist, m.coverage_frac,
                                  elapsed_ms(t0)});
  };

  double loss_sum = 0;
  int64_t loss_count = 0;
  for (int64_t iter = 1; iter <= iters; ++iter) {
    FlowBatch batch = draw_batch(res.pairs, f, opts.batch, opts.sigma, seed, uint64_t(iter));
    Rng trng(seed, 0x64, uint64_t(iter));
    std::vector<double> t_rows(batch.rows);
    for (auto& t : t_rows) t = trng.uniform();
    LossResult lr = fm_loss(res.store, res.model, batch, t_rows);
    if (!std::isfinite(lr.loss)) throw NumericError("train_single: non-finite loss at iter " + std::to_string(iter));
    adamw_step(res.store, lr.grads, schedule, iter);
    loss_sum += lr.loss;
    ++loss_count;

    bool final = iter == iters;
    if (final || (opts.checkpoint_interval > 0 && iter % opts.checkpoint_interval == 0)) {
      evaluate(iter, final, loss_sum / double(loss_count));
      loss_sum = 0;
      loss_count = 0;
    }
  }
  if (iters == 0) {
    // one-row report of the untrained initialization
    FlowBatch batch = draw_batch(res.pairs, f, opts.batch, opts.sigma, seed, 1);
    Rng trng(seed, 0x64, 1);
    std::vector<double> t_rows(batch.rows);
    for (auto& t : t_rows) t = trng.uniform();
    evaluate(0, true, fm_loss(res.store, res.model, batch, t_rows).loss);
  }
  return res;
}

namespace {

struct ShapeAux {
  Tensor half, full;  // template vertex maps at 2s and 4s
  EvalSet quick_eval, final_eval;
  bool has_quick = false;
};

}  // namespace

DatasetFitResult train_dataset(const ToyDataset& dataset, Formulation f, int64_t iters,
                               const TrainSchedule& schedule_in, uint64_t seed, const TrainOptions& opts) {
  if (dataset.shapes.empty()) throw UsageError("train_dataset: empty dataset");
  if (iters < 0) throw UsageError("train_dataset: iters must be >= 0");
  TrainSchedule schedule = schedule_in;
  schedule.total_iters = std::max<int64_t>(iters, 1);
  schedule.validate();

  size_t n_shapes = dataset.shapes.size();
  DatasetFitResult res;
  res.decoder_cfg = {opts.featuremap_channels, opts.featuremap_size, opts.latent_dim};
  res.model.config = {3, opts.hidden_dim, opts.depth, 3, condition_dim(f, opts.latent_dim),
                      opts.time_embed_dim};
  res.model.prefix = "denoiser";
  init_mlp_params(res.store, res.model.prefix, res.model.config, mix_seed(seed, 0x61));
  init_decoder_params(res.store, "decoder", res.decoder_cfg, mix_seed(seed, 0x67));
  res.report.formulation = f;
  res.report.seed = seed;

  int s = res.decoder_cfg.in_size;
  std::vector<ShapeAux> aux(n_shapes);
  res.pairs.reserve(n_shapes);
  for (size_t k = 0; k < n_shapes; ++k) {
    const ToyShape& shape = dataset.shapes[k];
    res.pairs.push_back(construct_pairs(shape.template_mesh, shape.target_mesh, opts.n_template,
                                        opts.n_target, opts.strategy, opts.min_sep,
                                        mix_seed(seed, 0x60, k)));
    aux[k].half = vertex_map_tensor(render_vertex_map(shape.template_mesh, 2 * s, 2 * s));
    aux[k].full = vertex_map_tensor(render_vertex_map(shape.template_mesh, 4 * s, 4 * s));
    Tensor& z = res.store.create("z/" + std::to_string(k),
                                 {res.decoder_cfg.in_channels, s, s});
    Rng zrng(mix_seed(seed, 0x70, k));
    for (auto& v : z.data) v = float(0.01 * zrng.normal());
  }

  auto t0 = Clock::now();

  auto step_loss = [&](int64_t iter, bool apply) {
    size_t k = Rng(seed, 0x71, uint64_t(iter)).uniform_index(n_shapes);
    std::string zname = "z/" + std::to_string(k);
    FlowBatch batch = draw_batch(res.pairs[k], f, opts.batch, opts.sigma,
                                 mix_seed(seed, 0x72, k), uint64_t(iter));
    Rng trng(seed, 0x64, uint64_t(iter));
    std::vector<double> t_rows(batch.rows);
    for (auto& t : t_rows) t = trng.uniform();

    std::vector<Vec3> xt, vel;
    interpolate(batch, t_rows, xt, vel);

    Tape tape;
    int z = tape.param(res.store, zname);
    int grid = conv_decoder_forward(tape, res.store, "decoder", res.decoder_cfg, z,
                                    tape.input(aux[k].half), tape.input(aux[k].full));
    int latent = tape.bilinear_rows(grid, batch.uv);
    int cond;
    if (f == Formulation::Normalized) {
      Tensor tuple = condition_rows(f, batch.x0p, batch.normal, batch.canonical, nullptr);
      cond = tape.concat_cols(tape.input(std::move(tuple)), latent);
    } else {
      cond = latent;
    }
    int out = denoiser_forward(tape, res.store, res.model, xt, t_rows, cond);
    LossSeed ls = loss_seed(tape.value(out), vel);
    Gradients grads;
    tape.backward(out, ls.seed, grads);

    // explicit L2 on the active latent code (z/ skips decoupled decay)
    const Tensor& zval = res.store.get(zname);
    double znorm2 = 0;
    Tensor& zg = grads[zname];
    if (zg.numel() == 0) zg = Tensor(zval.shape);
    for (size_t i = 0; i < zval.numel(); ++i) {
      double v = double(zval.data[i]);
      znorm2 += v * v;
      zg.data[i] += float(2.0 * schedule.latent_l2 * v);
    }
    double loss = ls.loss + schedule.latent_l2 * znorm2;
    if (!std::isfinite(loss)) throw NumericError("train_dataset: non-finite loss at iter " + std::to_string(iter));
    if (apply) adamw_step(res.store, grads, schedule, iter);
    return loss;
  };

  auto evaluate = [&](int64_t iter, bool final, double mean_loss) {
    size_t eval_shapes = final ? n_shapes : std::min(opts.dataset_eval_shapes, n_shapes);
    EvalMetrics mean;
    for (size_t j = 0; j < eval_shapes; ++j) {
      const ToyShape& shape = dataset.shapes[j];
      ShapeAux& a = aux[j];
      if (final) {
        if (a.final_eval.ref.empty())
          a.final_eval = EvalSet(shape.target_mesh, opts.eval_points, mix_seed(seed, 0x62, j));
      } else if (!a.has_quick) {
        a.quick_eval = EvalSet(shape.target_mesh, opts.quick_eval_points, mix_seed(seed, 0x63, j));
        a.has_quick = true;
      }
      const EvalSet& es = final ? a.final_eval : a.quick_eval;
      ConditionSet conds = conditions_from_template(shape.template_mesh, f, es.ref.size(),
                                                    mix_seed(seed, 0x65, uint64_t(iter) * 131 + j));
      conds.sigma = opts.sigma;
      Tensor grid_val = decode(res.store, "decoder", res.decoder_cfg,
                               res.store.get("z/" + std::to_string(j)), a.half, a.full);
      Tensor latent_rows = lookup(grid_val, conds.uv);
      auto synth = sample_ode(res.store, res.model, conds, &latent_rows,
                              final ? opts.eval_ode : opts.quick_eval_ode,
                              mix_seed(seed, 0x66, uint64_t(iter) * 131 + j));
      EvalMetrics m = eval_points_against(synth, es);
      mean.chamfer += m.chamfer / double(eval_shapes);
      mean.surface_dist += m.surface_dist / double(eval_shapes);
      mean.coverage_frac += m.coverage_frac / double(eval_shapes);
    }
    res.report.records.push_back({iter, mean_loss, mean.chamfer, mean.surface_dist,
                                  mean.coverage_frac, elapsed_ms(t0)});
  };

  double loss_sum = 0;
  int64_t loss_count = 0;
  for (int64_t iter = 1; iter <= iters; ++iter) {
    loss_sum += step_loss(iter, true);
    ++loss_count;
    bool final = iter == iters;
    if (final || (opts.checkpoint_interval > 0 && iter % opts.checkpoint_interval == 0)) {
      evaluate(iter, final, loss_sum / double(loss_count));
      loss_sum = 0;
      loss_count = 0;
    }
  }
  if (iters == 0) evaluate(0, true, step_loss(1, false));
  return res;
}

double paper_reference_chamfer(Formulation f, bool dataset_mode) {
  switch (f) {
    case Formulation::Original:       return dataset_mode ? 0.0101 : 0.0083;
    case Formulation::Naive:          return dataset_mode ? 0.0706 : 0.0040;
    case Formulation::PerturbedPairs: return dataset_mode ? 0.0071 : 0.0020;
    case Formulation::Normalized:     return dataset_mode ? 0.0032 : 0.0032;
  }
  throw UsageError("paper_reference_chamfer: bad formulation");
}

void write_fit_csv(const std::vector<FitReport>& reports, bool dataset_mode, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write csv: " + path);
  out << "formulation,seed,iter,loss,chamfer,surface_dist,coverage,wall_ms,paper_ref_chamfer\n";
  char buf[256];
  for (const auto& rep : reports) {
    double ref = paper_reference_chamfer(rep.formulation, dataset_mode);
    for (const auto& rec : rep.records) {
      std::snprintf(buf, sizeof buf, "%s,%llu,%lld,%.6g,%.6g,%.6g,%.6g,%.1f,%.4f\n",
                    to_string(rep.formulation), (unsigned long long)rep.seed, (long long)rec.iter,
                    rec.loss, rec.chamfer, rec.surface_dist, rec.coverage, rec.wall_ms, ref);
      out << buf;
    }
  }
  if (!out) throw FormatError("short write on csv: " + path);
}

AblateResult ablate_formulations(const ToyDataset& dataset, bool dataset_mode, int64_t iters,
                                 const TrainSchedule& schedule, const std::vector<uint64_t>& seeds,
                                 const TrainOptions& opts, const std::string& csv_path) {
  if (seeds.empty()) throw UsageError("ablate_formulations: need at least one seed");
  const Formulation all[] = {Formulation::Original, Formulation::Naive, Formulation::PerturbedPairs,
                             Formulation::Normalized};
  AblateResult res;
  for (Formulation f : all) {
    for (uint64_t seed : seeds) {
      if (dataset_mode) {
        res.reports.push_back(train_dataset(dataset, f, iters, schedule, seed, opts).report);
      } else {
        const ToyShape& shape = dataset.shapes.at(0);
        res.reports.push_back(
            train_single(shape.template_mesh, shape.target_mesh, f, iters, schedule, seed, opts).report);
      }
    }
  }
  if (!csv_path.empty()) write_fit_csv(res.reports, dataset_mode, csv_path);
  return res;
}

}  // namespace geoflow
