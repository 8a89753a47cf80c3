// End-to-end acceptance gate. Each criterion prints one PASS/FAIL line with
// the measured numbers; the process exits non-zero if any criterion fails.
//
// Heavy criteria share work where the protocol allows it (the Normalized
// dataset fit trained for criterion 5 is reused by criteria 7 and 8).
// Set GEOFLOW_ACCEPT_ONLY to a comma-separated list of criterion numbers to
// run a subset, e.g. GEOFLOW_ACCEPT_ONLY=1,2,3.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "geoflow/flow.hpp"
#include "geoflow/knn.hpp"
#include "geoflow/latentgen.hpp"
#include "geoflow/metrics.hpp"
#include "geoflow/nets.hpp"
#include "geoflow/pairs.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/toyshapes.hpp"
#include "geoflow/trimesh.hpp"

using namespace geoflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

double median3(double a, double b, double c) {
  double lo = std::min({a, b, c}), hi = std::max({a, b, c});
  return a + b + c - lo - hi;
}

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: finite-difference gradient oracle
// ---------------------------------------------------------------------------

using DTape = TapeT<double>;
using DStore = ParameterStoreT<double>;
using DTen = TensorT<double>;
using DGrads = GradientsT<double>;

// One random configuration of the full operator set: latent feature map ->
// conv decoder -> bilinear lookup -> null-embedding blend -> modulated MLP
// -> residual add. A side graph covers flatten_row.
struct GradConfig {
  ModulatedMlpConfig mlp;
  ConvDecoderConfig dec;
  int n_rows = 3;
  std::vector<Vec2> uvs;
  std::vector<uint8_t> mask;
  std::vector<double> t_rows;
  DTen x, auxh, auxf, w_main, w_side;
};

GradConfig random_grad_config(uint64_t seed) {
  Rng rng(seed, 0x1001);
  GradConfig g;
  g.dec.in_channels = 2 + int(rng.uniform_index(2));
  g.dec.in_size = 2;
  g.dec.out_channels = 2 + int(rng.uniform_index(2));
  g.mlp.input_dim = 3;
  g.mlp.hidden_dim = 5 + int(rng.uniform_index(4));
  g.mlp.depth = 1 + int(rng.uniform_index(3));
  g.mlp.output_dim = 3;
  g.mlp.cond_dim = g.dec.out_channels;
  g.mlp.time_embed_dim = 4;
  g.n_rows = 3;
  g.uvs.resize(g.n_rows);
  g.mask.resize(g.n_rows);
  g.t_rows.resize(g.n_rows);
  for (int r = 0; r < g.n_rows; ++r) {
    g.uvs[r] = {rng.uniform(), rng.uniform()};
    g.mask[r] = uint8_t(rng.bernoulli(0.4));
    g.t_rows[r] = rng.uniform();
  }
  auto fill = [&](DTen& t, std::vector<int> shape, double s) {
    t = DTen(std::move(shape));
    for (auto& v : t.data) v = s * rng.normal();
  };
  int s = g.dec.in_size;
  fill(g.x, {g.n_rows, 3}, 1.0);
  fill(g.auxh, {3, 2 * s, 2 * s}, 0.5);
  fill(g.auxf, {3, 4 * s, 4 * s}, 0.5);
  fill(g.w_main, {g.n_rows, 3}, 1.0);
  fill(g.w_side, {g.mlp.hidden_dim}, 1.0);
  return g;
}

DStore make_grad_store(const GradConfig& g, uint64_t seed) {
  DStore store;
  init_decoder_params(store, "dec", g.dec, mix_seed(seed, 0x1002));
  init_mlp_params(store, "mlp", g.mlp, mix_seed(seed, 0x1003));
  Rng rng(seed, 0x1004);
  // scale heads are zero at init; nudge them so modulation gradients are live
  for (int l = 0; l < g.mlp.depth; ++l) {
    for (auto* suffix : {"/scale_w", "/scale_b"}) {
      DTen& t = store.get("mlp" + std::string(suffix) + std::to_string(l));
      for (auto& v : t.data) v = 0.1 * rng.normal();
    }
    (void)l;
  }
  DTen& null_vec = store.create("null", {g.dec.out_channels});
  for (auto& v : null_vec.data) v = 0.3 * rng.normal();
  // side graph: flatten_row of the latent map through a linear layer
  DTen& z = store.create("z", {g.dec.in_channels, g.dec.in_size, g.dec.in_size});
  for (auto& v : z.data) v = rng.normal();
  DTen& fw = store.create("side_w",
                          {g.dec.in_channels * g.dec.in_size * g.dec.in_size, g.mlp.hidden_dim});
  for (auto& v : fw.data) v = 0.4 * rng.normal();
  DTen& fb = store.create("side_b", {g.mlp.hidden_dim});
  for (auto& v : fb.data) v = 0.2 * rng.normal();
  return store;
}

double grad_losses(DStore& store, const GradConfig& g, DGrads* grads) {
  double loss = 0;
  {
    DTape tape;
    int z = tape.param(store, "z");
    int grid = conv_decoder_forward(tape, store, "dec", g.dec, z, tape.input(g.auxh),
                                    tape.input(g.auxf));
    int lat = tape.bilinear_rows(grid, g.uvs);
    int latb = tape.blend_rows(lat, tape.param(store, "null"), g.mask);
    int temb = tape.input(time_embedding<double>(g.t_rows, g.mlp.time_embed_dim));
    int out = mlp_forward(tape, store, "mlp", g.mlp, tape.input(g.x), temb, latb);
    int res = tape.add(out, tape.input(g.x));
    const DTen& v = tape.value(res);
    for (size_t i = 0; i < v.numel(); ++i) loss += g.w_main.data[i] * v.data[i];
    if (grads) tape.backward(res, g.w_main, *grads);
  }
  {
    DTape tape;
    int z = tape.param(store, "z");
    int flat = tape.flatten_row(z);
    int y = tape.silu(tape.linear(flat, tape.param(store, "side_w"), tape.param(store, "side_b")));
    const DTen& v = tape.value(y);
    DTen seed_grad(v.shape);
    for (size_t i = 0; i < v.numel(); ++i) {
      loss += g.w_side.data[i] * v.data[i];
      seed_grad.data[i] = g.w_side.data[i];
    }
    if (grads) tape.backward(y, seed_grad, *grads);
  }
  return loss;
}

Result criterion1() {
  const double h = 1e-3, tol = 1e-4;
  double worst = 0;
  int n_entries = 0;
  for (uint64_t cfg_seed = 1; cfg_seed <= 20; ++cfg_seed) {
    GradConfig g = random_grad_config(cfg_seed);
    DStore store = make_grad_store(g, cfg_seed);
    DGrads grads;
    grad_losses(store, g, &grads);
    double num2 = 0, den_fd2 = 0, den_g2 = 0;
    for (auto& [name, entry] : store.entries) {
      const DTen* gt = nullptr;
      auto it = grads.find(name);
      if (it != grads.end()) gt = &it->second;
      for (size_t i = 0; i < entry.value.numel(); ++i) {
        double keep = entry.value.data[i];
        entry.value.data[i] = keep + h;
        double lp = grad_losses(store, g, nullptr);
        entry.value.data[i] = keep - h;
        double lm = grad_losses(store, g, nullptr);
        entry.value.data[i] = keep;
        double fd = (lp - lm) / (2 * h);
        double an = gt && i < gt->numel() ? gt->data[i] : 0.0;
        num2 += (fd - an) * (fd - an);
        den_fd2 += fd * fd;
        den_g2 += an * an;
        ++n_entries;
      }
    }
    double rel = std::sqrt(num2) / std::max({std::sqrt(den_fd2), std::sqrt(den_g2), 1e-12});
    worst = std::max(worst, rel);
    if (rel >= tol)
      return {false, fmt("config %llu rel error %.3g >= %.1g",
                         (unsigned long long)cfg_seed, rel, tol)};
  }
  return {true, fmt("20 configs, %d parameter entries, worst rel error %.3g < 1e-4",
                    n_entries, worst)};
}

// ---------------------------------------------------------------------------
// criterion 2: kd-tree and closest-point oracles
// ---------------------------------------------------------------------------

Result criterion2() {
  // kd-tree vs brute force, including the lowest-index tie-break
  Rng rng(7, 0x2001);
  std::vector<Vec3> db(1000), queries(1000);
  for (auto& p : db) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  for (auto& p : queries) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  KnnIndex index(db);
  for (const Vec3& q : queries) {
    int best = 0;
    double best_d2 = 1e300;
    for (size_t i = 0; i < db.size(); ++i) {
      Vec3 d = db[i] - q;
      double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = int(i);
      }
    }
    if (index.query_nearest(q) != best)
      return {false, fmt("kd-tree disagrees with brute force at query (%.4f,%.4f,%.4f)",
                         q.x, q.y, q.z)};
  }

  // closest_point_on_mesh vs a dense surface-sample oracle
  PoseParams pose{0.2, 0.1, 1.1};
  TriMesh tmpl = make_template(pose);
  DisplacementSpec spec;
  spec.wrinkle_amp = 0.35;
  spec.wrinkle_bands = 24;
  spec.flap_amp = 0.4;
  spec.seed = 3;
  TriMesh target = make_target(tmpl, spec);

  const size_t dense_n = 100000;
  auto dense_samples = sample_surface(target, dense_n, 11);
  std::vector<Vec3> dense(dense_n);
  for (size_t i = 0; i < dense_n; ++i) dense[i] = dense_samples[i].position;
  KnnIndex dense_index(dense);
  double resolution = 2.0 * mean_point_spacing(dense);

  Rng qrng(7, 0x2002);
  std::vector<Vec3> mesh_queries;
  for (int i = 0; i < 100; ++i)
    mesh_queries.push_back({qrng.uniform(-1.2, 1.2), qrng.uniform(-1.2, 1.2),
                            qrng.uniform(-1.2, 1.2)});
  auto near = sample_surface(target, 200, 13);
  for (const auto& s : near)
    mesh_queries.push_back(s.position + s.normal * qrng.uniform(-0.3, 0.3));

  double worst_gap = 0;
  for (const Vec3& q : mesh_queries) {
    ClosestHit hit = closest_point_on_mesh(target, q);
    double dense_d = dense_index.query_distance(q);
    if (hit.dist > dense_d + 1e-9)
      return {false, fmt("exact closest point %.6f farther than dense oracle %.6f",
                         hit.dist, dense_d)};
    worst_gap = std::max(worst_gap, dense_d - hit.dist);
  }
  if (worst_gap > resolution)
    return {false, fmt("dense-oracle gap %.5f exceeds sampling resolution %.5f",
                       worst_gap, resolution)};
  return {true, fmt("1000/1000 kd queries exact; closest-point gap %.5f <= resolution %.5f",
                    worst_gap, resolution)};
}

// ---------------------------------------------------------------------------
// criterion 3: ODE convergence order on x' = x
// ---------------------------------------------------------------------------

Result criterion3() {
  auto err = [](OdeSolver solver, int steps) {
    Tensor x({1, 1});
    x.at(0, 0) = 1.0f;
    OdeConfig ode{solver, steps, 1.0};
    integrate_ode(x, ode, [](const Tensor& xs, double) { return xs; });
    return std::abs(double(x.at(0, 0)) - std::exp(1.0));
  };
  double euler_ratio = err(OdeSolver::Euler, 40) / err(OdeSolver::Euler, 80);
  double heun_ratio = err(OdeSolver::Heun, 40) / err(OdeSolver::Heun, 80);
  bool ok = euler_ratio >= 1.8 && euler_ratio <= 2.2 && heun_ratio >= 3.5 && heun_ratio <= 4.5;
  return {ok, fmt("error ratio at doubled steps: Euler %.3f (want [1.8,2.2]), Heun %.3f (want [3.5,4.5])",
                  euler_ratio, heun_ratio)};
}

// ---------------------------------------------------------------------------
// criterion 4: formulation ordering, single wrinkled shape
// ---------------------------------------------------------------------------

Result criterion4() {
  PoseParams pose{0.2, 0.1, 1.1};
  TriMesh tmpl = make_template(pose);
  DisplacementSpec spec;
  spec.wrinkle_amp = 0.35;
  spec.wrinkle_bands = 24;
  spec.flap_amp = 0.4;
  spec.seed = 3;
  TriMesh target = make_target(tmpl, spec);

  TrainOptions opts;
  opts.n_template = 8192;
  opts.n_target = 16384;
  opts.batch = 1024;
  opts.hidden_dim = 24;
  opts.depth = 4;
  opts.time_embed_dim = 16;
  opts.checkpoint_interval = 0;
  opts.eval_points = 16384;
  opts.sigma = 0.01;
  TrainSchedule schedule;
  schedule.lr_max = 2e-3;

  std::map<Formulation, double> med;
  for (Formulation f : {Formulation::Original, Formulation::Naive, Formulation::PerturbedPairs,
                        Formulation::Normalized}) {
    double c[3];
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      auto fit = train_single(tmpl, target, f, 5000, schedule, seed, opts);
      c[seed - 1] = fit.report.final_record().chamfer;
    }
    med[f] = median3(c[0], c[1], c[2]);
  }
  double orig = med[Formulation::Original], naive = med[Formulation::Naive];
  double pert = med[Formulation::PerturbedPairs], norm = med[Formulation::Normalized];
  bool ok = pert <= 0.9 * naive && naive <= 0.9 * orig && norm <= 0.9 * naive;
  return {ok, fmt("median chamfer: original %.4f, naive %.4f, perturbed %.4f, normalized %.4f "
                  "(need perturbed<naive<original and normalized<naive, 10%% margins)",
                  orig, naive, pert, norm)};
}

// ---------------------------------------------------------------------------
// criteria 5/7/8 share the dataset and its Normalized fit
// ---------------------------------------------------------------------------

ToyDataset acceptance_dataset() {
  DatasetConfig dc;
  dc.n_shapes = 8;
  dc.seed = 17;
  dc.wrinkle_amp_lo = 0.25;
  dc.wrinkle_amp_hi = 0.4;
  dc.wrinkle_bands = 24;
  dc.flap_amp_lo = 0.2;
  dc.flap_amp_hi = 0.5;
  return make_dataset(dc);
}

TrainOptions dataset_train_options() {
  TrainOptions opts;
  opts.n_template = 8192;
  opts.n_target = 16384;
  opts.batch = 512;
  opts.hidden_dim = 12;
  opts.depth = 4;
  opts.time_embed_dim = 16;
  opts.checkpoint_interval = 0;
  opts.eval_points = 16384;
  // sigma 1 is the mis-scaled perturbation regime that displacement
  // normalization is supposed to fix at dataset scale
  opts.sigma = 1.0;
  opts.latent_dim = 8;
  opts.featuremap_channels = 4;
  opts.featuremap_size = 8;
  return opts;
}

constexpr int64_t kDatasetIters = 15000;

struct SharedFit {
  std::unique_ptr<ToyDataset> dataset;
  std::unique_ptr<DatasetFitResult> normalized_fit;  // seed 1
};
SharedFit g_shared;

const ToyDataset& shared_dataset() {
  if (!g_shared.dataset) g_shared.dataset = std::make_unique<ToyDataset>(acceptance_dataset());
  return *g_shared.dataset;
}

const DatasetFitResult& shared_normalized_fit() {
  if (!g_shared.normalized_fit) {
    TrainSchedule schedule;
    schedule.lr_max = 2e-3;
    g_shared.normalized_fit = std::make_unique<DatasetFitResult>(
        train_dataset(shared_dataset(), Formulation::Normalized, kDatasetIters, schedule, 1,
                      dataset_train_options()));
  }
  return *g_shared.normalized_fit;
}

Result criterion5() {
  const ToyDataset& ds = shared_dataset();
  TrainOptions opts = dataset_train_options();
  TrainSchedule schedule;
  schedule.lr_max = 2e-3;

  std::map<Formulation, double> med;
  for (Formulation f : {Formulation::Original, Formulation::Naive, Formulation::PerturbedPairs,
                        Formulation::Normalized}) {
    double c[3];
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      auto fit = train_dataset(ds, f, kDatasetIters, schedule, seed, opts);
      c[seed - 1] = fit.report.final_record().chamfer;
      if (f == Formulation::Normalized && seed == 1 && !g_shared.normalized_fit)
        g_shared.normalized_fit = std::make_unique<DatasetFitResult>(std::move(fit));
    }
    med[f] = median3(c[0], c[1], c[2]);
  }
  double orig = med[Formulation::Original], naive = med[Formulation::Naive];
  double pert = med[Formulation::PerturbedPairs], norm = med[Formulation::Normalized];
  double second_lowest = std::min({orig, naive, pert});
  double second_highest = std::max({orig, pert, norm});
  bool ok = norm <= 0.9 * second_lowest && naive >= 1.1 * second_highest;
  return {ok, fmt("median chamfer: original %.4f, naive %.4f, perturbed %.4f, normalized %.4f "
                  "(need normalized lowest and naive highest, 10%% margins)",
                  orig, naive, pert, norm)};
}

// ---------------------------------------------------------------------------
// criterion 6: pair-strategy ablation on a loose-flap shape
// ---------------------------------------------------------------------------

Result criterion6() {
  PoseParams pose{0.2, 0.1, 1.1};
  TriMesh tmpl = make_template(pose);
  DisplacementSpec spec;
  spec.wrinkle_amp = 0.35;
  spec.wrinkle_bands = 24;
  spec.flap_amp = 0.5;
  spec.flap_region = {0.25, 0.2, 0.75, 0.6};
  spec.seed = 3;
  TriMesh target = make_target(tmpl, spec);

  TrainOptions base;
  base.n_template = 8192;
  base.n_target = 16384;
  base.batch = 1024;
  base.hidden_dim = 24;
  base.depth = 4;
  base.time_embed_dim = 16;
  base.checkpoint_interval = 0;
  base.eval_points = 16384;
  TrainSchedule schedule;
  schedule.lr_max = 2e-3;

  auto median_cov = [&](PairStrategy strategy, double sigma) {
    double c[3];
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      TrainOptions opts = base;
      opts.strategy = strategy;
      opts.sigma = sigma;
      auto fit = train_single(tmpl, target, Formulation::PerturbedPairs, 2500, schedule, seed, opts);
      c[seed - 1] = fit.report.final_record().coverage;
    }
    return median3(c[0], c[1], c[2]);
  };

  double cov_sampled = median_cov(PairStrategy::SampledSet, 0.01);
  double cov_dense = median_cov(PairStrategy::DenseMesh, 0.01);
  double cov_zero = median_cov(PairStrategy::SampledSet, 0.0);

  bool strategy_ok = cov_sampled >= cov_dense + 0.05;
  bool sigma_ok = cov_sampled >= cov_zero + 0.05;
  return {strategy_ok && sigma_ok,
          fmt("median coverage: sampled %.3f, dense %.3f, sigma=0 %.3f "
              "(need sampled>=dense+0.05: %s; sigma>0>=sigma=0+0.05: %s)",
              cov_sampled, cov_dense, cov_zero, strategy_ok ? "yes" : "NO",
              sigma_ok ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// criterion 7: auto-decoder reconstruction and latent identifiability
// ---------------------------------------------------------------------------

Result criterion7() {
  const ToyDataset& ds = shared_dataset();
  const DatasetFitResult& fit = shared_normalized_fit();
  OdeConfig ode{OdeSolver::Heun, 32, 1.0};

  size_t n = ds.shapes.size();
  std::vector<std::vector<Vec3>> recon(n);
  for (size_t i = 0; i < n; ++i) recon[i] = reconstruct(fit, ds, i, 8192, ode, 100 + i);

  double worst_frac = 0;
  size_t worst_shape = 0;
  for (size_t i = 0; i < n; ++i) {
    double diag = ds.shapes[i].target_mesh.bounds().diagonal();
    double frac = surface_distance(recon[i], ds.shapes[i].target_mesh) / diag;
    if (frac > worst_frac) {
      worst_frac = frac;
      worst_shape = i;
    }
  }
  bool recon_ok = worst_frac < 0.015;

  bool ident_ok = true;
  for (size_t i = 0; i < n && ident_ok; ++i) {
    double own = surface_distance(recon[i], ds.shapes[i].target_mesh);
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (surface_distance(recon[i], ds.shapes[j].target_mesh) <= own) {
        ident_ok = false;
        break;
      }
    }
  }
  return {recon_ok && ident_ok,
          fmt("worst reconstruction %.3f%% of bbox diagonal (shape %zu, need <1.5%%); "
              "latent identifiability %s",
              100 * worst_frac, worst_shape, ident_ok ? "holds" : "VIOLATED")};
}

// ---------------------------------------------------------------------------
// criterion 8: two-stage generation sanity
// ---------------------------------------------------------------------------

Result criterion8() {
  const ToyDataset& ds = shared_dataset();
  const DatasetFitResult& fit = shared_normalized_fit();

  GeneratorOptions gopts;
  gopts.hidden_dim = 128;
  gopts.depth = 3;
  gopts.time_embed_dim = 16;
  gopts.drop_prob = 0.5;
  TrainSchedule schedule;
  schedule.lr_max = 1e-3;
  GeneratorFitResult gen = train_latent_generator(fit, ds, 4000, schedule, 5, gopts);

  double max_amp = 0;
  for (const ToyShape& s : ds.shapes) {
    double amp = (s.spec.wrinkle_amp * (1 + 2 * s.spec.tangential_drift) + s.spec.flap_amp) *
                 kTubeRadius * s.target_mesh.scale;
    max_amp = std::max(max_amp, amp);
  }
  double bound = max_amp + 0.05;

  OdeConfig latent_ode{OdeSolver::Heun, 32, 1.5};
  OdeConfig point_ode{OdeSolver::Heun, 32, 1.0};

  Rng prng(21, 0x8001);
  double worst_dist = 0;
  for (int trial = 0; trial < 10; ++trial) {
    PoseParams pose{prng.uniform(-0.5, 0.5), prng.uniform(-0.4, 0.4), prng.uniform(0.8, 1.2)};
    uint64_t seed = 500 + trial;
    GenerateResult g = generate(gen, fit, ds, pose, 2048, latent_ode, point_ode, seed);
    for (const Vec3& p : g.points)
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
        return {false, fmt("non-finite point in generated cloud (trial %d)", trial)};
    TriMesh tmpl = make_template(pose, ds.config.resolution);
    double dist = surface_distance(g.points, tmpl);
    worst_dist = std::max(worst_dist, dist);
    if (dist > bound)
      return {false, fmt("trial %d surface distance %.4f exceeds bound %.4f", trial, dist, bound)};
  }

  // guidance weight 1 must reproduce the plain conditional path bit-exactly
  PoseParams pose{0.1, -0.2, 1.05};
  uint64_t seed = 900;
  OdeConfig plain_latent{OdeSolver::Heun, 32, 1.0};
  GenerateResult via_guided = generate(gen, fit, ds, pose, 1024, plain_latent, point_ode, seed);

  // manual conditional stage 1 (no guidance combination), identical stage 2
  Tensor cond = generator_condition(pose, ds.config.resolution, gopts);
  Rng zrng(seed, 0x90);
  Tensor zx({1, gen.model.config.input_dim});
  for (auto& v : zx.data) v = float(zrng.normal());
  integrate_ode(zx, plain_latent, [&](const Tensor& xs, double t) {
    std::vector<double> t_rows(1, t);
    return eval_velocity(gen.store, gen.model, xs, t_rows, &cond);
  });
  Tensor z(gen.z_shape);
  z.data = zx.data;
  TriMesh tmpl = make_template(pose, ds.config.resolution);
  int s = fit.decoder_cfg.in_size;
  Tensor half = vertex_map_tensor(render_vertex_map(tmpl, 2 * s, 2 * s));
  Tensor full = vertex_map_tensor(render_vertex_map(tmpl, 4 * s, 4 * s));
  Tensor grid = decode(fit.store, "decoder", fit.decoder_cfg, z, half, full);
  ConditionSet conds = conditions_from_template(tmpl, fit.report.formulation, 1024,
                                                mix_seed(seed, 0x91));
  Tensor latent_rows = lookup(grid, conds.uv);
  std::vector<Vec3> manual = sample_ode(fit.store, fit.model, conds, &latent_rows, point_ode,
                                        mix_seed(seed, 0x92));
  for (Vec3& p : manual) {
    p.x = std::clamp(p.x, -1.5, 1.5);
    p.y = std::clamp(p.y, -1.5, 1.5);
    p.z = std::clamp(p.z, -1.5, 1.5);
  }
  if (manual.size() != via_guided.points.size())
    return {false, "guidance=1 path produced a different point count"};
  for (size_t i = 0; i < manual.size(); ++i) {
    const Vec3& a = manual[i];
    const Vec3& b = via_guided.points[i];
    if (std::memcmp(&a, &b, sizeof(Vec3)) != 0)
      return {false, fmt("guidance=1 output differs from plain conditional at point %zu", i)};
  }
  return {true, fmt("10/10 clouds finite, worst surface distance %.4f <= bound %.4f; "
                    "guidance=1 bit-exact over 1024 points",
                    worst_dist, bound)};
}

// ---------------------------------------------------------------------------
// criterion 9: CLI byte determinism across reruns and thread caps
// ---------------------------------------------------------------------------

int run_cli(const std::string& env, const std::string& args) {
  std::string cmd = env + " " + std::string(GEOFLOW_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Reads a file; for CSVs the wall_ms column (timing, legitimately varies) is
// blanked before comparison.
std::string canonical_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  if (p.extension() != ".csv") return bytes;
  std::istringstream lines(bytes);
  std::string line, out;
  int wall_col = -1;
  bool first = true;
  while (std::getline(lines, line)) {
    std::vector<std::string> fields;
    std::stringstream fs_(line);
    std::string f;
    while (std::getline(fs_, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (first) {
      for (size_t i = 0; i < fields.size(); ++i)
        if (fields[i] == "wall_ms") wall_col = int(i);
      first = false;
    } else if (wall_col >= 0 && size_t(wall_col) < fields.size()) {
      fields[size_t(wall_col)] = "";
    }
    for (size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      files[fs::relative(e.path(), root).string()] = canonical_bytes(e.path());
  return files;
}

Result criterion9() {
  fs::path dir = fs::temp_directory_path() / "geoflow_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path config = dir / "small.toml";
  {
    std::ofstream c(config);
    c << "[dataset]\nshapes = 2\nseed = 5\nnu = 24\nnv = 12\n"
      << "[pairs]\nn_template = 1024\nn_target = 1024\n"
      << "[train]\nbatch = 128\nhidden_dim = 16\ndepth = 2\ntime_embed_dim = 8\n"
      << "iters = 60\ncheckpoint_interval = 30\neval_points = 512\nquick_eval_points = 256\n"
      << "dataset_eval_shapes = 1\n"
      << "[latent]\ndim = 4\nchannels = 2\n"
      << "[generator]\nhidden_dim = 16\ndepth = 2\ntime_embed_dim = 8\n"
      << "[ode]\nsteps = 8\nsolver = \"heun\"\n";
  }
  fs::path out = dir / "out";

  auto pipeline = [&](const std::string& env) -> std::string {
    fs::remove_all(out);
    fs::create_directories(out);
    std::string cfg = " --config " + config.string();
    std::string data = (out / "data").string();
    std::vector<std::string> cmds = {
        "toyset" + cfg + " --out " + data,
        "pairs" + cfg + " --data " + data + " --shape 0 --seed 2 --out " + (out / "pairs.gfp").string(),
        "fit --single" + cfg + " --data " + data +
            " --formulation perturbed --shape 0 --seed 3 --out " + (out / "fit").string(),
        "fit --dataset" + cfg + " --data " + data +
            " --formulation normalized --seed 3 --out " + (out / "dfit").string(),
        "fit --generator" + cfg + " --data " + data + " --checkpoint " + (out / "dfit").string() +
            " --drop-prob 0.5 --seed 4 --out " + (out / "gfit").string(),
        "sample" + cfg + " --checkpoint " + (out / "fit").string() + " --data " + data +
            " --points 256 --seed 9 --out " + (out / "sample.ply").string(),
        "generate" + cfg + " --checkpoint " + (out / "dfit").string() + " --generator " +
            (out / "gfit").string() + " --data " + data +
            " --pose 0.2,0.1,1.0 --points 128 --seed 8 --out " + (out / "gen.ply").string(),
        "eval --cloud " + (out / "sample.ply").string() + " --mesh " + data +
            "/shapes/0_target.obj --out " + (out / "eval.csv").string(),
        "ablate" + cfg + " --data " + data + " --iters 20 --seeds 1 --svg --out " +
            (out / "ablate").string(),
    };
    for (size_t i = 0; i < cmds.size(); ++i) {
      int rc = run_cli(env, cmds[i]);
      if (rc != 0) return fmt("command %zu (%s...) exited %d", i, cmds[i].substr(0, 24).c_str(), rc);
    }
    return "";
  };

  std::string err = pipeline("GEOFLOW_THREADS=1");
  if (!err.empty()) return {false, "first pass: " + err};
  auto first = snapshot(out);
  err = pipeline("GEOFLOW_THREADS=4");
  if (!err.empty()) return {false, "second pass: " + err};
  auto second = snapshot(out);

  if (first.size() != second.size())
    return {false, fmt("file count differs between passes: %zu vs %zu", first.size(), second.size())};
  for (const auto& [rel, bytes] : first) {
    auto it = second.find(rel);
    if (it == second.end()) return {false, "missing file on rerun: " + rel};
    if (it->second != bytes) return {false, "byte difference in " + rel};
  }
  fs::remove_all(dir);
  return {true, fmt("%zu output files byte-identical across rerun with thread caps 1 and 4",
                    first.size())};
}

}  // namespace

int main() {
  struct Criterion {
    int num;
    const char* name;
    std::function<Result()> fn;
  };
  std::vector<Criterion> criteria = {
      {1, "gradient oracle", criterion1},
      {2, "knn/closest-point oracles", criterion2},
      {3, "ode convergence order", criterion3},
      {4, "formulation ordering, single shape", criterion4},
      {5, "formulation ordering, dataset", criterion5},
      {6, "pair-strategy ablation", criterion6},
      {7, "auto-decoder reconstruction", criterion7},
      {8, "two-stage generation", criterion8},
      {9, "cli determinism", criterion9},
  };

  std::vector<int> only;
  if (const char* env = std::getenv("GEOFLOW_ACCEPT_ONLY")) {
    std::stringstream ss(env);
    std::string tok;
    while (std::getline(ss, tok, ',')) only.push_back(std::atoi(tok.c_str()));
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.num) == only.end()) continue;
    auto t0 = Clock::now();
    Result r;
    try {
      r = c.fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.0fs]\n", r.pass ? "PASS" : "FAIL", c.num, c.name,
                r.detail.c_str(), secs);
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}
