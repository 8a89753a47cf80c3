// geoflow: datasets, training pairs, flow training, sampling, generation,
// evaluation and ablation reports behind one reproducible CLI.
//
// Every run resolves its configuration (defaults <- config file <- flags,
// flags win) and writes the resolved TOML next to its outputs, so any
// artifact can be regenerated byte-for-byte from that file plus the seed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geoflow/flow.hpp"
#include "geoflow/latentgen.hpp"
#include "geoflow/metrics.hpp"
#include "geoflow/optim.hpp"
#include "geoflow/ply.hpp"
#include "geoflow/tomlmini.hpp"

namespace fs = std::filesystem;
using namespace geoflow;

namespace {

// ---------------------------------------------------------------------------
// RunConfig: one flat struct holding every tunable named by the library,
// mapped 1:1 onto TOML keys.
// ---------------------------------------------------------------------------

struct RunConfig {
  // [dataset]
  int64_t dataset_shapes = 8;
  int64_t dataset_seed = 7;
  bool dataset_loose = false;
  int64_t dataset_nu = 64;
  int64_t dataset_nv = 32;
  // [pairs]
  int64_t pairs_n_template = 8192;
  int64_t pairs_n_target = 16384;
  std::string pairs_strategy = "sampled";
  double pairs_min_sep = 0.0;
  // [train]
  std::string train_formulation = "normalized";
  std::string train_mode = "single";  // single | dataset | generator
  int64_t train_shape = 0;
  int64_t train_iters = 5000;
  int64_t train_batch = 2048;
  double train_sigma = 0.05;
  int64_t train_hidden_dim = 128;
  int64_t train_depth = 4;
  int64_t train_time_embed_dim = 32;
  int64_t train_checkpoint_interval = 1000;
  int64_t train_eval_points = 16384;
  int64_t train_quick_eval_points = 2048;
  int64_t train_dataset_eval_shapes = 2;
  int64_t train_seed = 1;
  // [schedule]
  double schedule_lr_max = 1e-3;
  double schedule_lr_min = 0.0;
  double schedule_weight_decay = 1e-2;
  double schedule_latent_l2 = 1e-4;
  // [latent]
  int64_t latent_dim = 16;
  int64_t latent_channels = 8;
  int64_t latent_size = 8;
  // [generator]
  int64_t generator_hidden_dim = 256;
  int64_t generator_depth = 4;
  int64_t generator_time_embed_dim = 32;
  int64_t generator_batch = 8;
  double generator_drop_prob = 0.1;
  int64_t generator_pooled_size = 4;
  int64_t generator_vmap_size = 16;
  // [ode]
  std::string ode_solver = "heun";
  int64_t ode_steps = 32;
  double ode_guidance = 1.0;
  // [sample]
  int64_t sample_points = 16384;
  int64_t sample_seed = 1;
  std::string sample_pose = "0,0,1";
  // [ablate]
  std::string ablate_seeds = "1,2,3";
  bool ablate_dataset_mode = false;
  // [io]
  std::string io_data;
  std::string io_checkpoint;
  std::string io_out;
};

struct Binding {
  std::string key;
  enum Type { I, D, B, S } type;
  void* ptr;
};

std::vector<Binding> bindings(RunConfig& c) {
  return {
      {"dataset.shapes", Binding::I, &c.dataset_shapes},
      {"dataset.seed", Binding::I, &c.dataset_seed},
      {"dataset.loose", Binding::B, &c.dataset_loose},
      {"dataset.nu", Binding::I, &c.dataset_nu},
      {"dataset.nv", Binding::I, &c.dataset_nv},
      {"pairs.n_template", Binding::I, &c.pairs_n_template},
      {"pairs.n_target", Binding::I, &c.pairs_n_target},
      {"pairs.strategy", Binding::S, &c.pairs_strategy},
      {"pairs.min_sep", Binding::D, &c.pairs_min_sep},
      {"train.formulation", Binding::S, &c.train_formulation},
      {"train.mode", Binding::S, &c.train_mode},
      {"train.shape", Binding::I, &c.train_shape},
      {"train.iters", Binding::I, &c.train_iters},
      {"train.batch", Binding::I, &c.train_batch},
      {"train.sigma", Binding::D, &c.train_sigma},
      {"train.hidden_dim", Binding::I, &c.train_hidden_dim},
      {"train.depth", Binding::I, &c.train_depth},
      {"train.time_embed_dim", Binding::I, &c.train_time_embed_dim},
      {"train.checkpoint_interval", Binding::I, &c.train_checkpoint_interval},
      {"train.eval_points", Binding::I, &c.train_eval_points},
      {"train.quick_eval_points", Binding::I, &c.train_quick_eval_points},
      {"train.dataset_eval_shapes", Binding::I, &c.train_dataset_eval_shapes},
      {"train.seed", Binding::I, &c.train_seed},
      {"schedule.lr_max", Binding::D, &c.schedule_lr_max},
      {"schedule.lr_min", Binding::D, &c.schedule_lr_min},
      {"schedule.weight_decay", Binding::D, &c.schedule_weight_decay},
      {"schedule.latent_l2", Binding::D, &c.schedule_latent_l2},
      {"latent.dim", Binding::I, &c.latent_dim},
      {"latent.channels", Binding::I, &c.latent_channels},
      {"latent.size", Binding::I, &c.latent_size},
      {"generator.hidden_dim", Binding::I, &c.generator_hidden_dim},
      {"generator.depth", Binding::I, &c.generator_depth},
      {"generator.time_embed_dim", Binding::I, &c.generator_time_embed_dim},
      {"generator.batch", Binding::I, &c.generator_batch},
      {"generator.drop_prob", Binding::D, &c.generator_drop_prob},
      {"generator.pooled_size", Binding::I, &c.generator_pooled_size},
      {"generator.vmap_size", Binding::I, &c.generator_vmap_size},
      {"ode.solver", Binding::S, &c.ode_solver},
      {"ode.steps", Binding::I, &c.ode_steps},
      {"ode.guidance", Binding::D, &c.ode_guidance},
      {"sample.points", Binding::I, &c.sample_points},
      {"sample.seed", Binding::I, &c.sample_seed},
      {"sample.pose", Binding::S, &c.sample_pose},
      {"ablate.seeds", Binding::S, &c.ablate_seeds},
      {"ablate.dataset_mode", Binding::B, &c.ablate_dataset_mode},
      {"io.data", Binding::S, &c.io_data},
      {"io.checkpoint", Binding::S, &c.io_checkpoint},
      {"io.out", Binding::S, &c.io_out},
  };
}

// Apply a config file beneath any flags the user passed explicitly.
void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::set<std::string>& flag_overridden) {
  TomlDoc doc = TomlDoc::load(path);
  auto binds = bindings(cfg);
  for (const auto& item : doc.items()) {
    const Binding* b = nullptr;
    for (const auto& cand : binds)
      if (cand.key == item.key) {
        b = &cand;
        break;
      }
    if (!b) throw FormatError(path + ": unknown config key '" + item.key + "'");
    if (flag_overridden.count(item.key)) continue;  // flags win
    switch (b->type) {
      case Binding::I: *static_cast<int64_t*>(b->ptr) = doc.get_int(item.key); break;
      case Binding::D: *static_cast<double*>(b->ptr) = doc.get_double(item.key); break;
      case Binding::B: *static_cast<bool*>(b->ptr) = doc.get_bool(item.key); break;
      case Binding::S: *static_cast<std::string*>(b->ptr) = doc.get_string(item.key); break;
    }
  }
}

void write_resolved_config(RunConfig& cfg, const fs::path& path) {
  TomlDoc doc;
  for (const auto& b : bindings(cfg)) {
    switch (b.type) {
      case Binding::I: doc.set_int(b.key, *static_cast<int64_t*>(b.ptr)); break;
      case Binding::D: doc.set_double(b.key, *static_cast<double*>(b.ptr)); break;
      case Binding::B: doc.set_bool(b.key, *static_cast<bool*>(b.ptr)); break;
      case Binding::S: doc.set_string(b.key, *static_cast<std::string*>(b.ptr)); break;
    }
  }
  doc.save(path.string());
}

// ---------------------------------------------------------------------------
// Shared construction helpers
// ---------------------------------------------------------------------------

TrainOptions train_options(const RunConfig& cfg) {
  TrainOptions o;
  o.n_template = size_t(cfg.pairs_n_template);
  o.n_target = size_t(cfg.pairs_n_target);
  o.strategy = parse_strategy(cfg.pairs_strategy);
  o.min_sep = cfg.pairs_min_sep;
  o.sigma = cfg.train_sigma;
  o.batch = size_t(cfg.train_batch);
  o.hidden_dim = int(cfg.train_hidden_dim);
  o.depth = int(cfg.train_depth);
  o.time_embed_dim = int(cfg.train_time_embed_dim);
  o.checkpoint_interval = cfg.train_checkpoint_interval;
  o.eval_points = size_t(cfg.train_eval_points);
  o.quick_eval_points = size_t(cfg.train_quick_eval_points);
  o.dataset_eval_shapes = size_t(cfg.train_dataset_eval_shapes);
  o.latent_dim = int(cfg.latent_dim);
  o.featuremap_channels = int(cfg.latent_channels);
  o.featuremap_size = int(cfg.latent_size);
  return o;
}

TrainSchedule train_schedule(const RunConfig& cfg) {
  TrainSchedule s;
  s.lr_max = cfg.schedule_lr_max;
  s.lr_min = cfg.schedule_lr_min;
  s.weight_decay = cfg.schedule_weight_decay;
  s.latent_l2 = cfg.schedule_latent_l2;
  return s;
}

OdeConfig ode_config(const RunConfig& cfg) {
  OdeConfig o;
  o.solver = parse_solver(cfg.ode_solver);
  o.steps = int(cfg.ode_steps);
  o.guidance_weight = cfg.ode_guidance;
  o.validate();
  return o;
}

GeneratorOptions generator_options(const RunConfig& cfg) {
  GeneratorOptions g;
  g.batch = size_t(cfg.generator_batch);
  g.hidden_dim = int(cfg.generator_hidden_dim);
  g.depth = int(cfg.generator_depth);
  g.time_embed_dim = int(cfg.generator_time_embed_dim);
  g.drop_prob = cfg.generator_drop_prob;
  g.pooled_size = int(cfg.generator_pooled_size);
  g.vmap_size = int(cfg.generator_vmap_size);
  return g;
}

PoseParams parse_pose(const std::string& text) {
  PoseParams p;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &p.bend, &p.twist, &p.taper) != 3)
    throw UsageError("pose must be three comma-separated floats 'bend,twist,taper', got '" + text + "'");
  p.validate();
  return p;
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    std::string tok = text.substr(pos, next - pos);
    try {
      seeds.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw UsageError("bad seed list entry '" + tok + "'");
    }
    pos = next + 1;
  }
  if (seeds.empty()) throw UsageError("seed list is empty");
  return seeds;
}

void ensure_out_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
}

// Reload a fit directory (checkpoint + resolved config) into the structures
// the sampling paths need.
struct FitBundle {
  RunConfig cfg;
  DatasetFitResult fit;  // store/model/decoder_cfg/report.formulation
  bool dataset_mode = false;
};

FitBundle load_fit_dir(const std::string& dir) {
  FitBundle b;
  fs::path root(dir);
  if (!fs::exists(root / "checkpoint.gfm"))
    throw FormatError("missing checkpoint: " + (root / "checkpoint.gfm").string());
  std::set<std::string> none;
  apply_config_file(b.cfg, (root / "run_config.toml").string(), none);
  b.dataset_mode = b.cfg.train_mode == "dataset";
  b.fit.store = load_checkpoint((root / "checkpoint.gfm").string());
  Formulation f = parse_formulation(b.cfg.train_formulation);
  b.fit.report.formulation = f;
  b.fit.decoder_cfg = {int(b.cfg.latent_channels), int(b.cfg.latent_size), int(b.cfg.latent_dim)};
  b.fit.model.prefix = "denoiser";
  b.fit.model.config = {3, int(b.cfg.train_hidden_dim), int(b.cfg.train_depth), 3,
                        condition_dim(f, b.dataset_mode ? int(b.cfg.latent_dim) : 0),
                        int(b.cfg.train_time_embed_dim)};
  return b;
}

GeneratorFitResult load_generator_dir(const std::string& dir, const FitBundle& stage1) {
  fs::path root(dir);
  if (!fs::exists(root / "checkpoint.gfm"))
    throw FormatError("missing checkpoint: " + (root / "checkpoint.gfm").string());
  RunConfig cfg;
  std::set<std::string> none;
  apply_config_file(cfg, (root / "run_config.toml").string(), none);
  GeneratorFitResult g;
  g.store = load_checkpoint((root / "checkpoint.gfm").string());
  g.opts = generator_options(cfg);
  g.z_shape = {int(stage1.cfg.latent_channels), int(stage1.cfg.latent_size),
               int(stage1.cfg.latent_size)};
  int latent_numel = g.z_shape[0] * g.z_shape[1] * g.z_shape[2];
  int cond_dim = 3 + 3 * g.opts.pooled_size * g.opts.pooled_size;
  g.model.prefix = "latentgen";
  g.model.config = {latent_numel, g.opts.hidden_dim, g.opts.depth, latent_numel, cond_dim,
                    g.opts.time_embed_dim};
  return g;
}

void write_cloud(const std::vector<Vec3>& points, const ConditionSet* conds, const std::string& path) {
  std::vector<CloudPoint> cloud(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    cloud[i].x = float(points[i].x);
    cloud[i].y = float(points[i].y);
    cloud[i].z = float(points[i].z);
    if (conds) {
      cloud[i].nx = float(conds->normal[i].x);
      cloud[i].ny = float(conds->normal[i].y);
      cloud[i].nz = float(conds->normal[i].z);
      cloud[i].u = float(conds->uv[i].u);
      cloud[i].v = float(conds->uv[i].v);
    }
  }
  write_pointcloud(cloud, path);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_toyset(RunConfig& cfg, bool force) {
  if (cfg.dataset_shapes < 1) throw UsageError("--shapes must be >= 1");
  if (cfg.io_out.empty()) throw UsageError("--out is required");
  fs::path out(cfg.io_out);
  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw UsageError("output directory " + cfg.io_out + " is not empty (use --force to overwrite)");
  fs::create_directories(out);

  DatasetConfig dc;
  dc.n_shapes = int(cfg.dataset_shapes);
  dc.seed = uint64_t(cfg.dataset_seed);
  dc.resolution = {int(cfg.dataset_nu), int(cfg.dataset_nv)};
  if (cfg.dataset_loose) {
    dc.flap_amp_lo = 0.12;
    dc.flap_amp_hi = 0.2;
  }
  ToyDataset ds = make_dataset(dc);
  write_dataset(ds, cfg.io_out);
  write_resolved_config(cfg, out / "run_config.toml");
  std::cout << "wrote " << ds.shapes.size() << " shapes to " << cfg.io_out << "\n";
}

void cmd_pairs(RunConfig& cfg) {
  if (cfg.io_data.empty()) throw UsageError("--data is required");
  if (cfg.io_out.empty()) throw UsageError("--out is required");
  ToyDataset ds = load_dataset(cfg.io_data);
  if (cfg.train_shape < 0 || size_t(cfg.train_shape) >= ds.shapes.size())
    throw UsageError("--shape out of range for dataset of " + std::to_string(ds.shapes.size()));
  const ToyShape& shape = ds.shapes[size_t(cfg.train_shape)];
  TrainingPairSet pairs =
      construct_pairs(shape.template_mesh, shape.target_mesh, size_t(cfg.pairs_n_template),
                      size_t(cfg.pairs_n_target), parse_strategy(cfg.pairs_strategy),
                      cfg.pairs_min_sep, uint64_t(cfg.train_seed));
  fs::path out(cfg.io_out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_pairset(pairs, cfg.io_out);
  write_resolved_config(cfg, out.string() + ".run.toml");
  std::cout << "wrote " << pairs.size() << " pairs to " << cfg.io_out << "\n";
}

void cmd_fit(RunConfig& cfg) {
  if (cfg.io_data.empty()) throw UsageError("--data is required");
  ensure_out_dir(cfg.io_out);
  fs::path out(cfg.io_out);
  ToyDataset ds = load_dataset(cfg.io_data);
  TrainOptions opts = train_options(cfg);
  TrainSchedule sched = train_schedule(cfg);
  uint64_t seed = uint64_t(cfg.train_seed);

  if (cfg.train_mode == "single") {
    Formulation f = parse_formulation(cfg.train_formulation);
    if (cfg.train_shape < 0 || size_t(cfg.train_shape) >= ds.shapes.size())
      throw UsageError("--shape out of range");
    const ToyShape& shape = ds.shapes[size_t(cfg.train_shape)];
    SingleFitResult r = train_single(shape.template_mesh, shape.target_mesh, f, cfg.train_iters,
                                     sched, seed, opts);
    save_checkpoint(r.store, (out / "checkpoint.gfm").string());
    write_fit_csv({r.report}, false, (out / "report.csv").string());
  } else if (cfg.train_mode == "dataset") {
    Formulation f = parse_formulation(cfg.train_formulation);
    DatasetFitResult r = train_dataset(ds, f, cfg.train_iters, sched, seed, opts);
    save_checkpoint(r.store, (out / "checkpoint.gfm").string());
    write_fit_csv({r.report}, true, (out / "report.csv").string());
  } else if (cfg.train_mode == "generator") {
    if (cfg.io_checkpoint.empty())
      throw UsageError("--checkpoint (stage-1 dataset fit directory) is required for generator mode");
    FitBundle stage1 = load_fit_dir(cfg.io_checkpoint);
    if (!stage1.dataset_mode) throw UsageError("generator mode needs a dataset-mode stage-1 fit");
    GeneratorFitResult g =
        train_latent_generator(stage1.fit, ds, cfg.train_iters, sched, seed, generator_options(cfg));
    save_checkpoint(g.store, (out / "checkpoint.gfm").string());
  } else {
    throw UsageError("unknown train mode '" + cfg.train_mode + "' (valid: single, dataset, generator)");
  }
  write_resolved_config(cfg, out / "run_config.toml");
}

void cmd_sample(RunConfig& cfg) {
  if (cfg.io_checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (cfg.io_out.empty()) throw UsageError("--out is required");
  if (cfg.sample_points < 1) throw UsageError("--points must be >= 1");
  auto t0 = std::chrono::steady_clock::now();

  FitBundle b = load_fit_dir(cfg.io_checkpoint);
  OdeConfig ode = ode_config(cfg);
  if (ode.guidance_weight != 1.0)
    throw UsageError("point-level sampling has no guidance pathway; use --guidance 1 (or `generate`)");
  std::string data = cfg.io_data.empty() ? b.cfg.io_data : cfg.io_data;
  if (data.empty()) throw UsageError("--data is required (not recorded in the checkpoint config)");
  ToyDataset ds = load_dataset(data);
  size_t shape = size_t(cfg.train_shape);
  if (shape >= ds.shapes.size()) throw UsageError("--shape out of range");
  const TriMesh& tmpl = ds.shapes[shape].template_mesh;

  Formulation f = b.fit.report.formulation;
  ConditionSet conds = conditions_from_template(tmpl, f, size_t(cfg.sample_points),
                                                uint64_t(cfg.sample_seed));
  conds.sigma = cfg.train_sigma;
  std::vector<Vec3> points;
  if (b.dataset_mode) {
    int s = b.fit.decoder_cfg.in_size;
    Tensor half = vertex_map_tensor(render_vertex_map(tmpl, 2 * s, 2 * s));
    Tensor full = vertex_map_tensor(render_vertex_map(tmpl, 4 * s, 4 * s));
    Tensor grid = decode(b.fit.store, "decoder", b.fit.decoder_cfg,
                         b.fit.store.get("z/" + std::to_string(shape)), half, full);
    Tensor latent_rows = lookup(grid, conds.uv);
    points = sample_ode(b.fit.store, b.fit.model, conds, &latent_rows, ode, uint64_t(cfg.sample_seed));
  } else {
    points = sample_ode(b.fit.store, b.fit.model, conds, nullptr, ode, uint64_t(cfg.sample_seed));
  }

  fs::path out(cfg.io_out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_cloud(points, &conds, cfg.io_out);
  write_resolved_config(cfg, out.string() + ".run.toml");
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "sampled " << points.size() << " points in " << int(ms) << " ms\n";
}

void cmd_generate(RunConfig& cfg, const std::string& gen_dir) {
  if (cfg.io_checkpoint.empty()) throw UsageError("--checkpoint (stage-1 fit directory) is required");
  if (gen_dir.empty()) throw UsageError("--generator (stage-2 fit directory) is required");
  if (cfg.io_out.empty()) throw UsageError("--out is required");
  auto t0 = std::chrono::steady_clock::now();

  FitBundle stage1 = load_fit_dir(cfg.io_checkpoint);
  if (!stage1.dataset_mode) throw UsageError("generate needs a dataset-mode stage-1 fit");
  GeneratorFitResult gen = load_generator_dir(gen_dir, stage1);
  std::string data = cfg.io_data.empty() ? stage1.cfg.io_data : cfg.io_data;
  if (data.empty()) throw UsageError("--data is required");
  ToyDataset ds = load_dataset(data);

  PoseParams pose = parse_pose(cfg.sample_pose);
  OdeConfig latent_ode = ode_config(cfg);
  OdeConfig point_ode = latent_ode;
  point_ode.guidance_weight = 1.0;
  GenerateResult r = generate(gen, stage1.fit, ds, pose, size_t(cfg.sample_points), latent_ode,
                              point_ode, uint64_t(cfg.sample_seed));

  fs::path out(cfg.io_out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_cloud(r.points, nullptr, cfg.io_out);
  write_resolved_config(cfg, out.string() + ".run.toml");
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "generated " << r.points.size() << " points in " << int(ms) << " ms\n";
}

void cmd_eval(const std::string& cloud_path, const std::string& ref_path, const std::string& mesh_path,
              const std::string& out_path) {
  if (cloud_path.empty()) throw UsageError("--cloud is required");
  if (ref_path.empty() && mesh_path.empty())
    throw UsageError("need --ref (cloud) and/or --mesh (OBJ) to evaluate against");
  std::vector<Vec3> cloud = positions(read_pointcloud(cloud_path));
  if (cloud.empty()) throw FormatError("empty point cloud: " + cloud_path);

  double chamfer = -1, surf = -1, cov = -1, radius = -1;
  if (!ref_path.empty()) {
    std::vector<Vec3> ref = positions(read_pointcloud(ref_path));
    if (ref.empty()) throw FormatError("empty point cloud: " + ref_path);
    chamfer = chamfer_distance(cloud, ref);
    radius = 2.0 * mean_point_spacing(ref);
    cov = coverage(cloud, ref, radius);
  }
  if (!mesh_path.empty()) {
    // keep the file's own coordinates; clouds under test live in world space
    TriMesh mesh = load_mesh(mesh_path, /*normalize_to_unit=*/false);
    surf = surface_distance(cloud, mesh);
  }

  std::string csv = "chamfer,surface_dist,coverage,cov_radius\n";
  char buf[160];
  auto cell = [&](double v) { return v < 0 ? std::string("") : (std::snprintf(buf, sizeof buf, "%.9g", v), std::string(buf)); };
  csv += cell(chamfer) + "," + cell(surf) + "," + cell(cov) + "," + cell(radius) + "\n";
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path);
    if (!f) throw FormatError("cannot write " + out_path);
    f << csv;
  }
}

// Minimal line chart: Chamfer vs iteration, one polyline per formulation
// (final seed order), log-scaled y.
void write_ablate_svg(const std::vector<FitReport>& reports, const std::string& path) {
  const double W = 720, H = 480, L = 70, R = 20, T = 20, B = 50;
  double xmax = 1, ymin = 1e30, ymax = -1e30;
  for (const auto& rep : reports)
    for (const auto& rec : rep.records) {
      xmax = std::max(xmax, double(rec.iter));
      if (rec.chamfer > 0) {
        ymin = std::min(ymin, rec.chamfer);
        ymax = std::max(ymax, rec.chamfer);
      }
    }
  if (ymin > ymax) { ymin = 1e-3; ymax = 1; }
  double ly0 = std::log10(ymin), ly1 = std::log10(ymax * 1.0001);
  auto xpix = [&](double it) { return L + (W - L - R) * (it / xmax); };
  auto ypix = [&](double c) {
    double t = (std::log10(std::max(c, 1e-30)) - ly0) / std::max(ly1 - ly0, 1e-12);
    return H - B - (H - T - B) * t;
  };
  const char* colors[] = {"#d62728", "#ff7f0e", "#2ca02c", "#1f77b4"};
  std::ofstream f(path);
  if (!f) throw FormatError("cannot write " + path);
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << int(W) << "' height='" << int(H) << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
    << "' stroke='black'/>\n";
  f << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B << "' stroke='black'/>\n";
  f << "<text x='" << (W / 2) << "' y='" << H - 12 << "' text-anchor='middle' font-size='14'>iteration</text>\n";
  f << "<text x='16' y='" << (H / 2) << "' font-size='14' transform='rotate(-90 16 " << (H / 2)
    << ")' text-anchor='middle'>chamfer (log)</text>\n";
  char buf[256];
  int legend_y = T + 14;
  for (const auto& rep : reports) {
    const char* color = colors[int(rep.formulation) % 4];
    std::string pts;
    for (const auto& rec : rep.records) {
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", xpix(double(rec.iter)), ypix(rec.chamfer));
      pts += buf;
    }
    f << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='" << pts << "'/>\n";
  }
  const Formulation forms[] = {Formulation::Original, Formulation::Naive, Formulation::PerturbedPairs,
                               Formulation::Normalized};
  for (Formulation fm : forms) {
    f << "<text x='" << W - R - 150 << "' y='" << legend_y << "' font-size='13' fill='"
      << colors[int(fm) % 4] << "'>" << to_string(fm) << "</text>\n";
    legend_y += 16;
  }
  f << "</svg>\n";
}

void cmd_ablate(RunConfig& cfg, bool svg) {
  if (cfg.io_data.empty()) throw UsageError("--data is required");
  ensure_out_dir(cfg.io_out);
  fs::path out(cfg.io_out);
  ToyDataset ds = load_dataset(cfg.io_data);
  std::vector<uint64_t> seeds = parse_seeds(cfg.ablate_seeds);
  AblateResult r = ablate_formulations(ds, cfg.ablate_dataset_mode, cfg.train_iters,
                                       train_schedule(cfg), seeds, train_options(cfg),
                                       (out / "ablate.csv").string());
  if (svg) write_ablate_svg(r.reports, (out / "ablate.svg").string());
  write_resolved_config(cfg, out / "run_config.toml");
  std::cout << "wrote " << r.reports.size() << " fit reports to " << (out / "ablate.csv").string()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geometry distributions via flow matching, desk scale"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path, gen_dir, eval_cloud, eval_ref, eval_mesh, eval_out;
  bool force = false, svg = false;

  // option name -> config key, to let explicit flags beat the config file
  std::vector<std::pair<CLI::Option*, std::string>> tracked;
  auto track = [&](CLI::Option* o, const std::string& key) { tracked.emplace_back(o, key); };

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "TOML run config (flags override it)");
  };

  CLI::App* toyset = app.add_subcommand("toyset", "write a procedural toy-shape dataset");
  add_common(toyset);
  track(toyset->add_option("--out", cfg.io_out, "output directory"), "io.out");
  track(toyset->add_option("--shapes", cfg.dataset_shapes, "number of shapes"), "dataset.shapes");
  track(toyset->add_option("--seed", cfg.dataset_seed, "dataset seed"), "dataset.seed");
  track(toyset->add_flag("--loose", cfg.dataset_loose, "add loose flaps to every shape"), "dataset.loose");
  toyset->add_flag("--force", force, "allow writing into a non-empty directory");

  CLI::App* pairs = app.add_subcommand("pairs", "construct and save a training pair set");
  add_common(pairs);
  track(pairs->add_option("--data", cfg.io_data, "dataset directory"), "io.data");
  track(pairs->add_option("--out", cfg.io_out, "output pair file"), "io.out");
  track(pairs->add_option("--shape", cfg.train_shape, "shape index"), "train.shape");
  track(pairs->add_option("--n-template", cfg.pairs_n_template, "template samples"), "pairs.n_template");
  track(pairs->add_option("--n-target", cfg.pairs_n_target, "target samples"), "pairs.n_target");
  track(pairs->add_option("--pair-strategy", cfg.pairs_strategy, "sampled|dense"), "pairs.strategy");
  track(pairs->add_option("--min-sep", cfg.pairs_min_sep, "min target separation"), "pairs.min_sep");
  track(pairs->add_option("--seed", cfg.train_seed, "sampling seed"), "train.seed");

  CLI::App* fit = app.add_subcommand("fit", "train a flow denoiser");
  add_common(fit);
  track(fit->add_option("--data", cfg.io_data, "dataset directory"), "io.data");
  track(fit->add_option("--out", cfg.io_out, "output directory"), "io.out");
  track(fit->add_option("--formulation", cfg.train_formulation, "original|naive|perturbed|normalized"),
        "train.formulation");
  track(fit->add_option("--iters", cfg.train_iters, "training iterations"), "train.iters");
  track(fit->add_option("--seed", cfg.train_seed, "training seed"), "train.seed");
  track(fit->add_option("--shape", cfg.train_shape, "shape index (single mode)"), "train.shape");
  track(fit->add_option("--pair-strategy", cfg.pairs_strategy, "sampled|dense"), "pairs.strategy");
  track(fit->add_option("--batch", cfg.train_batch, "batch size"), "train.batch");
  track(fit->add_option("--sigma", cfg.train_sigma, "perturbation sigma"), "train.sigma");
  track(fit->add_option("--hidden-dim", cfg.train_hidden_dim, "denoiser width"), "train.hidden_dim");
  track(fit->add_option("--checkpoint-interval", cfg.train_checkpoint_interval, "eval interval"),
        "train.checkpoint_interval");
  track(fit->add_option("--checkpoint", cfg.io_checkpoint, "stage-1 fit dir (generator mode)"),
        "io.checkpoint");
  CLI::Option* fit_single = fit->add_flag("--single", "fit one shape (default)");
  CLI::Option* fit_dataset = fit->add_flag("--dataset", "fit the whole dataset with latents");
  CLI::Option* fit_generator = fit->add_flag("--generator", "fit the stage-2 latent generator");
  fit_single->excludes(fit_dataset)->excludes(fit_generator);
  fit_dataset->excludes(fit_generator);
  track(fit->add_option("--drop-prob", cfg.generator_drop_prob, "condition drop probability"),
        "generator.drop_prob");

  CLI::App* sample = app.add_subcommand("sample", "sample a point cloud from a fit");
  add_common(sample);
  track(sample->add_option("--checkpoint", cfg.io_checkpoint, "fit directory"), "io.checkpoint");
  track(sample->add_option("--data", cfg.io_data, "dataset directory"), "io.data");
  track(sample->add_option("--out", cfg.io_out, "output PLY"), "io.out");
  track(sample->add_option("--points", cfg.sample_points, "point count"), "sample.points");
  track(sample->add_option("--shape", cfg.train_shape, "shape index"), "train.shape");
  track(sample->add_option("--steps", cfg.ode_steps, "ODE steps"), "ode.steps");
  track(sample->add_option("--solver", cfg.ode_solver, "euler|heun"), "ode.solver");
  track(sample->add_option("--guidance", cfg.ode_guidance, "guidance weight"), "ode.guidance");
  track(sample->add_option("--seed", cfg.sample_seed, "sampling seed"), "sample.seed");

  CLI::App* generate_cmd = app.add_subcommand("generate", "two-stage pose-conditioned generation");
  add_common(generate_cmd);
  track(generate_cmd->add_option("--checkpoint", cfg.io_checkpoint, "stage-1 fit directory"),
        "io.checkpoint");
  generate_cmd->add_option("--generator", gen_dir, "stage-2 fit directory");
  track(generate_cmd->add_option("--data", cfg.io_data, "dataset directory"), "io.data");
  track(generate_cmd->add_option("--out", cfg.io_out, "output PLY"), "io.out");
  track(generate_cmd->add_option("--points", cfg.sample_points, "point count"), "sample.points");
  track(generate_cmd->add_option("--pose", cfg.sample_pose, "bend,twist,taper"), "sample.pose");
  track(generate_cmd->add_option("--steps", cfg.ode_steps, "ODE steps"), "ode.steps");
  track(generate_cmd->add_option("--solver", cfg.ode_solver, "euler|heun"), "ode.solver");
  track(generate_cmd->add_option("--guidance", cfg.ode_guidance, "guidance weight"), "ode.guidance");
  track(generate_cmd->add_option("--seed", cfg.sample_seed, "sampling seed"), "sample.seed");

  CLI::App* eval = app.add_subcommand("eval", "metrics between clouds and meshes");
  eval->add_option("--cloud", eval_cloud, "point cloud under evaluation (PLY)");
  eval->add_option("--ref", eval_ref, "reference point cloud (PLY)");
  eval->add_option("--mesh", eval_mesh, "reference mesh (OBJ)");
  eval->add_option("--out", eval_out, "output CSV (stdout if omitted)");

  CLI::App* ablate = app.add_subcommand("ablate", "run all four formulations at matched budgets");
  add_common(ablate);
  track(ablate->add_option("--data", cfg.io_data, "dataset directory"), "io.data");
  track(ablate->add_option("--out", cfg.io_out, "output directory"), "io.out");
  track(ablate->add_option("--iters", cfg.train_iters, "iterations per run"), "train.iters");
  track(ablate->add_option("--seeds", cfg.ablate_seeds, "comma-separated seeds"), "ablate.seeds");
  CLI::Option* ablate_ds = ablate->add_flag("--dataset", "dataset-level fits instead of single-shape");
  track(ablate->add_option("--batch", cfg.train_batch, "batch size"), "train.batch");
  track(ablate->add_option("--hidden-dim", cfg.train_hidden_dim, "denoiser width"), "train.hidden_dim");
  track(ablate->add_option("--checkpoint-interval", cfg.train_checkpoint_interval, "eval interval"),
        "train.checkpoint_interval");
  ablate->add_flag("--svg", svg, "also write an SVG chamfer-vs-iteration chart");

  try {
    app.parse(argc, argv);

    std::set<std::string> overridden;
    for (const auto& [opt, key] : tracked)
      if (opt->count() > 0) overridden.insert(key);
    if (fit_dataset->count() > 0) {
      cfg.train_mode = "dataset";
      overridden.insert("train.mode");
    } else if (fit_generator->count() > 0) {
      cfg.train_mode = "generator";
      overridden.insert("train.mode");
    } else if (fit_single->count() > 0) {
      cfg.train_mode = "single";
      overridden.insert("train.mode");
    }
    if (ablate_ds->count() > 0) {
      cfg.ablate_dataset_mode = true;
      overridden.insert("ablate.dataset_mode");
    }
    if (!config_path.empty()) apply_config_file(cfg, config_path, overridden);

    if (toyset->parsed()) cmd_toyset(cfg, force);
    else if (pairs->parsed()) cmd_pairs(cfg);
    else if (fit->parsed()) cmd_fit(cfg);
    else if (sample->parsed()) cmd_sample(cfg);
    else if (generate_cmd->parsed()) cmd_generate(cfg, gen_dir);
    else if (eval->parsed()) cmd_eval(eval_cloud, eval_ref, eval_mesh, eval_out);
    else if (ablate->parsed()) cmd_ablate(cfg, svg);
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems are exit 1
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
