#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geoflow/nets.hpp"
#include "geoflow/optim.hpp"
#include "geoflow/pairs.hpp"
#include "geoflow/toyshapes.hpp"

namespace geoflow {

enum class OdeSolver { Euler, Heun };

struct OdeConfig {
  OdeSolver solver = OdeSolver::Heun;
  int steps = 32;
  double guidance_weight = 1.0;  // 1 = no guidance

  void validate() const {
    if (steps < 1) throw UsageError("OdeConfig: steps must be >= 1");
  }
};

OdeSolver parse_solver(const std::string& name);
const char* to_string(OdeSolver s);

// A denoiser is a modulated MLP plus the parameter-name prefix it lives
// under in a store.
struct DenoiserModel {
  ModulatedMlpConfig config;
  std::string prefix = "denoiser";
};

// Fixed per-point conditioning for sampling: the x0' tuple, the uv used for
// latent lookup, and the formulation that decides how trajectories start
// and end.
struct ConditionSet {
  Formulation formulation = Formulation::Normalized;
  std::vector<Vec3> x0p, normal, canonical;
  std::vector<Vec2> uv;
  double sigma = 0.05;  // start spread for PerturbedPairs

  size_t size() const { return x0p.size(); }
};

ConditionSet conditions_from_pairs(const TrainingPairSet& pairs, Formulation f, size_t n, uint64_t seed);
ConditionSet conditions_from_template(const TriMesh& tmpl, Formulation f, size_t n, uint64_t seed);

// Condition matrix fed to the denoiser: the x0' tuple for Normalized plus
// optional per-point latent columns. Returns a (N, cond_dim) tensor;
// cond_dim 0 means unconditioned.
Tensor assemble_condition_rows(const ConditionSet& conds, const Tensor* latent_rows);
Tensor assemble_condition_rows(const FlowBatch& batch, const Tensor* latent_rows);
int condition_dim(Formulation f, int latent_dim);

// Mean L2 norm of (predicted - target) velocity over the batch, with exact
// gradients for every parameter the forward touched.
struct LossResult {
  double loss = 0;
  Gradients grads;
};
LossResult fm_loss(ParameterStore& store, const DenoiserModel& model, const FlowBatch& batch,
                   const std::vector<double>& t_rows, const Tensor* latent_rows = nullptr);

// Velocity field evaluation (no tape kept).
Tensor eval_velocity(const ParameterStore& store, const DenoiserModel& model, const Tensor& xt,
                     const std::vector<double>& t_rows, const Tensor* cond_rows);

// Classifier-free guidance: u_uncond + w (u_cond - u_uncond), where the
// unconditional branch replaces every condition row by the learned null
// embedding. w == 1 short-circuits to the conditional branch exactly.
Tensor guided_velocity(const ParameterStore& store, const DenoiserModel& model, const Tensor& xt,
                       const std::vector<double>& t_rows, const Tensor& cond_rows,
                       const Tensor& null_cond, double w);

// Fixed-step integration of x' = u(x, t) over t in [0,1], in place.
// Throws NumericError naming t and step if the field returns a NaN.
using VelocityFn = std::function<Tensor(const Tensor& x, double t)>;
void integrate_ode(Tensor& x, const OdeConfig& ode, const VelocityFn& u);

// Fixed-step ODE integration over t in [0,1]; one output point per
// condition row. Throws NumericError naming t and step on NaN.
std::vector<Vec3> sample_ode(const ParameterStore& store, const DenoiserModel& model,
                             const ConditionSet& conds, const Tensor* latent_rows,
                             const OdeConfig& ode, uint64_t seed);

struct FitRecord {
  int64_t iter = 0;
  double loss = 0, chamfer = 0, surface_dist = 0, coverage = 0;
  double wall_ms = 0;
};

struct FitReport {
  Formulation formulation = Formulation::Normalized;
  uint64_t seed = 0;
  std::vector<FitRecord> records;

  const FitRecord& final_record() const {
    if (records.empty()) throw UsageError("FitReport: no records");
    return records.back();
  }
};

struct TrainOptions {
  size_t n_template = size_t(1) << 13;
  size_t n_target = size_t(1) << 14;
  PairStrategy strategy = PairStrategy::SampledSet;
  double min_sep = 0;
  double sigma = 0.05;
  size_t batch = 2048;
  int hidden_dim = 128;
  int depth = 4;
  int time_embed_dim = 32;
  int64_t checkpoint_interval = 1000;
  size_t eval_points = size_t(1) << 14;  // final-checkpoint evaluation
  size_t quick_eval_points = 2048;       // intermediate checkpoints
  OdeConfig eval_ode{OdeSolver::Heun, 32, 1.0};
  OdeConfig quick_eval_ode{OdeSolver::Euler, 16, 1.0};
  // dataset-level latent pathway
  int latent_dim = 16;
  int featuremap_channels = 8;
  int featuremap_size = 8;
  size_t dataset_eval_shapes = 2;  // shapes averaged at intermediate checkpoints
};

struct SingleFitResult {
  ParameterStore store;
  DenoiserModel model;
  TrainingPairSet pairs;
  FitReport report;
};
SingleFitResult train_single(const TriMesh& tmpl, const TriMesh& target, Formulation f, int64_t iters,
                             const TrainSchedule& schedule, uint64_t seed, const TrainOptions& opts);

struct DatasetFitResult {
  ParameterStore store;  // denoiser, decoder/*, z/<k>
  DenoiserModel model;
  ConvDecoderConfig decoder_cfg;
  std::vector<TrainingPairSet> pairs;  // per shape
  FitReport report;
};
DatasetFitResult train_dataset(const ToyDataset& dataset, Formulation f, int64_t iters,
                               const TrainSchedule& schedule, uint64_t seed, const TrainOptions& opts);

// Runs all four formulations for each seed at matched budgets and writes
// the CSV (formulation,seed,iter,loss,chamfer,surface_dist,coverage,
// wall_ms,paper_ref_chamfer).
struct AblateResult {
  std::vector<FitReport> reports;  // formulations x seeds
};
AblateResult ablate_formulations(const ToyDataset& dataset, bool dataset_mode, int64_t iters,
                                 const TrainSchedule& schedule, const std::vector<uint64_t>& seeds,
                                 const TrainOptions& opts, const std::string& csv_path);

double paper_reference_chamfer(Formulation f, bool dataset_mode);

void write_fit_csv(const std::vector<FitReport>& reports, bool dataset_mode, const std::string& path);

}  // namespace geoflow
