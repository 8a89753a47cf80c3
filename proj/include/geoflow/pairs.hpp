#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "geoflow/trimesh.hpp"
#include "geoflow/vec3.hpp"

namespace geoflow {

enum class PairStrategy { SampledSet, DenseMesh };
enum class Formulation { Original, Naive, PerturbedPairs, Normalized };

const char* to_string(Formulation f);
const char* to_string(PairStrategy s);
Formulation parse_formulation(const std::string& name);  // UsageError lists valid tags
PairStrategy parse_strategy(const std::string& name);

// One matched (x0', x1) pair plus the template-side attributes at x0'.
struct TrainingPair {
  Vec3 x1;
  Vec3 x0p;
  Vec3 delta;  // x1 - x0p
  Vec2 uv;
  Vec3 normal;
  Vec3 canonical;
};

struct TrainingPairSet {
  std::vector<TrainingPair> pairs;
  size_t n_template = 0;
  size_t n_target = 0;  // requested count, before min-separation dropping
  PairStrategy strategy = PairStrategy::SampledSet;
  double min_sep = 0;

  // Kept for formulations that re-draw template surface points each batch
  // (Naive) and for fresh-condition sampling; not serialized.
  std::shared_ptr<const TriMesh> template_mesh;

  size_t size() const { return pairs.size(); }
};

// SampledSet: nearest template *sample* via kd-tree (the default strategy).
// DenseMesh: exact nearest point on the template mesh. Target
// points closer than min_sep to an already-retained one are dropped
// greedily in draw order.
TrainingPairSet construct_pairs(const TriMesh& tmpl, const TriMesh& target, size_t n_template,
                                size_t n_target, PairStrategy strategy, double min_sep, uint64_t seed);

// One training minibatch. `source`/`target` are the flow endpoints for the
// batch's formulation; the x0' condition tuple and uv (for latent lookup)
// always ride along.
struct FlowBatch {
  Formulation formulation = Formulation::Normalized;
  size_t rows = 0;
  std::vector<Vec3> source;
  std::vector<Vec3> target;
  std::vector<Vec3> x0p;
  std::vector<Vec3> normal;
  std::vector<Vec3> canonical;
  std::vector<Vec2> uv;
};

FlowBatch draw_batch(const TrainingPairSet& pairset, Formulation formulation, size_t batch,
                     double sigma, uint64_t seed, uint64_t iter);

// xt = (1-t) source + t target; velocity target = target - source.
void interpolate(const FlowBatch& batch, const std::vector<double>& t_rows, std::vector<Vec3>& xt,
                 std::vector<Vec3>& velocity);
void interpolate(const FlowBatch& batch, double t, std::vector<Vec3>& xt, std::vector<Vec3>& velocity);

// Binary serialization: magic GFP1, version, counts, packed float32 rows.
void save_pairset(const TrainingPairSet& pairset, const std::string& path);
TrainingPairSet load_pairset(const std::string& path);

}  // namespace geoflow
