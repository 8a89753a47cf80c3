#include "geoflow/pairs.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "geoflow/errors.hpp"
#include "geoflow/knn.hpp"
#include "geoflow/parallel.hpp"
#include "geoflow/rng.hpp"

namespace geoflow {

const char* to_string(Formulation f) {
  switch (f) {
    case Formulation::Original: return "original";
    case Formulation::Naive: return "naive";
    case Formulation::PerturbedPairs: return "perturbed";
    case Formulation::Normalized: return "normalized";
  }
  return "?";
}

const char* to_string(PairStrategy s) {
  return s == PairStrategy::SampledSet ? "sampled" : "dense";
}

Formulation parse_formulation(const std::string& name) {
  if (name == "original") return Formulation::Original;
  if (name == "naive") return Formulation::Naive;
  if (name == "perturbed") return Formulation::PerturbedPairs;
  if (name == "normalized") return Formulation::Normalized;
  throw UsageError("unknown formulation '" + name + "' (valid: original, naive, perturbed, normalized)");
}

PairStrategy parse_strategy(const std::string& name) {
  if (name == "sampled") return PairStrategy::SampledSet;
  if (name == "dense") return PairStrategy::DenseMesh;
  throw UsageError("unknown pair strategy '" + name + "' (valid: sampled, dense)");
}

namespace {

// Greedy min-separation filter in input order, hash grid with cell = min_sep.
std::vector<size_t> min_sep_filter(const std::vector<SurfaceSample>& samples, double min_sep) {
  std::vector<size_t> keep;
  keep.reserve(samples.size());
  if (min_sep <= 0) {
    for (size_t i = 0; i < samples.size(); ++i) keep.push_back(i);
    return keep;
  }
  std::unordered_map<uint64_t, std::vector<size_t>> grid;
  auto cell_key = [&](int cx, int cy, int cz) {
    return (uint64_t(uint32_t(cx)) << 42) ^ (uint64_t(uint32_t(cy)) << 21) ^ uint64_t(uint32_t(cz));
  };
  double inv = 1.0 / min_sep;
  for (size_t i = 0; i < samples.size(); ++i) {
    const Vec3& p = samples[i].position;
    int cx = int(std::floor(p.x * inv)), cy = int(std::floor(p.y * inv)), cz = int(std::floor(p.z * inv));
    bool ok = true;
    for (int dx = -1; dx <= 1 && ok; ++dx)
      for (int dy = -1; dy <= 1 && ok; ++dy)
        for (int dz = -1; dz <= 1 && ok; ++dz) {
          auto it = grid.find(cell_key(cx + dx, cy + dy, cz + dz));
          if (it == grid.end()) continue;
          for (size_t j : it->second)
            if (distance(p, samples[j].position) < min_sep) {
              ok = false;
              break;
            }
        }
    if (ok) {
      grid[cell_key(cx, cy, cz)].push_back(i);
      keep.push_back(i);
    }
  }
  return keep;
}

Vec3 barycentric_in_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
  Vec3 v0 = b - a, v1 = c - a, v2 = p - a;
  double d00 = dot(v0, v0), d01 = dot(v0, v1), d11 = dot(v1, v1);
  double d20 = dot(v2, v0), d21 = dot(v2, v1);
  double denom = d00 * d11 - d01 * d01;
  if (std::fabs(denom) < 1e-18) return {1, 0, 0};
  double v = (d11 * d20 - d01 * d21) / denom;
  double w = (d00 * d21 - d01 * d20) / denom;
  return {1 - v - w, v, w};
}

}  // namespace

TrainingPairSet construct_pairs(const TriMesh& tmpl, const TriMesh& target, size_t n_template,
                                size_t n_target, PairStrategy strategy, double min_sep, uint64_t seed) {
  if (tmpl.empty() || target.empty()) throw UsageError("construct_pairs: empty mesh");
  if (n_target < 1) throw UsageError("construct_pairs: n_target must be >= 1");
  if (strategy == PairStrategy::SampledSet && n_template < 1)
    throw UsageError("construct_pairs: SampledSet needs n_template >= 1");

  auto target_samples = sample_surface(target, n_target, mix_seed(seed, 0x21));
  auto kept = min_sep_filter(target_samples, min_sep);

  TrainingPairSet set;
  set.strategy = strategy;
  set.min_sep = min_sep;
  set.n_template = n_template;
  set.n_target = n_target;
  set.template_mesh = std::make_shared<TriMesh>(tmpl);
  set.pairs.resize(kept.size());

  if (strategy == PairStrategy::SampledSet) {
    auto template_samples = sample_surface(tmpl, n_template, mix_seed(seed, 0x22));
    std::vector<Vec3> pts;
    pts.reserve(template_samples.size());
    for (const auto& s : template_samples) pts.push_back(s.position);
    KnnIndex index(std::move(pts));
    parallel_for(kept.size(), [&](size_t i) {
      const SurfaceSample& x1 = target_samples[kept[i]];
      const SurfaceSample& x0 = template_samples[index.query_nearest(x1.position)];
      set.pairs[i] = {x1.position, x0.position, x1.position - x0.position, x0.uv, x0.normal, x0.canonical};
    });
  } else {
    parallel_for(kept.size(), [&](size_t i) {
      const SurfaceSample& x1 = target_samples[kept[i]];
      ClosestHit hit = closest_point_on_mesh(tmpl, x1.position);
      const auto& tri = tmpl.faces[hit.face];
      Vec3 bary = barycentric_in_triangle(tmpl.vertices[tri[0]], tmpl.vertices[tri[1]],
                                          tmpl.vertices[tri[2]], hit.point);
      SurfaceSample x0 = interpolate_on_face(tmpl, hit.face, bary);
      x0.position = hit.point;  // keep the exact foot point
      set.pairs[i] = {x1.position, x0.position, x1.position - x0.position, x0.uv, x0.normal, x0.canonical};
    });
  }
  return set;
}

FlowBatch draw_batch(const TrainingPairSet& pairset, Formulation formulation, size_t batch,
                     double sigma, uint64_t seed, uint64_t iter) {
  if (batch < 1) throw UsageError("draw_batch: batch must be >= 1");
  if (pairset.pairs.empty()) throw UsageError("draw_batch: empty pair set");
  if (formulation == Formulation::PerturbedPairs && sigma < 0)
    throw UsageError("draw_batch: sigma must be >= 0");

  Rng rng(seed, 0x31, iter);
  FlowBatch out;
  out.formulation = formulation;
  out.rows = batch;
  out.source.resize(batch);
  out.target.resize(batch);
  out.x0p.resize(batch);
  out.normal.resize(batch);
  out.canonical.resize(batch);
  out.uv.resize(batch);

  std::vector<SurfaceSample> fresh;
  if (formulation == Formulation::Naive) {
    if (!pairset.template_mesh)
      throw UsageError("draw_batch: Naive formulation needs the template mesh (not available after deserialization)");
    fresh = sample_surface(*pairset.template_mesh, batch, mix_seed(seed, 0x32, iter));
  }

  for (size_t i = 0; i < batch; ++i) {
    const TrainingPair& p = pairset.pairs[rng.uniform_index(pairset.pairs.size())];
    out.x0p[i] = p.x0p;
    out.normal[i] = p.normal;
    out.canonical[i] = p.canonical;
    out.uv[i] = p.uv;
    switch (formulation) {
      case Formulation::Original:
        out.source[i] = {rng.normal(), rng.normal(), rng.normal()};
        out.target[i] = p.x1;
        break;
      case Formulation::Naive:
        // Independent coupling has no matched template point, so the
        // condition tuple describes the re-drawn source sample itself.
        out.source[i] = fresh[i].position;
        out.target[i] = p.x1;
        out.x0p[i] = fresh[i].position;
        out.normal[i] = fresh[i].normal;
        out.canonical[i] = fresh[i].canonical;
        out.uv[i] = fresh[i].uv;
        break;
      case Formulation::PerturbedPairs:
        out.source[i] = p.x0p + Vec3{rng.normal(), rng.normal(), rng.normal()} * sigma;
        out.target[i] = p.x1;
        break;
      case Formulation::Normalized:
        out.source[i] = {rng.normal(), rng.normal(), rng.normal()};
        out.target[i] = p.delta;
        break;
    }
  }
  return out;
}

void interpolate(const FlowBatch& batch, const std::vector<double>& t_rows, std::vector<Vec3>& xt,
                 std::vector<Vec3>& velocity) {
  if (t_rows.size() != batch.rows) throw UsageError("interpolate: t_rows size mismatch");
  xt.resize(batch.rows);
  velocity.resize(batch.rows);
  for (size_t i = 0; i < batch.rows; ++i) {
    double t = t_rows[i];
    if (t < 0 || t > 1) throw UsageError("interpolate: t outside [0,1]");
    xt[i] = batch.source[i] * (1 - t) + batch.target[i] * t;
    velocity[i] = batch.target[i] - batch.source[i];
  }
}

void interpolate(const FlowBatch& batch, double t, std::vector<Vec3>& xt, std::vector<Vec3>& velocity) {
  interpolate(batch, std::vector<double>(batch.rows, t), xt, velocity);
}

namespace {

constexpr uint32_t kPairMagic = 0x31504647;  // "GFP1" little-endian
constexpr uint32_t kPairVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (size_t(in.gcount()) != sizeof v) throw FormatError("truncated pair set file: " + path);
}

}  // namespace

void save_pairset(const TrainingPairSet& pairset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write pair set file: " + path);
  write_raw(out, kPairMagic);
  write_raw(out, kPairVersion);
  write_raw(out, uint32_t(pairset.pairs.size()));
  write_raw(out, uint32_t(pairset.n_template));
  write_raw(out, uint32_t(pairset.n_target));
  write_raw(out, uint8_t(pairset.strategy == PairStrategy::SampledSet ? 0 : 1));
  write_raw(out, float(pairset.min_sep));
  for (const auto& p : pairset.pairs) {
    float row[17] = {float(p.x1.x),       float(p.x1.y),       float(p.x1.z),
                     float(p.x0p.x),      float(p.x0p.y),      float(p.x0p.z),
                     float(p.delta.x),    float(p.delta.y),    float(p.delta.z),
                     float(p.uv.u),       float(p.uv.v),
                     float(p.normal.x),   float(p.normal.y),   float(p.normal.z),
                     float(p.canonical.x), float(p.canonical.y), float(p.canonical.z)};
    out.write(reinterpret_cast<const char*>(row), sizeof row);
  }
  if (!out) throw FormatError("short write on pair set file: " + path);
}

TrainingPairSet load_pairset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open pair set file: " + path);
  uint32_t magic = 0, version = 0, count = 0, n_template = 0, n_target = 0;
  uint8_t strategy = 0;
  float min_sep = 0;
  read_raw(in, magic, path);
  if (magic != kPairMagic) throw FormatError("not a GFP1 pair set file: " + path);
  read_raw(in, version, path);
  if (version != kPairVersion) throw FormatError("unsupported pair set version: " + path);
  read_raw(in, count, path);
  read_raw(in, n_template, path);
  read_raw(in, n_target, path);
  read_raw(in, strategy, path);
  read_raw(in, min_sep, path);

  TrainingPairSet set;
  set.n_template = n_template;
  set.n_target = n_target;
  set.strategy = strategy == 0 ? PairStrategy::SampledSet : PairStrategy::DenseMesh;
  set.min_sep = min_sep;
  set.pairs.resize(count);
  for (auto& p : set.pairs) {
    float row[17];
    in.read(reinterpret_cast<char*>(row), sizeof row);
    if (size_t(in.gcount()) != sizeof row) throw FormatError("truncated pair set file: " + path);
    p.x1 = {row[0], row[1], row[2]};
    p.x0p = {row[3], row[4], row[5]};
    p.delta = {row[6], row[7], row[8]};
    p.uv = {row[9], row[10]};
    p.normal = {row[11], row[12], row[13]};
    p.canonical = {row[14], row[15], row[16]};
  }
  return set;
}

}  // namespace geoflow
