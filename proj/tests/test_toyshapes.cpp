#include <filesystem>

#include "doctest.h"
#include "geoflow/errors.hpp"
#include "geoflow/metrics.hpp"
#include "geoflow/toyshapes.hpp"

using namespace geoflow;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("toyshapes");

TEST_CASE("pose validation enforces the documented ranges") {
  CHECK_NOTHROW((PoseParams{0.6, -0.5, 1.3}.validate()));
  CHECK_THROWS_AS((PoseParams{0.7, 0, 1}.validate()), UsageError);
  CHECK_THROWS_AS((PoseParams{0, 0.6, 1}.validate()), UsageError);
  CHECK_THROWS_AS((PoseParams{0, 0, 0.5}.validate()), UsageError);
}

TEST_CASE("template surface wraps seamlessly in v") {
  PoseParams pose{0.4, 0.3, 1.1};
  for (double u : {0.1, 0.3, 0.5, 0.77, 0.9}) {
    Vec3 a = template_point(pose, u, 0.0);
    Vec3 b = template_point(pose, u, 1.0);
    CHECK(distance(a, b) < 1e-12);
  }
}

TEST_CASE("identity pose equals canonical coordinates") {
  PoseParams identity{0, 0, 1};
  for (double u : {0.0, 0.2, 0.5, 0.8, 1.0})
    for (double v : {0.0, 0.25, 0.6}) {
      CHECK(distance(template_point(identity, u, v), template_canonical_point(u, v)) < 1e-12);
    }
}

TEST_CASE("profile runs cap center to cap center with tube radius in between") {
  // u=0 and u=1 are the cap centers on the axis
  Vec3 bottom = template_canonical_point(0, 0.3);
  Vec3 top = template_canonical_point(1, 0.7);
  CHECK(std::fabs(bottom.x) < 1e-12);
  CHECK(std::fabs(bottom.y) < 1e-12);
  CHECK(bottom.z == doctest::Approx(-kTubeLength / 2));
  CHECK(top.z == doctest::Approx(kTubeLength / 2));
  // mid-tube point sits at the tube radius
  Vec3 mid = template_canonical_point(0.5, 0.0);
  CHECK(std::sqrt(mid.x * mid.x + mid.y * mid.y) == doctest::Approx(kTubeRadius));
}

TEST_CASE("taper scales the top radius, bend curves the axis") {
  PoseParams tapered{0, 0, 1.3};
  Vec3 near_top = template_point(tapered, 0.9, 0.0);
  Vec3 near_bottom = template_point(tapered, 0.1, 0.0);
  double r_top = std::sqrt(near_top.x * near_top.x + near_top.y * near_top.y);
  double r_bot = std::sqrt(near_bottom.x * near_bottom.x + near_bottom.y * near_bottom.y);
  CHECK(r_top > r_bot * 1.1);

  PoseParams bent{0.5, 0, 1};
  Vec3 top_center = template_point(bent, 1.0, 0.0);
  CHECK(std::fabs(top_center.y) > 0.05);  // axis displaced off the z axis
}

TEST_CASE("surface frames are orthogonal unit frames") {
  PoseParams pose{0.3, -0.2, 0.9};
  for (double u : {0.05, 0.3, 0.6, 0.95})
    for (double v : {0.1, 0.5, 0.9}) {
      SurfaceFrame f = template_frame(pose, u, v);
      CHECK(length(f.normal) == doctest::Approx(1.0));
      CHECK(std::fabs(dot(f.normal, f.tangent_u)) < 1e-3);
      CHECK(std::fabs(dot(f.normal, f.tangent_v)) < 1e-3);
    }
}

TEST_CASE("template normals point outward") {
  // on the canonical tube side, the outward normal is radial
  SurfaceFrame f = template_frame({0, 0, 1}, 0.5, 0.0);
  Vec3 radial = normalize(Vec3{f.position.x, f.position.y, 0});
  CHECK(dot(f.normal, radial) > 0.99);
}

TEST_CASE("make_template yields a valid closed mesh at the requested resolution") {
  TriMesh m = make_template({0.2, 0.1, 1.1}, {32, 16});
  CHECK_NOTHROW(m.validate());
  CHECK(m.vertex_count() == size_t(33) * 17);
  // 32*16 quads = 1024 quads; the two cap-center rings lose one triangle per quad
  CHECK(m.face_count() == 2 * 32 * 16 - 2 * 16);
  CHECK_THROWS_AS(make_template({0, 0, 1}, {4, 4}), UsageError);
}

TEST_CASE("target displacement is band-limited and seam-continuous") {
  TriMesh tmpl = make_template({0.1, 0.0, 1.0}, {48, 24});
  DisplacementSpec spec;
  spec.wrinkle_amp = 0.08;
  spec.seed = 11;
  TriMesh target = make_target(tmpl, spec);
  CHECK_NOTHROW(target.validate());
  REQUIRE(target.vertex_count() == tmpl.vertex_count());

  double bound = (spec.wrinkle_amp * (1 + 2 * spec.tangential_drift) + spec.flap_amp) * kTubeRadius;
  double max_disp = 0;
  for (size_t i = 0; i < tmpl.vertex_count(); ++i)
    max_disp = std::max(max_disp, distance(tmpl.vertices[i], target.vertices[i]));
  CHECK(max_disp > 0.001);       // actually displaced
  CHECK(max_disp <= bound + 1e-9);

  // seam columns (v=0 and v=1 duplicates) stay coincident after displacement
  for (size_t i = 0; i < tmpl.vertex_count(); ++i) {
    if (tmpl.vertex_uvs[i].v != 0.0) continue;
    for (size_t j = 0; j < tmpl.vertex_count(); ++j) {
      if (tmpl.vertex_uvs[j].v != 1.0 || tmpl.vertex_uvs[j].u != tmpl.vertex_uvs[i].u) continue;
      CHECK(distance(target.vertices[i], target.vertices[j]) < 1e-9);
    }
  }
}

TEST_CASE("flap displacement peaks inside the flap region") {
  TriMesh tmpl = make_template({0, 0, 1}, {48, 24});
  DisplacementSpec spec;
  spec.wrinkle_amp = 0;          // isolate the flap
  spec.tangential_drift = 0;
  spec.flap_amp = 0.2;
  spec.seed = 3;
  TriMesh target = make_target(tmpl, spec);
  double inside_max = 0, outside_max = 0;
  for (size_t i = 0; i < tmpl.vertex_count(); ++i) {
    double d = distance(tmpl.vertices[i], target.vertices[i]);
    if (spec.flap_region.contains(tmpl.vertex_uvs[i].u, tmpl.vertex_uvs[i].v))
      inside_max = std::max(inside_max, d);
    else
      outside_max = std::max(outside_max, d);
  }
  CHECK(inside_max > 0.5 * spec.flap_amp * kTubeRadius);
  CHECK(outside_max < 1e-12);
}

TEST_CASE("same displacement seed reproduces the same target") {
  TriMesh tmpl = make_template({0.2, 0.2, 1.0}, {32, 16});
  DisplacementSpec spec;
  spec.seed = 99;
  TriMesh a = make_target(tmpl, spec);
  TriMesh b = make_target(tmpl, spec);
  for (size_t i = 0; i < a.vertex_count(); ++i) CHECK(a.vertices[i] == b.vertices[i]);
  spec.seed = 100;
  TriMesh c = make_target(tmpl, spec);
  double diff = 0;
  for (size_t i = 0; i < a.vertex_count(); ++i) diff += distance(a.vertices[i], c.vertices[i]);
  CHECK(diff > 1e-3);
}

TEST_CASE("vertex map rasterizes template positions at texel centers") {
  TriMesh tmpl = make_template({0, 0, 1}, {64, 32});
  VertexMap vm = render_vertex_map(tmpl, 32, 32);
  CHECK(vm.h == 32);
  CHECK(vm.w == 32);
  size_t valid = 0;
  double worst = 0;
  for (int i = 0; i < vm.h; ++i)
    for (int j = 0; j < vm.w; ++j) {
      if (!vm.valid[size_t(i) * vm.w + j]) continue;
      ++valid;
      double u = (j + 0.5) / vm.w, v = (i + 0.5) / vm.h;
      worst = std::max(worst, distance(vm.at(i, j), template_point({0, 0, 1}, u, v)));
    }
  CHECK(double(valid) >= 0.95 * vm.h * vm.w);
  CHECK(worst < 0.02);  // linear interpolation error at this mesh resolution
}

TEST_CASE("dataset write/load reproduces every mesh bit-exactly") {
  fs::path dir = fs::temp_directory_path() / "geoflow_test_dataset";
  fs::remove_all(dir);
  DatasetConfig cfg;
  cfg.n_shapes = 3;
  cfg.seed = 21;
  cfg.resolution = {16, 8};
  cfg.flap_amp_lo = 0.1;
  cfg.flap_amp_hi = 0.15;
  ToyDataset ds = make_dataset(cfg);
  REQUIRE(ds.shapes.size() == 3);
  write_dataset(ds, dir.string());
  ToyDataset r = load_dataset(dir.string());
  REQUIRE(r.shapes.size() == 3);
  for (size_t k = 0; k < 3; ++k) {
    CHECK(r.shapes[k].pose.bend == ds.shapes[k].pose.bend);
    CHECK(r.shapes[k].spec.seed == ds.shapes[k].spec.seed);
    CHECK(r.shapes[k].spec.flap_amp > 0);
    REQUIRE(r.shapes[k].template_mesh.vertex_count() == ds.shapes[k].template_mesh.vertex_count());
    for (size_t i = 0; i < r.shapes[k].template_mesh.vertex_count(); ++i) {
      CHECK(r.shapes[k].template_mesh.vertices[i] == ds.shapes[k].template_mesh.vertices[i]);
      CHECK(r.shapes[k].target_mesh.vertices[i] == ds.shapes[k].target_mesh.vertices[i]);
      CHECK(r.shapes[k].template_mesh.vertex_canonical[i] ==
            ds.shapes[k].template_mesh.vertex_canonical[i]);
    }
  }
  CHECK_THROWS_AS(make_dataset(DatasetConfig{.n_shapes = 0}), UsageError);
}

TEST_SUITE_END();
