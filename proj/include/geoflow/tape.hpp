#pragma once
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "geoflow/parallel.hpp"
#include "geoflow/store.hpp"
#include "geoflow/tensor.hpp"
#include "geoflow/trimesh.hpp"

namespace geoflow {

// Reverse-mode gradient tape over dense tensors. Forward calls append nodes;
// backward() runs the recorded closures in reverse and accumulates exact
// gradients for every parameter leaf. Summation order is fixed, so results
// are bit-identical regardless of the thread cap.
template <typename T>
class TapeT {
 public:
  using Ten = TensorT<T>;

  int input(Ten v) { return push(std::move(v), nullptr); }

  int param(ParameterStoreT<T>& store, const std::string& name) {
    auto it = param_cache_.find(&store.get(name));
    if (it != param_cache_.end()) return it->second;
    int id = push(store.get(name), nullptr);
    nodes_[id].param_name = name;
    param_cache_.emplace(&store.get(name), id);
    return id;
  }

  const Ten& value(int id) const { return nodes_[id].val; }
  const Ten& grad(int id) const { return nodes_[id].grad; }

  // y[N,out] = x[N,in] . w[in,out] + b[out]
  int linear(int x, int w, int b) {
    const Ten& xv = val(x);
    const Ten& wv = val(w);
    const Ten& bv = val(b);
    check(xv.rank() == 2 && wv.rank() == 2 && bv.rank() == 1, "linear: rank mismatch");
    check(xv.shape[1] == wv.shape[0], "linear: inner dims " + xv.shape_str() + " x " + wv.shape_str());
    check(bv.shape[0] == wv.shape[1], "linear: bias dim " + bv.shape_str());
    int n = xv.shape[0], in = xv.shape[1], out = wv.shape[1];
    Ten y({n, out});
    parallel_for(size_t(n), [&](size_t r) {
      T* yr = &y.data[r * out];
      for (int j = 0; j < out; ++j) yr[j] = bv.data[j];
      const T* xr = &xv.data[r * in];
      for (int k = 0; k < in; ++k) {
        T a = xr[k];
        const T* wr = &wv.data[size_t(k) * out];
        for (int j = 0; j < out; ++j) yr[j] += a * wr[j];
      }
    });
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, x, w, b, n, in, out] {
      const Ten& g = nodes_[id].grad;
      const Ten& xv = val(x);
      const Ten& wv = val(w);
      if (wants_grad(x)) {
        Ten& gx = grad_buf(x);
        parallel_for(size_t(n), [&](size_t r) {
          const T* gr = &g.data[r * out];
          T* gxr = &gx.data[r * in];
          for (int k = 0; k < in; ++k) {
            const T* wr = &wv.data[size_t(k) * out];
            T acc = 0;
            for (int j = 0; j < out; ++j) acc += gr[j] * wr[j];
            gxr[k] += acc;
          }
        });
      }
      if (wants_grad(w)) {
        Ten& gw = grad_buf(w);
        for (int r = 0; r < n; ++r) {
          const T* xr = &xv.data[size_t(r) * in];
          const T* gr = &g.data[size_t(r) * out];
          for (int k = 0; k < in; ++k) {
            T a = xr[k];
            T* gwr = &gw.data[size_t(k) * out];
            for (int j = 0; j < out; ++j) gwr[j] += a * gr[j];
          }
        }
      }
      if (wants_grad(b)) {
        Ten& gb = grad_buf(b);
        for (int r = 0; r < n; ++r)
          for (int j = 0; j < out; ++j) gb.data[j] += g.data[size_t(r) * out + j];
      }
    };
    return id;
  }

  int silu(int x) {
    const Ten& xv = val(x);
    Ten y(xv.shape);
    for (size_t i = 0; i < xv.numel(); ++i) {
      T s = T(1) / (T(1) + std::exp(-xv.data[i]));
      y.data[i] = xv.data[i] * s;
    }
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, x] {
      if (!wants_grad(x)) return;
      const Ten& g = nodes_[id].grad;
      const Ten& xv = val(x);
      Ten& gx = grad_buf(x);
      for (size_t i = 0; i < xv.numel(); ++i) {
        T s = T(1) / (T(1) + std::exp(-xv.data[i]));
        gx.data[i] += g.data[i] * s * (T(1) + xv.data[i] * (T(1) - s));
      }
    };
    return id;
  }

  // y = h * (1 + s); the conditioning-by-scaling rule
  int modulate(int h, int s) {
    const Ten& hv = val(h);
    const Ten& sv = val(s);
    check(hv.same_shape(sv), "modulate: shape mismatch " + hv.shape_str() + " vs " + sv.shape_str());
    Ten y(hv.shape);
    for (size_t i = 0; i < hv.numel(); ++i) y.data[i] = hv.data[i] * (T(1) + sv.data[i]);
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, h, s] {
      const Ten& g = nodes_[id].grad;
      const Ten& hv = val(h);
      const Ten& sv = val(s);
      if (wants_grad(h)) {
        Ten& gh = grad_buf(h);
        for (size_t i = 0; i < hv.numel(); ++i) gh.data[i] += g.data[i] * (T(1) + sv.data[i]);
      }
      if (wants_grad(s)) {
        Ten& gs = grad_buf(s);
        for (size_t i = 0; i < hv.numel(); ++i) gs.data[i] += g.data[i] * hv.data[i];
      }
    };
    return id;
  }

  int add(int a, int b) {
    const Ten& av = val(a);
    const Ten& bv = val(b);
    check(av.same_shape(bv), "add: shape mismatch");
    Ten y(av.shape);
    for (size_t i = 0; i < av.numel(); ++i) y.data[i] = av.data[i] + bv.data[i];
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, a, b] {
      const Ten& g = nodes_[id].grad;
      if (wants_grad(a)) {
        Ten& ga = grad_buf(a);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
      }
      if (wants_grad(b)) {
        Ten& gb = grad_buf(b);
        for (size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
      }
    };
    return id;
  }

  // column-wise concat of rank-2 tensors with equal row counts
  int concat_cols(int a, int b) {
    const Ten& av = val(a);
    const Ten& bv = val(b);
    check(av.rank() == 2 && bv.rank() == 2 && av.shape[0] == bv.shape[0], "concat_cols: shape mismatch");
    int n = av.shape[0], ca = av.shape[1], cb = bv.shape[1];
    Ten y({n, ca + cb});
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < ca; ++j) y.at(r, j) = av.at(r, j);
      for (int j = 0; j < cb; ++j) y.at(r, ca + j) = bv.at(r, j);
    }
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, a, b, n, ca, cb] {
      const Ten& g = nodes_[id].grad;
      if (wants_grad(a)) {
        Ten& ga = grad_buf(a);
        for (int r = 0; r < n; ++r)
          for (int j = 0; j < ca; ++j) ga.at(r, j) += g.at(r, j);
      }
      if (wants_grad(b)) {
        Ten& gb = grad_buf(b);
        for (int r = 0; r < n; ++r)
          for (int j = 0; j < cb; ++j) gb.at(r, j) += g.at(r, ca + j);
      }
    };
    return id;
  }

  // channel concat of (C,H,W) grids
  int concat_channels(int a, int b) {
    const Ten& av = val(a);
    const Ten& bv = val(b);
    check(av.rank() == 3 && bv.rank() == 3 && av.shape[1] == bv.shape[1] && av.shape[2] == bv.shape[2],
          "concat_channels: shape mismatch");
    int ca = av.shape[0], cb = bv.shape[0], hw = av.shape[1] * av.shape[2];
    Ten y({ca + cb, av.shape[1], av.shape[2]});
    std::copy(av.data.begin(), av.data.end(), y.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), y.data.begin() + size_t(ca) * hw);
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, a, b, ca, cb, hw] {
      const Ten& g = nodes_[id].grad;
      if (wants_grad(a)) {
        Ten& ga = grad_buf(a);
        for (size_t i = 0; i < size_t(ca) * hw; ++i) ga.data[i] += g.data[i];
      }
      if (wants_grad(b)) {
        Ten& gb = grad_buf(b);
        for (size_t i = 0; i < size_t(cb) * hw; ++i) gb.data[i] += g.data[size_t(ca) * hw + i];
      }
    };
    return id;
  }

  // 2x nearest-neighbor upsample of (C,H,W)
  int upsample2(int x) {
    const Ten& xv = val(x);
    check(xv.rank() == 3, "upsample2: need (C,H,W)");
    int c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    Ten y({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < 2 * h; ++i)
        for (int j = 0; j < 2 * w; ++j) y.at(ch, i, j) = xv.at(ch, i / 2, j / 2);
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, x, c, h, w] {
      if (!wants_grad(x)) return;
      const Ten& g = nodes_[id].grad;
      Ten& gx = grad_buf(x);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 2 * h; ++i)
          for (int j = 0; j < 2 * w; ++j) gx.at(ch, i / 2, j / 2) += g.at(ch, i, j);
    };
    return id;
  }

  // 3x3 same-padding convolution: x (Cin,H,W), w (Cout,Cin,3,3), b (Cout)
  int conv3x3(int x, int w, int b) {
    const Ten& xv = val(x);
    const Ten& wv = val(w);
    const Ten& bv = val(b);
    check(xv.rank() == 3 && wv.rank() == 4 && bv.rank() == 1, "conv3x3: rank mismatch");
    check(wv.shape[1] == xv.shape[0] && wv.shape[2] == 3 && wv.shape[3] == 3,
          "conv3x3: kernel " + wv.shape_str() + " vs input " + xv.shape_str());
    check(bv.shape[0] == wv.shape[0], "conv3x3: bias dim");
    int cin = xv.shape[0], h = xv.shape[1], wd = xv.shape[2], cout = wv.shape[0];
    Ten y({cout, h, wd});
    auto kernel = [&](int co, int ci, int di, int dj) {
      return wv.data[((size_t(co) * cin + ci) * 3 + (di + 1)) * 3 + (dj + 1)];
    };
    for (int co = 0; co < cout; ++co)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < wd; ++j) {
          T acc = bv.data[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int di = -1; di <= 1; ++di) {
              int ii = i + di;
              if (ii < 0 || ii >= h) continue;
              for (int dj = -1; dj <= 1; ++dj) {
                int jj = j + dj;
                if (jj < 0 || jj >= wd) continue;
                acc += kernel(co, ci, di, dj) * xv.at(ci, ii, jj);
              }
            }
          y.at(co, i, j) = acc;
        }
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, x, w, b, cin, h, wd, cout] {
      const Ten& g = nodes_[id].grad;
      const Ten& xv = val(x);
      const Ten& wv = val(w);
      auto kernel = [&](int co, int ci, int di, int dj) {
        return wv.data[((size_t(co) * cin + ci) * 3 + (di + 1)) * 3 + (dj + 1)];
      };
      if (wants_grad(x)) {
        Ten& gx = grad_buf(x);
        for (int co = 0; co < cout; ++co)
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < wd; ++j) {
              T gv = g.at(co, i, j);
              for (int ci = 0; ci < cin; ++ci)
                for (int di = -1; di <= 1; ++di) {
                  int ii = i + di;
                  if (ii < 0 || ii >= h) continue;
                  for (int dj = -1; dj <= 1; ++dj) {
                    int jj = j + dj;
                    if (jj < 0 || jj >= wd) continue;
                    gx.at(ci, ii, jj) += gv * kernel(co, ci, di, dj);
                  }
                }
            }
      }
      if (wants_grad(w)) {
        Ten& gw = grad_buf(w);
        for (int co = 0; co < cout; ++co)
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < wd; ++j) {
              T gv = g.at(co, i, j);
              for (int ci = 0; ci < cin; ++ci)
                for (int di = -1; di <= 1; ++di) {
                  int ii = i + di;
                  if (ii < 0 || ii >= h) continue;
                  for (int dj = -1; dj <= 1; ++dj) {
                    int jj = j + dj;
                    if (jj < 0 || jj >= wd) continue;
                    gw.data[((size_t(co) * cin + ci) * 3 + (di + 1)) * 3 + (dj + 1)] += gv * xv.at(ci, ii, jj);
                  }
                }
            }
      }
      if (wants_grad(b)) {
        Ten& gb = grad_buf(b);
        for (int co = 0; co < cout; ++co) {
          T acc = 0;
          for (int i = 0; i < h; ++i)
            for (int j = 0; j < wd; ++j) acc += g.at(co, i, j);
          gb.data[co] += acc;
        }
      }
    };
    return id;
  }

  // Bilinear sample of a (D,H,W) grid at N uv points -> (N,D).
  // u indexes columns (clamped at the chart border), v indexes rows
  // (wrapped across the seam). Texel centers sit at ((j+0.5)/W, (i+0.5)/H).
  int bilinear_rows(int grid, const std::vector<Vec2>& uvs) {
    const Ten& gv = val(grid);
    check(gv.rank() == 3, "bilinear_rows: need (D,H,W)");
    int d = gv.shape[0], h = gv.shape[1], w = gv.shape[2];
    int n = int(uvs.size());
    struct Corner { int i0, i1, j0, j1; T wi, wj; };
    auto corners = std::make_shared<std::vector<Corner>>(n);
    for (int r = 0; r < n; ++r) {
      double x = uvs[r].u * w - 0.5;  // column coordinate
      double y = uvs[r].v * h - 0.5;  // row coordinate
      double jf = std::floor(x), ifl = std::floor(y);
      Corner c;
      c.wj = T(x - jf);
      c.wi = T(y - ifl);
      int j0 = int(jf);
      c.j0 = std::min(std::max(j0, 0), w - 1);
      c.j1 = std::min(std::max(j0 + 1, 0), w - 1);
      int i0 = int(ifl);
      c.i0 = ((i0 % h) + h) % h;
      c.i1 = ((i0 + 1) % h + h) % h;
      (*corners)[r] = c;
    }
    Ten y({n, d});
    for (int r = 0; r < n; ++r) {
      const Corner& c = (*corners)[r];
      for (int ch = 0; ch < d; ++ch) {
        T v00 = gv.at(ch, c.i0, c.j0), v01 = gv.at(ch, c.i0, c.j1);
        T v10 = gv.at(ch, c.i1, c.j0), v11 = gv.at(ch, c.i1, c.j1);
        y.at(r, ch) = (T(1) - c.wi) * ((T(1) - c.wj) * v00 + c.wj * v01) +
                      c.wi * ((T(1) - c.wj) * v10 + c.wj * v11);
      }
    }
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, grid, corners, d, n] {
      if (!wants_grad(grid)) return;
      const Ten& g = nodes_[id].grad;
      Ten& gg = grad_buf(grid);
      for (int r = 0; r < n; ++r) {
        const Corner& c = (*corners)[r];
        for (int ch = 0; ch < d; ++ch) {
          T gv2 = g.at(r, ch);
          gg.at(ch, c.i0, c.j0) += gv2 * (T(1) - c.wi) * (T(1) - c.wj);
          gg.at(ch, c.i0, c.j1) += gv2 * (T(1) - c.wi) * c.wj;
          gg.at(ch, c.i1, c.j0) += gv2 * c.wi * (T(1) - c.wj);
          gg.at(ch, c.i1, c.j1) += gv2 * c.wi * c.wj;
        }
      }
    };
    return id;
  }

  // Rows from `base` except where mask is set, which take the (broadcast)
  // vector parameter instead. Used for condition dropping with a learned
  // null embedding.
  int blend_rows(int base, int vec, const std::vector<uint8_t>& mask) {
    const Ten& bv = val(base);
    const Ten& vv = val(vec);
    check(bv.rank() == 2 && vv.rank() == 1 && bv.shape[1] == vv.shape[0], "blend_rows: shape mismatch");
    check(mask.size() == size_t(bv.shape[0]), "blend_rows: mask size");
    int n = bv.shape[0], c = bv.shape[1];
    Ten y(bv.shape);
    auto m = std::make_shared<std::vector<uint8_t>>(mask);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < c; ++j) y.at(r, j) = mask[size_t(r)] ? vv.data[j] : bv.at(r, j);
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, base, vec, m, n, c] {
      const Ten& g = nodes_[id].grad;
      if (wants_grad(vec)) {
        Ten& gv2 = grad_buf(vec);
        for (int r = 0; r < n; ++r)
          if ((*m)[size_t(r)])
            for (int j = 0; j < c; ++j) gv2.data[j] += g.at(r, j);
      }
      if (wants_grad(base)) {
        Ten& gb = grad_buf(base);
        for (int r = 0; r < n; ++r)
          if (!(*m)[size_t(r)])
            for (int j = 0; j < c; ++j) gb.at(r, j) += g.at(r, j);
      }
    };
    return id;
  }

  // Flatten (C,H,W) -> (1, C*H*W) view copy.
  int flatten_row(int x) {
    const Ten& xv = val(x);
    Ten y({1, int(xv.numel())});
    y.data = xv.data;
    int id = push(std::move(y), nullptr);
    nodes_[id].backward = [this, id, x] {
      if (!wants_grad(x)) return;
      const Ten& g = nodes_[id].grad;
      Ten& gx = grad_buf(x);
      for (size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g.data[i];
    };
    return id;
  }

  // Seeds d(loss)/d(node) = seed and runs the reverse sweep. Gradients for
  // all parameter leaves land in `out`, keyed by name (accumulating).
  void backward(int node, const Ten& seed, GradientsT<T>& out) {
    if (consumed_) throw UsageError("tape already consumed by backward()");
    consumed_ = true;
    check(seed.same_shape(nodes_[size_t(node)].val), "backward: seed shape mismatch");
    grad_buf(node);
    Ten& g = nodes_[size_t(node)].grad;
    for (size_t i = 0; i < seed.numel(); ++i) g.data[i] += seed.data[i];
    for (int id = int(nodes_.size()) - 1; id >= 0; --id) {
      if (nodes_[size_t(id)].has_grad && nodes_[size_t(id)].backward) nodes_[size_t(id)].backward();
    }
    for (auto& nd : nodes_) {
      if (!nd.param_name.empty() && nd.has_grad) {
        auto it = out.find(nd.param_name);
        if (it == out.end()) {
          out.emplace(nd.param_name, nd.grad);
        } else {
          for (size_t i = 0; i < nd.grad.numel(); ++i) it->second.data[i] += nd.grad.data[i];
        }
      }
    }
  }

 private:
  struct Node {
    Ten val;
    Ten grad;
    bool has_grad = false;
    std::function<void()> backward;
    std::string param_name;
  };

  static void check(bool ok, const std::string& msg) {
    if (!ok) throw UsageError(msg);
  }

  int push(Ten v, std::function<void()> backward) {
    nodes_.push_back({std::move(v), {}, false, std::move(backward), {}});
    return int(nodes_.size()) - 1;
  }

  const Ten& val(int id) const { return nodes_[size_t(id)].val; }

  // Interior nodes always participate; pure inputs are skipped unless
  // someone requested their gradient.
  bool wants_grad(int id) const { return true; }

  Ten& grad_buf(int id) {
    Node& n = nodes_[size_t(id)];
    if (!n.has_grad) {
      n.grad = Ten(n.val.shape);
      n.has_grad = true;
    }
    return n.grad;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const TensorT<T>*, int> param_cache_;
  bool consumed_ = false;
};

using Tape = TapeT<float>;

}  // namespace geoflow
