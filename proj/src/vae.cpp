#include "fold/vae.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <thread>

#include "fold/detect.hpp"
#include "fold/error.hpp"
#include "fold/rng.hpp"
#include "json.hpp"

namespace fold {

namespace {

struct StageDims {
  Dims3 s0, s1, s2, s3;
  int c1 = 0, c2 = 0, c3 = 0;
  std::size_t flat = 0;  // c3 * s3.count()
};

Dims3 half(Dims3 d) { return {d.nx / 2, d.ny / 2, d.nz / 2}; }

StageDims stage_dims(const ModelConfig& cfg) {
  StageDims s;
  s.s0 = cfg.input_dims;
  s.s1 = half(s.s0);
  s.s2 = half(s.s1);
  s.s3 = half(s.s2);
  s.c1 = cfg.channels[0];
  s.c2 = cfg.channels[1];
  s.c3 = cfg.channels[2];
  s.flat = std::size_t(s.c3) * s.s3.count();
  return s;
}

// Strided 3x3x3 convolution, stride 2, pad 1, gathering from the big grid
// into the small one. Weights are w[oc][ic][kz][ky][kx]. With even input
// dims every tap except the low edge (index -1) stays in bounds, so only
// the first output row/column needs peeling.
template <class S>
void conv_gather(const S* in, Dims3 id, int ci, const S* w, const S* b,
                 S* out, Dims3 od, int co) {
  const std::size_t in_n = id.count(), out_n = od.count();
  for (int oc = 0; oc < co; ++oc) {
    S* oc_base = out + std::size_t(oc) * out_n;
    std::fill(oc_base, oc_base + out_n, b ? b[oc] : S(0));
    for (int ic = 0; ic < ci; ++ic) {
      const S* ic_base = in + std::size_t(ic) * in_n;
      const S* wk = w + (std::size_t(oc) * ci + ic) * 27;
      for (int oz = 0; oz < od.nz; ++oz) {
        for (int kz = 0; kz < 3; ++kz) {
          const int iz = 2 * oz - 1 + kz;
          if (iz < 0) continue;
          for (int oy = 0; oy < od.ny; ++oy) {
            S* orow = oc_base + (std::size_t(oz) * od.ny + oy) * od.nx;
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = 2 * oy - 1 + ky;
              if (iy < 0) continue;
              const S* irow = ic_base + (std::size_t(iz) * id.ny + iy) * id.nx;
              const S w0 = wk[kz * 9 + ky * 3 + 0];
              const S w1 = wk[kz * 9 + ky * 3 + 1];
              const S w2 = wk[kz * 9 + ky * 3 + 2];
              orow[0] += w1 * irow[0] + w2 * irow[1];
              for (int ox = 1; ox < od.nx; ++ox) {
                const S* p = irow + 2 * ox - 1;
                orow[ox] += w0 * p[0] + w1 * p[1] + w2 * p[2];
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of conv_gather: scatter the small grid into the big one. Used as
// the decoder's transposed convolution forward and the encoder's data
// gradient. Weights keep the gather layout, indexed [small ch][big ch][k].
// An optional bias lives on the big side.
template <class S>
void conv_scatter(const S* in, Dims3 sd, int cs, const S* w, const S* b,
                  S* out, Dims3 bd, int cb) {
  const std::size_t sn = sd.count(), bn = bd.count();
  for (int oc = 0; oc < cb; ++oc) {
    S* base = out + std::size_t(oc) * bn;
    std::fill(base, base + bn, b ? b[oc] : S(0));
  }
  for (int sc = 0; sc < cs; ++sc) {
    const S* sc_base = in + std::size_t(sc) * sn;
    for (int oc = 0; oc < cb; ++oc) {
      S* oc_base = out + std::size_t(oc) * bn;
      const S* wk = w + (std::size_t(sc) * cb + oc) * 27;
      for (int sz = 0; sz < sd.nz; ++sz) {
        for (int kz = 0; kz < 3; ++kz) {
          const int bz = 2 * sz - 1 + kz;
          if (bz < 0) continue;
          for (int sy = 0; sy < sd.ny; ++sy) {
            const S* srow = sc_base + (std::size_t(sz) * sd.ny + sy) * sd.nx;
            for (int ky = 0; ky < 3; ++ky) {
              const int by = 2 * sy - 1 + ky;
              if (by < 0) continue;
              S* brow = oc_base + (std::size_t(bz) * bd.ny + by) * bd.nx;
              const S w0 = wk[kz * 9 + ky * 3 + 0];
              const S w1 = wk[kz * 9 + ky * 3 + 1];
              const S w2 = wk[kz * 9 + ky * 3 + 2];
              brow[0] += w1 * srow[0];
              brow[1] += w2 * srow[0];
              for (int sx = 1; sx < sd.nx; ++sx) {
                S* p = brow + 2 * sx - 1;
                const S v = srow[sx];
                p[0] += w0 * v;
                p[1] += w1 * v;
                p[2] += w2 * v;
              }
            }
          }
        }
      }
    }
  }
}

// Weight (and, for gather layers, bias) gradients shared by both layer
// kinds: gw[oc][ic][k] += sum_O gout_small[oc][O] * in_big[ic][2*O - 1 + k].
// For scatter layers the roles swap (in_big = output grad, gout_small =
// input activation) and gb must be null since their bias is on the big side.
template <class S>
void conv_grad_w(const S* in, Dims3 bd, int cb, const S* gout, Dims3 sd,
                 int cs, S* gw, S* gb) {
  const std::size_t bn = bd.count(), sn = sd.count();
  for (int oc = 0; oc < cs; ++oc) {
    const S* go_base = gout + std::size_t(oc) * sn;
    if (gb) {
      S acc = 0;
      for (std::size_t i = 0; i < sn; ++i) acc += go_base[i];
      gb[oc] += acc;
    }
    for (int ic = 0; ic < cb; ++ic) {
      const S* in_base = in + std::size_t(ic) * bn;
      S* wk = gw + (std::size_t(oc) * cb + ic) * 27;
      S acc[27] = {};
      for (int sz = 0; sz < sd.nz; ++sz) {
        for (int kz = 0; kz < 3; ++kz) {
          const int bz = 2 * sz - 1 + kz;
          if (bz < 0) continue;
          for (int sy = 0; sy < sd.ny; ++sy) {
            const S* grow = go_base + (std::size_t(sz) * sd.ny + sy) * sd.nx;
            for (int ky = 0; ky < 3; ++ky) {
              const int by = 2 * sy - 1 + ky;
              if (by < 0) continue;
              const S* irow = in_base + (std::size_t(bz) * bd.ny + by) * bd.nx;
              S a0 = 0, a1 = 0, a2 = 0;
              a1 += grow[0] * irow[0];
              a2 += grow[0] * irow[1];
              for (int sx = 1; sx < sd.nx; ++sx) {
                const S g = grow[sx];
                const S* p = irow + 2 * sx - 1;
                a0 += g * p[0];
                a1 += g * p[1];
                a2 += g * p[2];
              }
              acc[kz * 9 + ky * 3 + 0] += a0;
              acc[kz * 9 + ky * 3 + 1] += a1;
              acc[kz * 9 + ky * 3 + 2] += a2;
            }
          }
        }
      }
      for (int k = 0; k < 27; ++k) wk[k] += acc[k];
    }
  }
}

template <class S>
void channel_sums(const S* grad, Dims3 d, int channels, S* gb) {
  const std::size_t n = d.count();
  for (int c = 0; c < channels; ++c) {
    const S* base = grad + std::size_t(c) * n;
    S acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += base[i];
    gb[c] += acc;
  }
}

// y = W x + b with W stored row-major [rows][cols]
template <class S>
void dense_fwd(const S* w, const S* b, const S* x, int rows, int cols, S* y) {
  for (int r = 0; r < rows; ++r) {
    const S* wr = w + std::size_t(r) * cols;
    S acc = b ? b[r] : S(0);
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// gx += W^T gy, gw += gy x^T, gb += gy
template <class S>
void dense_bwd(const S* w, const S* x, const S* gy, int rows, int cols, S* gx,
               S* gw, S* gb) {
  for (int r = 0; r < rows; ++r) {
    const S g = gy[r];
    const S* wr = w + std::size_t(r) * cols;
    S* gwr = gw + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) {
      gx[c] += wr[c] * g;
      gwr[c] += g * x[c];
    }
    if (gb) gb[r] += g;
  }
}

template <class S>
void relu_inplace(std::vector<S>& v) {
  for (S& x : v)
    if (x < S(0)) x = S(0);
}

template <class S>
void relu_mask(std::vector<S>& grad, const std::vector<S>& act) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (act[i] <= S(0)) grad[i] = S(0);
}

template <class S>
struct Workspace {
  std::vector<S> x, e1, e2, e3;       // encoder activations (post-relu)
  std::vector<S> mu, lv, z;           // heads
  std::vector<S> d0, d1, d2, y;       // decoder activations; y post-sigmoid
  std::vector<S> gy, gd2, gd1, gd0;   // gradients, mirrored
  std::vector<S> gz, gmu, glv, ge3, ge2, ge1;

  void resize(const StageDims& s, int latent) {
    x.assign(s.s0.count(), S(0));
    e1.assign(std::size_t(s.c1) * s.s1.count(), S(0));
    e2.assign(std::size_t(s.c2) * s.s2.count(), S(0));
    e3.assign(s.flat, S(0));
    mu.assign(latent, S(0));
    lv.assign(latent, S(0));
    z.assign(latent, S(0));
    d0.assign(s.flat, S(0));
    d1.assign(e2.size(), S(0));
    d2.assign(e1.size(), S(0));
    y.assign(x.size(), S(0));
    gy.assign(x.size(), S(0));
    gd2.assign(e1.size(), S(0));
    gd1.assign(e2.size(), S(0));
    gd0.assign(s.flat, S(0));
    gz.assign(latent, S(0));
    gmu.assign(latent, S(0));
    glv.assign(latent, S(0));
    ge3.assign(s.flat, S(0));
    ge2.assign(e2.size(), S(0));
    ge1.assign(e1.size(), S(0));
  }
};

template <class S>
void zero_params(ParamsBase<S>& p) {
  for (auto* t : p.all()) std::fill(t->begin(), t->end(), S(0));
}

template <class S>
ParamsBase<S> make_like(const ModelConfig& cfg) {
  ParamsBase<S> p;
  auto shapes = tensor_shapes(cfg);
  auto ptrs = p.all();
  for (std::size_t i = 0; i < ptrs.size(); ++i)
    ptrs[i]->assign(shapes[i].count, S(0));
  return p;
}

template <class A, class B>
void copy_params(const ParamsBase<A>& src, ParamsBase<B>& dst) {
  auto sp = src.all();
  auto dp = dst.all();
  for (std::size_t i = 0; i < sp.size(); ++i) {
    dp[i]->resize(sp[i]->size());
    for (std::size_t j = 0; j < sp[i]->size(); ++j)
      (*dp[i])[j] = B((*sp[i])[j]);
  }
}

template <class S>
void encoder_fwd(const StageDims& s, int latent, const ParamsBase<S>& p,
                 Workspace<S>& ws) {
  conv_gather(ws.x.data(), s.s0, 1, p.enc1_w.data(), p.enc1_b.data(),
              ws.e1.data(), s.s1, s.c1);
  relu_inplace(ws.e1);
  conv_gather(ws.e1.data(), s.s1, s.c1, p.enc2_w.data(), p.enc2_b.data(),
              ws.e2.data(), s.s2, s.c2);
  relu_inplace(ws.e2);
  conv_gather(ws.e2.data(), s.s2, s.c2, p.enc3_w.data(), p.enc3_b.data(),
              ws.e3.data(), s.s3, s.c3);
  relu_inplace(ws.e3);
  dense_fwd(p.mu_w.data(), p.mu_b.data(), ws.e3.data(), latent, int(s.flat),
            ws.mu.data());
  dense_fwd(p.logvar_w.data(), p.logvar_b.data(), ws.e3.data(), latent,
            int(s.flat), ws.lv.data());
}

template <class S>
void decoder_fwd(const StageDims& s, int latent, const ParamsBase<S>& p,
                 Workspace<S>& ws) {
  dense_fwd(p.dec0_w.data(), p.dec0_b.data(), ws.z.data(), int(s.flat),
            latent, ws.d0.data());
  relu_inplace(ws.d0);
  conv_scatter(ws.d0.data(), s.s3, s.c3, p.dec1_w.data(), p.dec1_b.data(),
               ws.d1.data(), s.s2, s.c2);
  relu_inplace(ws.d1);
  conv_scatter(ws.d1.data(), s.s2, s.c2, p.dec2_w.data(), p.dec2_b.data(),
               ws.d2.data(), s.s1, s.c1);
  relu_inplace(ws.d2);
  conv_scatter(ws.d2.data(), s.s1, s.c1, p.dec3_w.data(), p.dec3_b.data(),
               ws.y.data(), s.s0, 1);
  for (S& v : ws.y) v = S(1) / (S(1) + std::exp(-v));
}

// eps == nullptr means the posterior mean (z = mu)
template <class S>
void forward(const StageDims& s, int latent, const ParamsBase<S>& p,
             Workspace<S>& ws, const S* eps) {
  encoder_fwd(s, latent, p, ws);
  for (int l = 0; l < latent; ++l) {
    const S e = eps ? eps[l] : S(0);
    ws.z[l] = ws.mu[l] + std::exp(ws.lv[l] / S(2)) * e;
  }
  decoder_fwd(s, latent, p, ws);
}

template <class S>
LossParts loss_from_ws(double beta, int latent, const Workspace<S>& ws) {
  LossParts out;
  double recon = 0.0;
  for (std::size_t i = 0; i < ws.y.size(); ++i) {
    const double d = double(ws.y[i]) - double(ws.x[i]);
    recon += d * d;
  }
  double kl = 0.0;
  for (int l = 0; l < latent; ++l) {
    const double m = ws.mu[l], v = ws.lv[l];
    kl += -0.5 * (1.0 + v - m * m - std::exp(v));
  }
  out.recon = recon;
  out.kl = kl;
  out.total = recon + beta * kl;
  return out;
}

// gradients of recon + beta*kl; accumulates into g (caller zeroes)
template <class S>
void backward(const StageDims& s, int latent, double beta,
              const ParamsBase<S>& p, Workspace<S>& ws, const S* eps,
              ParamsBase<S>& g) {
  const S b = S(beta);
  for (std::size_t i = 0; i < ws.y.size(); ++i) {
    const S y = ws.y[i];
    ws.gy[i] = S(2) * (y - ws.x[i]) * y * (S(1) - y);
  }
  // output layer: scatter from d2 (shallowest decoder stage) to the volume
  channel_sums(ws.gy.data(), s.s0, 1, g.dec3_b.data());
  conv_grad_w(ws.gy.data(), s.s0, 1, ws.d2.data(), s.s1, s.c1,
              g.dec3_w.data(), static_cast<S*>(nullptr));
  conv_gather(ws.gy.data(), s.s0, 1, p.dec3_w.data(),
              static_cast<const S*>(nullptr), ws.gd2.data(), s.s1, s.c1);
  relu_mask(ws.gd2, ws.d2);

  channel_sums(ws.gd2.data(), s.s1, s.c1, g.dec2_b.data());
  conv_grad_w(ws.gd2.data(), s.s1, s.c1, ws.d1.data(), s.s2, s.c2,
              g.dec2_w.data(), static_cast<S*>(nullptr));
  conv_gather(ws.gd2.data(), s.s1, s.c1, p.dec2_w.data(),
              static_cast<const S*>(nullptr), ws.gd1.data(), s.s2, s.c2);
  relu_mask(ws.gd1, ws.d1);

  channel_sums(ws.gd1.data(), s.s2, s.c2, g.dec1_b.data());
  conv_grad_w(ws.gd1.data(), s.s2, s.c2, ws.d0.data(), s.s3, s.c3,
              g.dec1_w.data(), static_cast<S*>(nullptr));
  conv_gather(ws.gd1.data(), s.s2, s.c2, p.dec1_w.data(),
              static_cast<const S*>(nullptr), ws.gd0.data(), s.s3, s.c3);
  relu_mask(ws.gd0, ws.d0);

  std::fill(ws.gz.begin(), ws.gz.end(), S(0));
  dense_bwd(p.dec0_w.data(), ws.z.data(), ws.gd0.data(), int(s.flat), latent,
            ws.gz.data(), g.dec0_w.data(), g.dec0_b.data());

  for (int l = 0; l < latent; ++l) {
    const S e = eps ? eps[l] : S(0);
    const S sd = std::exp(ws.lv[l] / S(2));
    ws.gmu[l] = ws.gz[l] + b * ws.mu[l];
    ws.glv[l] = ws.gz[l] * e * sd / S(2) +
                b * (std::exp(ws.lv[l]) - S(1)) / S(2);
  }

  std::fill(ws.ge3.begin(), ws.ge3.end(), S(0));
  dense_bwd(p.mu_w.data(), ws.e3.data(), ws.gmu.data(), latent, int(s.flat),
            ws.ge3.data(), g.mu_w.data(), g.mu_b.data());
  dense_bwd(p.logvar_w.data(), ws.e3.data(), ws.glv.data(), latent,
            int(s.flat), ws.ge3.data(), g.logvar_w.data(), g.logvar_b.data());
  relu_mask(ws.ge3, ws.e3);

  conv_grad_w(ws.e2.data(), s.s2, s.c2, ws.ge3.data(), s.s3, s.c3,
              g.enc3_w.data(), g.enc3_b.data());
  conv_scatter(ws.ge3.data(), s.s3, s.c3, p.enc3_w.data(),
               static_cast<const S*>(nullptr), ws.ge2.data(), s.s2, s.c2);
  relu_mask(ws.ge2, ws.e2);

  conv_grad_w(ws.e1.data(), s.s1, s.c1, ws.ge2.data(), s.s2, s.c2,
              g.enc2_w.data(), g.enc2_b.data());
  conv_scatter(ws.ge2.data(), s.s2, s.c2, p.enc2_w.data(),
               static_cast<const S*>(nullptr), ws.ge1.data(), s.s1, s.c1);
  relu_mask(ws.ge1, ws.e1);

  conv_grad_w(ws.x.data(), s.s0, 1, ws.ge1.data(), s.s1, s.c1,
              g.enc1_w.data(), g.enc1_b.data());
}

template <class S>
void load_input(const ScalarGrid& g, std::vector<S>& dst) {
  dst.resize(g.data.size());
  for (std::size_t i = 0; i < g.data.size(); ++i) dst[i] = S(g.data[i]);
}

template <class S>
LossParts loss_full(const ModelConfig& cfg, const ParamsBase<S>& p,
                    const ScalarGrid& x, const S* eps, Workspace<S>& ws) {
  const StageDims s = stage_dims(cfg);
  load_input(x, ws.x);
  forward(s, cfg.latent_dim, p, ws, eps);
  return loss_from_ws(cfg.beta, cfg.latent_dim, ws);
}

void check_input_dims(const ModelConfig& cfg, const ScalarGrid& g,
                      const char* what) {
  if (!(g.dims == cfg.input_dims))
    throw RangeError(std::string(what) + ": dims " + to_string(g.dims) +
                     " do not match model input " +
                     to_string(cfg.input_dims));
}

struct AdamState {
  std::vector<std::vector<float>> m, v;
  long step = 0;

  explicit AdamState(const ModelConfig& cfg) {
    auto shapes = tensor_shapes(cfg);
    m.resize(shapes.size());
    v.resize(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      m[i].assign(shapes[i].count, 0.0f);
      v[i].assign(shapes[i].count, 0.0f);
    }
  }

  void update(Parameters& p, const Parameters& g, double lr) {
    ++step;
    const double bc1 = 1.0 - std::pow(0.9, double(step));
    const double bc2 = 1.0 - std::pow(0.999, double(step));
    auto pp = p.all();
    auto gp = g.all();
    for (std::size_t i = 0; i < pp.size(); ++i) {
      float* pv = pp[i]->data();
      const float* gv = gp[i]->data();
      float* mv = m[i].data();
      float* vv = v[i].data();
      const std::size_t n = pp[i]->size();
      for (std::size_t j = 0; j < n; ++j) {
        mv[j] = 0.9f * mv[j] + 0.1f * gv[j];
        vv[j] = 0.999f * vv[j] + 0.001f * gv[j] * gv[j];
        const double mh = double(mv[j]) / bc1;
        const double vh = double(vv[j]) / bc2;
        pv[j] -= float(lr * mh / (std::sqrt(vh) + 1e-8));
      }
    }
  }
};

// run fn(slot, worker) for slot in [0, count); outputs must be slot-indexed
// so results are identical for any worker count
void run_slots(int count, int threads, const std::function<void(int, int)>& fn) {
  const int nt = std::max(1, std::min(threads, count));
  if (nt == 1) {
    for (int s = 0; s < count; ++s) fn(s, 0);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      for (int s = next.fetch_add(1); s < count; s = next.fetch_add(1))
        fn(s, t);
    });
  for (auto& th : pool) th.join();
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 24) & 0xff));
}

void put_f32(std::string& s, float f) {
  put_u32(s, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32(const std::string& s, std::size_t& off) {
  const auto b = [&](int i) {
    return std::uint32_t(std::uint8_t(s[off + i]));
  };
  const std::uint32_t v = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
  off += 4;
  return v;
}

constexpr char kCheckpointMagic[9] = "FVAE0001";

std::filesystem::path sidecar_path(std::filesystem::path p) {
  p.replace_extension(".json");
  return p;
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{
      {"input_dims", {cfg.input_dims.nx, cfg.input_dims.ny, cfg.input_dims.nz}},
      {"channels", {cfg.channels[0], cfg.channels[1], cfg.channels[2]}},
      {"kernel", cfg.kernel},
      {"stride", cfg.stride},
      {"latent_dim", cfg.latent_dim},
      {"beta", cfg.beta},
      {"learning_rate", cfg.learning_rate},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"seed", cfg.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  try {
    const auto& d = j.at("input_dims");
    cfg.input_dims = {d.at(0).get<int>(), d.at(1).get<int>(),
                      d.at(2).get<int>()};
    const auto& c = j.at("channels");
    cfg.channels = {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()};
    cfg.kernel = j.at("kernel").get<int>();
    cfg.stride = j.at("stride").get<int>();
    cfg.latent_dim = j.at("latent_dim").get<int>();
    cfg.beta = j.at("beta").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config json: ") + e.what());
  }
  return cfg;
}

}  // namespace

void validate(const ModelConfig& cfg) {
  const auto& d = cfg.input_dims;
  if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
    throw ConfigError("input_dims must be positive, got " + to_string(d));
  if (d.nx % 8 || d.ny % 8 || d.nz % 8)
    throw ConfigError("input_dims must be divisible by 8 (three stride-2 "
                      "halvings), got " + to_string(d));
  for (int c : cfg.channels)
    if (c <= 0) throw ConfigError("channels must be positive");
  if (cfg.kernel != 3) throw ConfigError("kernel must be 3");
  if (cfg.stride != 2) throw ConfigError("stride must be 2");
  if (cfg.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (cfg.beta < 0.0) throw ConfigError("beta must be >= 0");
  if (!(cfg.learning_rate > 0.0))
    throw ConfigError("learning_rate must be > 0");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::vector<TensorShape> tensor_shapes(const ModelConfig& cfg) {
  const StageDims s = stage_dims(cfg);
  const int L = cfg.latent_dim, F = int(s.flat);
  auto conv = [](const char* name, int co, int ci) {
    return TensorShape{name, {co, ci, 3, 3, 3}, std::size_t(co) * ci * 27};
  };
  auto vec = [](const char* name, int n) {
    return TensorShape{name, {n}, std::size_t(n)};
  };
  auto mat = [](const char* name, int r, int c) {
    return TensorShape{name, {r, c}, std::size_t(r) * c};
  };
  return {conv("enc1_w", s.c1, 1),    vec("enc1_b", s.c1),
          conv("enc2_w", s.c2, s.c1), vec("enc2_b", s.c2),
          conv("enc3_w", s.c3, s.c2), vec("enc3_b", s.c3),
          mat("mu_w", L, F),          vec("mu_b", L),
          mat("logvar_w", L, F),      vec("logvar_b", L),
          mat("dec0_w", F, L),        vec("dec0_b", F),
          conv("dec1_w", s.c3, s.c2), vec("dec1_b", s.c2),
          conv("dec2_w", s.c2, s.c1), vec("dec2_b", s.c1),
          conv("dec3_w", s.c1, 1),    vec("dec3_b", 1)};
}

Parameters init_parameters(const ModelConfig& cfg) {
  validate(cfg);
  const StageDims s = stage_dims(cfg);
  Parameters p = make_like<float>(cfg);
  Rng rng(derive_seed(cfg.seed, "init", 0));
  auto fill_normal = [&](std::vector<float>& v, double sd) {
    for (float& x : v) x = float(rng.normal(0.0, sd));
  };
  // He-style scales; scatter convs see roughly 1/8 of the taps per output
  fill_normal(p.enc1_w, std::sqrt(2.0 / (1 * 27.0)));
  fill_normal(p.enc2_w, std::sqrt(2.0 / (s.c1 * 27.0)));
  fill_normal(p.enc3_w, std::sqrt(2.0 / (s.c2 * 27.0)));
  fill_normal(p.mu_w, 0.01);
  fill_normal(p.logvar_w, 0.01);
  fill_normal(p.dec0_w, std::sqrt(2.0 / cfg.latent_dim));
  fill_normal(p.dec1_w, std::sqrt(16.0 / (s.c3 * 27.0)));
  fill_normal(p.dec2_w, std::sqrt(16.0 / (s.c2 * 27.0)));
  fill_normal(p.dec3_w, std::sqrt(16.0 / (s.c1 * 27.0)));
  // start the output near the sparse-volume background level
  std::fill(p.dec3_b.begin(), p.dec3_b.end(), -3.0f);
  return p;
}

LatentCode encode(const ModelConfig& cfg, const Parameters& p,
                  const NormalizedMap& x) {
  validate(cfg);
  check_input_dims(cfg, x.grid, "encode");
  const StageDims s = stage_dims(cfg);
  Workspace<float> ws;
  ws.resize(s, cfg.latent_dim);
  load_input(x.grid, ws.x);
  encoder_fwd(s, cfg.latent_dim, p, ws);
  LatentCode code;
  code.mu.assign(ws.mu.begin(), ws.mu.end());
  code.logvar.assign(ws.lv.begin(), ws.lv.end());
  return code;
}

ScalarGrid decode(const ModelConfig& cfg, const Parameters& p,
                  const std::vector<double>& z, Vec3f voxel_mm) {
  validate(cfg);
  if (int(z.size()) != cfg.latent_dim)
    throw RangeError("decode: z has " + std::to_string(z.size()) +
                     " entries, latent_dim is " +
                     std::to_string(cfg.latent_dim));
  const StageDims s = stage_dims(cfg);
  Workspace<float> ws;
  ws.resize(s, cfg.latent_dim);
  for (int l = 0; l < cfg.latent_dim; ++l) ws.z[l] = float(z[l]);
  decoder_fwd(s, cfg.latent_dim, p, ws);
  ScalarGrid out;
  out.dims = cfg.input_dims;
  out.voxel_mm = voxel_mm;
  out.data.assign(ws.y.begin(), ws.y.end());
  return out;
}

std::vector<double> reparameterize(const LatentCode& code,
                                   const std::vector<double>& eps) {
  if (eps.size() != code.mu.size() || code.logvar.size() != code.mu.size())
    throw RangeError("reparameterize: size mismatch");
  std::vector<double> z(code.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = code.mu[i] + std::exp(code.logvar[i] / 2.0) * eps[i];
  return z;
}

double kl_divergence(const LatentCode& code) {
  if (code.logvar.size() != code.mu.size())
    throw RangeError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < code.mu.size(); ++i) {
    const double m = code.mu[i], v = code.logvar[i];
    kl += -0.5 * (1.0 + v - m * m - std::exp(v));
  }
  return kl;
}

LossParts loss(const ModelConfig& cfg, const Parameters& p,
               const NormalizedMap& x, const std::vector<double>& eps) {
  validate(cfg);
  check_input_dims(cfg, x.grid, "loss");
  if (int(eps.size()) != cfg.latent_dim)
    throw RangeError("loss: eps has " + std::to_string(eps.size()) +
                     " entries, latent_dim is " +
                     std::to_string(cfg.latent_dim));
  const StageDims s = stage_dims(cfg);
  Workspace<float> ws;
  ws.resize(s, cfg.latent_dim);
  std::vector<float> ef(eps.begin(), eps.end());
  return loss_full(cfg, p, x.grid, ef.data(), ws);
}

double reconstruction_error(const ModelConfig& cfg, const Parameters& p,
                            const NormalizedMap& x) {
  validate(cfg);
  check_input_dims(cfg, x.grid, "reconstruction_error");
  const StageDims s = stage_dims(cfg);
  Workspace<float> ws;
  ws.resize(s, cfg.latent_dim);
  return loss_full(cfg, p, x.grid, static_cast<const float*>(nullptr), ws)
      .recon;
}

TrainResult train(const ModelConfig& cfg,
                  const std::vector<NormalizedMap>& train_set,
                  const std::vector<NormalizedMap>& val_set,
                  const TrainOptions& opt) {
  validate(cfg);
  if (train_set.empty() || val_set.empty())
    throw RangeError("train: empty train or validation set");
  for (const auto& m : train_set) check_input_dims(cfg, m.grid, "train sample");
  for (const auto& m : val_set) check_input_dims(cfg, m.grid, "val sample");
  if (opt.augment_mask &&
      !(opt.augment_mask->mask.dims == cfg.input_dims))
    throw RangeError("train: augmentation mask dims do not match input");

  const StageDims s = stage_dims(cfg);
  const int N = int(train_set.size());
  const int B = std::min(cfg.batch_size, N);
  const int T = std::max(1, std::min(opt.threads, B));

  TrainResult result;
  result.params = init_parameters(cfg);
  result.report.seed = cfg.seed;
  AdamState adam(cfg);
  Parameters batch_grad = make_like<float>(cfg);

  std::vector<Workspace<float>> ws(T);
  for (auto& w : ws) w.resize(s, cfg.latent_dim);
  std::vector<Parameters> slot_grad;
  slot_grad.reserve(B);
  for (int b = 0; b < B; ++b) slot_grad.push_back(make_like<float>(cfg));
  std::vector<LossParts> slot_loss(B);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<int> order(N);
  for (int i = 0; i < N; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order_rng(derive_seed(cfg.seed, "order", std::uint64_t(epoch)));
    order_rng.shuffle(order);

    double tr_recon = 0.0, tr_kl = 0.0, tr_total = 0.0;
    for (int start = 0; start < N; start += B) {
      const int bn = std::min(B, N - start);
      run_slots(bn, T, [&](int slot, int worker) {
        const int idx = order[start + slot];
        Rng rs(derive_seed(cfg.seed, "sample",
                           std::uint64_t(epoch) * std::uint64_t(N) +
                               std::uint64_t(idx)));
        Workspace<float>& w = ws[worker];
        if (opt.augment_mask) {
          NormalizedMap aug = augment(train_set[idx], *opt.augment_mask,
                                      opt.augment_deg, rs);
          load_input(aug.grid, w.x);
        } else {
          load_input(train_set[idx].grid, w.x);
        }
        std::vector<float> eps(cfg.latent_dim);
        for (float& e : eps) e = float(rs.normal());
        forward(s, cfg.latent_dim, result.params, w, eps.data());
        slot_loss[slot] = loss_from_ws(cfg.beta, cfg.latent_dim, w);
        zero_params(slot_grad[slot]);
        backward(s, cfg.latent_dim, cfg.beta, result.params, w, eps.data(),
                 slot_grad[slot]);
      });
      // fixed reduction order: slot 0..bn-1, so results do not depend on T
      zero_params(batch_grad);
      auto bg = batch_grad.all();
      const float inv = 1.0f / float(bn);
      for (int slot = 0; slot < bn; ++slot) {
        auto sg = slot_grad[slot].all();
        for (std::size_t t = 0; t < bg.size(); ++t) {
          float* dst = bg[t]->data();
          const float* src = sg[t]->data();
          for (std::size_t j = 0; j < bg[t]->size(); ++j)
            dst[j] += src[j] * inv;
        }
        tr_recon += slot_loss[slot].recon;
        tr_kl += slot_loss[slot].kl;
        tr_total += slot_loss[slot].total;
      }
      adam.update(result.params, batch_grad, cfg.learning_rate);
    }

    std::vector<LossParts> val_loss(val_set.size());
    run_slots(int(val_set.size()), T, [&](int i, int worker) {
      Workspace<float>& w = ws[worker];
      val_loss[i] = loss_full(cfg, result.params, val_set[i].grid,
                              static_cast<const float*>(nullptr), w);
    });
    double va_recon = 0.0, va_kl = 0.0, va_total = 0.0;
    for (const auto& l : val_loss) {
      va_recon += l.recon;
      va_kl += l.kl;
      va_total += l.total;
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.train_recon = tr_recon / N;
    st.train_kl = tr_kl / N;
    st.train_total = tr_total / N;
    st.val_recon = va_recon / val_set.size();
    st.val_kl = va_kl / val_set.size();
    st.val_total = va_total / val_set.size();
    if (!std::isfinite(st.train_total) || !std::isfinite(st.val_total))
      throw Error("training diverged (non-finite loss) at epoch " +
                  std::to_string(epoch));
    result.report.epochs.push_back(st);
    if (opt.verbose)
      std::fprintf(stderr,
                   "epoch %3d  train recon %.2f kl %.3f total %.2f  "
                   "val recon %.2f total %.2f\n",
                   st.epoch, st.train_recon, st.train_kl, st.train_total,
                   st.val_recon, st.val_total);
  }

  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

double grad_check(const ModelConfig& cfg, const Parameters& p,
                  const NormalizedMap& x, const GradCheckOptions& opt) {
  validate(cfg);
  check_input_dims(cfg, x.grid, "grad_check");
  const StageDims s = stage_dims(cfg);

  ParamsBase<double> pd;
  copy_params(p, pd);
  Workspace<double> ws;
  ws.resize(s, cfg.latent_dim);

  Rng eps_rng(derive_seed(opt.seed, "eps", 0));
  std::vector<double> eps(cfg.latent_dim);
  for (double& e : eps) e = eps_rng.normal();

  load_input(x.grid, ws.x);
  forward(s, cfg.latent_dim, pd, ws, eps.data());
  ParamsBase<double> grad = make_like<double>(cfg);
  backward(s, cfg.latent_dim, cfg.beta, pd, ws, eps.data(), grad);

  const auto shapes = tensor_shapes(cfg);
  std::size_t total = 0;
  for (const auto& sh : shapes) total += sh.count;
  Rng pick_rng(derive_seed(opt.seed, "pick", 0));
  const std::size_t want = std::min<std::size_t>(std::max(opt.count, 1), total);
  const auto picks = pick_rng.sample_without_replacement(total, want);

  auto tensors = pd.all();
  auto grads = grad.all();
  double worst = 0.0;
  for (std::size_t flat : picks) {
    std::size_t ti = 0, off = flat;
    while (off >= shapes[ti].count) {
      off -= shapes[ti].count;
      ++ti;
    }
    double analytic = (*grads[ti])[off];
    if (opt.corrupt) analytic *= 1.01;
    double& slot = (*tensors[ti])[off];
    const double saved = slot;
    slot = saved + opt.h;
    const double lp = loss_full(cfg, pd, x.grid, eps.data(), ws).total;
    slot = saved - opt.h;
    const double lm = loss_full(cfg, pd, x.grid, eps.data(), ws).total;
    slot = saved;
    const double numeric = (lp - lm) / (2.0 * opt.h);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Parameters& p) {
  validate(cfg);
  const auto shapes = tensor_shapes(cfg);
  auto tensors = p.all();
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (tensors[i]->size() != shapes[i].count)
      throw RangeError("save_checkpoint: tensor " + shapes[i].name +
                       " has wrong size");

  std::string buf;
  std::size_t payload = 0;
  for (const auto& sh : shapes) payload += sh.count * 4;
  buf.reserve(payload + 1024);
  buf.append(kCheckpointMagic, 8);
  put_u32(buf, std::uint32_t(shapes.size()));
  for (const auto& sh : shapes) {
    put_u32(buf, std::uint32_t(sh.dims.size()));
    for (int d : sh.dims) put_u32(buf, std::uint32_t(d));
  }
  for (const auto* t : tensors)
    for (float v : *t) put_f32(buf, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw IoError("short write to " + path.string());
  out.close();

  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side)
    throw IoError("cannot open " + sidecar_path(path).string() +
                  " for writing");
  side << config_to_json(cfg).dump(2) << "\n";
  if (!side) throw IoError("short write to " + sidecar_path(path).string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side)
    throw IoError("cannot open " + sidecar_path(path).string());
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad model config json: ") + e.what());
  }
  Checkpoint ck;
  ck.config = config_from_json(j);
  validate(ck.config);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  const auto shapes = tensor_shapes(ck.config);
  std::size_t off = 0;
  if (buf.size() < 12 || buf.compare(0, 8, kCheckpointMagic, 8) != 0)
    throw FormatError(path.string() + ": not a model checkpoint");
  off = 8;
  const std::uint32_t n_tensors = get_u32(buf, off);
  if (n_tensors != shapes.size())
    throw FormatError(path.string() + ": expected " +
                      std::to_string(shapes.size()) + " tensors, found " +
                      std::to_string(n_tensors));
  for (const auto& sh : shapes) {
    if (off + 4 > buf.size()) throw FormatError(path.string() + ": truncated");
    const std::uint32_t rank = get_u32(buf, off);
    if (rank != sh.dims.size() || off + 4 * rank > buf.size())
      throw FormatError(path.string() + ": tensor " + sh.name +
                        " has unexpected shape");
    for (std::size_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = get_u32(buf, off);
      if (int(dim) != sh.dims[d])
        throw FormatError(path.string() + ": tensor " + sh.name +
                          " has unexpected shape");
    }
  }
  std::size_t payload = 0;
  for (const auto& sh : shapes) payload += sh.count * 4;
  if (buf.size() - off != payload)
    throw FormatError(path.string() + ": payload size mismatch");

  ck.params = make_like<float>(ck.config);
  auto tensors = ck.params.all();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    float* dst = tensors[i]->data();
    for (std::size_t k = 0; k < shapes[i].count; ++k)
      dst[k] = std::bit_cast<float>(get_u32(buf, off));
  }
  return ck;
}

void write_train_report_csv(const std::filesystem::path& path,
                            const TrainReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,recon,kl,total,split\n";
  char line[256];
  for (const auto& e : report.epochs) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,train\n", e.epoch,
                  e.train_recon, e.train_kl, e.train_total);
    out << line;
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,val\n", e.epoch,
                  e.val_recon, e.val_kl, e.val_total);
    out << line;
  }
  if (!out) throw IoError("short write to " + path.string());
}

GridSearchResult grid_search(const ModelConfig& base,
                             const std::vector<double>& betas,
                             const std::vector<int>& latent_dims,
                             const std::vector<NormalizedMap>& train_set,
                             const std::vector<NormalizedMap>& val_set,
                             const std::vector<NormalizedMap>& proxy_outliers,
                             const TrainOptions& opt, int svm_folds) {
  if (betas.empty() || latent_dims.empty())
    throw ConfigError("grid_search: empty beta or latent_dim scan");
  if (val_set.size() < 2 || proxy_outliers.size() < 2)
    throw RangeError("grid_search: need >= 2 validation and >= 2 proxy "
                     "outlier subjects");

  GridSearchResult out;
  std::vector<Parameters> trained;
  for (double beta : betas) {
    for (int latent : latent_dims) {
      ModelConfig cfg = base;
      cfg.beta = beta;
      cfg.latent_dim = latent;
      validate(cfg);
      TrainResult tr = train(cfg, train_set, val_set, opt);

      double recon = 0.0;
      for (const auto& v : val_set)
        recon += reconstruction_error(cfg, tr.params, v);
      recon /= double(val_set.size());

      FeatureMatrix X;
      std::vector<int> y;
      for (const auto& v : val_set) {
        X.push_back(encode(cfg, tr.params, v).mu);
        y.push_back(0);
      }
      for (const auto& o : proxy_outliers) {
        X.push_back(encode(cfg, tr.params, o).mu);
        y.push_back(1);
      }
      const double auc =
          linear_svm_cv(X, y, svm_folds, derive_seed(base.seed, "gridsvm", 0))
              .auc;
      out.rows.push_back({beta, latent, recon, auc, false});
    }
  }

  double best_recon = out.rows.front().val_recon;
  for (const auto& r : out.rows) best_recon = std::min(best_recon, r.val_recon);
  int best = -1;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    auto& r = out.rows[i];
    r.eligible = r.val_recon <= 1.25 * best_recon;
    if (r.eligible && (best < 0 || r.auc > out.rows[best].auc)) best = int(i);
  }
  out.best = base;
  out.best.beta = out.rows[best].beta;
  out.best.latent_dim = out.rows[best].latent_dim;
  return out;
}

}  // namespace fold
