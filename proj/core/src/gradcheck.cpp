#include "splinediff/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "splinediff/bspline.hpp"
#include "splinediff/conditioning.hpp"
#include "splinediff/denoiser.hpp"
#include "splinediff/kan.hpp"

namespace splinediff {

namespace {

// Mixed tolerance: err = |fd - an| / max(|fd|, |an|, floor). The floor keeps
// finite-difference noise on near-zero gradients from reading as error.
double mixed_err(double fd, double an, double floor_val) {
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor_val});
}

struct SuiteAccum {
  FdSuiteResult result;
  double floor_val;

  SuiteAccum(std::string name, double tol, double floor_val)
      : floor_val(floor_val) {
    result.name = std::move(name);
    result.tolerance = tol;
  }

  void record(double fd, double an) {
    result.max_err = std::max(result.max_err, mixed_err(fd, an, floor_val));
    ++result.checked;
  }

  FdSuiteResult finish() {
    result.pass = result.max_err <= result.tolerance;
    return result;
  }
};

// --- spline basis derivative vs central differences -------------------------

FdSuiteResult spline_suite(std::uint64_t seed) {
  SuiteAccum acc("spline.basis_deriv", 1e-6, 1.0);  // absolute error contract
  KnotGrid grid = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  Rng rng = Rng(seed).fork(101);
  const double h = 1e-6;
  for (int probe = 0; probe < 1000; ++probe) {
    const double x = rng.uniform(grid.lo + 1e-3, grid.hi - 1e-3);
    TensorD d = basis_deriv(grid, x);
    TensorD up = basis_eval(grid, x + h);
    TensorD dn = basis_eval(grid, x - h);
    for (std::size_t i = 0; i < d.numel(); ++i) {
      const double fd = (up[i] - dn[i]) / (2.0 * h);
      acc.result.max_err = std::max(acc.result.max_err, std::abs(fd - d[i]));
      ++acc.result.checked;
    }
  }
  return acc.finish();
}

// --- generic parameter FD against a scalar loss -----------------------------

void fd_params(std::span<double* const> values, std::span<const std::size_t> sizes,
               const std::function<double()>& loss_fn,
               const std::function<double(std::size_t, std::size_t)>& analytic,
               SuiteAccum& acc, double h) {
  for (std::size_t pi = 0; pi < values.size(); ++pi) {
    for (std::size_t k = 0; k < sizes[pi]; ++k) {
      double& theta = values[pi][k];
      const double keep = theta;
      theta = keep + h;
      const double up = loss_fn();
      theta = keep - h;
      const double dn = loss_fn();
      theta = keep;
      acc.record((up - dn) / (2.0 * h), analytic(pi, k));
    }
  }
}

// --- KAN networks ------------------------------------------------------------

FdSuiteResult kan_suite(std::uint64_t seed, bool corrupt) {
  SuiteAccum acc("kan.network", 1e-4, 1e-4);
  Rng rng = Rng(seed).fork(202);
  KnotGrid grid = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  struct Case {
    std::vector<int> widths;
    int probes;
  };
  const Case cases[] = {{{4, 4, 4, 2}, 50}, {{8, 8}, 50}};
  bool corrupt_pending = corrupt;
  for (const Case& cs : cases) {
    KanNetwork<double> net = init_kan<double>(rng, cs.widths, grid);
    // richer-than-default coefficients so spline terms carry real signal
    for (auto& layer : net.layers) {
      for (int j = 0; j < layer.n_out(); ++j) {
        for (int p = 0; p < layer.n_in(); ++p) {
          double* c = layer.coef(j, p);
          for (std::size_t i = 0; i < layer.nb(); ++i) c[i] = rng.normal() * 0.5;
          layer.base_w(j, p) = rng.normal();
          layer.spline_w(j, p) = rng.normal();
        }
      }
    }
    const int n_in = cs.widths.front();
    const int n_out = cs.widths.back();
    for (int probe = 0; probe < cs.probes; ++probe) {
      TensorD x({1, static_cast<std::size_t>(n_in)});
      for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.normal();
      TensorD w({static_cast<std::size_t>(n_out)});
      for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal();

      auto loss_fn = [&]() {
        KanNetworkCache<double> cache;
        TensorD out = kan_forward(net, x, cache);
        double acc_l = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) acc_l += w[i] * out[i];
        return acc_l;
      };
      for (auto& layer : net.layers) layer.zero_grads();
      KanNetworkCache<double> cache;
      TensorD out = kan_forward(net, x, cache);
      TensorD gout({1, static_cast<std::size_t>(n_out)});
      for (std::size_t i = 0; i < gout.numel(); ++i) gout[i] = w[i];
      kan_backward(net, cache, gout);
      if (corrupt_pending) {
        // negative-control hook: break one analytic gradient on purpose
        net.layers[0].coef_grad(0, 0)[0] += 0.5;
        corrupt_pending = false;
      }
      std::vector<double*> values;
      std::vector<double*> grads;
      std::vector<std::size_t> sizes;
      for (auto& layer : net.layers) {
        for (int j = 0; j < layer.n_out(); ++j) {
          for (int p = 0; p < layer.n_in(); ++p) {
            values.push_back(layer.coef(j, p));
            grads.push_back(layer.coef_grad(j, p));
            sizes.push_back(layer.nb());
            values.push_back(&layer.base_w(j, p));
            grads.push_back(&layer.base_w_grad(j, p));
            sizes.push_back(1);
            values.push_back(&layer.spline_w(j, p));
            grads.push_back(&layer.spline_w_grad(j, p));
            sizes.push_back(1);
          }
        }
      }
      fd_params(values, sizes, loss_fn,
                [&](std::size_t pi, std::size_t k) { return grads[pi][k]; }, acc, 1e-4);
    }
  }
  return acc.finish();
}

// --- encoders ----------------------------------------------------------------

FdSuiteResult depth_encoder_suite(std::uint64_t seed) {
  SuiteAccum acc("pda.depth_encoder", 1e-4, 1e-4);
  Rng rng = Rng(seed).fork(303);
  DepthEncoder<double> enc(4, 6);
  enc.init(rng);
  TensorD depth({2, 1, 8, 8});
  for (std::size_t i = 0; i < depth.numel(); ++i) depth[i] = rng.uniform01();
  DepthEncoderCache<double> cache;
  TensorD probe_w;
  auto loss_fn = [&]() {
    DepthEncoderCache<double> c;
    TensorD out = enc.forward(depth, c);
    double l = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) l += probe_w[i] * out[i];
    return l;
  };
  for (int probe = 0; probe < 4; ++probe) {
    TensorD out = enc.forward(depth, cache);
    probe_w = TensorD(out.shape());
    for (std::size_t i = 0; i < probe_w.numel(); ++i) probe_w[i] = rng.normal();
    enc.zero_grads();
    enc.backward(cache, probe_w);
    std::vector<double*> values = {enc.w1.data(), enc.b1.data(), enc.w2.data(), enc.b2.data()};
    std::vector<double*> grads = {enc.w1_g.data(), enc.b1_g.data(), enc.w2_g.data(),
                                  enc.b2_g.data()};
    std::vector<std::size_t> sizes = {enc.w1.numel(), enc.b1.numel(), enc.w2.numel(),
                                      enc.b2.numel()};
    fd_params(values, sizes, loss_fn,
              [&](std::size_t pi, std::size_t k) { return grads[pi][k]; }, acc, 1e-4);
  }
  return acc.finish();
}

FdSuiteResult style_encoder_suite(std::uint64_t seed) {
  SuiteAccum acc("pda.style_encoder", 1e-4, 1e-4);
  Rng rng = Rng(seed).fork(404);
  StyleEncoder<double> enc(4, 6);
  enc.init(rng);
  TensorD frame({1, 8, 8});
  for (std::size_t i = 0; i < frame.numel(); ++i) frame[i] = rng.uniform01();
  StyleEncoderCache<double> cache;
  TensorD probe_w({6});
  auto loss_fn = [&]() {
    StyleEncoderCache<double> c;
    TensorD out = enc.forward(frame, c);
    double l = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) l += probe_w[i] * out[i];
    return l;
  };
  for (int probe = 0; probe < 4; ++probe) {
    for (std::size_t i = 0; i < probe_w.numel(); ++i) probe_w[i] = rng.normal();
    enc.forward(frame, cache);
    enc.zero_grads();
    enc.backward(cache, probe_w);
    std::vector<double*> values = {enc.w1.data(), enc.b1.data(), enc.w2.data(), enc.b2.data()};
    std::vector<double*> grads = {enc.w1_g.data(), enc.b1_g.data(), enc.w2_g.data(),
                                  enc.b2_g.data()};
    std::vector<std::size_t> sizes = {enc.w1.numel(), enc.b1.numel(), enc.w2.numel(),
                                      enc.b2.numel()};
    fd_params(values, sizes, loss_fn,
              [&](std::size_t pi, std::size_t k) { return grads[pi][k]; }, acc, 1e-4);
  }
  return acc.finish();
}

// --- shrunk full denoiser ------------------------------------------------------

ModelDims shrunk_dims() {
  ModelDims d;
  d.frames = 2;
  d.height = 8;
  d.width = 8;
  d.channels = 8;
  d.blocks = 1;
  d.time_dim = 16;
  d.style_dim = 4;
  d.depth_mid = 4;
  d.style_mid = 4;
  return d;
}

FdSuiteResult model_suite(std::uint64_t seed) {
  SuiteAccum acc("model.denoiser", 1e-3, 1e-4);
  Rng rng = Rng(seed).fork(505);
  Denoiser<double> model(shrunk_dims());
  model.init(seed + 9);
  // nudge the zero-initialized gates so every path carries gradient signal
  for (const auto& p : model.params()) {
    if (p.name == "align.gamma" || p.name == "style.proj.weight" ||
        p.name.rfind("head.", 0) == 0 || p.name.find(".film.") != std::string::npos) {
      for (std::size_t k = 0; k < p.size; ++k) p.value[k] = rng.normal() * 0.3;
    }
  }
  const ModelDims& d = model.dims();
  // 25 probes total: 13 unconditional (cover patch_embed, whose FD would
  // otherwise cross the stop-gradient alignment statistics), 12 conditional.
  for (int probe = 0; probe < 25; ++probe) {
    const bool conditional = probe >= 13;
    TensorD zt({static_cast<std::size_t>(d.frames), 1, static_cast<std::size_t>(d.height),
                static_cast<std::size_t>(d.width)});
    for (std::size_t i = 0; i < zt.numel(); ++i) zt[i] = rng.normal();
    TensorD depth(zt.shape());
    for (std::size_t i = 0; i < depth.numel(); ++i) depth[i] = rng.uniform01();
    TensorD frame({1, static_cast<std::size_t>(d.height), static_cast<std::size_t>(d.width)});
    for (std::size_t i = 0; i < frame.numel(); ++i) frame[i] = rng.uniform01();
    const int t = 1 + static_cast<int>(rng.uniform_int(100));
    TensorD w(zt.shape());
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal();

    auto loss_fn = [&]() {
      ConditionBundle<double> cond;
      DepthEncoderCache<double> dc;
      StyleEncoderCache<double> sc;
      if (conditional) cond = model.make_condition(depth, frame, dc, sc);
      DenoiserTrace<double> trace;
      TensorD out = model.predict_noise(zt, cond, t, trace);
      double l = 0.0;
      for (std::size_t i = 0; i < out.numel(); ++i) l += w[i] * out[i];
      return l;
    };

    model.zero_grads();
    {
      ConditionBundle<double> cond;
      DepthEncoderCache<double> dc;
      StyleEncoderCache<double> sc;
      if (conditional) cond = model.make_condition(depth, frame, dc, sc);
      DenoiserTrace<double> trace;
      model.predict_noise(zt, cond, t, trace);
      CondGrads<double> cg = model.backward(trace, w);
      if (cg.valid) {
        model.depth_encoder().backward(dc, cg.d_depth_embedding);
        model.style_encoder().backward(sc, cg.d_style);
      }
    }

    std::vector<double*> values;
    std::vector<double*> grads;
    std::vector<std::size_t> sizes;
    for (const auto& p : model.params()) {
      const bool cond_param = p.name.rfind("depth_encoder.", 0) == 0 ||
                              p.name.rfind("style.", 0) == 0 ||
                              p.name.rfind("align.", 0) == 0;
      if (!conditional && cond_param) continue;  // no effect on this path
      if (conditional && p.name.rfind("patch_embed.", 0) == 0) continue;
      values.push_back(p.value);
      grads.push_back(p.grad);
      sizes.push_back(p.size);
    }
    fd_params(values, sizes, loss_fn,
              [&](std::size_t pi, std::size_t k) { return grads[pi][k]; }, acc, 1e-4);
  }
  return acc.finish();
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, bool corrupt) {
  GradcheckReport report;
  report.suites.push_back(spline_suite(seed));
  report.suites.push_back(kan_suite(seed, corrupt));
  report.suites.push_back(depth_encoder_suite(seed));
  report.suites.push_back(style_encoder_suite(seed));
  report.suites.push_back(model_suite(seed));
  report.pass = true;
  for (const auto& s : report.suites) report.pass &= s.pass;
  return report;
}

}  // namespace splinediff
