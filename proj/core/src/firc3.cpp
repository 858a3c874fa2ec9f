#include "dfir/firc3.hpp"

#include <cmath>

namespace dfir {
namespace {

const ad::Var& require_finite(const ad::Var& v, const char* stage) {
  const bool finite = std::holds_alternative<Tensor>(v.value()) ? v.tensor().all_finite() : v.spectrum().all_finite();
  if (!finite) throw NumericError(stage, std::string("firc: non-finite values in ") + stage);
  return v;
}

}  // namespace

std::size_t FircConfig::hidden_channels() const {
  return static_cast<std::size_t>(std::floor(expansion * static_cast<double>(channels)));
}

void FircConfig::validate() const {
  if (channels == 0) throw ShapeError("channels", "FIRC3 needs at least one channel");
  if (!(expansion > 0)) throw Error("FIRC3 expansion must be positive");
  if (hidden_channels() < 1) {
    throw ShapeError("channels", "FIRC3 hidden width floor(" + std::to_string(expansion) + " * " +
                                     std::to_string(channels) + ") is zero");
  }
  if (scale < 1) throw ShapeError("scale", "FIRC scale must be >= 1");
  if (kernel_size % 2 == 0) throw ShapeError("kernel", "FIRC kernel size must be odd");
  if (!(eps > 0)) throw Error("FIRC eps must be positive");
  if (!(imag_tolerance > 0)) throw Error("FIRC imag_tolerance must be positive");
}

PeriodizedKernel periodize_kernel(const Tensor& taps, std::size_t height, std::size_t width) {
  ad::Tape tape;
  const ad::Var otf = ad::fft2(ad::pad_roll_kernel(tape.constant(taps), height, width));
  return {taps, height, width, otf.spectrum()};
}

Tensor softmax_taps(std::size_t channels, std::size_t k, Rng& rng) {
  Tensor taps({channels, k, k});
  const std::size_t kk = k * k;
  for (std::size_t c = 0; c < channels; ++c) {
    double total = 0.0;
    for (std::size_t t = 0; t < kk; ++t) {
      taps[c * kk + t] = std::exp(rng.uniform(-1.0, 1.0));
      total += taps[c * kk + t];
    }
    for (std::size_t t = 0; t < kk; ++t) taps[c * kk + t] /= total;
  }
  return taps;
}

Tensor delta_taps(std::size_t channels, std::size_t k) {
  Tensor taps({channels, k, k});
  for (std::size_t c = 0; c < channels; ++c) taps[(c * k + k / 2) * k + k / 2] = 1.0;
  return taps;
}

Tensor regularization(const Tensor& b, double eps) {
  Tensor out = b.to(DType::f64);
  for (double& v : out.data()) v = sigmoid(v - 9.0) + eps;
  out.set_dtype(b.dtype());
  return out;
}

void init_firc_params(ParamStore& params, const std::string& prefix, std::size_t channels, std::size_t k,
                      Rng& rng) {
  params.set(prefix + "taps", softmax_taps(channels, k, rng));
  params.set(prefix + "b", Tensor({channels}));
}

ParamStore init_firc3_params(const FircConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore params;
  const std::size_t hidden = config.hidden_channels();
  params.init_conv("cv1", config.channels, hidden, 1, 1, rng);
  params.init_conv("cv2", config.channels, hidden, 1, 1, rng);
  params.init_conv("cv3", hidden, config.channels, 1, 1, rng);
  for (std::size_t i = 0; i < config.iterations; ++i) {
    init_firc_params(params, "m." + std::to_string(i) + ".", hidden, config.kernel_size, rng);
  }
  return params;
}

namespace {

struct FircGraph {
  ad::Var residual;
  ad::Var correction;
  ad::Var spectrum;
  ad::Var output;
};

FircGraph firc_graph(const ad::Var& f, const ad::Var& taps, const ad::Var& b, std::size_t s, double eps,
                     double imag_tolerance) {
  const Tensor& in = f.tensor();
  require_rank4(in, "firc");
  if (s < 1) throw ShapeError("scale", "firc: scale must be >= 1");
  const Tensor& k = taps.tensor();
  if (k.rank() != 3 || k.dim(0) != in.channels()) {
    throw ShapeError("channels", "firc: taps " + shape_string(k.shape()) + " do not match " +
                                     std::to_string(in.channels()) + " input channels");
  }
  if (b.tensor().rank() != 1 || b.tensor().dim(0) != in.channels()) {
    throw ShapeError("channels", "firc: b must hold one value per channel");
  }
  const std::size_t H = in.height() * s, W = in.width() * s;

  FircGraph g;
  const ad::Var eps_b = ad::add_scalar(ad::sigmoid(ad::add_scalar(b, -9.0)), eps);
  const ad::Var otf = ad::fft2(ad::pad_roll_kernel(taps, H, W));
  const ad::Var otf_conj = ad::c_conj(otf);

  const ad::Var data_term = ad::c_mul(otf_conj, ad::fft2(ad::zero_insert_upsample(f, s)));
  const ad::Var prior_term = ad::fft2(ad::mul_channel(ad::nearest_upsample(f, s), eps_b));
  g.residual = require_finite(ad::c_add(data_term, prior_term), "residual spectrum");

  const ad::Var numer = ad::block_avg_spectrum(ad::c_mul(otf, g.residual), s);
  const ad::Var denom = ad::c_add_channel(ad::block_avg_spectrum(ad::c_abs2(otf), s), eps_b);
  g.correction = require_finite(ad::c_div(numer, denom), "weight correction");

  // (F_R - conj(otf) repeat(W)) / eps_b, rearranged. With G = fft2(U_s f) and
  // F_R = conj(otf) repeat(fft2 f) + eps_b G the division by eps_b cancels:
  //   G + conj(otf) repeat((fft2 f - avg(otf G)) / (avg|otf|^2 + eps_b)).
  // Evaluating the literal difference loses about log10(|otf|^2 / eps_b) digits.
  const ad::Var upsampled = ad::fft2(ad::nearest_upsample(f, s));
  const ad::Var shortfall = ad::c_sub(ad::fft2(f), ad::block_avg_spectrum(ad::c_mul(otf, upsampled), s));
  const ad::Var scaled = ad::c_div(shortfall, denom);
  g.spectrum = require_finite(ad::c_add(upsampled, ad::c_mul(otf_conj, ad::repeat_spectrum(scaled, s))),
                              "refined spectrum");
  g.output = ad::ifft2_real(g.spectrum, imag_tolerance, "inverse transform");
  return g;
}

}  // namespace

ad::Var firc(const ad::Var& f, const ad::Var& taps, const ad::Var& b, std::size_t s, double eps,
             double imag_tolerance) {
  return firc_graph(f, taps, b, s, eps, imag_tolerance).output;
}

ad::Var firc3_block(const Scope& scope, const ad::Var& x, const FircConfig& config) {
  config.validate();
  const Tensor& in = x.tensor();
  require_rank4(in, "firc3_block");
  if (in.channels() != config.channels) {
    throw ShapeError("channels", "firc3_block: input has " + std::to_string(in.channels()) +
                                     " channels, config expects " + std::to_string(config.channels));
  }
  ad::Var main = scoped_conv(scope, "cv1", x);
  for (std::size_t i = 0; i < config.iterations; ++i) {
    const Scope m = scope.sub("m." + std::to_string(i));
    main = firc(main, m.param("taps"), m.param("b"), 1, config.eps, config.imag_tolerance);
  }
  return scoped_conv(scope, "cv3", ad::add(main, scoped_conv(scope, "cv2", x)));
}

Tensor firc(const Tensor& f, const PeriodizedKernel& kernel, const Tensor& b, const FircConfig& config,
            FircStages* stages) {
  require_rank4(f, "firc");
  const std::size_t s = config.scale;
  if (kernel.height != f.height() * s || kernel.width != f.width() * s) {
    throw ShapeError("extent", "firc: kernel periodized to " + std::to_string(kernel.height) + "x" +
                                   std::to_string(kernel.width) + ", expected " + std::to_string(f.height() * s) +
                                   "x" + std::to_string(f.width() * s));
  }
  ad::Tape tape;
  const FircGraph g = firc_graph(tape.constant(f), tape.constant(kernel.taps), tape.constant(b), s, config.eps,
                                 config.imag_tolerance);
  if (stages) {
    stages->residual = g.residual.spectrum();
    stages->correction = g.correction.spectrum();
    stages->output = g.spectrum.spectrum();
    stages->imag_residue = ifft2_with_residue(stages->output).max_imag;
  }
  return g.output.tensor();
}

Tensor firc3_block(const Tensor& x, const FircConfig& config, const ParamStore& params) {
  ad::Tape tape;
  Scope scope(tape, params);
  return firc3_block(scope, tape.constant(x), config).tensor();
}

}  // namespace dfir
