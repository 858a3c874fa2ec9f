#include "dfir/dfpn.hpp"

#include <cmath>

namespace dfir {
namespace {

void check_anup_extents(const Tensor& high, const Tensor& low, std::size_t s) {
  require_rank4(high, "anup high");
  require_rank4(low, "anup low");
  if (s < 1) throw ShapeError("scale", "anup: scale must be >= 1");
  if (high.batch() != low.batch()) throw ShapeError("batch", "anup: batch extents differ");
  if (low.height() != s * high.height()) {
    throw ShapeError("height", "anup: low height " + std::to_string(low.height()) + " != " +
                                   std::to_string(s) + " x high height " + std::to_string(high.height()));
  }
  if (low.width() != s * high.width()) {
    throw ShapeError("width", "anup: low width " + std::to_string(low.width()) + " != " + std::to_string(s) +
                                  " x high width " + std::to_string(high.width()));
  }
}

std::string level_name(const char* kind, std::size_t i) { return std::string(kind) + "." + std::to_string(i); }

}  // namespace

void PyramidLevels::validate(std::size_t scale) const {
  if (levels.empty()) throw ShapeError("levels", "pyramid has no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    require_rank4(levels[i], "pyramid level");
    if (i + 1 < levels.size()) {
      const Tensor& fine = levels[i];
      const Tensor& coarse = levels[i + 1];
      if (fine.height() != coarse.height() * scale || fine.width() != coarse.width() * scale) {
        throw ShapeError("level " + std::to_string(i + 1),
                         "pyramid level " + std::to_string(i + 1) + " " + shape_string(coarse.shape()) +
                             " is not 1/" + std::to_string(scale) + " of level " + std::to_string(i) + " " +
                             shape_string(fine.shape()));
      }
      if (fine.batch() != coarse.batch()) throw ShapeError("batch", "pyramid levels disagree on batch");
    }
  }
}

void DfpnConfig::validate() const {
  if (scale < 1) throw ShapeError("scale", "DFPN scale must be >= 1");
  if (channels.empty()) throw ShapeError("levels", "DFPN config lists no levels");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == 0 || channels[i] % 2 != 0) {
      throw ShapeError("channels", "DFPN level " + std::to_string(i) + " needs an even channel count, got " +
                                       std::to_string(channels[i]));
    }
  }
}

void init_dpsc_params(ParamStore& params, const std::string& prefix, std::size_t channels, DpscPath2 path2,
                      Rng& rng) {
  const std::size_t half = channels / 2;
  params.init_conv(prefix + "std", channels, half, 3, 1, rng);
  if (path2 == DpscPath2::cascaded) {
    params.init_conv(prefix + "conv", half, half, 3, 1, rng);
  } else {
    params.init_conv(prefix + "pw", channels, half, 1, 1, rng);
  }
  params.init_conv(prefix + "dw", half, half, 3, half, rng);
}

void init_anup_params(ParamStore& params, const std::string& prefix, std::size_t high_channels,
                      std::size_t low_channels, Rng& rng) {
  params.init_conv(prefix + "lateral", high_channels + low_channels, low_channels, 1, 1, rng);
}

ParamStore init_dfpn_params(const DfpnConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore params;
  const std::size_t L = config.channels.size();
  for (std::size_t i = 0; i + 1 < L; ++i) {
    init_anup_params(params, level_name("anup", i) + ".", config.channels[i + 1], config.channels[i], rng);
  }
  for (std::size_t i = 0; i < L; ++i) {
    init_dpsc_params(params, level_name("dpsc", i) + ".", config.channels[i], config.path2, rng);
  }
  return params;
}

Tensor amplitude_normalize(const Tensor& high, std::size_t s) {
  require_rank4(high, "amplitude_normalize");
  if (s < 1) throw ShapeError("scale", "amplitude_normalize: scale must be >= 1");
  // Each s x s block holds s^2 - 1 copies of q = x / s^2 and one remainder
  // x - (s^2 - 1) q. The block then sums to x exactly (for s <= 4 and every
  // power of two), so the L1 mass survives rounding; q alone would drift by
  // an ulp whenever s^2 is not a power of two.
  const double area = static_cast<double>(s * s);
  Tensor up(Shape{high.batch(), high.channels(), high.height() * s, high.width() * s});
  for (std::size_t b = 0; b < high.batch(); ++b)
    for (std::size_t c = 0; c < high.channels(); ++c)
      for (std::size_t h = 0; h < high.height(); ++h)
        for (std::size_t w = 0; w < high.width(); ++w) {
          const double x = high.at(b, c, h, w);
          const double q = x / area;
          for (std::size_t m = 0; m < s; ++m)
            for (std::size_t n = 0; n < s; ++n) up.at(b, c, h * s + m, w * s + n) = q;
          up.at(b, c, h * s + s - 1, w * s + s - 1) = std::fma(-(area - 1.0), q, x);
        }
  up.set_dtype(high.dtype());
  up.round_to_dtype();
  return up;
}

ad::Var amplitude_normalize(const ad::Var& high, std::size_t s) {
  const Shape shape = high.tensor().shape();
  return high.tape().record("amplitude_normalize", amplitude_normalize(high.tensor(), s), {high},
                            [shape, s](const ad::Value& g) {
                              const Tensor& go = std::get<Tensor>(g);
                              const double area = static_cast<double>(s * s);
                              Tensor gi(shape);
                              for (std::size_t b = 0; b < shape[0]; ++b)
                                for (std::size_t c = 0; c < shape[1]; ++c)
                                  for (std::size_t h = 0; h < shape[2] * s; ++h)
                                    for (std::size_t w = 0; w < shape[3] * s; ++w)
                                      gi.at(b, c, h / s, w / s) += go.at(b, c, h, w) / area;
                              return std::vector<ad::Value>{std::move(gi)};
                            });
}

ad::Var anup(const Scope& scope, const ad::Var& high, const ad::Var& low, std::size_t s) {
  check_anup_extents(high.tensor(), low.tensor(), s);
  const ad::Var normalized = amplitude_normalize(high, s);
  return scoped_conv(scope, "lateral", ad::concat_channels({normalized, low}));
}

ad::Var dpsc(const Scope& scope, const ad::Var& x, DpscPath2 path2) {
  const Tensor& in = x.tensor();
  require_rank4(in, "dpsc");
  if (in.channels() % 2 != 0) {
    throw ShapeError("channels", "dpsc needs an even channel count, got " + std::to_string(in.channels()));
  }
  const std::size_t half = in.channels() / 2;
  const ad::Var semantic = ad::sigmoid(scoped_conv(scope, "std", x));
  const ad::Var detail_in = path2 == DpscPath2::cascaded ? scoped_conv(scope, "conv", semantic)
                                                         : ad::gelu(scoped_conv(scope, "pw", x));
  const ad::Var detail = ad::gelu(scoped_conv(scope, "dw", detail_in, {.groups = half}));
  return ad::channel_shuffle(ad::concat_channels({semantic, detail}));
}

std::vector<ad::Var> dfpn_fuse(const Scope& scope, const std::vector<ad::Var>& levels, const DfpnConfig& config,
                               FuseTrace* trace) {
  config.validate();
  PyramidLevels shapes;
  for (const ad::Var& v : levels) shapes.levels.push_back(v.tensor());
  shapes.validate(config.scale);
  const std::size_t L = levels.size();
  if (config.channels.size() != L) {
    throw ShapeError("levels", "dfpn_fuse: config describes " + std::to_string(config.channels.size()) +
                                   " levels, pyramid has " + std::to_string(L));
  }
  for (std::size_t i = 0; i < L; ++i) {
    if (levels[i].tensor().channels() != config.channels[i]) {
      throw ShapeError("channels", "dfpn_fuse: level " + std::to_string(i) + " has " +
                                       std::to_string(levels[i].tensor().channels()) + " channels, config expects " +
                                       std::to_string(config.channels[i]));
    }
  }

  std::vector<ad::Var> up(levels);
  for (std::size_t i = L - 1; i-- > 0;) {
    up[i] = anup(scope.sub(level_name("anup", i)), up[i + 1], levels[i], config.scale);
    if (trace) ++trace->anup_calls;
  }
  std::vector<ad::Var> out;
  out.reserve(L);
  for (std::size_t i = 0; i < L; ++i) {
    out.push_back(dpsc(scope.sub(level_name("dpsc", i)), up[i], config.path2));
    if (trace) ++trace->dpsc_calls;
  }
  return out;
}

Tensor anup(const Tensor& high, const Tensor& low, std::size_t s, const ParamStore& params,
            const std::string& prefix, AnupStages* stages) {
  check_anup_extents(high, low, s);
  ad::Tape tape;
  Scope scope(tape, params, prefix);
  const ad::Var h = tape.constant(high);
  const ad::Var normalized = amplitude_normalize(h, s);
  const ad::Var out = scoped_conv(scope, "lateral", ad::concat_channels({normalized, tape.constant(low)}));
  if (stages) {
    stages->upsampled = nearest_upsample(high, s);
    stages->normalized = normalized.tensor();
    stages->output = out.tensor();
  }
  return out.tensor();
}

Tensor dpsc(const Tensor& x, const ParamStore& params, DpscPath2 path2, const std::string& prefix) {
  ad::Tape tape;
  Scope scope(tape, params, prefix);
  return dpsc(scope, tape.constant(x), path2).tensor();
}

PyramidLevels dfpn_fuse(const PyramidLevels& pyramid, const DfpnConfig& config, const ParamStore& params,
                        FuseTrace* trace) {
  ad::Tape tape;
  Scope scope(tape, params);
  std::vector<ad::Var> levels;
  for (const Tensor& t : pyramid.levels) levels.push_back(tape.constant(t));
  PyramidLevels out;
  for (const ad::Var& v : dfpn_fuse(scope, levels, config, trace)) out.levels.push_back(v.tensor());
  return out;
}

}  // namespace dfir
