#include "vsrlab/degrade.hpp"

#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <limits>

#include "vsrlab/errors.hpp"
#include "vsrlab/frame_io.hpp"

namespace vsrlab::degrade {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ParamSchema {
  const char* name;
  double min;
  double max;
  bool integer;
  bool odd;
  ParamRange defaults;
};

struct KindInfo {
  OperatorKind kind;
  const char* name;
  std::vector<ParamSchema> params;
};

const std::vector<KindInfo>& kinds() {
  static const std::vector<KindInfo> table = {
      {OperatorKind::gaussian_blur, "gaussian_blur",
       {{"sigma", 0.0, kInf, false, false, {0.2, 2.0}},
        // 0 selects the smallest odd size covering +-3 sigma.
        {"kernel", 0.0, 63.0, true, true, {0.0, 0.0}}}},
      {OperatorKind::gaussian_noise, "gaussian_noise", {{"sigma", 0.0, kInf, false, false, {0.0, 0.05}}}},
      {OperatorKind::contrast_brightness, "contrast_brightness",
       {{"contrast", 1e-6, kInf, false, false, {0.8, 1.2}},
        {"brightness", -1.0, 1.0, false, false, {-0.1, 0.1}}}},
      {OperatorKind::frequency_guided, "frequency_guided",
       {{"detail_scale", 0.0, kInf, false, false, {0.5, 1.0}},
        {"zero_probability", 0.0, 1.0, false, false, {0.2, 0.2}}}},
      {OperatorKind::cutblur, "cutblur",
       {{"mask_fraction", 1e-6, 1.0 - 1e-9, false, false, {0.1, 0.5}},
        {"blur_factor", 2.0, 4.0, true, false, {2.0, 4.0}}}},
      {OperatorKind::diffusion, "diffusion",
       {{"iterations", 0.0, 64.0, true, false, {1.0, 3.0}},
        {"sigma_step", 0.0, kInf, false, false, {0.3, 0.8}}}},
      {OperatorKind::content_aware, "content_aware",
       {{"sigma_min", 0.0, kInf, false, false, {0.0, 0.5}},
        {"sigma_max", 0.0, kInf, false, false, {1.0, 2.0}}}},
      {OperatorKind::adaptive, "adaptive",
       {{"sigma_min", 0.0, kInf, false, false, {0.0, 0.5}},
        {"sigma_max", 0.0, kInf, false, false, {1.0, 2.0}},
        {"iterations", 1.0, 16.0, true, false, {1.0, 3.0}}}},
      {OperatorKind::jpeg, "jpeg", {{"quality", 1.0, 100.0, true, false, {50.0, 95.0}}}},
  };
  return table;
}

const KindInfo& info(OperatorKind kind) {
  for (const auto& k : kinds())
    if (k.kind == kind) return k;
  throw ConfigError("unknown degradation operator");
}

double sample_param(const ParamSchema& schema, const ParamRange& range, Rng& rng) {
  if (!schema.integer) return uniform(rng, range.lo, range.hi);
  int lo = static_cast<int>(std::ceil(range.lo)), hi = static_cast<int>(std::floor(range.hi));
  if (std::string_view(schema.name) == "blur_factor") {
    // Only 2 and 4 are valid factors.
    if (lo <= 2 && hi >= 4) return bernoulli(rng, 0.5) ? 4.0 : 2.0;
    return lo >= 4 ? 4.0 : 2.0;
  }
  if (schema.odd) {
    if (lo % 2 == 0) ++lo;
    if (hi % 2 == 0) --hi;
    if (hi < lo) return 0.0;
    return lo + 2 * uniform_int(rng, 0, (hi - lo) / 2);
  }
  return uniform_int(rng, lo, hi);
}

Tensor blur_tensor(const Tensor& t, int kernel_size, double sigma, Padding pad) {
  const auto taps = gaussian_taps(kernel_size, sigma);
  return apply_separable(t, LinearMap1D::filter(t.h(), taps, pad),
                         LinearMap1D::filter(t.w(), taps, pad));
}

int wrap(int i, int n, Padding pad) {
  if (pad == Padding::circular) return ((i % n) + n) % n;
  return std::clamp(i, 0, n - 1);
}

// Per-frame Sobel magnitude of the channel mean, normalized to [0, 1].
std::vector<float> detail_map(const Tensor& t, int f, Padding pad) {
  const int h = t.h(), w = t.w();
  std::vector<float> luma(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      luma[y * w + x] = (t.at(f, 0, y, x) + t.at(f, 1, y, x) + t.at(f, 2, y, x)) / 3.0f;
  std::vector<float> mag(luma.size());
  float peak = 0.0f;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto L = [&](int dy, int dx) { return luma[wrap(y + dy, h, pad) * w + wrap(x + dx, w, pad)]; };
      const float gx = (L(-1, 1) + 2 * L(0, 1) + L(1, 1)) - (L(-1, -1) + 2 * L(0, -1) + L(1, -1));
      const float gy = (L(1, -1) + 2 * L(1, 0) + L(1, 1)) - (L(-1, -1) + 2 * L(-1, 0) + L(-1, 1));
      mag[y * w + x] = std::sqrt(gx * gx + gy * gy);
      peak = std::max(peak, mag[y * w + x]);
    }
  if (peak > 0.0f)
    for (auto& m : mag) m /= peak;
  return mag;
}

// jpeg_std_error exits the process by default; route fatal errors back here.
struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

std::vector<std::uint8_t> jpeg_round_trip(const std::vector<std::uint8_t>& rgb, int w, int h,
                                          int quality) {
  unsigned char* encoded = nullptr;
  unsigned long encoded_size = 0;
  {
    jpeg_compress_struct cinfo{};
    JpegError err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
      jpeg_destroy_compress(&cinfo);
      std::free(encoded);
      throw IoError(std::string("jpeg encode failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &encoded, &encoded_size);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
      auto* row = const_cast<JSAMPROW>(rgb.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * 3);
      jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
  }

  std::vector<std::uint8_t> decoded(static_cast<std::size_t>(w) * h * 3);
  jpeg_decompress_struct dinfo{};
  JpegError err{};
  dinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&dinfo);
    std::free(encoded);
    throw IoError(std::string("jpeg decode failed: ") + err.message);
  }
  jpeg_create_decompress(&dinfo);
  jpeg_mem_src(&dinfo, encoded, encoded_size);
  jpeg_read_header(&dinfo, TRUE);
  dinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&dinfo);
  while (dinfo.output_scanline < dinfo.output_height) {
    JSAMPROW row = decoded.data() + static_cast<std::size_t>(dinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&dinfo, &row, 1);
  }
  jpeg_finish_decompress(&dinfo);
  jpeg_destroy_decompress(&dinfo);
  std::free(encoded);
  return decoded;
}

}  // namespace

std::string_view to_string(OperatorKind kind) { return info(kind).name; }

OperatorKind parse_operator_kind(std::string_view name) {
  for (const auto& k : kinds())
    if (name == k.name) return k.kind;
  throw ConfigError("unknown degradation operator '" + std::string(name) + "'");
}

std::vector<std::string> parameter_names(OperatorKind kind) {
  std::vector<std::string> names;
  for (const auto& p : info(kind).params) names.emplace_back(p.name);
  return names;
}

OperatorConfig OperatorConfig::with_defaults(OperatorKind kind, double probability) {
  OperatorConfig cfg;
  cfg.kind = kind;
  cfg.apply_probability = probability;
  for (const auto& p : info(kind).params) cfg.params[p.name] = p.defaults;
  return cfg;
}

void OperatorConfig::validate() const {
  const auto& ki = info(kind);
  if (!(apply_probability >= 0.0 && apply_probability <= 1.0)) {
    throw ConfigError(std::string(ki.name) + ": apply probability must be in [0, 1]");
  }
  for (const auto& [name, range] : params) {
    auto it = std::find_if(ki.params.begin(), ki.params.end(),
                           [&](const ParamSchema& s) { return name == s.name; });
    if (it == ki.params.end()) {
      throw ConfigError(std::string(ki.name) + ": unknown parameter '" + name + "'");
    }
    if (!(range.lo <= range.hi) || range.lo < it->min || range.hi > it->max) {
      throw ConfigError(std::string(ki.name) + ": range for '" + name + "' outside [" +
                        std::to_string(it->min) + ", " + std::to_string(it->max) + "]");
    }
    if (it->odd && range.lo == range.hi && range.lo != 0.0 &&
        static_cast<int>(range.lo) % 2 == 0) {
      throw ConfigError(std::string(ki.name) + ": kernel size must be odd");
    }
  }
  for (const auto& s : ki.params) {
    if (!params.count(s.name)) {
      throw ConfigError(std::string(ki.name) + ": missing parameter '" + s.name + "'");
    }
  }
  if (params.count("sigma_min") && params.at("sigma_min").hi > params.at("sigma_max").lo) {
    throw ConfigError(std::string(ki.name) + ": sigma_min range must lie below sigma_max range");
  }
}

DegradationPlan DegradationPlan::default_plan(std::uint64_t seed) {
  DegradationPlan plan;
  plan.seed = seed;
  auto blur = OperatorConfig::with_defaults(OperatorKind::gaussian_blur, 0.5);
  blur.params["sigma"] = {0.2, 2.0};
  auto noise = OperatorConfig::with_defaults(OperatorKind::gaussian_noise, 0.5);
  noise.params["sigma"] = {0.0, 0.05};
  auto cb = OperatorConfig::with_defaults(OperatorKind::contrast_brightness, 0.3);
  cb.params["contrast"] = {0.8, 1.2};
  cb.params["brightness"] = {-0.1, 0.1};
  auto jpeg = OperatorConfig::with_defaults(OperatorKind::jpeg, 0.3);
  jpeg.params["quality"] = {50.0, 95.0};
  plan.steps = {blur, noise, cb, jpeg};
  return plan;
}

void DegradationPlan::validate() const {
  for (const auto& s : steps) s.validate();
}

nlohmann::json to_json(const std::vector<AppliedStep>& log) {
  auto out = nlohmann::json::array();
  for (const auto& step : log) {
    out.push_back({{"kind", to_string(step.kind)}, {"fired", step.fired}, {"values", step.values}});
  }
  return out;
}

FrameSequence gaussian_blur(const FrameSequence& seq, int kernel_size, double sigma, Padding pad) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("gaussian_blur: kernel size must be odd and >= 1, got " +
                      std::to_string(kernel_size));
  }
  return FrameSequence::clamped(blur_tensor(seq.tensor(), kernel_size, sigma, pad),
                                seq.frame_rate_hint());
}

FrameSequence gaussian_noise(const FrameSequence& seq, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("gaussian_noise: sigma must be >= 0");
  Tensor out = seq.tensor();
  if (sigma == 0.0) return FrameSequence(std::move(out), seq.frame_rate_hint());
  const std::size_t per_frame = static_cast<std::size_t>(3) * out.h() * out.w();
  for (int f = 0; f < out.n(); ++f) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(f)));
    float* p = out.plane(f, 0);
    for (std::size_t i = 0; i < per_frame; ++i) p[i] += static_cast<float>(sigma * normal(rng));
  }
  return FrameSequence::clamped(std::move(out), seq.frame_rate_hint());
}

FrameSequence contrast_brightness(const FrameSequence& seq, double contrast, double brightness) {
  if (!(contrast > 0.0)) throw ConfigError("contrast must be positive");
  Tensor out = seq.tensor();
  const auto c = static_cast<float>(contrast), b = static_cast<float>(brightness);
  for (auto& v : out.values()) v = c * (v - 0.5f) + 0.5f + b;
  return FrameSequence::clamped(std::move(out), seq.frame_rate_hint());
}

FrameSequence frequency_guided(const FrameSequence& seq, double detail_scale, bool zero_details) {
  if (seq.height() % 2 != 0 || seq.width() % 2 != 0) {
    throw ShapeError("frequency_guided needs even frame dimensions");
  }
  const float s = zero_details ? 0.0f : static_cast<float>(detail_scale);
  Tensor out = seq.tensor();
  for (int f = 0; f < out.n(); ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < out.h(); y += 2)
        for (int x = 0; x < out.w(); x += 2) {
          const float a = out.at(f, c, y, x), b = out.at(f, c, y, x + 1);
          const float d = out.at(f, c, y + 1, x), e = out.at(f, c, y + 1, x + 1);
          const float ll = 0.5f * (a + b + d + e);
          const float lh = s * 0.5f * (a - b + d - e);
          const float hl = s * 0.5f * (a + b - d - e);
          const float hh = s * 0.5f * (a - b - d + e);
          out.at(f, c, y, x) = 0.5f * (ll + lh + hl + hh);
          out.at(f, c, y, x + 1) = 0.5f * (ll - lh + hl - hh);
          out.at(f, c, y + 1, x) = 0.5f * (ll + lh - hl - hh);
          out.at(f, c, y + 1, x + 1) = 0.5f * (ll - lh - hl + hh);
        }
  return FrameSequence::clamped(std::move(out), seq.frame_rate_hint());
}

Rect cutblur_rect(int height, int width, double mask_fraction, std::uint64_t seed) {
  if (!(mask_fraction > 0.0 && mask_fraction <= 1.0)) {
    throw ConfigError("cutblur mask fraction must be in (0, 1]");
  }
  const double side = std::sqrt(mask_fraction);
  Rect r;
  r.height = std::clamp(static_cast<int>(std::lround(side * height)), 1, height);
  r.width = std::clamp(static_cast<int>(std::lround(side * width)), 1, width);
  Rng rng(seed);
  r.row = uniform_int(rng, 0, height - r.height);
  r.col = uniform_int(rng, 0, width - r.width);
  return r;
}

FrameSequence cutblur(const FrameSequence& seq, double mask_fraction, int blur_factor,
                      std::uint64_t seed) {
  if (blur_factor != 2 && blur_factor != 4) throw ConfigError("cutblur factor must be 2 or 4");
  const int h = seq.height(), w = seq.width();
  const int lh = std::max(1, h / blur_factor), lw = std::max(1, w / blur_factor);
  const Tensor low = apply_separable(seq.tensor(), LinearMap1D::resize(h, lh, Interpolation::bilinear),
                                     LinearMap1D::resize(w, lw, Interpolation::bilinear));
  const Tensor blurred = apply_separable(low, LinearMap1D::resize(lh, h, Interpolation::bilinear),
                                         LinearMap1D::resize(lw, w, Interpolation::bilinear));
  const Rect r = cutblur_rect(h, w, mask_fraction, seed);
  Tensor out = seq.tensor();
  for (int f = 0; f < out.n(); ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = r.row; y < r.row + r.height; ++y)
        for (int x = r.col; x < r.col + r.width; ++x) out.at(f, c, y, x) = blurred.at(f, c, y, x);
  return FrameSequence::clamped(std::move(out), seq.frame_rate_hint());
}

FrameSequence diffusion(const FrameSequence& seq, int iterations, double sigma_step, Padding pad) {
  if (iterations < 0) throw ConfigError("diffusion iterations must be >= 0");
  FrameSequence cur = seq;
  const int size = gaussian_size_for(sigma_step);
  for (int i = 0; i < iterations; ++i) cur = gaussian_blur(cur, size, sigma_step, pad);
  return cur;
}

FrameSequence content_aware(const FrameSequence& seq, double sigma_min, double sigma_max,
                            Padding pad) {
  if (!(sigma_min >= 0.0 && sigma_min <= sigma_max)) {
    throw ConfigError("content_aware needs 0 <= sigma_min <= sigma_max");
  }
  const Tensor& in = seq.tensor();
  const int h = in.h(), w = in.w();
  const int size = gaussian_size_for(sigma_max), r = size / 2;
  Tensor out(in.shape());
  std::vector<float> taps;
  for (int f = 0; f < in.n(); ++f) {
    const auto m = detail_map(in, f, pad);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double sigma = sigma_max - (sigma_max - sigma_min) * m[y * w + x];
        taps = gaussian_taps(size, sigma);
        for (int c = 0; c < 3; ++c) {
          const float* src = in.plane(f, c);
          float acc = 0.0f;
          for (int dy = -r; dy <= r; ++dy) {
            const float* row = src + static_cast<std::size_t>(wrap(y + dy, h, pad)) * w;
            float racc = 0.0f;
            for (int dx = -r; dx <= r; ++dx) racc += taps[dx + r] * row[wrap(x + dx, w, pad)];
            acc += taps[dy + r] * racc;
          }
          out.at(f, c, y, x) = acc;
        }
      }
  }
  return FrameSequence::clamped(std::move(out), seq.frame_rate_hint());
}

FrameSequence adaptive(const FrameSequence& seq, double sigma_min, double sigma_max, int iterations,
                       Padding pad) {
  if (iterations < 1) throw ConfigError("adaptive iterations must be >= 1");
  FrameSequence cur = seq;
  for (int i = 0; i < iterations; ++i) cur = content_aware(cur, sigma_min, sigma_max, pad);
  return cur;
}

FrameSequence jpeg_degrade(const FrameSequence& seq, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must be in [1, 100]");
  const Tensor& in = seq.tensor();
  const int h = in.h(), w = in.w();
  Tensor out(in.shape());
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  for (int f = 0; f < in.n(); ++f) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] = io::to_byte(in.at(f, c, y, x));
    const auto decoded = jpeg_round_trip(rgb, w, h, quality);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          out.at(f, c, y, x) = static_cast<float>(decoded[(static_cast<std::size_t>(y) * w + x) * 3 + c]) / 255.0f;
  }
  return FrameSequence(std::move(out), seq.frame_rate_hint());
}

DegradeResult apply_plan(const FrameSequence& seq, const DegradationPlan& plan) {
  plan.validate();
  Rng rng(plan.seed);
  FrameSequence cur = seq;
  std::vector<AppliedStep> log;
  for (const auto& step : plan.steps) {
    AppliedStep applied;
    applied.kind = step.kind;
    applied.fired = bernoulli(rng, step.apply_probability);
    if (!applied.fired) {
      log.push_back(std::move(applied));
      continue;
    }
    auto& v = applied.values;
    for (const auto& schema : info(step.kind).params) {
      v[schema.name] = sample_param(schema, step.params.at(schema.name), rng);
    }
    const std::uint64_t op_seed = rng();
    switch (step.kind) {
      case OperatorKind::gaussian_blur: {
        int size = static_cast<int>(v["kernel"]);
        if (size == 0) size = gaussian_size_for(v["sigma"]);
        v["kernel"] = size;
        cur = gaussian_blur(cur, size, v["sigma"]);
        break;
      }
      case OperatorKind::gaussian_noise:
        v["seed"] = static_cast<double>(op_seed >> 11);
        cur = gaussian_noise(cur, v["sigma"], op_seed >> 11);
        break;
      case OperatorKind::contrast_brightness:
        cur = contrast_brightness(cur, v["contrast"], v["brightness"]);
        break;
      case OperatorKind::frequency_guided: {
        Rng zr(op_seed);
        v["zero_details"] = bernoulli(zr, v["zero_probability"]) ? 1.0 : 0.0;
        cur = frequency_guided(cur, v["detail_scale"], v["zero_details"] != 0.0);
        break;
      }
      case OperatorKind::cutblur:
        v["seed"] = static_cast<double>(op_seed >> 11);
        cur = cutblur(cur, v["mask_fraction"], static_cast<int>(v["blur_factor"]), op_seed >> 11);
        break;
      case OperatorKind::diffusion:
        cur = diffusion(cur, static_cast<int>(v["iterations"]), v["sigma_step"]);
        break;
      case OperatorKind::content_aware:
        cur = content_aware(cur, v["sigma_min"], v["sigma_max"]);
        break;
      case OperatorKind::adaptive:
        cur = adaptive(cur, v["sigma_min"], v["sigma_max"], static_cast<int>(v["iterations"]));
        break;
      case OperatorKind::jpeg:
        cur = jpeg_degrade(cur, static_cast<int>(v["quality"]));
        break;
    }
    log.push_back(std::move(applied));
  }
  return {std::move(cur), std::move(log)};
}

}  // namespace vsrlab::degrade
