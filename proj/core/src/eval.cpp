#include "vsrlab/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "vsrlab/errors.hpp"

namespace vsrlab::eval {
namespace {

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number '" + s + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

constexpr const char* kCsvHeader = "clip_id,method,scale,psnr,ssim,lpips,model";

}  // namespace

std::string_view to_string(Interpolation m) { return m == Interpolation::bicubic ? "bicubic" : "bilinear"; }

Interpolation parse_interpolation(std::string_view s) {
  if (s == "bicubic") return Interpolation::bicubic;
  if (s == "bilinear") return Interpolation::bilinear;
  throw ConfigError("unknown interpolation '" + std::string(s) + "'");
}

Model interpolation_model(Interpolation kind) {
  return {"builtin:" + std::string(to_string(kind)),
          [kind](const FrameSequence& lr, int scale) { return seq::upsample(lr, scale, kind); }};
}

Model generator_model(std::string name, std::shared_ptr<const gen::Generator> generator) {
  return {std::move(name), [generator](const FrameSequence& lr, int scale) { return generator->upscale(lr, scale); }};
}

Model resolve_model(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) return interpolation_model(parse_interpolation(spec.substr(8)));
  std::shared_ptr<const gen::Generator> g = train::load_generator(spec);
  return generator_model(spec, std::move(g));
}

Row evaluate_clip(const Model& model, const std::string& clip_id, const FrameSequence& hr, int scale,
                  Interpolation method, const loss::FeatureExtractor* extractor) {
  if (scale != 2 && scale != 4) throw ConfigError("evaluation scale must be 2 or 4");
  const FrameSequence lr = seq::downsample(hr, scale, method);
  const FrameSequence pred = model.upscale(lr, scale);
  if (pred.tensor().shape() != hr.tensor().shape()) {
    throw ShapeError("model " + model.name + " produced " + pred.tensor().shape().str() + " for " +
                     hr.tensor().shape().str());
  }
  Row row;
  row.clip_id = clip_id;
  row.method = method;
  row.scale = scale;
  row.model = model.name;
  row.psnr = loss::psnr(hr.tensor(), pred.tensor());
  row.ssim = loss::ssim_value(hr.tensor(), pred.tensor());
  if (extractor && extractor->pretrained()) {
    row.lpips = loss::perceptual(ag::constant(hr.tensor()), ag::constant(pred.tensor()), *extractor, loss::Norm::l2)
                    .value()
                    .item();
  }
  return row;
}

std::vector<Aggregate> aggregate(const std::vector<Row>& rows) {
  std::vector<Aggregate> out;
  std::vector<bool> all_lpips;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
      return a.model == r.model && a.method == r.method && a.scale == r.scale;
    });
    if (it == out.end()) {
      out.push_back({r.model, r.method, r.scale, 0, 0.0, 0.0, 0.0});
      all_lpips.push_back(true);
      it = out.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - out.begin());
    it->rows += 1;
    it->psnr += r.psnr;
    it->ssim += r.ssim;
    if (r.lpips) {
      *it->lpips += *r.lpips;
    } else {
      all_lpips[k] = false;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& a = out[k];
    a.psnr /= a.rows;
    a.ssim /= a.rows;
    if (all_lpips[k]) {
      *a.lpips /= a.rows;
    } else {
      a.lpips.reset();
    }
  }
  return out;
}

MetricsReport compare_models(const std::vector<Model>& models, const train::Dataset& clips, const EvalOptions& options,
                             const loss::FeatureExtractor* extractor) {
  if (models.empty()) throw ConfigError("evaluation needs at least one model");
  if (clips.clips.empty()) throw ConfigError("evaluation clip set is empty");
  if (options.scales.empty() || options.methods.empty()) throw ConfigError("evaluation needs scales and methods");
  int largest = 1;
  for (int s : options.scales) {
    if (s != 2 && s != 4) throw ConfigError("evaluation scale must be 2 or 4");
    largest = std::max(largest, s);
  }
  MetricsReport report;
  for (const auto& clip : clips.clips) {
    const int len = clip.length();
    if (len < 1) throw IoError("clip " + clip.id + " has no frames");
    const int count = options.max_frames > 0 ? std::min(len, options.max_frames) : len;
    FrameSequence frames = clip.window(0, count);
    const int h = frames.height() / largest * largest, w = frames.width() / largest * largest;
    if (h == 0 || w == 0) throw ShapeError("clip " + clip.id + " is smaller than the evaluation scale");
    if (h != frames.height() || w != frames.width()) {
      frames = FrameSequence(frames.tensor().window(0, 0, h, w), frames.frame_rate_hint());
    }
    for (const auto& model : models)
      for (auto method : options.methods)
        for (int scale : options.scales)
          report.rows.push_back(evaluate_clip(model, clip.id, frames, scale, method, extractor));
  }
  report.aggregates = aggregate(report.rows);
  return report;
}

std::string MetricsReport::to_csv() const {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.clip_id) + "," + std::string(to_string(r.method)) + "," + std::to_string(r.scale) + "," +
           number(r.psnr) + "," + number(r.ssim) + "," + (r.lpips ? number(*r.lpips) : "n/a") + "," +
           csv_field(r.model) + "\n";
  }
  return out;
}

std::vector<Row> MetricsReport::rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("metrics CSV has an unexpected header");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw ConfigError("metrics CSV row has " + std::to_string(f.size()) + " fields");
    Row r;
    r.clip_id = f[0];
    r.method = parse_interpolation(f[1]);
    r.scale = static_cast<int>(parse_number(f[2]));
    r.psnr = parse_number(f[3]);
    r.ssim = parse_number(f[4]);
    if (f[5] != "n/a") r.lpips = parse_number(f[5]);
    r.model = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json MetricsReport::aggregates_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : aggregates) {
    out.push_back({{"model", a.model},
                   {"method", to_string(a.method)},
                   {"scale", a.scale},
                   {"rows", a.rows},
                   {"psnr", a.psnr},
                   {"ssim", a.ssim},
                   {"lpips", a.lpips ? nlohmann::json(*a.lpips) : nlohmann::json("n/a")}});
  }
  return out;
}

std::string MetricsReport::format_table() const {
  std::size_t width = 5;
  for (const auto& a : aggregates) width = std::max(width, a.model.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-8s  %5s  %10s  %8s  %8s\n", static_cast<int>(width), "model", "method",
                "scale", "psnr", "ssim", "lpips");
  os << buf;
  for (const auto& a : aggregates) {
    const std::string lp = a.lpips ? number(*a.lpips).substr(0, 8) : "n/a";
    std::snprintf(buf, sizeof buf, "%-*s  %-8s  %5d  %10.4f  %8.5f  %8s\n", static_cast<int>(width), a.model.c_str(),
                  std::string(to_string(a.method)).c_str(), a.scale, a.psnr, a.ssim, lp.c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace vsrlab::eval
