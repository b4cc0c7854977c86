#include "enhance/pipeline/synth_spec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "enhance/core/error.hpp"
#include "enhance/core/rng.hpp"
#include "enhance/pipeline/image_io.hpp"
#include "enhance/pipeline/run.hpp"
#include "enhance/registration/registration.hpp"
#include "keyvalue.hpp"

namespace enhance::pipeline {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> parse_csv_doubles(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const std::string field = v.substr(pos, comma == std::string::npos ? v.size() - pos
                                                                        : comma - pos);
    out.push_back(detail::parse_double(detail::trim(field), key));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

SynthJob parse_synth_spec(const std::string& path) {
  const detail::KeyValueFile kv = detail::read_key_values(path);
  SynthJob job;
  std::uint32_t width = 0, height = 0;

  for (const auto& [key, value] : kv.entries) {
    if (key == "canvas_width") {
      width = std::uint32_t(detail::parse_u64(value, key));
    } else if (key == "canvas_height") {
      height = std::uint32_t(detail::parse_u64(value, key));
    } else if (key == "num_stars") {
      job.scene.num_stars = std::uint32_t(detail::parse_u64(value, key));
    } else if (key == "flux_slope") {
      job.scene.flux_slope = detail::parse_double(value, key);
    } else if (key == "flux_min") {
      job.scene.flux_min = detail::parse_double(value, key);
    } else if (key == "flux_max") {
      job.scene.flux_max = detail::parse_double(value, key);
    } else if (key == "background") {
      job.scene.background = detail::parse_double(value, key);
    } else if (key == "background_ramp") {
      job.scene.background_ramp = detail::parse_double(value, key);
    } else if (key == "psf_sigma") {
      job.scene.psf_sigma = detail::parse_double(value, key);
    } else if (key == "seed") {
      job.scene.seed = detail::parse_u64(value, key);
    } else if (key == "feature") {
      const auto f = parse_csv_doubles(value, key);
      if (f.size() != 4) {
        raise(ErrorCode::ConfigError, "feature wants cx,cy,extent,amplitude");
      }
      job.scene.features.push_back({f[0], f[1], f[2], f[3]});
    } else if (key == "observations") {
      job.observations = std::size_t(detail::parse_u64(value, key));
    } else if (key == "obs_noise_sigma") {
      job.obs_noise_sigma = detail::parse_double(value, key);
    } else if (key == "obs_coverage_min") {
      job.obs_coverage_min = detail::parse_double(value, key);
    } else if (key == "obs_coverage_max") {
      job.obs_coverage_max = detail::parse_double(value, key);
    } else if (key == "obs_quant_levels") {
      job.obs_quant_levels = int(detail::parse_u64(value, key));
    } else if (key == "obs_noise_after_tonemap") {
      job.obs_noise_after_tonemap = detail::parse_bool(value, key);
    } else if (key == "obs_scale_min") {
      job.obs_scale_min = detail::parse_double(value, key);
    } else if (key == "obs_scale_max") {
      job.obs_scale_max = detail::parse_double(value, key);
    } else if (key == "obs_rotation_max_deg") {
      job.obs_rotation_max_deg = detail::parse_double(value, key);
    } else {
      raise(ErrorCode::ConfigError, "unknown synth spec key '" + key + "' in " + path);
    }
  }

  if (width < 1 || height < 1) {
    raise(ErrorCode::ConfigError, "canvas_width and canvas_height are required");
  }
  job.scene.canvas = Canvas(width, height);
  if (job.obs_coverage_min > job.obs_coverage_max || job.obs_coverage_min <= 0.0 ||
      job.obs_coverage_max > 1.0) {
    raise(ErrorCode::ConfigError, "obs coverage range must satisfy 0 < min <= max <= 1");
  }
  if (job.obs_quant_levels == 1 || job.obs_quant_levels < 0 || job.obs_quant_levels > 65536) {
    raise(ErrorCode::ConfigError, "obs_quant_levels must be 0 (off) or in [2, 65536]");
  }
  return job;
}

void generate_synthetic_set(const SynthJob& job, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  // configs carry absolute paths so they work from any directory
  const fs::path base = fs::absolute(out_dir);
  const auto out_path = [&](const std::string& name) { return (base / name).string(); };

  const synth::Scene scene = synth::make_sky(job.scene);
  const Canvas canvas = job.scene.canvas;

  // exact truth for metrics, plus a viewable stretch
  DecodedImage truth_img;
  truth_img.bit_depth = 16;
  truth_img.channels.push_back(scene.truth);
  encode_image(truth_img, out_path("truth.pfm"));
  {
    const auto [lo_it, hi_it] = std::minmax_element(scene.truth.values.begin(),
                                                    scene.truth.values.end());
    const double lo = *lo_it, hi = *hi_it;
    const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
    Grid preview(canvas.width, canvas.height);
    for (std::size_t p = 0; p < preview.values.size(); ++p) {
      preview.values[p] = (scene.truth.values[p] - lo) * scale;
    }
    write_gray(preview, 16, out_path("truth_preview.pgm"));
  }
  write_catalog(scene.catalog, out_path("catalog.txt"));

  std::string cfg;
  cfg += "canvas_width=" + std::to_string(canvas.width) + "\n";
  cfg += "canvas_height=" + std::to_string(canvas.height) + "\n";
  cfg += "solve=sidecar\n";
  cfg += "init=mean\n";
  cfg += "skip_uninformative=1\n";
  cfg += "seed=" + std::to_string(job.scene.seed) + "\n";
  cfg += "reference=" + out_path("truth.pfm") + "\n";
  cfg += "state_out=" + out_path("consensus_{channel}.enhc") + "\n";
  cfg += "render_out=" + out_path("consensus.pgm") + "\n";
  cfg += "report_out=" + out_path("report.txt") + "\n";

  char name[64];
  for (std::size_t i = 0; i < job.observations; ++i) {
    Rng draw(Rng::derive_seed(job.scene.seed, 9000 + i));

    synth::ObservationSpec obs;
    obs.tone_map = synth::random_tonemap(Rng::derive_seed(job.scene.seed, 100 + i));
    if (job.obs_quant_levels >= 2) obs.tone_map.levels = job.obs_quant_levels;
    obs.noise_sigma = job.obs_noise_sigma;
    obs.noise_after_tonemap = job.obs_noise_after_tonemap;
    obs.seed = Rng::derive_seed(job.scene.seed, 200 + i);

    // crop with the requested areal coverage
    const double coverage = draw.uniform(job.obs_coverage_min, job.obs_coverage_max);
    const double side = std::sqrt(coverage);
    obs.crop_width = std::max<std::uint32_t>(2, std::uint32_t(std::lround(canvas.width * side)));
    obs.crop_height = std::max<std::uint32_t>(2, std::uint32_t(std::lround(canvas.height * side)));
    obs.crop_width = std::min(obs.crop_width, canvas.width);
    obs.crop_height = std::min(obs.crop_height, canvas.height);
    obs.crop_x = std::uint32_t(draw.next_below(canvas.width - obs.crop_width + 1));
    obs.crop_y = std::uint32_t(draw.next_below(canvas.height - obs.crop_height + 1));

    obs.transform.scale = draw.uniform(job.obs_scale_min, job.obs_scale_max);
    obs.transform.rotation = job.obs_rotation_max_deg > 0.0
                                 ? draw.uniform(-job.obs_rotation_max_deg, job.obs_rotation_max_deg) *
                                       kPi / 180.0
                                 : 0.0;

    const Grid frame = synth::make_frame(scene.truth, obs);

    // what the pipeline needs: frame pixel grid -> canvas
    registration::SimilarityTransform frame_to_canvas = obs.transform;
    const registration::Point origin =
        obs.transform.apply({double(obs.crop_x), double(obs.crop_y)});
    frame_to_canvas.dx = origin.x;
    frame_to_canvas.dy = origin.y;

    // quantized frames store the level index exactly; others a 16-bit stretch
    Grid stored(frame.width, frame.height);
    int bit_depth = 16;
    if (obs.tone_map.levels) {
      const double lo = obs.tone_map.clip_lo;
      const double step = (obs.tone_map.clip_hi - lo) / double(*obs.tone_map.levels - 1);
      for (std::size_t p = 0; p < frame.values.size(); ++p) {
        stored.values[p] = std::nearbyint((frame.values[p] - lo) / step);
      }
      bit_depth = *obs.tone_map.levels <= 256 ? 8 : 16;
    } else {
      const auto [lo_it, hi_it] = std::minmax_element(frame.values.begin(), frame.values.end());
      const double lo = *lo_it, hi = *hi_it;
      const double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;
      for (std::size_t p = 0; p < frame.values.size(); ++p) {
        stored.values[p] = (frame.values[p] - lo) * scale;
      }
    }

    std::snprintf(name, sizeof name, "obs_%03zu.pgm", i);
    write_gray(stored, bit_depth, out_path(name));
    registration::write_transform_sidecar(frame_to_canvas, out_path(name) + ".transform");
    cfg += "input=" + out_path(name) + "\n";
  }

  std::ofstream cfg_out(out_path("combine.cfg"), std::ios::trunc);
  if (!cfg_out) raise(ErrorCode::IoError, "cannot write combine.cfg");
  cfg_out << cfg;
}

}  // namespace enhance::pipeline
