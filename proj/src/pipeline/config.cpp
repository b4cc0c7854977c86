#include <algorithm>
#include <fstream>
#include <sstream>

#include "enhance/core/error.hpp"
#include "enhance/pipeline/run.hpp"
#include "keyvalue.hpp"

namespace enhance::pipeline {

using detail::parse_bool;
using detail::parse_double;
using detail::parse_u64;
using detail::trim;

RunConfig parse_run_config(const std::string& path) {
  const detail::KeyValueFile kv = detail::read_key_values(path);
  RunConfig cfg;

  std::uint32_t width = 0, height = 0;
  for (const auto& [key, value] : kv.entries) {
    if (key == "canvas_width") {
      width = std::uint32_t(parse_u64(value, key));
    } else if (key == "canvas_height") {
      height = std::uint32_t(parse_u64(value, key));
    } else if (key == "input") {
      cfg.inputs.push_back(value);
    } else if (key == "order_file") {
      cfg.order_file = value;
    } else if (key == "channel_mode") {
      if (value == "luminance") {
        cfg.channel_mode = ChannelMode::Luminance;
      } else if (value == "per-channel") {
        cfg.channel_mode = ChannelMode::PerChannel;
      } else {
        raise(ErrorCode::ConfigError, "channel_mode must be luminance or per-channel");
      }
    } else if (key == "init") {
      if (value == "random") {
        cfg.init = InitMode::Random;
      } else if (value == "mean") {
        cfg.init = InitMode::Mean;
      } else {
        raise(ErrorCode::ConfigError, "init must be random or mean");
      }
    } else if (key == "seed") {
      cfg.seed = parse_u64(value, key);
    } else if (key == "solve") {
      if (value == "solve") {
        cfg.solve = SolveMode::Solve;
      } else if (value == "sidecar") {
        cfg.solve = SolveMode::Sidecar;
      } else {
        raise(ErrorCode::ConfigError, "solve must be solve or sidecar");
      }
    } else if (key == "catalog") {
      cfg.catalog_path = value;
    } else if (key == "weight_mode") {
      if (value == "unit") {
        cfg.weight_mode = WeightMode::Unit;
      } else if (value == "histogram") {
        cfg.weight_mode = WeightMode::Histogram;
      } else {
        raise(ErrorCode::ConfigError, "weight_mode must be unit or histogram");
      }
    } else if (key == "skip_uninformative") {
      cfg.skip_uninformative = parse_bool(value, key);
    } else if (key == "state_out") {
      cfg.state_out = value;
    } else if (key == "render_out") {
      cfg.render_out = value;
    } else if (key == "report_out") {
      cfg.report_out = value;
    } else if (key == "render_match") {
      cfg.render_match = value;
    } else if (key == "reference") {
      cfg.reference = value;
    } else if (key == "metrics_image_pairs") {
      cfg.metrics_image_pairs = parse_u64(value, key);
    } else if (key == "metrics_pixel_pairs") {
      cfg.metrics_pixel_pairs = parse_u64(value, key);
    } else if (key == "metrics_per_image") {
      cfg.metrics_per_image = parse_bool(value, key);
    } else if (key == "detect_max_stars") {
      cfg.detect_max_stars = std::size_t(parse_u64(value, key));
    } else if (key == "detect_threshold_sigmas") {
      cfg.detect_threshold_sigmas = parse_double(value, key);
    } else if (key == "solve_code_tolerance") {
      cfg.solve_params.code_tolerance = parse_double(value, key);
    } else if (key == "solve_match_radius") {
      cfg.solve_params.match_radius = parse_double(value, key);
    } else if (key == "solve_accept_fraction") {
      cfg.solve_params.accept_fraction = parse_double(value, key);
    } else if (key == "solve_min_matches") {
      cfg.solve_params.min_matches = std::size_t(parse_u64(value, key));
    } else if (key == "solve_max_quads") {
      cfg.solve_params.max_quads_tried = std::size_t(parse_u64(value, key));
    } else {
      raise(ErrorCode::ConfigError, "unknown config key '" + key + "' in " + path);
    }
  }

  if (width < 1 || height < 1) {
    raise(ErrorCode::ConfigError, "canvas_width and canvas_height are required");
  }
  cfg.canvas = Canvas(width, height);
  if (cfg.inputs.empty()) raise(ErrorCode::ConfigError, "at least one input is required");
  if (cfg.solve == SolveMode::Solve && cfg.catalog_path.empty()) {
    raise(ErrorCode::ConfigError, "solve mode requires a catalog");
  }

  // reproducible processing order
  if (!cfg.order_file.empty()) {
    std::ifstream in(cfg.order_file);
    if (!in) raise(ErrorCode::ConfigError, "cannot open order file " + cfg.order_file);
    std::vector<std::string> ordered;
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (!line.empty()) ordered.push_back(line);
    }
    cfg.inputs = std::move(ordered);
    if (cfg.inputs.empty()) raise(ErrorCode::ConfigError, "order file is empty");
  } else {
    std::sort(cfg.inputs.begin(), cfg.inputs.end());
  }
  return cfg;
}

registration::StarList read_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open catalog " + path);
  std::vector<registration::Star> stars;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    registration::Star s;
    if (ss >> s.x >> s.y >> s.flux) stars.push_back(s);
  }
  if (stars.empty()) raise(ErrorCode::FormatError, "catalog " + path + " has no stars");
  return registration::StarList::from_stars(std::move(stars));
}

void write_catalog(const registration::StarList& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << "# x y flux\n";
  char buf[128];
  for (const auto& s : catalog.stars) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", s.x, s.y, s.flux);
    out << buf;
  }
}

}  // namespace enhance::pipeline
