#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enhance/consensus/consensus.hpp"
#include "enhance/core/canvas.hpp"
#include "enhance/registration/registration.hpp"

namespace enhance::pipeline {

enum class ChannelMode { Luminance, PerChannel };
enum class InitMode { Random, Mean };
enum class SolveMode { Solve, Sidecar };
enum class WeightMode { Unit, Histogram };

struct RunConfig {
  Canvas canvas;
  std::vector<std::string> inputs;  // processing order: lexicographic unless order_file
  std::string order_file;
  ChannelMode channel_mode = ChannelMode::Luminance;
  InitMode init = InitMode::Mean;
  std::uint64_t seed = 0;
  SolveMode solve = SolveMode::Solve;
  std::string catalog_path;  // required in Solve mode
  WeightMode weight_mode = WeightMode::Unit;
  bool skip_uninformative = false;

  std::string state_out;   // "{channel}" expands to the channel index
  std::string render_out;  // histogram-matched preview, 16-bit grayscale
  std::string report_out;
  std::string render_match;  // "mean" (default) or an image path
  std::string reference;     // optional ground-truth image for tau metrics

  std::uint64_t metrics_image_pairs = 200;
  std::uint64_t metrics_pixel_pairs = 100000;
  bool metrics_per_image = false;

  std::size_t detect_max_stars = 200;
  double detect_threshold_sigmas = 8.0;
  registration::SolveParams solve_params;
};

// Plain-text key=value config, '#' comments, `input=` repeatable.
RunConfig parse_run_config(const std::string& path);

struct WeightedAverage {
  Grid image;                         // uncovered pixels are 0
  std::vector<std::uint8_t> coverage;  // 1 where any input contributed
};

// Mask-weighted per-pixel mean of the inputs.
WeightedAverage weighted_average_baseline(const std::vector<ObservedImage>& images);

struct ChannelMetrics {
  std::optional<double> consensus_vs_reference;
  std::optional<double> weighted_average_vs_reference;
  std::optional<double> best_single_vs_reference;
  std::optional<double> mean_inter_image_tau;
  std::size_t inter_image_pairs_used = 0;
  std::optional<double> mean_image_consensus_tau;
  std::vector<std::pair<std::string, double>> per_image_vs_reference;
};

struct MetricsReport {
  std::size_t images_in = 0;
  std::size_t images_used = 0;
  std::size_t images_skipped = 0;
  std::vector<std::pair<std::string, std::string>> skipped;  // path -> reason
  std::vector<ChannelMetrics> channels;

  std::string to_text(const Canvas& canvas) const;
};

struct RunResult {
  std::vector<consensus::ConsensusState> states;  // one per channel
  MetricsReport report;
};

// Register (or read sidecar transforms), resample, update the consensus in
// the deterministic input order, render, and compute the metrics report.
// Throws EmptyRun when no input survives.
RunResult run_combine(const RunConfig& config);

// Star catalog file: "x y flux" per line, '#' comments.
registration::StarList read_catalog(const std::string& path);
void write_catalog(const registration::StarList& catalog, const std::string& path);

}  // namespace enhance::pipeline
