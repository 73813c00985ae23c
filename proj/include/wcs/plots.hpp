#pragma once

// CSV persistence and SVG figures for training logs, episodes and paired
// comparisons. Every emit_* call writes the SVG and the CSV it was drawn from
// (same path, .csv extension).
//
// CSV schemas (header row, float64 printed with 17 significant digits, LF):
//   train_log.csv : iteration,mean_cost,grad_norm,mean_total_cost
//   timing.csv    : iteration,elapsed_s
//   episode.csv   : t,plant,x,h,p,closed,stage_cost
//   compare.csv   : seed,policy,total_cost
//   summary.csv   : policy,mean_cost,median_cost,ref_win_rate

#include <filesystem>
#include <string>
#include <vector>

#include "wcs/trainer.hpp"

namespace wcs::exp {

struct EvalReport;

inline constexpr const char* kTrainLogHeader = "iteration,mean_cost,grad_norm,mean_total_cost";
inline constexpr const char* kTimingHeader = "iteration,elapsed_s";
inline constexpr const char* kEpisodeHeader = "t,plant,x,h,p,closed,stage_cost";
inline constexpr const char* kCompareHeader = "seed,policy,total_cost";
inline constexpr const char* kSummaryHeader = "policy,mean_cost,median_cost,ref_win_rate";

// Plot-ready tables, also what the `plot` subcommand reads back from CSV.
struct TrainSeries {
  std::vector<int> iteration;
  std::vector<double> mean_cost;
};

struct EpisodeSeries {
  int steps = 0;
  int plants = 0;
  // [t][plant]
  std::vector<std::vector<double>> x, h, p;
};

struct CompareTable {
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> cost;  // [policy][seed]
};

std::string format_double(double v);

void write_train_log_csv(const std::filesystem::path& path, const rl::TrainLog& log);
void write_timing_csv(const std::filesystem::path& path, const rl::TrainLog& log);
void write_episode_csv(const std::filesystem::path& path, const rl::EpisodeTrace& trace);
void write_compare_csv(const std::filesystem::path& path, const EvalReport& report);
void write_summary_csv(const std::filesystem::path& path, const EvalReport& report);

TrainSeries to_series(const rl::TrainLog& log);
EpisodeSeries to_series(const rl::EpisodeTrace& trace);
CompareTable to_table(const EvalReport& report);

TrainSeries read_train_csv(const std::filesystem::path& path);
EpisodeSeries read_episode_csv(const std::filesystem::path& path);
CompareTable read_compare_csv(const std::filesystem::path& path);

// SVG renderers. Structure: train -> one <polyline class="series">;
// episode -> three <g class="panel"> (state, fading, power) with one series
// per plant; compare -> one <rect class="bar"> per (seed, policy).
void render_train_svg(const std::filesystem::path& path, const TrainSeries& s);
void render_episode_svg(const std::filesystem::path& path, const EpisodeSeries& s);
void render_compare_svg(const std::filesystem::path& path, const CompareTable& t);

void emit_plots(const rl::TrainLog& log, const std::filesystem::path& out_svg);
void emit_plots(const EvalReport& report, const std::filesystem::path& out_svg);
void emit_plots(const rl::EpisodeTrace& trace, const std::filesystem::path& out_svg);

}  // namespace wcs::exp
