#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "senm/analysis.hpp"
#include "senm/circles.hpp"
#include "senm/preprocessing.hpp"

namespace senm {

/// Default location of the shipped stopword lists and lexicons.
std::filesystem::path default_data_dir();

struct PipelineConfig {
  std::filesystem::path data;  // datasets.csv, or the directory holding it
  std::filesystem::path out;
  std::vector<std::string> datasets;  // empty: every dataset in the manifest

  std::string provider = "precomputed";
  std::optional<std::string> compare_provider;  // precomputed | lexicon | shifted
  std::optional<std::filesystem::path> sidecar_dir;  // <dir>/<dataset>.csv
  std::optional<std::filesystem::path> lexicon;
  double lexicon_threshold = 0.5;
  double shift_probability = 0.25;
  double sign_threshold = kDefaultSignThreshold;

  ActivityPolicy activity;
  ClassifierPolicy classifier;
  std::optional<std::filesystem::path> ego_labels;
  MeanShiftOptions mean_shift;
  int circles_filter = 5;
  CircleAveraging averaging = CircleAveraging::pooled;
  std::set<std::string> tables;  // "2".."7", "locations"; empty: all

  std::optional<std::filesystem::path> labelmap;
  std::optional<std::filesystem::path> locations;
  std::optional<std::filesystem::path> stopwords_dir;
  std::size_t country_min_egos = 3;
  std::size_t top_k = 20;

  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

/// Reads a JSON config; keys mirror the command-line flags with underscores
/// (e.g. "sign_threshold", "bandwidth_quantile", "circles_filter").
void apply_config_file(const std::filesystem::path& path, PipelineConfig& config);

/// Range checks; throws ValidationError.
void validate(const PipelineConfig& config);

void run_ingest(const PipelineConfig& config);
void run_preprocess(const PipelineConfig& config);
void run_circles(const PipelineConfig& config);
void run_sign(const PipelineConfig& config);
void run_analyze(const PipelineConfig& config);
void run_topics(const PipelineConfig& config);
void run_pipeline(const PipelineConfig& config);

/// Error raised inside a stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "[" + stage + "] " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitData = 3;

/// Entry point of the command-line tool; `args[0]` is the program name.
/// Returns 0 on success, 2 on validation errors and 3 on data errors.
int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace senm
