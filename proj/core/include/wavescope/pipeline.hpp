#pragma once

#include <filesystem>
#include <vector>

#include "wavescope/config.hpp"
#include "wavescope/detect.hpp"

namespace wavescope {

/// End-to-end run: generate/load the dataset, transform to scalograms, fit
/// and evaluate every configured method, persist all artifacts (dataset,
/// image corpora, models, reports, CSV exports, run manifest) under out_dir.
/// One DetectionReport per (repeat, method), repeats outermost.
std::vector<DetectionReport> run_pipeline(const RunConfig& cfg,
                                          const std::filesystem::path& out_dir);

/// Scalogram corpus for one split of records, parallel across records.
std::vector<ImageTensor> images_from_records(const std::vector<TimeSeriesRecord>& records,
                                             const WaveletParams& wp, int height, int width,
                                             int channels);

} // namespace wavescope
