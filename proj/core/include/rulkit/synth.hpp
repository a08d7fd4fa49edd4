#pragma once

#include <cstdint>
#include <filesystem>

#include "rulkit/data.hpp"

namespace rulkit {

/// Configuration for the CMAPSS-format degradation simulator. The generated
/// corpus mirrors the layout and scale of the real subsets (26 columns,
/// run-to-failure training units, truncated test units with a truth file)
/// so the full pipeline, training loop and metrics can run without the
/// original data. Point the experiment config at a directory with the real
/// files to use them instead.
struct SynthConfig {
  Subset subset = Subset::FD001;
  std::size_t train_units = 100;
  std::size_t test_units = 100;
  std::uint64_t seed = 2008;
};

std::filesystem::path train_file(const std::filesystem::path& dir, Subset subset);
std::filesystem::path test_file(const std::filesystem::path& dir, Subset subset);
std::filesystem::path truth_file(const std::filesystem::path& dir, Subset subset);

/// True when train, test and truth files for the subset all exist in dir.
bool cmapss_files_present(const std::filesystem::path& dir, Subset subset);

/// Writes train_FDxxx.txt, test_FDxxx.txt and RUL_FDxxx.txt into out_dir.
/// Deterministic for a given config. Training units run to failure with
/// lives of at least 128 cycles; the sensors dropped by select_features are
/// emitted as constants.
void synthesize_cmapss(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Ensures usable data for the subset: returns dir when the files are
/// already there, otherwise synthesizes a default corpus into fallback_dir
/// (once) and returns that.
std::filesystem::path ensure_cmapss_data(const std::filesystem::path& dir, Subset subset,
                                         const std::filesystem::path& fallback_dir);

}  // namespace rulkit
