#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adbn/errors.hpp"
#include "adbn/rng.hpp"

namespace adbn {

enum class Structure { Deck = 0, Wall = 1, Pavement = 2 };

const char* structure_name(Structure s);

/// Label layout: Binary folds the three structures into cracked/uncracked;
/// Combined keeps six classes (structure x crack state).
enum class TaskShape { Binary, Combined };

int label_for(TaskShape task, Structure structure, bool cracked);
std::vector<std::string> label_names_for(TaskShape task);

struct PreprocessDescriptor {
  int target_side = 32;
  std::string grayscale = "luminosity";   // 0.299 R + 0.587 G + 0.114 B
  std::string normalization = "unit";     // pixel / 255 into [0, 1]

  Eigen::Index input_dim() const { return static_cast<Eigen::Index>(target_side) * target_side; }
  bool operator==(const PreprocessDescriptor&) const = default;
  std::string to_string() const;
};

struct LabeledSample {
  Eigen::VectorXd pixels;  // row-major raster, every entry in [0, 1]
  int label = 0;
  Structure structure = Structure::Deck;
  bool cracked = false;
  std::string source;  // file path or "synthetic:<seed>:<index>"
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;
  std::vector<std::string> label_names;
  PreprocessDescriptor descriptor;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Samples as a matrix, one row per sample.
Eigen::MatrixXd data_matrix(const LabeledDataset& dataset);
std::vector<int> label_vector(const LabeledDataset& dataset);

/// Decoded 8-bit raster, channels interleaved, RGB order when channels == 3.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;
};

RasterImage decode_image(const std::filesystem::path& path);
void encode_gray_png(const std::filesystem::path& path, const Eigen::VectorXd& pixels, int side);

/// Grayscale (luminosity weights), area-average resize to
/// target_side x target_side, scaled into [0, 1].
Eigen::VectorXd preprocess(const RasterImage& image, int target_side);

struct CategoryCount {
  Structure structure = Structure::Deck;
  bool cracked = false;
  std::size_t train = 0;
  std::size_t test = 0;
};

struct DatasetManifest {
  std::vector<CategoryCount> categories;  // all six, fixed order
  std::size_t skipped = 0;                // undecodable files
  PreprocessDescriptor descriptor;

  std::size_t train_total() const;
  std::size_t test_total() const;
};

/// Published SDNET2018 per-category counts; compared against a loaded
/// manifest to flag partial or re-organized trees.
std::optional<std::string> check_reference_counts(const DatasetManifest& manifest);

/// Directory names of the on-disk tree; the defaults follow the dataset's
/// D/W/P folders with C-/U-prefixed class subfolders (CD, UD, CW, ...).
struct SdnetNaming {
  std::string deck_dir = "D";
  std::string wall_dir = "W";
  std::string pavement_dir = "P";
  std::string cracked_prefix = "C";
  std::string uncracked_prefix = "U";
};

struct SdnetLoadResult {
  LabeledDataset train;
  LabeledDataset test;  // empty when the tree has no train/test subdirectories
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

/// Walk `root` (optionally containing train/ and test/ subtrees), decode
/// every image, and preprocess. Undecodable files are skipped with a
/// warning and counted in the manifest.
SdnetLoadResult load_sdnet(const std::filesystem::path& root,
                           std::optional<Structure> subset,
                           const PreprocessDescriptor& descriptor,
                           TaskShape task = TaskShape::Binary,
                           const SdnetNaming& naming = {});

/// Deterministic desk-scale stand-in: textured grayscale squares, the
/// cracked half overlaid with a dark random polyline 1-3 px wide.
LabeledDataset generate_synthetic(int n, double crack_fraction, int side, std::uint64_t seed);

/// Render one synthetic (or any preprocessed) sample back to an 8-bit image.
RasterImage render_sample(const Eigen::VectorXd& pixels, int side);

/// Stratified split by label; disjoint, union-preserving, seed-determined.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        double test_fraction,
                                                        std::uint64_t seed);

/// Relabel overrides: source string -> new label (applied in place).
using RelabelMap = std::map<std::string, int>;
RelabelMap read_relabel_file(const std::filesystem::path& path);
std::size_t apply_relabels(LabeledDataset& dataset, const RelabelMap& relabels, TaskShape task);

// Packed binary cache: versioned header + 64-bit floats. Reload fails when
// the preprocessing descriptor differs from the expectation.
void save_dataset_cache(const std::filesystem::path& path, const LabeledDataset& dataset);
LabeledDataset load_dataset_cache(const std::filesystem::path& path,
                                  const std::optional<PreprocessDescriptor>& expected = {});

}  // namespace adbn
