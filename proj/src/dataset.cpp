#include "adbn/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "adbn/fsutil.hpp"

namespace adbn {

namespace fs = std::filesystem;
using nlohmann::json;

const char* structure_name(Structure s) {
  switch (s) {
    case Structure::Deck: return "deck";
    case Structure::Wall: return "wall";
    case Structure::Pavement: return "pavement";
  }
  return "unknown";
}

int label_for(TaskShape task, Structure structure, bool cracked) {
  if (task == TaskShape::Binary) return cracked ? 1 : 0;
  return static_cast<int>(structure) * 2 + (cracked ? 1 : 0);
}

std::vector<std::string> label_names_for(TaskShape task) {
  if (task == TaskShape::Binary) return {"uncracked", "cracked"};
  std::vector<std::string> names;
  for (Structure s : {Structure::Deck, Structure::Wall, Structure::Pavement}) {
    names.push_back(std::string(structure_name(s)) + "-uncracked");
    names.push_back(std::string(structure_name(s)) + "-cracked");
  }
  return names;
}

std::string PreprocessDescriptor::to_string() const {
  return "side=" + std::to_string(target_side) + " grayscale=" + grayscale +
         " normalization=" + normalization;
}

Eigen::MatrixXd data_matrix(const LabeledDataset& dataset) {
  if (dataset.empty()) return Eigen::MatrixXd(0, dataset.descriptor.input_dim());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dataset.size()), dataset.samples[0].pixels.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = dataset.samples[i].pixels.transpose();
  }
  return m;
}

std::vector<int> label_vector(const LabeledDataset& dataset) {
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset.samples) labels.push_back(s.label);
  return labels;
}

RasterImage decode_image(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DatasetError("cannot decode image: " + path.string());
  RasterImage img;
  img.width = bgr.cols;
  img.height = bgr.rows;
  img.channels = 3;
  img.data.resize(static_cast<std::size_t>(bgr.cols) * bgr.rows * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      const std::size_t at = (static_cast<std::size_t>(y) * bgr.cols + x) * 3;
      img.data[at + 0] = row[x][2];
      img.data[at + 1] = row[x][1];
      img.data[at + 2] = row[x][0];
    }
  }
  return img;
}

void encode_gray_png(const fs::path& path, const Eigen::VectorXd& pixels, int side) {
  const RasterImage img = render_sample(pixels, side);
  cv::Mat gray(side, side, CV_8UC1);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      gray.at<std::uint8_t>(y, x) = img.data[static_cast<std::size_t>(y) * side + x];
    }
  }
  const fs::path tmp = path.parent_path() / (path.stem().string() + ".tmp" +
                                             (path.has_extension() ? path.extension().string() : ".png"));
  if (!cv::imwrite(tmp.string(), gray)) {
    throw DatasetError("cannot write image: " + path.string());
  }
  fs::rename(tmp, path);
}

Eigen::VectorXd preprocess(const RasterImage& image, int target_side) {
  if (image.width < 1 || image.height < 1) {
    throw DatasetError("degenerate image: " + std::to_string(image.width) + "x" +
                       std::to_string(image.height));
  }
  if (target_side < 8) throw ConfigError("target_side", "must be >= 8");
  if (image.channels != 1 && image.channels != 3) {
    throw DatasetError("unsupported channel count: " + std::to_string(image.channels));
  }

  cv::Mat gray(image.height, image.width, CV_64FC1);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::size_t at =
          (static_cast<std::size_t>(y) * image.width + x) * image.channels;
      double value;
      if (image.channels == 1) {
        value = image.data[at] / 255.0;
      } else {
        // Integer-weighted luminosity keeps pure black/white exact.
        const long numer = 299L * image.data[at] + 587L * image.data[at + 1] +
                           114L * image.data[at + 2];
        value = static_cast<double>(numer) / 255000.0;
      }
      gray.at<double>(y, x) = value;
    }
  }

  cv::Mat resized;
  if (target_side <= image.width && target_side <= image.height) {
    cv::resize(gray, resized, cv::Size(target_side, target_side), 0, 0, cv::INTER_AREA);
  } else {
    cv::resize(gray, resized, cv::Size(target_side, target_side), 0, 0, cv::INTER_LINEAR);
  }

  Eigen::VectorXd out(static_cast<Eigen::Index>(target_side) * target_side);
  for (int y = 0; y < target_side; ++y) {
    for (int x = 0; x < target_side; ++x) {
      out(static_cast<Eigen::Index>(y) * target_side + x) =
          std::clamp(resized.at<double>(y, x), 0.0, 1.0);
    }
  }
  return out;
}

std::size_t DatasetManifest::train_total() const {
  return std::accumulate(categories.begin(), categories.end(), std::size_t{0},
                         [](std::size_t acc, const CategoryCount& c) { return acc + c.train; });
}

std::size_t DatasetManifest::test_total() const {
  return std::accumulate(categories.begin(), categories.end(), std::size_t{0},
                         [](std::size_t acc, const CategoryCount& c) { return acc + c.test; });
}

namespace {

struct ReferenceCount {
  Structure structure;
  bool cracked;
  std::size_t train;
  std::size_t test;
};

// Published per-category image counts of the SDNET2018 benchmark.
constexpr std::array<ReferenceCount, 6> kReferenceCounts = {{
    {Structure::Deck, false, 10424, 1834},
    {Structure::Deck, true, 1171, 191},
    {Structure::Wall, false, 12853, 1434},
    {Structure::Wall, true, 3471, 380},
    {Structure::Pavement, false, 19531, 2195},
    {Structure::Pavement, true, 2369, 239},
}};

}  // namespace

std::optional<std::string> check_reference_counts(const DatasetManifest& manifest) {
  std::ostringstream mismatch;
  for (const auto& ref : kReferenceCounts) {
    const auto it = std::find_if(manifest.categories.begin(), manifest.categories.end(),
                                 [&](const CategoryCount& c) {
                                   return c.structure == ref.structure && c.cracked == ref.cracked;
                                 });
    const std::size_t train = it == manifest.categories.end() ? 0 : it->train;
    const std::size_t test = it == manifest.categories.end() ? 0 : it->test;
    if (train != ref.train || test != ref.test) {
      mismatch << " " << structure_name(ref.structure) << (ref.cracked ? "/cracked" : "/uncracked")
               << " got " << train << "/" << test << " expected " << ref.train << "/" << ref.test
               << ";";
    }
  }
  if (mismatch.str().empty()) return std::nullopt;
  return "dataset counts differ from the published SDNET2018 totals (partial tree?):" +
         mismatch.str();
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

struct StructureDirs {
  Structure structure;
  std::string dir;
};

}  // namespace

SdnetLoadResult load_sdnet(const fs::path& root, std::optional<Structure> subset,
                           const PreprocessDescriptor& descriptor, TaskShape task,
                           const SdnetNaming& naming) {
  if (!fs::exists(root) || !fs::is_directory(root)) {
    throw DatasetError("dataset root not found: " + root.string());
  }

  SdnetLoadResult result;
  result.train.label_names = label_names_for(task);
  result.train.descriptor = descriptor;
  result.test.label_names = result.train.label_names;
  result.test.descriptor = descriptor;
  result.manifest.descriptor = descriptor;
  for (Structure s : {Structure::Deck, Structure::Wall, Structure::Pavement}) {
    result.manifest.categories.push_back({s, false, 0, 0});
    result.manifest.categories.push_back({s, true, 0, 0});
  }

  const std::vector<StructureDirs> structures = {
      {Structure::Deck, naming.deck_dir},
      {Structure::Wall, naming.wall_dir},
      {Structure::Pavement, naming.pavement_dir},
  };

  const bool has_splits = fs::is_directory(root / "train");
  const std::vector<std::pair<fs::path, bool>> split_roots =
      has_splits ? std::vector<std::pair<fs::path, bool>>{{root / "train", false},
                                                          {root / "test", true}}
                 : std::vector<std::pair<fs::path, bool>>{{root, false}};

  for (const auto& [split_root, is_test] : split_roots) {
    if (!fs::is_directory(split_root)) continue;
    for (const auto& sd : structures) {
      if (subset && *subset != sd.structure) continue;
      const fs::path structure_dir = split_root / sd.dir;
      if (!fs::is_directory(structure_dir)) continue;
      for (bool cracked : {true, false}) {
        const std::string class_dir =
            (cracked ? naming.cracked_prefix : naming.uncracked_prefix) + sd.dir;
        const fs::path dir = structure_dir / class_dir;
        if (!fs::is_directory(dir)) continue;
        for (const fs::path& file : sorted_files(dir)) {
          RasterImage img;
          try {
            img = decode_image(file);
          } catch (const DatasetError& e) {
            result.warnings.push_back(std::string("skipped: ") + e.what());
            ++result.manifest.skipped;
            continue;
          }
          LabeledSample sample;
          sample.pixels = preprocess(img, descriptor.target_side);
          sample.structure = sd.structure;
          sample.cracked = cracked;
          sample.label = label_for(task, sd.structure, cracked);
          sample.source = file.string();
          auto& category = result.manifest.categories[static_cast<std::size_t>(sd.structure) * 2 +
                                                      (cracked ? 1 : 0)];
          if (is_test) {
            ++category.test;
            result.test.samples.push_back(std::move(sample));
          } else {
            ++category.train;
            result.train.samples.push_back(std::move(sample));
          }
        }
      }
    }
  }

  if (result.train.empty() && result.test.empty()) {
    throw DatasetError("zero images found under " + root.string());
  }
  if (auto warning = check_reference_counts(result.manifest)) {
    result.warnings.push_back(*warning);
  }
  return result;
}

namespace {

// Bilinearly interpolated coarse Gaussian grid; gives each synthetic square
// its low-frequency surface texture.
double blotch_value(const std::vector<double>& grid, int cells, double cell_px, int y, int x) {
  const double gy = y / cell_px;
  const double gx = x / cell_px;
  const int y0 = std::min(static_cast<int>(gy), cells - 1);
  const int x0 = std::min(static_cast<int>(gx), cells - 1);
  const double fy = gy - y0;
  const double fx = gx - x0;
  const int stride = cells + 1;
  const double v00 = grid[static_cast<std::size_t>(y0) * stride + x0];
  const double v01 = grid[static_cast<std::size_t>(y0) * stride + x0 + 1];
  const double v10 = grid[static_cast<std::size_t>(y0 + 1) * stride + x0];
  const double v11 = grid[static_cast<std::size_t>(y0 + 1) * stride + x0 + 1];
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

void draw_crack(Eigen::VectorXd& pixels, int side, Rng& rng) {
  const int width = 1 + static_cast<int>(rng() % 3);
  const double depth = 0.75 + 0.2 * uniform_unit(rng);
  const bool vertical = (rng() & 1u) != 0;
  double lateral = uniform_unit(rng) * (side - 1);
  for (int t = 0; t < side; ++t) {
    lateral += (uniform_unit(rng) - 0.5) * 2.0;
    lateral = std::clamp(lateral, 0.0, static_cast<double>(side - 1));
    const int center = static_cast<int>(std::lround(lateral));
    for (int dw = 0; dw < width; ++dw) {
      const int offset = std::clamp(center + dw - width / 2, 0, side - 1);
      const Eigen::Index at = vertical
                                  ? static_cast<Eigen::Index>(t) * side + offset
                                  : static_cast<Eigen::Index>(offset) * side + t;
      pixels(at) *= (1.0 - depth);
    }
  }
}

}  // namespace

LabeledDataset generate_synthetic(int n, double crack_fraction, int side, std::uint64_t seed) {
  if (n < 2) throw ConfigError("n", "need at least 2 synthetic samples");
  if (crack_fraction < 0.0 || crack_fraction > 1.0) {
    throw ConfigError("crack_fraction", "must lie in [0, 1]");
  }
  if (side < 16) throw ConfigError("side", "must be >= 16");

  const int n_cracked = static_cast<int>(std::llround(n * crack_fraction));
  LabeledDataset dataset;
  dataset.label_names = label_names_for(TaskShape::Binary);
  dataset.descriptor.target_side = side;

  const int cells = std::max(2, side / 8);
  const double cell_px = static_cast<double>(side) / cells;

  for (int idx = 0; idx < n; ++idx) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(idx)));
    const bool cracked = idx < n_cracked;

    // Bright, high-contrast surface: Bernoulli visibles resolve structure
    // only when pixels sit near the ends of the unit interval.
    const double base = 0.82 + 0.10 * uniform_unit(rng);
    std::vector<double> grid(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& g : grid) g = normal_draw(rng, 0.0, 0.04);

    Eigen::VectorXd pixels(static_cast<Eigen::Index>(side) * side);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double noise = (uniform_unit(rng) - 0.5) * 0.12;
        pixels(static_cast<Eigen::Index>(y) * side + x) =
            std::clamp(base + blotch_value(grid, cells, cell_px, y, x) + noise, 0.0, 1.0);
      }
    }
    if (cracked) draw_crack(pixels, side, rng);

    LabeledSample sample;
    sample.pixels = std::move(pixels);
    sample.cracked = cracked;
    sample.structure = Structure::Deck;
    sample.label = label_for(TaskShape::Binary, sample.structure, cracked);
    sample.source = "synthetic:" + std::to_string(seed) + ":" + std::to_string(idx);
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

RasterImage render_sample(const Eigen::VectorXd& pixels, int side) {
  if (pixels.size() != static_cast<Eigen::Index>(side) * side) {
    throw ShapeError("render_sample: pixel count " + std::to_string(pixels.size()) +
                     " does not match side " + std::to_string(side));
  }
  RasterImage img;
  img.width = side;
  img.height = side;
  img.channels = 1;
  img.data.resize(static_cast<std::size_t>(side) * side);
  for (Eigen::Index i = 0; i < pixels.size(); ++i) {
    img.data[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(std::clamp(pixels(i), 0.0, 1.0) * 255.0));
  }
  return img;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        double test_fraction,
                                                        std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction", "must lie strictly between 0 and 1");
  }

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_label[dataset.samples[i].label].push_back(i);
  for (const auto& [label, members] : by_label) {
    if (members.size() < 2) {
      throw DatasetError("cannot stratify: category " + std::to_string(label) + " has " +
                         std::to_string(members.size()) + " sample(s)");
    }
  }

  Rng rng(seed);
  std::vector<bool> in_test(dataset.size(), false);
  for (auto& [label, members] : by_label) {
    shuffle_indices(members, rng);
    const auto n_test = static_cast<std::size_t>(std::llround(members.size() * test_fraction));
    for (std::size_t i = 0; i < n_test && i < members.size(); ++i) in_test[members[i]] = true;
  }

  LabeledDataset train, test;
  train.label_names = test.label_names = dataset.label_names;
  train.descriptor = test.descriptor = dataset.descriptor;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_test[i] ? test : train).samples.push_back(dataset.samples[i]);
  }
  return {std::move(train), std::move(test)};
}

RelabelMap read_relabel_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read relabel file: " + path.string());
  RelabelMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw DatasetError("relabel file " + path.string() + ": line " + std::to_string(lineno) +
                         " is not 'source,label'");
    }
    const std::string source = line.substr(0, comma);
    const std::string label_text = line.substr(comma + 1);
    if (source == "source" && lineno == 1) continue;  // header row
    try {
      map[source] = std::stoi(label_text);
    } catch (const std::exception&) {
      throw DatasetError("relabel file " + path.string() + ": line " + std::to_string(lineno) +
                         " has a non-integer label");
    }
  }
  return map;
}

std::size_t apply_relabels(LabeledDataset& dataset, const RelabelMap& relabels, TaskShape task) {
  const int max_label = task == TaskShape::Binary ? 1 : 5;
  std::size_t applied = 0;
  for (auto& sample : dataset.samples) {
    const auto it = relabels.find(sample.source);
    if (it == relabels.end()) continue;
    if (it->second < 0 || it->second > max_label) {
      throw DatasetError("relabel for " + sample.source + " out of range: " +
                         std::to_string(it->second));
    }
    sample.label = it->second;
    if (task == TaskShape::Binary) {
      sample.cracked = it->second == 1;
    } else {
      sample.structure = static_cast<Structure>(it->second / 2);
      sample.cracked = (it->second % 2) == 1;
    }
    ++applied;
  }
  return applied;
}

namespace {
constexpr char kCacheMagic[8] = {'A', 'D', 'B', 'N', 'D', 'S', 'C', '1'};
}

void save_dataset_cache(const fs::path& path, const LabeledDataset& dataset) {
  json header;
  header["version"] = 1;
  header["descriptor"] = {{"target_side", dataset.descriptor.target_side},
                          {"grayscale", dataset.descriptor.grayscale},
                          {"normalization", dataset.descriptor.normalization}};
  header["label_names"] = dataset.label_names;
  header["count"] = dataset.size();
  header["dim"] = dataset.empty() ? dataset.descriptor.input_dim() : dataset.samples[0].pixels.size();
  json labels = json::array(), structures = json::array(), cracked = json::array(),
       sources = json::array();
  for (const auto& s : dataset.samples) {
    labels.push_back(s.label);
    structures.push_back(static_cast<int>(s.structure));
    cracked.push_back(s.cracked);
    sources.push_back(s.source);
  }
  header["labels"] = std::move(labels);
  header["structures"] = std::move(structures);
  header["cracked"] = std::move(cracked);
  header["sources"] = std::move(sources);

  const std::string header_text = header.dump();
  std::string blob;
  blob.reserve(16 + header_text.size() + dataset.size() * 8);
  blob.append(kCacheMagic, sizeof(kCacheMagic));
  const auto header_len = static_cast<std::uint32_t>(header_text.size());
  blob.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  blob.append(header_text);
  for (const auto& s : dataset.samples) {
    blob.append(reinterpret_cast<const char*>(s.pixels.data()),
                static_cast<std::size_t>(s.pixels.size()) * sizeof(double));
  }
  write_file_atomic(path, blob);
}

LabeledDataset load_dataset_cache(const fs::path& path,
                                  const std::optional<PreprocessDescriptor>& expected) {
  const std::string blob = read_file(path);
  if (blob.size() < sizeof(kCacheMagic) + sizeof(std::uint32_t) ||
      std::memcmp(blob.data(), kCacheMagic, sizeof(kCacheMagic)) != 0) {
    throw FormatError("not a dataset cache file: " + path.string());
  }
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, blob.data() + sizeof(kCacheMagic), sizeof(header_len));
  const std::size_t header_start = sizeof(kCacheMagic) + sizeof(header_len);
  if (blob.size() < header_start + header_len) {
    throw FormatError("truncated dataset cache: " + path.string());
  }

  json header;
  try {
    header = json::parse(blob.substr(header_start, header_len));
  } catch (const json::exception& e) {
    throw FormatError("corrupt dataset cache header: " + std::string(e.what()));
  }
  if (header.value("version", 0) != 1) {
    throw FormatError("unsupported dataset cache version: " +
                      std::to_string(header.value("version", 0)));
  }

  LabeledDataset dataset;
  dataset.descriptor.target_side = header["descriptor"].value("target_side", 0);
  dataset.descriptor.grayscale = header["descriptor"].value("grayscale", "");
  dataset.descriptor.normalization = header["descriptor"].value("normalization", "");
  if (expected && !(dataset.descriptor == *expected)) {
    throw FormatError("preprocessing descriptor mismatch: cache has [" +
                      dataset.descriptor.to_string() + "], expected [" + expected->to_string() +
                      "]");
  }
  dataset.label_names = header["label_names"].get<std::vector<std::string>>();

  const auto count = header["count"].get<std::size_t>();
  const auto dim = header["dim"].get<Eigen::Index>();
  const std::size_t payload_start = header_start + header_len;
  if (blob.size() != payload_start + count * static_cast<std::size_t>(dim) * sizeof(double)) {
    throw FormatError("dataset cache payload size mismatch: " + path.string());
  }

  for (std::size_t i = 0; i < count; ++i) {
    LabeledSample sample;
    sample.pixels = Eigen::VectorXd(dim);
    std::memcpy(sample.pixels.data(),
                blob.data() + payload_start + i * static_cast<std::size_t>(dim) * sizeof(double),
                static_cast<std::size_t>(dim) * sizeof(double));
    sample.label = header["labels"][i].get<int>();
    sample.structure = static_cast<Structure>(header["structures"][i].get<int>());
    sample.cracked = header["cracked"][i].get<bool>();
    sample.source = header["sources"][i].get<std::string>();
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

}  // namespace adbn
