#include "adbn/checkpoint.hpp"

#include "adbn/fsutil.hpp"

namespace adbn {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? 0 : static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != c) {
      throw FormatError("checkpoint: ragged matrix rows");
    }
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

StructuralEvent::Kind kind_from_name(const std::string& name) {
  if (name == "generate") return StructuralEvent::Kind::Generate;
  if (name == "annihilate") return StructuralEvent::Kind::Annihilate;
  if (name == "layer") return StructuralEvent::Kind::Layer;
  throw FormatError("checkpoint: unknown event kind \"" + name + "\"");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  json doc;
  doc["format_version"] = checkpoint.format_version;
  doc["status"] = checkpoint.status;
  doc["config"] = checkpoint.config.to_json();

  json model;
  model["input_dim"] = checkpoint.model.input_dim;
  model["label_names"] = checkpoint.model.label_names;
  json layers = json::array();
  for (const auto& layer : checkpoint.model.layers) {
    layers.push_back({{"visible_bias", vector_to_json(layer.visible_bias)},
                      {"hidden_bias", vector_to_json(layer.hidden_bias)},
                      {"weights", matrix_to_json(layer.weights)}});
  }
  model["layers"] = std::move(layers);
  model["head_weights"] = matrix_to_json(checkpoint.model.head_weights);
  model["head_bias"] = vector_to_json(checkpoint.model.head_bias);
  json overrides = json::object();
  for (const auto& [pattern, label] : checkpoint.model.overrides) overrides[pattern] = label;
  model["overrides"] = std::move(overrides);
  doc["model"] = std::move(model);

  json events = json::array();
  for (const auto& event : checkpoint.events) {
    events.push_back({{"epoch", event.epoch},
                      {"kind", StructuralEvent::kind_name(event.kind)},
                      {"layer", event.layer},
                      {"detail", event.detail}});
  }
  doc["events"] = std::move(events);
  doc["final_metrics"] = checkpoint.final_metrics;

  write_file_atomic(path, doc.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }

  Checkpoint checkpoint;
  checkpoint.format_version = doc.value("format_version", -1);
  if (checkpoint.format_version != kCheckpointVersion) {
    throw FormatError("checkpoint format version " + std::to_string(checkpoint.format_version) +
                      " not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  checkpoint.status = doc.value("status", "ok");
  checkpoint.config = RunConfig::from_json(doc.at("config"));

  const json& model = doc.at("model");
  checkpoint.model.input_dim = model.at("input_dim").get<Eigen::Index>();
  checkpoint.model.label_names = model.at("label_names").get<std::vector<std::string>>();
  for (const json& layer : model.at("layers")) {
    RbmParameters params;
    params.visible_bias = vector_from_json(layer.at("visible_bias"));
    params.hidden_bias = vector_from_json(layer.at("hidden_bias"));
    params.weights = matrix_from_json(layer.at("weights"));
    if (params.weights.rows() != params.visible_size() ||
        params.weights.cols() != params.hidden_size()) {
      throw FormatError("checkpoint: layer weight shape does not match biases");
    }
    checkpoint.model.layers.push_back(std::move(params));
  }
  checkpoint.model.head_weights = matrix_from_json(model.at("head_weights"));
  checkpoint.model.head_bias = vector_from_json(model.at("head_bias"));
  for (const auto& [pattern, label] : model.at("overrides").items()) {
    checkpoint.model.overrides[pattern] = label.get<int>();
  }

  for (const json& event : doc.at("events")) {
    checkpoint.events.push_back({kind_from_name(event.at("kind").get<std::string>()),
                                 event.at("epoch").get<int>(), event.at("layer").get<int>(),
                                 event.at("detail").get<int>()});
  }
  checkpoint.final_metrics = doc.value("final_metrics", json::object());

  if (checkpoint.status == "ok") checkpoint.model.check_consistent();
  return checkpoint;
}

}  // namespace adbn
