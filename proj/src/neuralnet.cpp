#include <fstream>

#include "pnlab/checkpoint.hpp"
#include "pnlab/mlp.hpp"
#include "pnlab/optim.hpp"

namespace pnlab {

std::string_view to_string(Activation activation) {
  return activation == Activation::ReLU ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw Error(ErrorKind::Parse, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(LbfgsStatus status) {
  switch (status) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::MaxIterations: return "max_iterations";
    case LbfgsStatus::LineSearchFailed: return "line_search_failed";
    case LbfgsStatus::NonFinite: return "non_finite";
    case LbfgsStatus::Stopped: return "stopped";
  }
  return "unknown";
}

nlohmann::json checkpoint_to_json(const MlpNetwork<double>& net, std::uint64_t seed) {
  nlohmann::json doc;
  doc["format"] = "pnlab-mlp-v1";
  doc["layer_sizes"] = net.layer_sizes();
  doc["activation"] = std::string(to_string(net.activation()));
  doc["x_lo"] = net.x_lo();
  doc["x_hi"] = net.x_hi();
  doc["seed"] = seed;
  const auto& p = net.params();
  doc["params"] = std::vector<double>(p.data(), p.data() + p.size());
  return doc;
}

MlpNetwork<double> checkpoint_from_json(const nlohmann::json& doc, std::uint64_t* seed) {
  try {
    if (doc.at("format").get<std::string>() != "pnlab-mlp-v1") {
      throw Error(ErrorKind::Parse, "unsupported checkpoint format");
    }
    MlpNetwork<double> net(doc.at("layer_sizes").get<std::vector<int>>(),
                           parse_activation(doc.at("activation").get<std::string>()), doc.at("x_lo").get<double>(),
                           doc.at("x_hi").get<double>());
    const auto values = doc.at("params").get<std::vector<double>>();
    net.set_params(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    if (seed) *seed = doc.at("seed").get<std::uint64_t>();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const MlpNetwork<double>& net, std::uint64_t seed) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << checkpoint_to_json(net, seed).dump() << '\n';
}

MlpNetwork<double> load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed checkpoint: ") + e.what());
  }
  return checkpoint_from_json(doc, seed);
}

}  // namespace pnlab
