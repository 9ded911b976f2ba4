#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "pnlab/mlp.hpp"

namespace pnlab {

/// JSON checkpoint: header (layer sizes, activation, input interval, seed)
/// plus the flat parameter array in the network's layer-major order.
nlohmann::json checkpoint_to_json(const MlpNetwork<double>& net, std::uint64_t seed);
MlpNetwork<double> checkpoint_from_json(const nlohmann::json& doc, std::uint64_t* seed = nullptr);

void save_checkpoint(const std::filesystem::path& path, const MlpNetwork<double>& net, std::uint64_t seed);
MlpNetwork<double> load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

}  // namespace pnlab
