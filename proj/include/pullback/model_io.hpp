#pragma once

#include "pullback/convex.hpp"
#include "pullback/flow.hpp"

#include <optional>
#include <string>

namespace pullback {

inline constexpr const char* kModelSchema = "pullback-flow/1";

/// A learned density exp(-psi(phi(x))): the flow together with its diagonal
/// quadratic potential.
struct TrainedModel {
  Flow flow;
  DiagonalQuadratic potential;
  std::string variant = "ours";
  std::string dataset;
};

/// Writes a UTF-8 JSON document. Every double is printed with 17 significant
/// digits so a save/load round trip reproduces the model bit for bit.
void save_model(const TrainedModel& model, const std::string& path);
std::string model_to_json(const TrainedModel& model);

/// Throws Error{io} for unreadable files, Error{schema} for malformed or
/// unknown-version documents and Error{dimension_mismatch} when
/// `expected_dim` is set and differs from the stored dimension.
TrainedModel load_model(const std::string& path, std::optional<std::size_t> expected_dim = std::nullopt);
TrainedModel model_from_json(const std::string& text,
                             std::optional<std::size_t> expected_dim = std::nullopt);

}  // namespace pullback
