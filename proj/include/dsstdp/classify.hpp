#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dsstdp/matrix.hpp"
#include "dsstdp/signal.hpp"

namespace dsstdp {

enum class ScoreKind { rate, responsiveness };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view name);

/// Spike count per neuron divided by the window length (spikes per ms).
std::vector<double> score_rate(const SpikeRaster& raster);
/// (T - min(first spike time, T)) / T; zero for silent neurons.
std::vector<double> score_responsiveness(const SpikeRaster& raster);
std::vector<double> score(const SpikeRaster& raster, ScoreKind kind);

/// Per-neuron class association and the N x K response matrix used to turn
/// neuron scores into class logits.
struct ClassifierModel {
  ScoreKind kind = ScoreKind::rate;
  std::size_t classes = 0;
  /// Associated class per neuron; empty for neurons with an all-zero score
  /// vector.
  std::vector<std::optional<std::uint32_t>> association;
  RealMatrix response;  // [neurons x classes]
  std::vector<std::size_t> counts;

  std::size_t neurons() const { return association.size(); }
  std::size_t unassigned() const;
};

/// `scores` is [samples x neurons]. Class means, argmax association (ties go
/// to the lowest class), and one-hot rows scaled by the l1-normalized means.
ClassifierModel fit(const RealMatrix& scores, std::span<const std::uint8_t> labels, std::size_t classes,
                    ScoreKind kind = ScoreKind::rate);

struct Prediction {
  RealMatrix logits;  // [samples x classes]
  std::vector<std::uint32_t> labels;
};

/// Z = Y C with column k divided by max(1, counts_k); argmax per row, ties to
/// the lowest class.
Prediction predict(const ClassifierModel& model, const RealMatrix& scores);

}  // namespace dsstdp
