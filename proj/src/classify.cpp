#include "dsstdp/classify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dsstdp {

std::string_view to_string(ScoreKind kind) {
  return kind == ScoreKind::rate ? "rate" : "responsiveness";
}

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "rate") return ScoreKind::rate;
  if (name == "responsiveness" || name == "resp") return ScoreKind::responsiveness;
  throw std::invalid_argument("unknown score kind '" + std::string(name) + "'");
}

std::vector<double> score_rate(const SpikeRaster& raster) {
  std::vector<double> out(raster.neurons(), 0.0);
  const double window = raster.duration();
  if (window <= 0.0) return out;
  for (std::size_t n = 0; n < raster.steps(); ++n) {
    const auto flags = raster.step(n).flags();
    for (std::size_t j = 0; j < flags.size(); ++j) out[j] += flags[j] ? 1.0 : 0.0;
  }
  for (double& r : out) r /= window;
  return out;
}

std::vector<double> score_responsiveness(const SpikeRaster& raster) {
  const double window = raster.duration();
  std::vector<double> first(raster.neurons(), window);
  std::vector<bool> seen(raster.neurons(), false);
  for (std::size_t n = 0; n < raster.steps(); ++n) {
    const auto flags = raster.step(n).flags();
    for (std::size_t j = 0; j < flags.size(); ++j) {
      if (flags[j] && !seen[j]) {
        seen[j] = true;
        first[j] = static_cast<double>(n) * raster.dt();
      }
    }
  }
  std::vector<double> out(raster.neurons(), 0.0);
  if (window <= 0.0) return out;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (window - std::min(first[j], window)) / window;
  return out;
}

std::vector<double> score(const SpikeRaster& raster, ScoreKind kind) {
  return kind == ScoreKind::rate ? score_rate(raster) : score_responsiveness(raster);
}

std::size_t ClassifierModel::unassigned() const {
  std::size_t c = 0;
  for (const auto& a : association) c += a ? 0 : 1;
  return c;
}

ClassifierModel fit(const RealMatrix& scores, std::span<const std::uint8_t> labels, std::size_t classes,
                    ScoreKind kind) {
  if (scores.rows() != labels.size()) throw std::invalid_argument("fit: one label per score row required");
  if (classes == 0) throw std::invalid_argument("fit: need at least one class");
  const std::size_t neurons = scores.cols();

  // Sums in sample order, then means.
  RealMatrix means(neurons, classes, 0.0);
  std::vector<std::size_t> per_class(classes, 0);
  for (std::size_t s = 0; s < scores.rows(); ++s) {
    const std::size_t k = labels[s];
    if (k >= classes) throw std::invalid_argument("fit: label out of range");
    ++per_class[k];
    const auto row = scores.row(s);
    for (std::size_t n = 0; n < neurons; ++n) means(n, k) += row[n];
  }
  for (std::size_t n = 0; n < neurons; ++n) {
    for (std::size_t k = 0; k < classes; ++k) {
      if (per_class[k] > 0) means(n, k) /= static_cast<double>(per_class[k]);
    }
  }

  ClassifierModel model;
  model.kind = kind;
  model.classes = classes;
  model.association.assign(neurons, std::nullopt);
  model.response = RealMatrix(neurons, classes, 0.0);
  model.counts.assign(classes, 0);
  for (std::size_t n = 0; n < neurons; ++n) {
    const auto v = means.row(n);
    double l1 = 0.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      l1 += std::abs(v[k]);
      if (v[k] > v[best]) best = k;
    }
    if (l1 == 0.0) continue;
    model.association[n] = static_cast<std::uint32_t>(best);
    model.response(n, best) = v[best] / l1;
    ++model.counts[best];
  }
  return model;
}

Prediction predict(const ClassifierModel& model, const RealMatrix& scores) {
  if (scores.cols() != model.neurons()) throw std::invalid_argument("predict: score width differs from model");
  const std::size_t classes = model.classes;
  Prediction out{RealMatrix(scores.rows(), classes, 0.0), std::vector<std::uint32_t>(scores.rows(), 0)};
  for (std::size_t s = 0; s < scores.rows(); ++s) {
    const auto y = scores.row(s);
    auto z = out.logits.row(s);
    for (std::size_t n = 0; n < y.size(); ++n) {
      if (!model.association[n] || y[n] == 0.0) continue;
      const std::size_t k = *model.association[n];
      z[k] += y[n] * model.response(n, k);
    }
    std::uint32_t best = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      z[k] /= static_cast<double>(std::max<std::size_t>(1, model.counts[k]));
      if (z[k] > z[best]) best = static_cast<std::uint32_t>(k);
    }
    out.labels[s] = best;
  }
  return out;
}

}  // namespace dsstdp
