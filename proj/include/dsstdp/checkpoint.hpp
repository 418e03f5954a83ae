#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsstdp/classify.hpp"
#include "dsstdp/harness.hpp"
#include "dsstdp/matrix.hpp"
#include "dsstdp/network.hpp"

namespace dsstdp {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, version, truncated, shape, config_mismatch };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Learned state of a trained network. Stored little-endian:
/// magic, version, config hash, rule, shapes, W, D, thresholds, classifiers.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t config_hash = 0;
  LearningRule rule = LearningRule::ds_stdp;
  RealMatrix weights;  // [neurons x inputs]
  RealMatrix delays;   // [neurons x inputs]
  std::vector<double> thresholds;
  std::vector<ClassifierModel> classifiers;

  std::size_t neurons() const { return weights.rows(); }
  std::size_t inputs() const { return weights.cols(); }

  bool operator==(const Checkpoint&) const;
};

Checkpoint make_checkpoint(const DiehlCookNetwork& network, const ExperimentConfig& config,
                           std::vector<ClassifierModel> classifiers = {});

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also checks that the checkpoint fits `expected`: shape errors first, then
/// the model hash.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ExperimentConfig& expected);
void check_compatible(const Checkpoint& ckpt, const ExperimentConfig& expected);

/// Network built from `config` carrying the checkpoint's parameters.
DiehlCookNetwork restore_network(const Checkpoint& ckpt, const ExperimentConfig& config);

/// Restores the network and evaluates it with freshly fitted classifiers.
MetricsRecord run_eval(const Checkpoint& ckpt, const ExperimentConfig& config, const Dataset& data);

}  // namespace dsstdp
