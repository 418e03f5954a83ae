#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dsstdp/classify.hpp"
#include "dsstdp/data.hpp"
#include "dsstdp/network.hpp"

namespace dsstdp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FitSet { train, validation };

struct ExperimentConfig {
  NetworkConfig network;  // network.seed seeds W and D
  std::size_t epochs = 1;
  std::size_t batch_size = 50;
  double duration_ms = 250.0;
  double max_rate_hz = 127.5;

  std::uint64_t encoding_seed = 1;
  std::uint64_t split_seed = 2;

  std::filesystem::path data_dir;
  std::size_t split_per_class = 5000;
  /// 0 uses the whole training split, otherwise a class-balanced subset.
  std::size_t train_per_class = 0;
  /// 0 uses the whole test file, otherwise its first `test_limit` images.
  std::size_t test_limit = 0;
  FitSet fit_set = FitSet::train;
  std::size_t fit_limit = 0;

  bool score_rate = true;
  bool score_responsiveness = true;
  /// Evaluate after every `eval_every` epochs (0: only after the last one).
  /// The untrained network and the final epoch are always evaluated.
  std::size_t eval_every = 1;
  std::size_t workers = 1;

  /// Defaults with the kernel parameters of `rule`.
  static ExperimentConfig defaults(LearningRule rule = LearningRule::ds_stdp);

  /// Throws ConfigError.
  void validate() const;

  /// Hash of everything that shapes the network and its parameters
  /// (not seeds, data, schedule or worker count).
  std::uint64_t model_hash() const;

  PoissonEncoder encoder() const { return {max_rate_hz, duration_ms, network.dt_ms}; }
};

/// Overrides taken from the command line; unset fields leave the file value.
struct ConfigOverrides {
  std::optional<LearningRule> rule;
  std::optional<std::size_t> neurons;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::string> score;  // rate | responsiveness | both
  std::optional<std::size_t> workers;
};

/// Parses a YAML document. Kernel defaults follow the rule named in the
/// overrides, then in the document, then DS-STDP. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& yaml_text, const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});
/// Every key with its current value, in the layout parse_config reads.
std::string dump_config(const ExperimentConfig& config);

struct Dataset {
  std::vector<ImageSample> train_pool;  // the whole training file
  std::vector<ImageSample> test_pool;
  std::vector<std::size_t> train;       // indices into train_pool
  std::vector<std::size_t> fit;         // indices into train_pool
  std::vector<std::size_t> test;        // indices into test_pool
};

Dataset load_dataset(const ExperimentConfig& config);

struct ScoreMetrics {
  double accuracy = 0.0;
  std::array<double, kClasses> class_accuracy{};
};

struct MetricsRecord {
  std::size_t epoch = 0;
  std::optional<ScoreMetrics> rate;
  std::optional<ScoreMetrics> responsiveness;
  double weight_var = 0.0;
  double delay_mean = 0.0;
  double delay_var = 0.0;
  std::size_t unassigned = 0;
  double seconds = 0.0;
  std::size_t zero_norm_rows = 0;

  /// Equality ignoring wall-clock time.
  bool same_results(const MetricsRecord& other) const;
};

struct FiveNumber {
  double min, q1, median, q3, max;
};

/// Quartiles by linear interpolation between order statistics.
FiveNumber five_number(std::span<const double> values);

enum class MetricsFormat { csv, json_lines };

std::vector<std::string> metrics_columns();
void write_metrics(std::ostream& out, std::span<const MetricsRecord> records, MetricsFormat format);
void export_metrics(const std::filesystem::path& path, std::span<const MetricsRecord> records, MetricsFormat format);
std::vector<MetricsRecord> read_metrics_json_lines(std::istream& in);

struct Evaluation {
  MetricsRecord record;
  std::optional<ClassifierModel> rate;
  std::optional<ClassifierModel> responsiveness;
};

/// Freezes a copy of `network`, fits the classifiers on the fitting set and
/// scores the test set.
Evaluation evaluate(const DiehlCookNetwork& network, const ExperimentConfig& config, const Dataset& data);

struct BestAccuracy {
  double accuracy = -1.0;
  std::size_t epoch = 0;
};

struct TrainResult {
  DiehlCookNetwork network;
  std::optional<ClassifierModel> rate;
  std::optional<ClassifierModel> responsiveness;
  std::vector<MetricsRecord> metrics;
  BestAccuracy best_rate;
  BestAccuracy best_responsiveness;
};

struct TrainHooks {
  std::function<void(const MetricsRecord&)> on_metrics;
  std::function<void(std::size_t epoch, std::size_t batch, std::size_t batches)> on_batch;
  /// Called after every epoch with the network, before any evaluation.
  std::function<void(std::size_t epoch, const DiehlCookNetwork&)> on_epoch;
};

TrainResult run_train(const ExperimentConfig& config, const Dataset& data, const TrainHooks& hooks = {});

/// Summary statistics of the parameter matrices.
void fill_parameter_stats(MetricsRecord& record, const DiehlCookNetwork& network);

}  // namespace dsstdp
