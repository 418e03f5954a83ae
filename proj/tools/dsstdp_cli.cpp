// Command-line front end: training, evaluation, oracle tables, encoder
// statistics and checkpoint/metrics export.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dsstdp/checkpoint.hpp"
#include "dsstdp/data.hpp"
#include "dsstdp/harness.hpp"
#include "dsstdp/oracle.hpp"
#include "dsstdp/rng.hpp"

#ifndef DSSTDP_DEFAULT_DATA_DIR
#define DSSTDP_DEFAULT_DATA_DIR ""
#endif

namespace fs = std::filesystem;
using namespace dsstdp;

namespace {

struct CommonFlags {
  std::string config;
  std::string rule;
  std::optional<std::size_t> neurons;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::string data_dir;
  std::string score;
  std::optional<std::size_t> workers;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "YAML experiment config")->check(CLI::ExistingFile);
    app->add_option("--rule", rule, "stdp, ds-stdp or dr-stdp")
        ->check(CLI::IsMember({"stdp", "ds-stdp", "dr-stdp"}));
    app->add_option("--neurons", neurons, "excitatory neurons");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--seed", seed, "parameter initialization seed");
    app->add_option("--data-dir", data_dir, "directory with the MNIST IDX files");
    app->add_option("--score", score, "rate, responsiveness or both")
        ->check(CLI::IsMember({"rate", "responsiveness", "both"}));
    app->add_option("--workers", workers, "worker threads (1 is bit-reproducible)");
  }

  ExperimentConfig resolve() const {
    ConfigOverrides o;
    if (!rule.empty()) o.rule = parse_learning_rule(rule);
    o.neurons = neurons;
    o.epochs = epochs;
    o.seed = seed;
    if (!data_dir.empty()) o.data_dir = data_dir;
    if (!score.empty()) o.score = score;
    o.workers = workers;
    ExperimentConfig c = config.empty() ? parse_config("", o) : load_config(config, o);
    if (c.data_dir.empty()) {
      const char* env = std::getenv("DSSTDP_DATA_DIR");
      c.data_dir = env && *env ? env : DSSTDP_DEFAULT_DATA_DIR;
    }
    return c;
  }
};

std::string fmt(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void print_record(std::ostream& out, const MetricsRecord& r) {
  out << "epoch " << r.epoch;
  if (r.rate) out << "  acc_rate " << fmt(r.rate->accuracy);
  if (r.responsiveness) out << "  acc_resp " << fmt(r.responsiveness->accuracy);
  out << "  weight_var " << fmt(r.weight_var, 6) << "  delay_mean " << fmt(r.delay_mean, 3) << "  unassigned "
      << r.unassigned << "  " << fmt(r.seconds, 1) << "s\n";
}

void print_summary(std::ostream& out, const char* name, const ScoreMetrics& m) {
  const auto f = five_number(m.class_accuracy);
  out << name << " per-class:";
  for (double a : m.class_accuracy) out << ' ' << fmt(a, 3);
  out << "\n" << name << " min/q1/median/q3/max: " << fmt(f.min, 3) << ' ' << fmt(f.q1, 3) << ' '
      << fmt(f.median, 3) << ' ' << fmt(f.q3, 3) << ' ' << fmt(f.max, 3) << "\n";
}

int cmd_train(const CommonFlags& flags, const std::string& out_dir) {
  const auto config = flags.resolve();
  const auto data = load_dataset(config);
  fs::create_directories(out_dir);
  {
    std::ofstream cfg(fs::path(out_dir) / "config.yaml");
    cfg << dump_config(config);
  }
  std::cerr << to_string(config.network.rule.rule) << ": N=" << config.network.neurons << ", "
            << data.train.size() << " training samples, " << config.epochs << " epochs\n";

  TrainHooks hooks;
  hooks.on_metrics = [](const MetricsRecord& r) { print_record(std::cout, r); };
  hooks.on_batch = [](std::size_t epoch, std::size_t b, std::size_t n) {
    if (b % 20 == 0 || b == n) std::cerr << "  epoch " << epoch << " batch " << b << "/" << n << "\r" << std::flush;
  };
  const auto result = run_train(config, data, hooks);
  std::cerr << "\n";

  export_metrics(fs::path(out_dir) / "metrics.csv", result.metrics, MetricsFormat::csv);
  export_metrics(fs::path(out_dir) / "metrics.jsonl", result.metrics, MetricsFormat::json_lines);
  std::vector<ClassifierModel> models;
  if (result.rate) models.push_back(*result.rate);
  if (result.responsiveness) models.push_back(*result.responsiveness);
  save_checkpoint(fs::path(out_dir) / "checkpoint.bin", make_checkpoint(result.network, config, models));

  if (config.score_rate) {
    std::cout << "best rate accuracy " << fmt(result.best_rate.accuracy) << " at epoch " << result.best_rate.epoch
              << "\n";
  }
  if (config.score_responsiveness) {
    std::cout << "best responsiveness accuracy " << fmt(result.best_responsiveness.accuracy) << " at epoch "
              << result.best_responsiveness.epoch << "\n";
  }
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint, const std::string& out) {
  const auto config = flags.resolve();
  const auto ckpt = load_checkpoint(checkpoint, config);
  const auto data = load_dataset(config);
  const auto record = run_eval(ckpt, config, data);
  print_record(std::cout, record);
  if (record.rate) print_summary(std::cout, "rate", *record.rate);
  if (record.responsiveness) print_summary(std::cout, "responsiveness", *record.responsiveness);
  if (!out.empty()) {
    const std::vector<MetricsRecord> one{record};
    const bool json = fs::path(out).extension() == ".jsonl";
    export_metrics(out, one, json ? MetricsFormat::json_lines : MetricsFormat::csv);
  }
  return 0;
}

int cmd_oracle(const std::string& out, bool triplet) {
  const oracle::DelayKernels k;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw std::runtime_error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << std::setprecision(17);
  if (triplet) {
    const auto t = oracle::triplet_sums({});
    os << "ds_closed_form,dr_naive,dr_step_accumulated,dr_total,observation_ms\n"
       << t.ds_closed_form << ',' << t.dr_naive << ',' << t.dr_step_accumulated << ',' << t.dr_total << ','
       << t.observation_ms << "\n";
    return 0;
  }
  os << "t_pre,t_post,d,case,ds_value,ds_time,dr_value,dr_time\n";
  for (int tp = 0; tp <= 20; ++tp) {
    for (int tq = 0; tq <= 20; ++tq) {
      for (int d = 0; d <= 10; ++d) {
        const auto u = oracle::initial_pair_update(tp, tq, d, k);
        os << tp << ',' << tq << ',' << d << ',' << oracle::to_string(u.pair_case) << ',' << u.ds_value << ','
           << u.ds_time_ms << ',' << u.dr_value << ',' << u.dr_time_ms << "\n";
      }
    }
  }
  return 0;
}

int cmd_encode_stats(double rate, std::size_t trials, std::uint64_t seed) {
  PoissonEncoder enc;
  double count_sum = 0.0;
  double isi_sum = 0.0, isi_sq = 0.0;
  std::size_t isis = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto times = enc.spike_times(rate, derive_seed({seed, t}));
    count_sum += static_cast<double>(times.size());
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double isi = times[i] - times[i - 1];
      isi_sum += isi;
      isi_sq += isi * isi;
      ++isis;
    }
  }
  const double mean_count = count_sum / static_cast<double>(trials);
  const double isi_mean = isi_sum / static_cast<double>(isis);
  const double isi_sd = std::sqrt(isi_sq / static_cast<double>(isis) - isi_mean * isi_mean);
  std::cout << "rate_hz " << rate << "\ntrials " << trials << "\nmean_count " << fmt(mean_count) << "\nexpected_count "
            << fmt(rate * enc.duration_ms / 1000.0) << "\nisi_mean_ms " << fmt(isi_mean) << "\nisi_cv "
            << fmt(isi_sd / isi_mean) << "\n";
  return 0;
}

void write_matrix_csv(const fs::path& path, const RealMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << "\n";
  }
}

int cmd_export(const std::string& metrics, const std::string& checkpoint, const std::string& format,
               const std::string& out) {
  if (!metrics.empty()) {
    std::ifstream in(metrics);
    if (!in) throw std::runtime_error("cannot open " + metrics);
    const auto records = read_metrics_json_lines(in);
    const auto f = format == "jsonl" ? MetricsFormat::json_lines : MetricsFormat::csv;
    if (out.empty()) {
      write_metrics(std::cout, records, f);
    } else {
      export_metrics(out, records, f);
    }
  }
  if (!checkpoint.empty()) {
    if (out.empty()) throw std::runtime_error("export --checkpoint needs --out DIR");
    const auto ckpt = load_checkpoint(checkpoint);
    fs::create_directories(out);
    write_matrix_csv(fs::path(out) / "weights.csv", ckpt.weights);
    write_matrix_csv(fs::path(out) / "delays.csv", ckpt.delays);
    write_matrix_csv(fs::path(out) / "thresholds.csv", RealMatrix(ckpt.thresholds.size(), 1, ckpt.thresholds));
    for (const auto& m : ckpt.classifiers) {
      write_matrix_csv(fs::path(out) / ("response_" + std::string(to_string(m.kind)) + ".csv"), m.response);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network training with learned synaptic delays"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags;
  std::string train_out = "run";
  auto* train = app.add_subcommand("train", "train a network and write metrics and a checkpoint");
  train_flags.add_to(train);
  train->add_option("--out", train_out, "output directory");

  std::string eval_ckpt, eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_flags.add_to(eval);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "write the record as .csv or .jsonl");

  std::string oracle_out;
  bool oracle_triplet = false;
  auto* orc = app.add_subcommand("oracle", "print the spike-pair delay update table as CSV");
  orc->add_option("--out", oracle_out, "CSV file (default stdout)");
  orc->add_flag("--triplet", oracle_triplet, "print the two-post-spike comparison instead");

  double rate = 127.5;
  std::size_t trials = 10000;
  std::uint64_t enc_seed = 0;
  auto* enc = app.add_subcommand("encode-stats", "spike count and ISI statistics of the Poisson encoder");
  enc->add_option("--rate", rate, "rate in Hz");
  enc->add_option("--trials", trials, "number of encodings")->check(CLI::PositiveNumber);
  enc->add_option("--seed", enc_seed, "stream seed");

  std::string ex_metrics, ex_ckpt, ex_format = "csv", ex_out;
  auto* ex = app.add_subcommand("export", "convert metrics or dump checkpoint matrices to CSV");
  ex->add_option("--metrics", ex_metrics, "JSON-lines metrics file")->check(CLI::ExistingFile);
  ex->add_option("--checkpoint", ex_ckpt, "checkpoint file")->check(CLI::ExistingFile);
  ex->add_option("--format", ex_format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  ex->add_option("--out", ex_out, "output file (metrics) or directory (checkpoint)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_flags, train_out);
    if (*eval) return cmd_eval(eval_flags, eval_ckpt, eval_out);
    if (*orc) return cmd_oracle(oracle_out, oracle_triplet);
    if (*enc) return cmd_encode_stats(rate, trials, enc_seed);
    if (*ex) return cmd_export(ex_metrics, ex_ckpt, ex_format, ex_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
