#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sirenrope/backbone.hpp"

namespace sirenrope {

struct TrainConfig {
  double lr = 1e-3;  // peak rate, cosine-annealed to lr_min over all steps
  double lr_min = 0.0;
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct TaskMetrics {
  double ne = 0.0;
  double auc = 0.0;
};

struct OmegaSummary {
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 = before any update
  double train_loss = 0.0;  // mean batch loss over the epoch (initial loss for epoch 0)
  std::vector<TaskMetrics> eval;
  double alpha = 0.0;
  std::optional<double> lambda;  // siren mode only (first gate set)
  std::optional<OmegaSummary> omega_s;
};

struct MetricsReport {
  std::vector<EpochRecord> epochs;

  const EpochRecord& final_record() const { return epochs.back(); }
  std::vector<double> lambda_trajectory() const;
  std::vector<double> loss_curve() const;
};

/// One JSON object per line, keys in a fixed order.
std::string to_json_line(const EpochRecord& record);

/// Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1, double beta2, double eps);
  /// Applies one update from the accumulated gradients and clears them.
  void step(double lr);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

/// Per-task NE and AUC over every position of every sequence.
std::vector<TaskMetrics> evaluate(const Model& model, const std::vector<EventSequence>& sequences,
                                  const TimeNormalization& norm);

/// Mean BCE over tasks and positions, averaged over sequences.
double mean_loss(const Model& model, const std::vector<EventSequence>& sequences,
                 const TimeNormalization& norm);

double cosine_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps);

struct TrainResult {
  Model model;
  MetricsReport report;
};

/// Trains `model` in place with Adam on mean BCE. Throws DivergenceError when
/// the loss becomes non-finite. `on_epoch` sees every record as it is made.
TrainResult train(Model model, const std::vector<EventSequence>& train_set,
                  const std::vector<EventSequence>& eval_set, const TimeNormalization& norm,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace sirenrope
