#include "sirenrope/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "sirenrope/errors.hpp"
#include "sirenrope/metrics.hpp"
#include "sirenrope/rng.hpp"

namespace sirenrope {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (lr_min < 0.0 || lr_min > lr) throw ConfigError("train.lr_min must lie in [0, lr]");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
}

std::vector<double> MetricsReport::lambda_trajectory() const {
  std::vector<double> out;
  for (const auto& e : epochs)
    if (e.lambda) out.push_back(*e.lambda);
  return out;
}

std::vector<double> MetricsReport::loss_curve() const {
  std::vector<double> out;
  for (const auto& e : epochs) out.push_back(e.train_loss);
  return out;
}

std::string to_json_line(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["train_loss"] = record.train_loss;
  auto tasks = nlohmann::ordered_json::array();
  for (const auto& t : record.eval) tasks.push_back({{"ne", t.ne}, {"auc", t.auc}});
  j["eval"] = tasks;
  j["alpha"] = record.alpha;
  if (record.lambda) j["lambda"] = *record.lambda;
  if (record.omega_s) {
    j["omega_s"] = {{"mean", record.omega_s->mean},
                    {"std", record.omega_s->stddev},
                    {"min", record.omega_s->min},
                    {"max", record.omega_s->max}};
  }
  return j.dump();
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
    p.zero_grad();
  }
}

double cosine_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return config.lr;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return config.lr_min +
         0.5 * (config.lr - config.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<TaskMetrics> evaluate(const Model& model, const std::vector<EventSequence>& sequences,
                                  const TimeNormalization& norm) {
  const std::size_t tasks = model.config().num_tasks;
  std::vector<std::vector<double>> probs(tasks), labels(tasks);
  for (const auto& seq : sequences) {
    const Tensor p = model.predict_proba(seq, norm);
    for (std::size_t i = 0; i < seq.length(); ++i)
      for (std::size_t k = 0; k < tasks; ++k) {
        probs[k].push_back(p.at(i, k));
        labels[k].push_back(seq.label(i, k));
      }
  }
  std::vector<TaskMetrics> out(tasks);
  for (std::size_t k = 0; k < tasks; ++k) {
    out[k].ne = normalized_entropy(probs[k], labels[k]);
    out[k].auc = auc(probs[k], labels[k]);
  }
  return out;
}

double mean_loss(const Model& model, const std::vector<EventSequence>& sequences,
                 const TimeNormalization& norm) {
  if (sequences.empty()) return 0.0;
  double total = 0.0;
  for (const auto& seq : sequences) {
    total += bce_with_logits(model.forward_logits(seq, norm), seq.label_matrix()).item();
  }
  return total / static_cast<double>(sequences.size());
}

namespace {

OmegaSummary summarize(std::span<const double> v) {
  OmegaSummary s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

EpochRecord snapshot(const Model& model, std::size_t epoch, double train_loss,
                     const std::vector<EventSequence>& eval_set, const TimeNormalization& norm) {
  EpochRecord r;
  r.epoch = epoch;
  r.train_loss = train_loss;
  if (!eval_set.empty()) r.eval = evaluate(model, eval_set, norm);
  r.alpha = model.alpha().item();
  if (model.config().mode == RotaryMode::siren) {
    r.lambda = model.rotary(0).lambda.item();
    r.omega_s = summarize(model.rotary(0).omega_s.data());
  }
  return r;
}

}  // namespace

TrainResult train(Model model, const std::vector<EventSequence>& train_set,
                  const std::vector<EventSequence>& eval_set, const TimeNormalization& norm,
                  const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training corpus");

  TrainResult result{std::move(model), {}};
  Model& m = result.model;
  std::vector<Tensor> params;
  for (const auto& r : m.named_parameters()) params.push_back(r.tensor);
  Adam adam(params, config.beta1, config.beta2, config.eps);

  auto record = [&](EpochRecord r) {
    if (on_epoch) on_epoch(r);
    result.report.epochs.push_back(std::move(r));
  };
  record(snapshot(m, 0, mean_loss(m, train_set, norm), eval_set, norm));

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * config.epochs;
  std::size_t step = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(config.seed, "epoch/" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& seq = train_set[order[i]];
        Tape tape;
        TapeScope scope(tape);
        const Tensor loss = scale(bce_with_logits(m.forward_logits(seq, norm), seq.label_matrix()), weight);
        if (!std::isfinite(loss.item())) {
          throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                                ", step " + std::to_string(step) + " (user " +
                                std::to_string(seq.user_id) + ")");
        }
        batch_loss += loss.item();
        tape.backward(loss);
      }
      adam.step(cosine_lr(config, step, total_steps));
      ++step;
      epoch_loss += batch_loss;
    }
    record(snapshot(m, epoch, epoch_loss / static_cast<double>(batches), eval_set, norm));
  }
  return result;
}

}  // namespace sirenrope
