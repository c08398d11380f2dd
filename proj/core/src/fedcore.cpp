#include "fedmesh/fedcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedmesh/errors.hpp"
#include "fedmesh/util.hpp"

namespace fedmesh {

std::size_t serialize_model_bytes(std::size_t dim, std::size_t override_bytes) {
  if (override_bytes > 0) return override_bytes;
  return kModelHeaderBytes + 8 * dim;
}

namespace {

// stable softmax over logits; returns log-sum-exp
double softmax_inplace(std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
  return m + std::log(sum);
}

}  // namespace

LogisticModel::LogisticModel(int d, int classes) : d_(d), classes_(classes) {
  if (d < 1 || classes < 2) throw ConfigError("logistic model: bad dimensions");
}

std::size_t LogisticModel::dim() const {
  return static_cast<std::size_t>(classes_) * d_ + classes_;
}

void LogisticModel::init_weights(std::vector<double>& w, std::mt19937_64&) const {
  w.assign(dim(), 0.0);
}

double LogisticModel::sample_loss_grad(const std::vector<double>& w, const double* x, int y,
                                       std::vector<double>* grad) const {
  std::vector<double> logits(classes_);
  const double* bias = w.data() + static_cast<std::size_t>(classes_) * d_;
  for (int c = 0; c < classes_; ++c) {
    const double* row = w.data() + static_cast<std::size_t>(c) * d_;
    double z = bias[c];
    for (int j = 0; j < d_; ++j) z += row[j] * x[j];
    logits[c] = z;
  }
  const double before = logits[y];
  const double lse = softmax_inplace(logits);
  if (grad) {
    double* grow = grad->data();
    double* gbias = grad->data() + static_cast<std::size_t>(classes_) * d_;
    for (int c = 0; c < classes_; ++c) {
      const double g = logits[c] - (c == y ? 1.0 : 0.0);
      double* rowg = grow + static_cast<std::size_t>(c) * d_;
      for (int j = 0; j < d_; ++j) rowg[j] += g * x[j];
      gbias[c] += g;
    }
  }
  return lse - before;
}

int LogisticModel::predict(const std::vector<double>& w, const double* x) const {
  int best = 0;
  double bz = -std::numeric_limits<double>::infinity();
  const double* bias = w.data() + static_cast<std::size_t>(classes_) * d_;
  for (int c = 0; c < classes_; ++c) {
    const double* row = w.data() + static_cast<std::size_t>(c) * d_;
    double z = bias[c];
    for (int j = 0; j < d_; ++j) z += row[j] * x[j];
    if (z > bz) {
      bz = z;
      best = c;
    }
  }
  return best;
}

namespace {
constexpr double kLeak = 0.01;
}

MlpModel::MlpModel(int d, int hidden, int classes) : d_(d), hidden_(hidden), classes_(classes) {
  if (d < 1 || hidden < 1 || classes < 2) throw ConfigError("mlp model: bad dimensions");
}

std::size_t MlpModel::dim() const {
  return static_cast<std::size_t>(hidden_) * d_ + hidden_ +
         static_cast<std::size_t>(classes_) * hidden_ + classes_;
}

void MlpModel::init_weights(std::vector<double>& w, std::mt19937_64& rng) const {
  w.assign(dim(), 0.0);
  std::normal_distribution<double> g(0, 1);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  std::size_t i = 0;
  for (int k = 0; k < hidden_ * d_; ++k) w[i++] = g(rng) * s1;
  i += hidden_;  // hidden bias stays zero
  for (int k = 0; k < classes_ * hidden_; ++k) w[i++] = g(rng) * s2;
}

double MlpModel::sample_loss_grad(const std::vector<double>& w, const double* x, int y,
                                  std::vector<double>* grad) const {
  const std::size_t w1 = 0;
  const std::size_t b1 = w1 + static_cast<std::size_t>(hidden_) * d_;
  const std::size_t w2 = b1 + hidden_;
  const std::size_t b2 = w2 + static_cast<std::size_t>(classes_) * hidden_;

  std::vector<double> z(hidden_), a(hidden_);
  for (int h = 0; h < hidden_; ++h) {
    const double* row = w.data() + w1 + static_cast<std::size_t>(h) * d_;
    double v = w[b1 + h];
    for (int j = 0; j < d_; ++j) v += row[j] * x[j];
    z[h] = v;
    a[h] = v > 0 ? v : kLeak * v;
  }
  std::vector<double> logits(classes_);
  for (int c = 0; c < classes_; ++c) {
    const double* row = w.data() + w2 + static_cast<std::size_t>(c) * hidden_;
    double v = w[b2 + c];
    for (int h = 0; h < hidden_; ++h) v += row[h] * a[h];
    logits[c] = v;
  }
  const double before = logits[y];
  const double lse = softmax_inplace(logits);
  if (grad) {
    std::vector<double> da(hidden_, 0.0);
    for (int c = 0; c < classes_; ++c) {
      const double g = logits[c] - (c == y ? 1.0 : 0.0);
      double* rowg = grad->data() + w2 + static_cast<std::size_t>(c) * hidden_;
      const double* row = w.data() + w2 + static_cast<std::size_t>(c) * hidden_;
      for (int h = 0; h < hidden_; ++h) {
        rowg[h] += g * a[h];
        da[h] += g * row[h];
      }
      (*grad)[b2 + c] += g;
    }
    for (int h = 0; h < hidden_; ++h) {
      const double dz = da[h] * (z[h] > 0 ? 1.0 : kLeak);
      double* rowg = grad->data() + w1 + static_cast<std::size_t>(h) * d_;
      for (int j = 0; j < d_; ++j) rowg[j] += dz * x[j];
      (*grad)[b1 + h] += dz;
    }
  }
  return lse - before;
}

int MlpModel::predict(const std::vector<double>& w, const double* x) const {
  const std::size_t b1 = static_cast<std::size_t>(hidden_) * d_;
  const std::size_t w2 = b1 + hidden_;
  const std::size_t b2 = w2 + static_cast<std::size_t>(classes_) * hidden_;
  std::vector<double> a(hidden_);
  for (int h = 0; h < hidden_; ++h) {
    const double* row = w.data() + static_cast<std::size_t>(h) * d_;
    double v = w[b1 + h];
    for (int j = 0; j < d_; ++j) v += row[j] * x[j];
    a[h] = v > 0 ? v : kLeak * v;
  }
  int best = 0;
  double bz = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < classes_; ++c) {
    const double* row = w.data() + w2 + static_cast<std::size_t>(c) * hidden_;
    double v = w[b2 + c];
    for (int h = 0; h < hidden_; ++h) v += row[h] * a[h];
    if (v > bz) {
      bz = v;
      best = c;
    }
  }
  return best;
}

std::unique_ptr<LossModel> make_model(const std::string& kind, int d, int classes, int hidden,
                                      std::size_t synthetic_dim) {
  if (kind == "logistic") return std::make_unique<LogisticModel>(d, classes);
  if (kind == "mlp") return std::make_unique<MlpModel>(d, hidden, classes);
  if (kind == "synthetic-payload") return std::make_unique<SyntheticPayloadModel>(synthetic_dim);
  throw ConfigError("unknown model kind: " + kind);
}

ModelVector local_sgd_step(const ModelVector& w, const LossModel& model,
                           const SyntheticDataset& ds, std::span<const int> batch, double eta,
                           double rho, const ModelVector& w_global) {
  if (batch.empty()) throw ConfigError("local_sgd_step: empty batch");
  if (w.dim() != model.dim() || w_global.dim() != model.dim())
    throw ConfigError("local_sgd_step: weight dimension mismatch");

  std::vector<double> grad(w.dim(), 0.0);
  for (int idx : batch) {
    if (idx < 0 || idx >= ds.n) throw ConfigError("local_sgd_step: sample index out of range");
    model.sample_loss_grad(w.w, ds.sample(idx), ds.y[idx], &grad);
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  ModelVector out;
  out.w.resize(w.dim());
  out.timestamp_ms = w.timestamp_ms;
  for (std::size_t i = 0; i < w.dim(); ++i) {
    const double g = grad[i] * inv_b + 2.0 * rho * (w.w[i] - w_global.w[i]);
    out.w[i] = w.w[i] - eta * g;
    if (!std::isfinite(out.w[i]))
      throw SimError("local_sgd_step: non-finite weight after update");
  }
  return out;
}

const char* to_string(WorkerStatus s) {
  switch (s) {
    case WorkerStatus::Idle: return "IDLE";
    case WorkerStatus::TrainingStarted: return "TRAINING_STARTED";
    case WorkerStatus::TrainingFinished: return "TRAINING_FINISHED";
  }
  return "?";
}

const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::Register: return "REGISTER";
    case MessageKind::GlobalModel: return "GLOBAL_MODEL";
    case MessageKind::GlobalModelRecv: return "GLOBAL_MODEL_RECV";
    case MessageKind::TrainRequest: return "TRAIN_REQUEST";
    case MessageKind::LocalModel: return "LOCAL_MODEL";
    case MessageKind::LocalModelRecv: return "LOCAL_MODEL_RECV";
    case MessageKind::StatusQuery: return "STATUS_QUERY";
    case MessageKind::StatusReply: return "STATUS_REPLY";
  }
  return "?";
}

LocalTrainingResult run_local_training(WorkerState& ws, int epochs, int batch_size, double eta,
                                       double rho, const LossModel& model,
                                       const SyntheticDataset& ds, const ModelVector& w_global,
                                       std::mt19937_64& shuffle_rng) {
  if (epochs < 1) throw ConfigError("run_local_training: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("run_local_training: batch size must be >= 1");
  if (ws.shard.empty()) throw ConfigError("run_local_training: empty shard");
  if (batch_size > static_cast<int>(ws.shard.size()))
    throw ConfigError("run_local_training: batch size exceeds shard");
  if (ws.status != WorkerStatus::Idle)
    throw SimError("run_local_training: worker " + ws.id + " not idle");

  ws.status = WorkerStatus::TrainingStarted;
  ws.local_model = w_global;
  LocalTrainingResult res;
  res.batches_per_epoch =
      static_cast<int>((ws.shard.size() + batch_size - 1) / batch_size);

  std::vector<int> order = ws.shard;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t off = 0; off < order.size(); off += batch_size) {
      const std::size_t len = std::min<std::size_t>(batch_size, order.size() - off);
      ws.local_model = local_sgd_step(ws.local_model, model, ds,
                                      std::span<const int>(order.data() + off, len), eta, rho,
                                      w_global);
      ++res.steps;
    }
  }
  ws.status = WorkerStatus::TrainingFinished;
  res.model = ws.local_model;
  return res;
}

ModelVector aggregate(const std::vector<std::pair<ModelVector, std::size_t>>& models) {
  if (models.empty()) throw ConfigError("aggregate: no models");
  const std::size_t dim = models.front().first.dim();
  std::size_t total = 0;
  for (const auto& [m, n] : models) {
    if (m.dim() != dim) throw ConfigError("aggregate: dimension mismatch");
    total += n;
  }
  if (total == 0) throw ConfigError("aggregate: zero total weight");
  ModelVector out;
  out.w.assign(dim, 0.0);
  for (const auto& [m, n] : models) {
    const double lambda = static_cast<double>(n) / static_cast<double>(total);
    for (std::size_t i = 0; i < dim; ++i) out.w[i] += lambda * m.w[i];
  }
  return out;
}

EvalResult evaluate(const LossModel& model, const ModelVector& w, const SyntheticDataset& ds) {
  if (w.dim() != model.dim()) throw ConfigError("evaluate: weight dimension mismatch");
  if (ds.n == 0) throw ConfigError("evaluate: empty dataset");
  double loss = 0;
  int correct = 0;
  for (int i = 0; i < ds.n; ++i) {
    loss += model.sample_loss_grad(w.w, ds.sample(i), ds.y[i], nullptr);
    if (model.predict(w.w, ds.sample(i)) == ds.y[i]) ++correct;
  }
  return {loss / ds.n, static_cast<double>(correct) / ds.n};
}

FlWorker::FlWorker(std::string ep, std::vector<int> shard, const SyntheticDataset& ds,
                   const LossModel& model, const TrainingParams& params, int epochs,
                   std::uint64_t shuffle_seed)
    : ds_(ds), model_(model), params_(params), epochs_(epochs), shuffle_rng_(shuffle_seed) {
  state_.id = std::move(ep);
  state_.shard = std::move(shard);
}

void FlWorker::bind(Transport& t, const std::string& aggregator_ep) {
  transport_ = &t;
  aggregator_ = aggregator_ep;
  t.register_endpoint(state_.id, [this](const CommMessage& m, double sent, double now) {
    handle(m, sent, now);
  });
  CommMessage reg;
  reg.kind = MessageKind::Register;
  reg.sender = state_.id;
  t.send(state_.id, aggregator_, std::move(reg));
}

void FlWorker::handle(const CommMessage& msg, double, double now_ms) {
  switch (msg.kind) {
    case MessageKind::GlobalModel: {
      global_ = msg.model;
      state_.local_model = *msg.model;
      state_.local_model.timestamp_ms = now_ms;
      CommMessage ack;
      ack.kind = MessageKind::GlobalModelRecv;
      ack.round = msg.round;
      ack.sender = state_.id;
      transport_->send(state_.id, aggregator_, std::move(ack));
      break;
    }
    case MessageKind::TrainRequest: {
      if (!global_) throw SimError("worker " + state_.id + ": train request before any model");
      const int epochs = msg.epochs;
      const int batch = msg.batch_size;
      const int round = msg.round;
      const int batches =
          static_cast<int>((state_.shard.size() + batch - 1) / batch);
      const double compute_ms = static_cast<double>(epochs) * batches * params_.per_batch_compute_ms;
      transport_->post_after(compute_ms, [this, epochs, batch, round] {
        auto res = run_local_training(state_, epochs, batch, params_.eta, params_.rho, model_,
                                      ds_, *global_, shuffle_rng_);
        CommMessage out;
        out.kind = MessageKind::LocalModel;
        out.round = round;
        out.sender = state_.id;
        out.model = std::make_shared<ModelVector>(std::move(res.model));
        transport_->send(state_.id, aggregator_, std::move(out));
        state_.status = WorkerStatus::Idle;
      });
      break;
    }
    case MessageKind::LocalModelRecv:
      break;  // informational acknowledgment
    case MessageKind::StatusQuery: {
      CommMessage reply;
      reply.kind = MessageKind::StatusReply;
      reply.sender = state_.id;
      reply.status = state_.status;
      transport_->send(state_.id, aggregator_, std::move(reply));
      break;
    }
    default:
      throw SimError("worker " + state_.id + ": unexpected message " +
                     std::string(to_string(msg.kind)));
  }
}

FlAggregator::FlAggregator(const Config& cfg, const LossModel& model, const SyntheticDataset& ds,
                           const std::map<std::string, std::size_t>& shard_sizes)
    : cfg_(cfg), model_(model), ds_(ds), shard_sizes_(shard_sizes) {
  if (cfg.max_rounds < 1) throw ConfigError("aggregator: max_rounds must be >= 1");
  if (cfg.worker_epochs.empty()) throw ConfigError("aggregator: no workers");
  for (const auto& [w, _] : cfg.worker_epochs)
    if (!shard_sizes_.count(w)) throw ConfigError("aggregator: no shard size for " + w);
  std::mt19937_64 rng(cfg.model_init_seed);
  model.init_weights(global_.w, rng);
}

void FlAggregator::bind(Transport& t) {
  transport_ = &t;
  t.register_endpoint(cfg_.ep, [this](const CommMessage& m, double sent, double now) {
    handle(m, sent, now);
  });
}

void FlAggregator::broadcast_global(double now_ms) {
  global_.timestamp_ms = now_ms;
  auto shared = std::make_shared<const ModelVector>(global_);
  acked_.clear();
  broadcast_pending_ = cfg_.worker_epochs.size();
  const double broadcast_start = now_ms;
  for (const auto& [worker, _] : cfg_.worker_epochs) {
    CommMessage msg;
    msg.kind = MessageKind::GlobalModel;
    msg.round = round_;
    msg.sender = cfg_.ep;
    msg.model = shared;
    transport_->send(cfg_.ep, worker, std::move(msg),
                     [this, worker = worker, broadcast_start](double delivered) {
                       if (round_ >= 1) current_.worker_downlink_ms[worker] =
                           delivered - broadcast_start;
                       if (--broadcast_pending_ == 0) {
                         broadcast_done_ms_ = delivered;
                         if (round_ == 0) {
                           bootstrap_end_ms_ = delivered;
                         } else {
                           current_.end_ms = delivered;
                           rounds_.push_back(current_);
                           maybe_finish_run(delivered);
                         }
                       }
                     });
  }
}

void FlAggregator::start_round(double now_ms) {
  current_ = RoundRecord{};
  current_.round = round_;
  current_.start_ms = now_ms;
  inbox_.clear();
  for (const auto& [worker, epochs] : cfg_.worker_epochs) {
    const auto shard_n = shard_sizes_.at(worker);
    const int batches =
        static_cast<int>((shard_n + cfg_.params.batch_size - 1) / cfg_.params.batch_size);
    current_.worker_compute_ms[worker] =
        static_cast<double>(epochs) * batches * cfg_.params.per_batch_compute_ms;
    CommMessage msg;
    msg.kind = MessageKind::TrainRequest;
    msg.round = round_;
    msg.sender = cfg_.ep;
    msg.epochs = epochs;
    msg.batch_size = cfg_.params.batch_size;
    transport_->send(cfg_.ep, worker, std::move(msg),
                     [this, worker = worker, now_ms](double delivered) {
                       current_.worker_request_ms[worker] = delivered - now_ms;
                     });
  }
}

void FlAggregator::maybe_finish_run(double now_ms) {
  const double loss = rounds_.back().loss;
  const bool at_target = cfg_.target_loss && loss <= *cfg_.target_loss;
  if (at_target || round_ >= cfg_.max_rounds) {
    done_ = true;
    finished_at_ms_ = now_ms;
  }
}

void FlAggregator::handle(const CommMessage& msg, double sent_ms, double now_ms) {
  if (done_) return;
  switch (msg.kind) {
    case MessageKind::Register: {
      if (!cfg_.worker_epochs.count(msg.sender))
        throw SimError("aggregator: registration from unknown worker " + msg.sender);
      if (!registered_[msg.sender]) {
        registered_[msg.sender] = true;
        if (++registered_count_ == cfg_.worker_epochs.size()) broadcast_global(now_ms);
      }
      break;
    }
    case MessageKind::GlobalModelRecv: {
      if (msg.round != round_)
        throw SimError("aggregator: stale acknowledgment for round " +
                       std::to_string(msg.round));
      acked_[msg.sender] = now_ms;
      if (acked_.size() == cfg_.worker_epochs.size()) {
        ++round_;
        start_round(now_ms);
      }
      break;
    }
    case MessageKind::LocalModel: {
      if (msg.round != round_)
        throw SimError("aggregator: local model for wrong round " + std::to_string(msg.round));
      if (inbox_.count(msg.sender))
        throw SimError("aggregator: duplicate local model from " + msg.sender);
      inbox_[msg.sender] = *msg.model;
      current_.worker_uplink_ms[msg.sender] = now_ms - sent_ms;
      CommMessage ack;
      ack.kind = MessageKind::LocalModelRecv;
      ack.round = round_;
      ack.sender = cfg_.ep;
      transport_->send(cfg_.ep, msg.sender, std::move(ack));
      finish_round_if_ready();
      break;
    }
    case MessageKind::StatusReply:
      break;
    default:
      throw SimError("aggregator: unexpected message " + std::string(to_string(msg.kind)));
  }
}

void FlAggregator::finish_round_if_ready() {
  if (inbox_.size() != cfg_.worker_epochs.size()) return;
  std::vector<std::pair<ModelVector, std::size_t>> parts;
  parts.reserve(inbox_.size());
  for (const auto& [worker, m] : inbox_)  // std::map: worker-id order
    parts.emplace_back(m, shard_sizes_.at(worker));
  global_ = aggregate(parts);

  const auto eval = evaluate(model_, global_, ds_);
  current_.loss = eval.loss;
  current_.accuracy = eval.accuracy;
  double tau = 0, sum = 0;
  for (const auto& [_, d] : current_.worker_uplink_ms) {
    tau = std::max(tau, d);
    sum += d;
  }
  current_.tau_max_ms = tau;
  current_.mean_e2e_ms = sum / current_.worker_uplink_ms.size();
  if (cfg_.record_models) round_models_.push_back(global_);
  broadcast_global(transport_->now());
}

}  // namespace fedmesh
