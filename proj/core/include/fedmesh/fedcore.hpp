#ifndef FEDMESH_FEDCORE_HPP
#define FEDMESH_FEDCORE_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedmesh/datagen.hpp"

namespace fedmesh {

struct ModelVector {
  std::vector<double> w;
  double timestamp_ms = 0;
  std::size_t dim() const { return w.size(); }
};

// fixed wire header in front of the 8-byte-per-weight body
inline constexpr std::size_t kModelHeaderBytes = 64;

// Bytes a model occupies on the wire. A positive override replaces the
// computed size, so scenarios can emulate large models cheaply.
std::size_t serialize_model_bytes(std::size_t dim, std::size_t override_bytes = 0);

// Differentiable per-sample objective. Gradients accumulate so batch sums
// need no temporaries.
class LossModel {
 public:
  virtual ~LossModel() = default;
  virtual std::size_t dim() const = 0;
  virtual void init_weights(std::vector<double>& w, std::mt19937_64& rng) const = 0;
  // adds d/dw loss(w; x, y) into grad (when grad != nullptr); returns the loss
  virtual double sample_loss_grad(const std::vector<double>& w, const double* x, int y,
                                  std::vector<double>* grad) const = 0;
  virtual int predict(const std::vector<double>& w, const double* x) const = 0;
};

// multinomial logistic regression: W (classes x d) then bias (classes)
class LogisticModel : public LossModel {
 public:
  LogisticModel(int d, int classes);
  std::size_t dim() const override;
  void init_weights(std::vector<double>& w, std::mt19937_64& rng) const override;
  double sample_loss_grad(const std::vector<double>& w, const double* x, int y,
                          std::vector<double>* grad) const override;
  int predict(const std::vector<double>& w, const double* x) const override;

 private:
  int d_, classes_;
};

// two-layer perceptron with a leaky rectifier hidden layer
class MlpModel : public LossModel {
 public:
  MlpModel(int d, int hidden, int classes);
  std::size_t dim() const override;
  void init_weights(std::vector<double>& w, std::mt19937_64& rng) const override;
  double sample_loss_grad(const std::vector<double>& w, const double* x, int y,
                          std::vector<double>* grad) const override;
  int predict(const std::vector<double>& w, const double* x) const override;

 private:
  int d_, hidden_, classes_;
};

// Placeholder for byte-accurate transfer experiments: carries `dim` weights
// but never learns; loss reads as NaN so loss targets never trigger.
class SyntheticPayloadModel : public LossModel {
 public:
  explicit SyntheticPayloadModel(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  void init_weights(std::vector<double>& w, std::mt19937_64&) const override {
    w.assign(dim_, 0.0);
  }
  double sample_loss_grad(const std::vector<double>&, const double*, int,
                          std::vector<double>*) const override {
    return std::numeric_limits<double>::quiet_NaN();
  }
  int predict(const std::vector<double>&, const double*) const override { return 0; }

 private:
  std::size_t dim_;
};

std::unique_ptr<LossModel> make_model(const std::string& kind, int d, int classes, int hidden,
                                      std::size_t synthetic_dim = 16);

// One mini-batch step of proximal SGD:
//   w <- w - eta * ( (1/B) sum grad f(w; x) + 2 rho (w - w_global) )
ModelVector local_sgd_step(const ModelVector& w, const LossModel& model,
                           const SyntheticDataset& ds, std::span<const int> batch, double eta,
                           double rho, const ModelVector& w_global);

enum class WorkerStatus { Idle, TrainingStarted, TrainingFinished };

const char* to_string(WorkerStatus s);

struct WorkerState {
  std::string id;
  WorkerStatus status = WorkerStatus::Idle;
  ModelVector local_model;
  std::vector<int> shard;  // sample indices into the shared dataset
};

struct LocalTrainingResult {
  ModelVector model;
  int steps = 0;             // total mini-batch updates
  int batches_per_epoch = 0;
};

// H epochs of proximal SGD over the worker's shard, re-shuffled per epoch
// from the caller's stream. Walks Idle -> TrainingStarted -> TrainingFinished;
// any other entry status throws.
LocalTrainingResult run_local_training(WorkerState& ws, int epochs, int batch_size, double eta,
                                       double rho, const LossModel& model,
                                       const SyntheticDataset& ds, const ModelVector& w_global,
                                       std::mt19937_64& shuffle_rng);

// sample-count weighted average of local models
ModelVector aggregate(const std::vector<std::pair<ModelVector, std::size_t>>& models);

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
};

EvalResult evaluate(const LossModel& model, const ModelVector& w, const SyntheticDataset& ds);

enum class MessageKind {
  Register,
  GlobalModel,
  GlobalModelRecv,
  TrainRequest,
  LocalModel,
  LocalModelRecv,
  StatusQuery,
  StatusReply
};

const char* to_string(MessageKind k);

struct CommMessage {
  MessageKind kind = MessageKind::Register;
  int round = 0;
  std::string sender;
  std::shared_ptr<const ModelVector> model;  // GlobalModel / LocalModel
  int epochs = 0;      // TrainRequest
  int batch_size = 0;  // TrainRequest
  WorkerStatus status = WorkerStatus::Idle;  // StatusReply
};

// Message fabric the protocol machines run on. The harness backs this with
// the mesh; unit tests back it with an instant loopback.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual double now() const = 0;
  virtual void post_after(double delay_ms, std::function<void()> fn) = 0;
  // delivers msg to the `to` endpoint's handler; on_delivered (optional) fires
  // at the delivery instant with the sim time
  virtual void send(const std::string& from, const std::string& to, CommMessage msg,
                    std::function<void(double)> on_delivered = {}) = 0;
  // handler receives (message, sent_ms, now_ms)
  virtual void register_endpoint(
      const std::string& ep,
      std::function<void(const CommMessage&, double, double)> handler) = 0;
};

struct TrainingParams {
  double eta = 0.1;
  double rho = 0.0;
  int batch_size = 20;
  double per_batch_compute_ms = 5.0;
  std::size_t payload_override_bytes = 0;
};

// Worker-side protocol machine (one per federated client).
class FlWorker {
 public:
  FlWorker(std::string ep, std::vector<int> shard, const SyntheticDataset& ds,
           const LossModel& model, const TrainingParams& params, int epochs,
           std::uint64_t shuffle_seed);

  void bind(Transport& t, const std::string& aggregator_ep);
  WorkerStatus status() const { return state_.status; }
  const WorkerState& state() const { return state_; }
  int epochs() const { return epochs_; }

 private:
  void handle(const CommMessage& msg, double sent_ms, double now_ms);

  WorkerState state_;
  const SyntheticDataset& ds_;
  const LossModel& model_;
  TrainingParams params_;
  int epochs_;
  std::mt19937_64 shuffle_rng_;
  std::shared_ptr<const ModelVector> global_;
  Transport* transport_ = nullptr;
  std::string aggregator_;
};

struct RoundRecord {
  int round = 0;
  double start_ms = 0;
  double end_ms = 0;
  double loss = 0;
  double accuracy = 0;
  double tau_max_ms = 0;   // slowest local-model delivery this round
  double mean_e2e_ms = 0;  // mean local-model delivery delay this round
  std::map<std::string, double> worker_uplink_ms;
  std::map<std::string, double> worker_downlink_ms;  // global-model delivery
  std::map<std::string, double> worker_request_ms;   // train-request delivery
  std::map<std::string, double> worker_compute_ms;
};

// Aggregator-side protocol machine: registration, bootstrap broadcast, then
// synchronous rounds of train-request / local-model barrier / aggregate /
// broadcast until the loss target or the round cap is hit.
class FlAggregator {
 public:
  struct Config {
    std::string ep = "SERVER";
    int max_rounds = 1;
    std::optional<double> target_loss;
    std::uint64_t model_init_seed = 0;
    TrainingParams params;
    std::map<std::string, int> worker_epochs;  // per registered worker
    bool record_models = false;
  };

  FlAggregator(const Config& cfg, const LossModel& model, const SyntheticDataset& ds,
               const std::map<std::string, std::size_t>& shard_sizes);

  void bind(Transport& t);

  bool done() const { return done_; }
  double finished_at_ms() const { return finished_at_ms_; }
  const std::vector<RoundRecord>& rounds() const { return rounds_; }
  const std::vector<ModelVector>& round_models() const { return round_models_; }
  const ModelVector& global_model() const { return global_; }
  double bootstrap_end_ms() const { return bootstrap_end_ms_; }

 private:
  void handle(const CommMessage& msg, double sent_ms, double now_ms);
  void broadcast_global(double now_ms);
  void start_round(double now_ms);
  void finish_round_if_ready();
  void maybe_finish_run(double now_ms);

  Config cfg_;
  const LossModel& model_;
  const SyntheticDataset& ds_;
  std::map<std::string, std::size_t> shard_sizes_;
  Transport* transport_ = nullptr;

  std::map<std::string, bool> registered_;
  std::size_t registered_count_ = 0;
  ModelVector global_;
  int round_ = 0;  // 0 = bootstrap broadcast
  bool done_ = false;
  double finished_at_ms_ = 0;
  double bootstrap_end_ms_ = 0;

  std::map<std::string, ModelVector> inbox_;  // local models this round
  std::map<std::string, double> acked_;       // global-model acknowledgments
  std::size_t broadcast_pending_ = 0;
  double broadcast_done_ms_ = 0;
  RoundRecord current_;
  std::vector<RoundRecord> rounds_;
  std::vector<ModelVector> round_models_;
};

}  // namespace fedmesh

#endif
