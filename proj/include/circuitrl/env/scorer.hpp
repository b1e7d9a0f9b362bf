#pragma once

#include <memory>

#include "circuitrl/model/config.hpp"
#include "circuitrl/model/model.hpp"
#include "circuitrl/tasks/task_suite.hpp"

namespace circuitrl {

// Evaluates the two quantities the reward is built from, for the intact
// model or with one head ablated. Implementations must be safe to call
// concurrently.
class InterventionScorer {
 public:
  virtual ~InterventionScorer() = default;

  virtual int n_layers() const = 0;
  virtual int n_heads() const = 0;
  int n_actions() const { return n_layers() * n_heads(); }

  // Mean logit difference on the task batch (logit units).
  virtual double task_metric(const TaskBatch& batch, const AblationSpec& ablation) const = 0;
  // Mean next-token cross-entropy on the control batch (nats).
  virtual double control_loss(const ControlBatch& batch, const AblationSpec& ablation) const = 0;
};

// Scores with a transformer; every call is a fresh full forward pass.
class ModelScorer : public InterventionScorer {
 public:
  explicit ModelScorer(std::shared_ptr<const Model> model) : model_(std::move(model)) {}

  int n_layers() const override { return model_->config().n_layers; }
  int n_heads() const override { return model_->config().n_heads; }
  double task_metric(const TaskBatch& batch, const AblationSpec& ablation) const override;
  double control_loss(const ControlBatch& batch, const AblationSpec& ablation) const override;

  const Model& model() const { return *model_; }

 private:
  std::shared_ptr<const Model> model_;
};

}  // namespace circuitrl
