#pragma once

#include <cstdint>
#include <vector>

#include "circuitrl/model/config.hpp"
#include "circuitrl/model/model.hpp"
#include "circuitrl/model/tensor.hpp"

namespace circuitrl {

// Where and what to read off the logits for the task metric: for sequence i,
// logit[correct[i]] - logit[distractor[i]] at position positions[i].
struct MetricSpec {
  std::vector<std::size_t> positions;
  std::vector<std::int32_t> correct;
  std::vector<std::int32_t> distractor;

  std::size_t size() const { return positions.size(); }
  bool operator==(const MetricSpec&) const = default;
};

// Full logits [batch x seq x vocab]. Deterministic; with an ablation target
// the head's z vectors are zeroed at every position before W_O (b_O is still
// added). Throws std::out_of_range for bad token ids or overlong sequences.
Logits forward_logits(const Model& model, const TokenBatch& tokens,
                      const AblationSpec& ablation = AblationSpec::intact());

// Residual stream after the final layer norm, [batch x seq x d_model].
Tensor3 final_hidden(const Model& model, const TokenBatch& tokens,
                     const AblationSpec& ablation = AblationSpec::intact());

// Output of the attention block of `layer` (sum over heads of z_h W_O^h plus
// b_O), before it is added to the residual stream.
Tensor3 attention_block_output(const Model& model, const TokenBatch& tokens, int layer,
                               const AblationSpec& ablation = AblationSpec::intact());

// z_h W_O^h for every head of `layer` on the intact model; one tensor per
// head, each [batch x seq x d_model]. Summing them and adding b_O gives
// attention_block_output.
std::vector<Tensor3> per_head_contributions(const Model& model, const TokenBatch& tokens, int layer);

// Mean over the batch of the logit difference at each sequence's metric position.
double logit_diff_metric(const Logits& logits, const MetricSpec& spec);

// Mean next-token cross-entropy (nats) over positions 0..seq-2 of every row.
double control_cross_entropy(const Logits& logits, const TokenBatch& tokens);

// Same values as logit_diff_metric(forward_logits(...)) and
// control_cross_entropy(forward_logits(...)) without materialising the full
// vocabulary tensor.
double task_metric(const Model& model, const TokenBatch& tokens, const MetricSpec& spec,
                   const AblationSpec& ablation = AblationSpec::intact());
double control_loss(const Model& model, const TokenBatch& tokens,
                    const AblationSpec& ablation = AblationSpec::intact());

}  // namespace circuitrl
