#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/model.hpp"
#include "mltm/rng.hpp"

namespace mltm {

struct GibbsConfig {
  std::size_t iterations = 1000;
  std::size_t burn_in = 800;
  std::size_t sample_lag = 10;
  std::size_t fold_in_iterations = 100;
  std::size_t fold_in_burn_in = 50;

  void validate() const;
};

// Uniform random topic for every token, seeded from config.seed.
AssignmentState init_assignments(const TupleCorpus& corpus, const ModelConfig& config);

// Normalised collapsed conditional p(z_i = t | z_-i, w) for the i-th token
// of channel `channel` in tuple `tuple`:
//   (C^DT_dt + alpha) (C^WT_wt + beta) / (sum_v C^WT_vt + V beta), token i excluded.
std::vector<double> full_conditional(const AssignmentState& state, const TupleCorpus& corpus,
                                     const ModelConfig& config, std::size_t tuple,
                                     std::size_t channel, std::size_t token);

// Resamples every token once (tuple, channel, then token order).
// Returns the number of tokens whose topic changed.
std::size_t gibbs_sweep(AssignmentState& state, const TupleCorpus& corpus,
                        const ModelConfig& config, Rng& rng);

// log p(w | z) with phi integrated out, summed over channels.
double collapsed_log_likelihood(const AssignmentState& state, const ModelConfig& config);

// Owns a chain over one corpus. The corpus must outlive the sampler.
class GibbsSampler {
 public:
  GibbsSampler(const TupleCorpus& corpus, ModelConfig config);

  std::size_t sweep();

  const AssignmentState& state() const { return state_; }
  const ModelConfig& config() const { return config_; }

  // Point estimates from the current assignments.
  TopicDistribution theta(std::size_t tuple) const;
  MatrixD phi(std::size_t channel) const;
  double log_likelihood() const { return collapsed_log_likelihood(state_, config_); }

 private:
  const TupleCorpus* corpus_;
  ModelConfig config_;
  AssignmentState state_;
  Rng rng_;
};

struct SweepRecord {
  std::size_t iteration = 0;
  std::size_t tokens_changed = 0;
  double log_likelihood = 0.0;
};

// Runs `iterations` sweeps and averages the topic-word estimates over the
// samples taken every `sample_lag` sweeps after `burn_in`.
TopicModel train_gibbs(const TupleCorpus& corpus, const ModelConfig& model_config,
                       const GibbsConfig& gibbs_config, std::vector<SweepRecord>* trace = nullptr);

// Held-out inference for one channel's document with phi fixed. Tokens whose
// id is outside the model vocabulary are skipped. Theta is averaged over the
// sweeps after fold_in_burn_in.
TopicDistribution fold_in_gibbs(const BowDocument& doc, const TopicModel& model,
                                std::size_t channel, const GibbsConfig& config,
                                std::uint64_t seed);

std::string format_sweep_trace(const std::vector<SweepRecord>& trace);

}  // namespace mltm
