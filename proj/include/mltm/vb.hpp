#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/matrix.hpp"
#include "mltm/model.hpp"

namespace mltm {

enum class VbMode { batch, online };

VbMode parse_vb_mode(std::string_view text);
std::string_view to_string(VbMode mode);

struct VbConfig {
  VbMode mode = VbMode::batch;
  std::size_t local_max_iters = 100;
  // Mean absolute change of gamma below which the local loop stops.
  double local_convergence = 1e-3;
  std::size_t batch_size = 256;
  double kappa = 0.7;
  double tau0 = 1024.0;
  // Full passes over the corpus; 0 selects the mode default (batch 100, online 1).
  std::size_t passes = 0;
  std::size_t workers = 1;

  std::size_t resolved_passes() const;
  void validate() const;
};

// Variational parameters for a training corpus.
struct VariationalState {
  MatrixD gamma;                // D x K
  std::vector<MatrixD> lambda;  // per channel, K x V_l
  // responsibilities[d][l]: one row per bag-of-words entry of channel l in
  // tuple d (empty for absent channels), K columns, rows sum to 1.
  std::vector<std::vector<MatrixD>> responsibilities;
};

// E_q[log phi_tw] = digamma(lambda_tw) - digamma(sum_v lambda_tv), per row.
MatrixD expected_log_topic_word(const MatrixD& lambda);

// E_q[log theta_t] = digamma(gamma_t) - digamma(sum_j gamma_j).
std::vector<double> expected_log_theta(std::span<const double> gamma);

// exp(E_q[log phi]) transposed to V x K, so one word's topic weights are
// contiguous. Each word's row is scaled so its largest weight is 1; the
// scale cancels in the responsibility normalisation and keeps rows from
// underflowing.
MatrixD word_topic_weights(const MatrixD& expected_log_phi);

// A document together with the topic-word weights it is scored against.
struct ChannelDoc {
  const BowDocument* doc = nullptr;
  const MatrixD* word_weights = nullptr;  // V x K, from word_topic_weights()
};

// Responsibility update: r_wt proportional to exp(E[log theta_t] + E[log phi_tw]).
// Writes one K-row per entry of `doc`; entries outside the vocabulary get a
// uniform row and are ignored elsewhere.
void update_responsibilities(const ChannelDoc& doc, std::span<const double> expected_log_theta,
                             MatrixD& responsibilities);

// gamma_t = alpha + sum over channels and entries of n_w r_wt.
std::vector<double> update_gamma(std::span<const ChannelDoc> docs,
                                 std::span<const MatrixD> responsibilities, double alpha,
                                 std::size_t num_topics);

struct LocalState {
  std::vector<double> gamma;
  std::vector<MatrixD> responsibilities;  // parallel to the docs span
  std::size_t iterations = 0;
  double last_change = 0.0;
};

// Alternates the responsibility and gamma updates until the mean absolute
// gamma change drops below cfg.local_convergence or local_max_iters is hit.
// gamma starts at `initial_gamma` if given, else alpha + N_d / K.
LocalState e_step(std::span<const ChannelDoc> docs, double alpha, std::size_t num_topics,
                  const VbConfig& cfg, std::span<const double> initial_gamma = {});

// lambda_tw = beta + scale * sum_d n_w r_wt over the given tuples of one corpus.
// scale is 1 for batch updates and D / |minibatch| for online updates.
std::vector<MatrixD> lambda_estimate(const TupleCorpus& corpus, std::span<const std::size_t> tuples,
                                     const std::vector<std::vector<MatrixD>>& responsibilities,
                                     std::span<const double> beta, std::size_t num_topics,
                                     double scale);

// lambda <- (1 - rho) lambda + rho estimate
void blend_lambda(std::vector<MatrixD>& lambda, const std::vector<MatrixD>& estimate, double rho);

// rho_t = (tau0 + t)^(-kappa)
double online_learning_rate(double tau0, double kappa, std::size_t step);

struct ElboTerms {
  double document = 0.0;  // theta, z and word terms, summed over tuples
  double topic = 0.0;     // topic-word prior and entropy terms
  double total() const { return document + topic; }
};

ElboTerms elbo_terms(const TupleCorpus& corpus, const VariationalState& state,
                     const ModelConfig& config);
double elbo(const TupleCorpus& corpus, const VariationalState& state, const ModelConfig& config);

struct PassRecord {
  std::size_t pass = 0;
  double elbo = 0.0;
  double mean_gamma_change = 0.0;
};

// Trains by coordinate ascent (batch) or stochastic updates (online).
// In batch mode gamma is warm-started from the previous pass, so the ELBO
// is non-decreasing. Throws NumericalError on non-finite parameters.
TopicModel train_vb(const TupleCorpus& corpus, const ModelConfig& model_config,
                    const VbConfig& vb_config, std::vector<PassRecord>* trace = nullptr,
                    VariationalState* final_state = nullptr);

// Held-out inference with the topic-word parameters of a trained model.
// Uses E[log phi] from lambda when the model carries it, log phi otherwise.
class VbInferencer {
 public:
  VbInferencer(const TopicModel& model, VbConfig config);

  TopicDistribution infer(const BowDocument& doc, std::size_t channel) const;
  TopicDistribution infer(const ArticleTuple& tuple) const;

 private:
  TopicDistribution run(std::span<const ChannelDoc> docs) const;

  const TopicModel* model_;
  VbConfig config_;
  std::vector<MatrixD> word_weights_;
};

TopicDistribution infer_theta_vb(const BowDocument& doc, const TopicModel& model,
                                 std::size_t channel, const VbConfig& config);

std::string format_pass_trace(const std::vector<PassRecord>& trace);

}  // namespace mltm
