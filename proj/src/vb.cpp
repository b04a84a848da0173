#include "mltm/vb.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "mltm/error.hpp"
#include "mltm/parallel.hpp"
#include "mltm/rng.hpp"

namespace mltm {

namespace {

double digamma(double x) { return boost::math::digamma(x); }

void check_finite(const std::vector<MatrixD>& ms, const char* what) {
  for (const auto& m : ms) {
    for (double v : m.data()) {
      if (!std::isfinite(v) || !(v > 0.0)) {
        throw NumericalError(std::string("train_vb: non-finite or non-positive value in ") + what);
      }
    }
  }
}

}  // namespace

VbMode parse_vb_mode(std::string_view text) {
  if (text == "batch") return VbMode::batch;
  if (text == "online") return VbMode::online;
  throw ConfigError("unknown VB mode '" + std::string(text) + "' (expected batch or online)");
}

std::string_view to_string(VbMode mode) { return mode == VbMode::batch ? "batch" : "online"; }

std::size_t VbConfig::resolved_passes() const {
  if (passes > 0) return passes;
  return mode == VbMode::batch ? 100 : 1;
}

void VbConfig::validate() const {
  if (local_max_iters < 1) throw ConfigError("local_max_iters must be >= 1");
  if (!(local_convergence > 0.0)) throw ConfigError("local_convergence must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(kappa > 0.5 && kappa <= 1.0)) throw ConfigError("kappa must lie in (0.5, 1]");
  if (!(tau0 >= 0.0)) throw ConfigError("tau0 must be >= 0");
}

MatrixD expected_log_topic_word(const MatrixD& lambda) {
  MatrixD out(lambda.rows(), lambda.cols());
  for (std::size_t t = 0; t < lambda.rows(); ++t) {
    const auto row = lambda.row(t);
    const double total = digamma(std::accumulate(row.begin(), row.end(), 0.0));
    for (std::size_t w = 0; w < row.size(); ++w) out(t, w) = digamma(row[w]) - total;
  }
  return out;
}

std::vector<double> expected_log_theta(std::span<const double> gamma) {
  const double total = digamma(std::accumulate(gamma.begin(), gamma.end(), 0.0));
  std::vector<double> out(gamma.size());
  for (std::size_t t = 0; t < gamma.size(); ++t) out[t] = digamma(gamma[t]) - total;
  return out;
}

MatrixD word_topic_weights(const MatrixD& expected_log_phi) {
  const auto k = expected_log_phi.rows();
  MatrixD out(expected_log_phi.cols(), k);
  for (std::size_t w = 0; w < expected_log_phi.cols(); ++w) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < k; ++t) hi = std::max(hi, expected_log_phi(t, w));
    for (std::size_t t = 0; t < k; ++t) out(w, t) = std::exp(expected_log_phi(t, w) - hi);
  }
  return out;
}

void update_responsibilities(const ChannelDoc& doc, std::span<const double> expected_log_theta,
                             MatrixD& responsibilities) {
  const auto k = expected_log_theta.size();
  const auto& weights = *doc.word_weights;
  const auto& entries = doc.doc->entries;
  if (responsibilities.rows() != entries.size() || responsibilities.cols() != k) {
    responsibilities = MatrixD(entries.size(), k);
  }
  std::vector<double> theta_weight(k);
  for (std::size_t t = 0; t < k; ++t) theta_weight[t] = std::exp(expected_log_theta[t]);

  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto r = responsibilities.row(i);
    const auto w = entries[i].word;
    if (w >= weights.rows()) {
      std::fill(r.begin(), r.end(), 1.0 / static_cast<double>(k));
      continue;
    }
    const auto ww = weights.row(w);
    double sum = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      r[t] = theta_weight[t] * ww[t];
      sum += r[t];
    }
    if (sum > 0.0 && std::isfinite(sum)) {
      for (auto& v : r) v /= sum;
      continue;
    }
    // Underflow: redo in log space.
    std::vector<double> logs(k);
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < k; ++t) {
      logs[t] = expected_log_theta[t] + std::log(ww[t]);
      hi = std::max(hi, logs[t]);
    }
    sum = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      r[t] = std::exp(logs[t] - hi);
      sum += r[t];
    }
    for (auto& v : r) v /= sum;
  }
}

std::vector<double> update_gamma(std::span<const ChannelDoc> docs,
                                 std::span<const MatrixD> responsibilities, double alpha,
                                 std::size_t num_topics) {
  std::vector<double> gamma(num_topics, 0.0);
  for (std::size_t j = 0; j < docs.size(); ++j) {
    const auto& entries = docs[j].doc->entries;
    const auto vocab = docs[j].word_weights->rows();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].word >= vocab) continue;
      const auto r = responsibilities[j].row(i);
      const double n = entries[i].count;
      for (std::size_t t = 0; t < num_topics; ++t) gamma[t] += n * r[t];
    }
  }
  for (auto& g : gamma) g += alpha;
  return gamma;
}

LocalState e_step(std::span<const ChannelDoc> docs, double alpha, std::size_t num_topics,
                  const VbConfig& cfg, std::span<const double> initial_gamma) {
  LocalState local;
  if (!initial_gamma.empty()) {
    local.gamma.assign(initial_gamma.begin(), initial_gamma.end());
  } else {
    double n = 0.0;
    for (const auto& d : docs) {
      for (const auto& e : d.doc->entries) {
        if (e.word < d.word_weights->rows()) n += e.count;
      }
    }
    local.gamma.assign(num_topics, alpha + n / static_cast<double>(num_topics));
  }
  local.responsibilities.resize(docs.size());
  for (std::size_t it = 1; it <= cfg.local_max_iters; ++it) {
    const auto elog_theta = expected_log_theta(local.gamma);
    for (std::size_t j = 0; j < docs.size(); ++j) {
      update_responsibilities(docs[j], elog_theta, local.responsibilities[j]);
    }
    auto fresh = update_gamma(docs, local.responsibilities, alpha, num_topics);
    double change = 0.0;
    for (std::size_t t = 0; t < num_topics; ++t) change += std::abs(fresh[t] - local.gamma[t]);
    change /= static_cast<double>(num_topics);
    local.gamma = std::move(fresh);
    local.iterations = it;
    local.last_change = change;
    if (change < cfg.local_convergence) break;
  }
  return local;
}

std::vector<MatrixD> lambda_estimate(const TupleCorpus& corpus, std::span<const std::size_t> tuples,
                                     const std::vector<std::vector<MatrixD>>& responsibilities,
                                     std::span<const double> beta, std::size_t num_topics,
                                     double scale) {
  std::vector<MatrixD> stats;
  for (const auto& v : corpus.vocabularies) stats.emplace_back(num_topics, v.size(), 0.0);
  for (auto d : tuples) {
    const auto& tuple = corpus.tuples[d];
    for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
      if (!tuple.docs[l]) continue;
      const auto& entries = tuple.docs[l]->entries;
      const auto& r = responsibilities[d][l];
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const double n = entries[i].count;
        const auto row = r.row(i);
        for (std::size_t t = 0; t < num_topics; ++t) stats[l](t, entries[i].word) += n * row[t];
      }
    }
  }
  for (std::size_t l = 0; l < stats.size(); ++l) {
    for (auto& v : stats[l].data()) v = beta[l] + scale * v;
  }
  return stats;
}

void blend_lambda(std::vector<MatrixD>& lambda, const std::vector<MatrixD>& estimate, double rho) {
  for (std::size_t l = 0; l < lambda.size(); ++l) {
    auto& dst = lambda[l].data();
    const auto& src = estimate[l].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (1.0 - rho) * dst[i] + rho * src[i];
  }
}

double online_learning_rate(double tau0, double kappa, std::size_t step) {
  return std::pow(tau0 + static_cast<double>(step), -kappa);
}

ElboTerms elbo_terms(const TupleCorpus& corpus, const VariationalState& state,
                     const ModelConfig& config) {
  const auto k = config.num_topics;
  const double kd = static_cast<double>(k);
  const double alpha = config.alpha;
  ElboTerms terms;

  std::vector<MatrixD> elog_phi;
  for (const auto& lam : state.lambda) elog_phi.push_back(expected_log_topic_word(lam));

  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto gamma = state.gamma.row(d);
    const auto elog_theta = expected_log_theta(gamma);
    double term = std::lgamma(kd * alpha) - kd * std::lgamma(alpha);
    const double gamma_sum = std::accumulate(gamma.begin(), gamma.end(), 0.0);
    term -= std::lgamma(gamma_sum);
    for (std::size_t t = 0; t < k; ++t) {
      term += (alpha - gamma[t]) * elog_theta[t] + std::lgamma(gamma[t]);
    }
    const auto& tuple = corpus.tuples[d];
    for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
      if (!tuple.docs[l]) continue;
      const auto& entries = tuple.docs[l]->entries;
      const auto& r = state.responsibilities[d][l];
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto row = r.row(i);
        double inner = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          if (row[t] <= 0.0) continue;
          inner += row[t] * (elog_theta[t] + elog_phi[l](t, entries[i].word) - std::log(row[t]));
        }
        term += entries[i].count * inner;
      }
    }
    terms.document += term;
  }

  for (std::size_t l = 0; l < state.lambda.size(); ++l) {
    const auto& lam = state.lambda[l];
    const double beta = config.beta[l];
    const double v = static_cast<double>(lam.cols());
    for (std::size_t t = 0; t < lam.rows(); ++t) {
      const auto row = lam.row(t);
      double term = std::lgamma(v * beta) - v * std::lgamma(beta);
      term -= std::lgamma(std::accumulate(row.begin(), row.end(), 0.0));
      for (std::size_t w = 0; w < row.size(); ++w) {
        term += (beta - row[w]) * elog_phi[l](t, w) + std::lgamma(row[w]);
      }
      terms.topic += term;
    }
  }
  return terms;
}

double elbo(const TupleCorpus& corpus, const VariationalState& state, const ModelConfig& config) {
  return elbo_terms(corpus, state, config).total();
}

namespace {

std::vector<MatrixD> initial_lambda(const TupleCorpus& corpus, const ModelConfig& config) {
  Rng rng(derive_seed(config.seed, 3));
  std::gamma_distribution<double> noise(100.0, 0.01);
  const auto k = config.num_topics;
  std::vector<MatrixD> lambda;
  for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
    const auto v = corpus.vocabularies[l].size();
    const double scale = std::max(
        1.0, static_cast<double>(corpus.channel_tokens(l)) / static_cast<double>(k * v));
    MatrixD m(k, v);
    for (auto& x : m.data()) x = config.beta[l] + scale * noise(rng);
    lambda.push_back(std::move(m));
  }
  return lambda;
}

// Per-tuple E-step against fixed weights; returns the gamma change.
double local_update(const TupleCorpus& corpus, std::size_t d, const std::vector<MatrixD>& weights,
                    const ModelConfig& config, const VbConfig& vb, bool warm_start,
                    VariationalState& state) {
  const auto& tuple = corpus.tuples[d];
  std::vector<ChannelDoc> docs;
  std::vector<std::size_t> channel_of;
  for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
    if (tuple.docs[l]) {
      docs.push_back({&*tuple.docs[l], &weights[l]});
      channel_of.push_back(l);
    }
  }
  auto gamma_row = state.gamma.row(d);
  std::vector<double> before(gamma_row.begin(), gamma_row.end());
  auto local = e_step(docs, config.alpha, config.num_topics, vb,
                      warm_start ? std::span<const double>(before) : std::span<const double>{});
  double change = 0.0;
  for (std::size_t t = 0; t < gamma_row.size(); ++t) {
    change += std::abs(local.gamma[t] - before[t]);
    gamma_row[t] = local.gamma[t];
  }
  auto& slots = state.responsibilities[d];
  slots.assign(corpus.num_channels(), MatrixD{});
  for (std::size_t j = 0; j < docs.size(); ++j) slots[channel_of[j]] = std::move(local.responsibilities[j]);
  return change / static_cast<double>(gamma_row.size());
}

std::vector<MatrixD> weights_from_lambda(const std::vector<MatrixD>& lambda) {
  std::vector<MatrixD> w;
  for (const auto& lam : lambda) w.push_back(word_topic_weights(expected_log_topic_word(lam)));
  return w;
}

}  // namespace

TopicModel train_vb(const TupleCorpus& corpus, const ModelConfig& model_config,
                    const VbConfig& vb_config, std::vector<PassRecord>* trace,
                    VariationalState* final_state) {
  vb_config.validate();
  model_config.validate(corpus.num_channels());
  if (corpus.size() == 0) throw EmptyCorpusError("train_vb: corpus has no tuples");
  for (const auto& v : corpus.vocabularies) {
    if (v.empty()) throw EmptyCorpusError("train_vb: channel '" + v.channel() + "' has an empty vocabulary");
  }

  const auto k = model_config.num_topics;
  const auto num_docs = corpus.size();
  VariationalState state;
  state.lambda = initial_lambda(corpus, model_config);
  state.gamma = MatrixD(num_docs, k);
  for (std::size_t d = 0; d < num_docs; ++d) {
    const double n = static_cast<double>(corpus.tuples[d].total_tokens());
    for (auto& g : state.gamma.row(d)) g = model_config.alpha + n / static_cast<double>(k);
  }
  state.responsibilities.resize(num_docs);

  const auto passes = vb_config.resolved_passes();
  std::vector<double> change(num_docs, 0.0);
  std::size_t step = 0;

  for (std::size_t pass = 1; pass <= passes; ++pass) {
    double mean_change = 0.0;
    if (vb_config.mode == VbMode::batch) {
      const auto weights = weights_from_lambda(state.lambda);
      parallel_for(num_docs, vb_config.workers, [&](std::size_t d) {
        change[d] = local_update(corpus, d, weights, model_config, vb_config, true, state);
      });
      std::vector<std::size_t> all(num_docs);
      std::iota(all.begin(), all.end(), std::size_t{0});
      state.lambda = lambda_estimate(corpus, all, state.responsibilities, model_config.beta, k, 1.0);
      mean_change = std::accumulate(change.begin(), change.end(), 0.0) / static_cast<double>(num_docs);
    } else {
      const auto order = seeded_permutation(num_docs, derive_seed(model_config.seed, 100 + pass));
      for (std::size_t start = 0; start < num_docs; start += vb_config.batch_size) {
        const auto end = std::min(num_docs, start + vb_config.batch_size);
        std::span<const std::size_t> batch(order.data() + start, end - start);
        const auto weights = weights_from_lambda(state.lambda);
        parallel_for(batch.size(), vb_config.workers, [&](std::size_t i) {
          change[batch[i]] = local_update(corpus, batch[i], weights, model_config, vb_config, false, state);
        });
        const double scale = static_cast<double>(num_docs) / static_cast<double>(batch.size());
        const auto estimate =
            lambda_estimate(corpus, batch, state.responsibilities, model_config.beta, k, scale);
        blend_lambda(state.lambda, estimate, online_learning_rate(vb_config.tau0, vb_config.kappa, step));
        ++step;
      }
      mean_change = std::accumulate(change.begin(), change.end(), 0.0) / static_cast<double>(num_docs);
    }
    check_finite(state.lambda, "lambda");
    if (trace) {
      const double bound = elbo(corpus, state, model_config);
      if (!std::isfinite(bound)) throw NumericalError("train_vb: ELBO is not finite");
      trace->push_back({pass, bound, mean_change});
    }
  }

  TopicModel model;
  model.config = model_config;
  model.channels = corpus.channels;
  model.vocabularies = corpus.vocabularies;
  for (const auto& lam : state.lambda) {
    MatrixD phi(lam.rows(), lam.cols());
    for (std::size_t t = 0; t < lam.rows(); ++t) {
      const auto row = lam.row(t);
      const double total = std::accumulate(row.begin(), row.end(), 0.0);
      for (std::size_t w = 0; w < row.size(); ++w) phi(t, w) = row[w] / total;
    }
    model.phi.push_back(std::move(phi));
  }
  model.lambda = state.lambda;
  model.provenance.backend = "vb";
  model.provenance.metadata = {
      {"mode", std::string(to_string(vb_config.mode))},
      {"passes", std::to_string(passes)},
      {"local_max_iters", std::to_string(vb_config.local_max_iters)},
      {"train_tuples", std::to_string(corpus.size())},
      {"train_tokens", std::to_string(corpus.total_tokens())},
  };
  model.validate();
  if (final_state) *final_state = std::move(state);
  return model;
}

VbInferencer::VbInferencer(const TopicModel& model, VbConfig config)
    : model_(&model), config_(std::move(config)) {
  config_.validate();
  for (std::size_t l = 0; l < model.channels.size(); ++l) {
    if (!model.lambda.empty()) {
      word_weights_.push_back(word_topic_weights(expected_log_topic_word(model.lambda[l])));
    } else {
      const auto& phi = model.phi[l];
      MatrixD log_phi(phi.rows(), phi.cols());
      for (std::size_t t = 0; t < phi.rows(); ++t) {
        for (std::size_t w = 0; w < phi.cols(); ++w) log_phi(t, w) = std::log(phi(t, w));
      }
      word_weights_.push_back(word_topic_weights(log_phi));
    }
  }
}

TopicDistribution VbInferencer::run(std::span<const ChannelDoc> docs) const {
  const auto local = e_step(docs, model_->config.alpha, model_->num_topics(), config_);
  return TopicDistribution::normalized(local.gamma);
}

TopicDistribution VbInferencer::infer(const BowDocument& doc, std::size_t channel) const {
  const ChannelDoc one{&doc, &word_weights_.at(channel)};
  return run(std::span<const ChannelDoc>(&one, 1));
}

TopicDistribution VbInferencer::infer(const ArticleTuple& tuple) const {
  std::vector<ChannelDoc> docs;
  for (std::size_t l = 0; l < tuple.docs.size() && l < word_weights_.size(); ++l) {
    if (tuple.docs[l]) docs.push_back({&*tuple.docs[l], &word_weights_[l]});
  }
  return run(docs);
}

TopicDistribution infer_theta_vb(const BowDocument& doc, const TopicModel& model,
                                 std::size_t channel, const VbConfig& config) {
  return VbInferencer(model, config).infer(doc, channel);
}

std::string format_pass_trace(const std::vector<PassRecord>& trace) {
  std::string out = "pass\telbo\tmean_gamma_change\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", r.pass, r.elbo, r.mean_gamma_change);
    out += buf;
  }
  return out;
}

}  // namespace mltm
