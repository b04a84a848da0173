#include "mltm/gibbs.hpp"

#include <cmath>
#include <cstdio>

#include "mltm/error.hpp"

namespace mltm {

void GibbsConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (burn_in >= iterations) throw ConfigError("burn_in must be < iterations");
  if (sample_lag < 1) throw ConfigError("sample_lag must be >= 1");
  if (fold_in_iterations < 1) throw ConfigError("fold_in_iterations must be >= 1");
  if (fold_in_burn_in >= fold_in_iterations) {
    throw ConfigError("fold_in_burn_in must be < fold_in_iterations");
  }
}

AssignmentState init_assignments(const TupleCorpus& corpus, const ModelConfig& config) {
  config.validate(corpus.num_channels());
  Rng rng(derive_seed(config.seed, 1));
  const auto k = config.num_topics;
  std::vector<std::vector<std::vector<int>>> z(corpus.size());
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    z[d].resize(corpus.num_channels());
    for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
      const auto& doc = corpus.tuples[d].docs[l];
      if (!doc) continue;
      z[d][l].resize(doc->total_tokens);
      for (auto& t : z[d][l]) t = static_cast<int>(uniform_index(rng, k));
    }
  }
  return AssignmentState::from_assignments(corpus, k, std::move(z));
}

std::vector<double> full_conditional(const AssignmentState& state, const TupleCorpus& corpus,
                                     const ModelConfig& config, std::size_t tuple,
                                     std::size_t channel, std::size_t token) {
  const auto& doc = corpus.tuples.at(tuple).docs.at(channel);
  if (!doc || token >= doc->total_tokens) throw InvalidArgument("full_conditional: no such token");
  const auto word = expand_tokens(*doc)[token];
  const int current = state.z[tuple][channel][token];
  const double beta = config.beta[channel];
  const double vbeta = beta * static_cast<double>(corpus.vocabularies[channel].size());
  std::vector<double> p(state.num_topics);
  double sum = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    const int self = static_cast<int>(t) == current ? 1 : 0;
    const double ndt = state.doc_topic_counts(tuple, t) - self;
    const double nwt = state.word_topic_counts[channel](word, t) - self;
    const double nt = state.topic_totals[channel][t] - self;
    p[t] = (ndt + config.alpha) * (nwt + beta) / (nt + vbeta);
    sum += p[t];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::size_t gibbs_sweep(AssignmentState& state, const TupleCorpus& corpus,
                        const ModelConfig& config, Rng& rng) {
  const std::size_t k = state.num_topics;
  const double alpha = config.alpha;
  std::vector<double> cumulative(k);
  std::size_t changed = 0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    auto doc_counts = state.doc_topic_counts.row(d);
    for (std::size_t l = 0; l < corpus.num_channels(); ++l) {
      const auto& doc = corpus.tuples[d].docs[l];
      if (!doc) continue;
      auto& word_counts = state.word_topic_counts[l];
      auto& totals = state.topic_totals[l];
      auto& z = state.z[d][l];
      const double beta = config.beta[l];
      const double vbeta = beta * static_cast<double>(word_counts.rows());
      std::size_t i = 0;
      for (const auto& entry : doc->entries) {
        auto wt = word_counts.row(entry.word);
        for (std::uint32_t c = 0; c < entry.count; ++c, ++i) {
          const int old = z[i];
          --doc_counts[old];
          --wt[old];
          --totals[old];
          double acc = 0.0;
          for (std::size_t t = 0; t < k; ++t) {
            acc += (doc_counts[t] + alpha) * (wt[t] + beta) / (totals[t] + vbeta);
            cumulative[t] = acc;
          }
          const int fresh = static_cast<int>(sample_cumulative(rng, cumulative));
          z[i] = fresh;
          ++doc_counts[fresh];
          ++wt[fresh];
          ++totals[fresh];
          if (fresh != old) ++changed;
        }
      }
    }
  }
#ifndef NDEBUG
  if (!state.consistent_with(corpus)) throw Error("gibbs_sweep: count matrices inconsistent with z");
#endif
  return changed;
}

double collapsed_log_likelihood(const AssignmentState& state, const ModelConfig& config) {
  double ll = 0.0;
  for (std::size_t l = 0; l < state.word_topic_counts.size(); ++l) {
    const auto& counts = state.word_topic_counts[l];
    const double beta = config.beta[l];
    const double v = static_cast<double>(counts.rows());
    const double lg_beta = std::lgamma(beta);
    for (std::size_t t = 0; t < state.num_topics; ++t) {
      ll += std::lgamma(v * beta) - std::lgamma(state.topic_totals[l][t] + v * beta);
      for (std::size_t w = 0; w < counts.rows(); ++w) {
        const int n = counts(w, t);
        if (n > 0) ll += std::lgamma(n + beta) - lg_beta;
      }
    }
  }
  return ll;
}

GibbsSampler::GibbsSampler(const TupleCorpus& corpus, ModelConfig config)
    : corpus_(&corpus),
      config_(std::move(config)),
      state_(init_assignments(corpus, config_)),
      rng_(derive_seed(config_.seed, 2)) {}

std::size_t GibbsSampler::sweep() { return gibbs_sweep(state_, *corpus_, config_, rng_); }

TopicDistribution GibbsSampler::theta(std::size_t tuple) const {
  return estimate_theta(state_.doc_topic_counts.row(tuple), config_.alpha);
}

MatrixD GibbsSampler::phi(std::size_t channel) const {
  const auto& counts = state_.word_topic_counts[channel];
  const auto v = counts.rows();
  MatrixD out(state_.num_topics, v);
  std::vector<int> column(v);
  for (std::size_t t = 0; t < state_.num_topics; ++t) {
    for (std::size_t w = 0; w < v; ++w) column[w] = counts(w, t);
    const auto row = estimate_phi(column, config_.beta[channel]);
    std::copy(row.begin(), row.end(), out.row(t).begin());
  }
  return out;
}

TopicModel train_gibbs(const TupleCorpus& corpus, const ModelConfig& model_config,
                       const GibbsConfig& gibbs_config, std::vector<SweepRecord>* trace) {
  gibbs_config.validate();
  model_config.validate(corpus.num_channels());
  if (corpus.size() == 0) throw EmptyCorpusError("train_gibbs: corpus has no tuples");
  for (const auto& v : corpus.vocabularies) {
    if (v.empty()) throw EmptyCorpusError("train_gibbs: channel '" + v.channel() + "' has an empty vocabulary");
  }

  GibbsSampler sampler(corpus, model_config);
  std::vector<MatrixD> phi_sum;
  for (const auto& v : corpus.vocabularies) phi_sum.emplace_back(model_config.num_topics, v.size());
  std::size_t samples = 0;

  auto accumulate = [&] {
    for (std::size_t l = 0; l < phi_sum.size(); ++l) {
      const auto phi = sampler.phi(l);
      auto& acc = phi_sum[l].data();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += phi.data()[i];
    }
    ++samples;
  };

  for (std::size_t it = 1; it <= gibbs_config.iterations; ++it) {
    const auto changed = sampler.sweep();
    if (trace) trace->push_back({it, changed, sampler.log_likelihood()});
    if (it > gibbs_config.burn_in && (it - gibbs_config.burn_in) % gibbs_config.sample_lag == 0) {
      accumulate();
    }
  }
  if (samples == 0) accumulate();

  TopicModel model;
  model.config = model_config;
  model.channels = corpus.channels;
  model.vocabularies = corpus.vocabularies;
  for (auto& m : phi_sum) {
    for (auto& v : m.data()) v /= static_cast<double>(samples);
    model.phi.push_back(std::move(m));
  }
  model.provenance.backend = "gibbs";
  model.provenance.metadata = {
      {"iterations", std::to_string(gibbs_config.iterations)},
      {"burn_in", std::to_string(gibbs_config.burn_in)},
      {"sample_lag", std::to_string(gibbs_config.sample_lag)},
      {"samples", std::to_string(samples)},
      {"train_tuples", std::to_string(corpus.size())},
      {"train_tokens", std::to_string(corpus.total_tokens())},
  };
  model.validate();
  return model;
}

TopicDistribution fold_in_gibbs(const BowDocument& doc, const TopicModel& model,
                                std::size_t channel, const GibbsConfig& config,
                                std::uint64_t seed) {
  config.validate();
  const auto k = model.num_topics();
  const auto& phi = model.phi.at(channel);
  std::vector<WordId> tokens;
  tokens.reserve(doc.total_tokens);
  for (const auto& e : doc.entries) {
    if (e.word < phi.cols()) tokens.insert(tokens.end(), e.count, e.word);
  }
  if (tokens.empty()) return TopicDistribution::uniform(k);

  // Column-major copy of phi so a word's K weights are contiguous.
  std::vector<double> phi_by_word(tokens.size() * k);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (std::size_t t = 0; t < k; ++t) phi_by_word[i * k + t] = phi(t, tokens[i]);
  }

  Rng rng(seed);
  std::vector<int> z(tokens.size());
  std::vector<int> counts(k, 0);
  for (auto& t : z) {
    t = static_cast<int>(uniform_index(rng, k));
    ++counts[t];
  }
  const double alpha = model.config.alpha;
  std::vector<double> cumulative(k);
  std::vector<double> theta_sum(k, 0.0);
  std::size_t samples = 0;
  for (std::size_t it = 1; it <= config.fold_in_iterations; ++it) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      --counts[z[i]];
      double acc = 0.0;
      const double* w = &phi_by_word[i * k];
      for (std::size_t t = 0; t < k; ++t) {
        acc += (counts[t] + alpha) * w[t];
        cumulative[t] = acc;
      }
      z[i] = static_cast<int>(sample_cumulative(rng, cumulative));
      ++counts[z[i]];
    }
    if (it > config.fold_in_burn_in) {
      const auto theta = estimate_theta(counts, alpha);
      for (std::size_t t = 0; t < k; ++t) theta_sum[t] += theta[t];
      ++samples;
    }
  }
  for (auto& v : theta_sum) v /= static_cast<double>(samples);
  return TopicDistribution::normalized(std::move(theta_sum));
}

std::string format_sweep_trace(const std::vector<SweepRecord>& trace) {
  std::string out = "iteration\ttokens_changed\tlog_likelihood\n";
  char buf[128];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.17g\n", r.iteration, r.tokens_changed, r.log_likelihood);
    out += buf;
  }
  return out;
}

}  // namespace mltm
