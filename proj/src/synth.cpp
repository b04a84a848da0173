#include "mltm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "mltm/error.hpp"

namespace mltm {

void SynthConfig::validate() const {
  if (num_topics < 1) throw ConfigError("synth: num_topics must be >= 1");
  if (channels.empty()) throw ConfigError("synth: at least one channel is required");
  if (std::set<std::string>(channels.begin(), channels.end()).size() != channels.size()) {
    throw ConfigError("synth: duplicate channel name");
  }
  if (vocab_sizes.size() != channels.size()) throw ConfigError("synth: vocab_sizes must match channels");
  if (beta.size() != channels.size()) throw ConfigError("synth: beta must match channels");
  for (auto v : vocab_sizes) {
    if (v < 1) throw ConfigError("synth: vocabulary sizes must be >= 1");
  }
  if (num_docs < 1) throw ConfigError("synth: num_docs must be >= 1");
  if (tokens_per_doc < 1) throw ConfigError("synth: tokens_per_doc must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("synth: alpha must be > 0");
  for (double b : beta) {
    if (!(b > 0.0)) throw ConfigError("synth: beta must be > 0");
  }
  for (const auto& c : corruption) {
    if (std::find(channels.begin(), channels.end(), c.channel) == channels.end()) {
      throw ConfigError("synth: corruption names unknown channel '" + c.channel + "'");
    }
    if (!(c.deletion_rate >= 0.0 && c.deletion_rate <= 1.0) ||
        !(c.replacement_rate >= 0.0 && c.replacement_rate <= 1.0)) {
      throw ConfigError("synth: corruption rates must lie in [0, 1]");
    }
  }
}

std::vector<double> sample_dirichlet(Rng& rng, double concentration, std::size_t dim) {
  // Gamma(a) = Gamma(a + 1) * U^(1/a); work with logs so tiny draws survive.
  std::gamma_distribution<double> boosted(concentration + 1.0, 1.0);
  std::vector<double> logs(dim);
  double hi = -std::numeric_limits<double>::infinity();
  for (auto& x : logs) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    x = std::log(boosted(rng)) + std::log(u) / concentration;
    hi = std::max(hi, x);
  }
  double sum = 0.0;
  for (auto& x : logs) {
    x = std::exp(x - hi);
    sum += x;
  }
  for (auto& x : logs) x /= sum;
  return logs;
}

std::string synth_word(std::size_t id, std::size_t size) {
  std::size_t width = 1;
  for (std::size_t n = size > 0 ? size - 1 : 0; n >= 10; n /= 10) ++width;
  std::string digits = std::to_string(id);
  return "w" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

namespace {

BowDocument bow_from_ids(std::vector<WordId> ids, const std::string& article_id,
                         const std::string& channel) {
  std::sort(ids.begin(), ids.end());
  BowDocument doc;
  doc.article_id = article_id;
  doc.channel = channel;
  for (auto id : ids) {
    if (doc.entries.empty() || doc.entries.back().word != id) doc.entries.push_back({id, 0});
    ++doc.entries.back().count;
  }
  doc.total_tokens = ids.size();
  return doc;
}

Vocabulary synth_vocabulary(const TupleCorpus& corpus, std::size_t channel, std::size_t size) {
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts(size, 0), dfs(size, 0);
  for (std::size_t i = 0; i < size; ++i) words.push_back(synth_word(i, size));
  for (const auto& t : corpus.tuples) {
    if (!t.docs[channel]) continue;
    for (const auto& e : t.docs[channel]->entries) {
      counts[e.word] += e.count;
      ++dfs[e.word];
    }
  }
  return Vocabulary(corpus.channels[channel], std::move(words), std::move(counts), std::move(dfs));
}

std::vector<WordId> corrupt_tokens(std::vector<WordId> tokens, std::size_t vocab_size,
                                   double replacement_rate, double deletion_rate, Rng& rng) {
  std::vector<WordId> out;
  out.reserve(tokens.size());
  for (auto w : tokens) {
    if (deletion_rate > 0.0 && uniform01(rng) < deletion_rate) continue;
    if (replacement_rate > 0.0 && uniform01(rng) < replacement_rate) {
      w = static_cast<WordId>(uniform_index(rng, vocab_size));
    }
    out.push_back(w);
  }
  return out;
}

std::vector<WordId> expand(const BowDocument& doc) {
  std::vector<WordId> ids;
  for (const auto& e : doc.entries) ids.insert(ids.end(), e.count, e.word);
  return ids;
}

}  // namespace

SynthCorpus generate_pltm_corpus(const SynthConfig& config) {
  config.validate();
  const auto k = config.num_topics;
  const auto num_channels = config.channels.size();

  SynthCorpus out;
  auto& truth = out.truth;
  // Cumulative topic-word tables for inverse-CDF word draws.
  std::vector<std::vector<std::vector<double>>> cumulative(num_channels);
  for (std::size_t l = 0; l < num_channels; ++l) {
    Rng rng(derive_seed(config.seed, 10 + l));
    const auto v = config.vocab_sizes[l];
    MatrixD phi(k, v);
    cumulative[l].resize(k);
    for (std::size_t t = 0; t < k; ++t) {
      const auto row = sample_dirichlet(rng, config.beta[l], v);
      std::copy(row.begin(), row.end(), phi.row(t).begin());
      cumulative[l][t].resize(v);
      std::partial_sum(row.begin(), row.end(), cumulative[l][t].begin());
    }
    truth.phi.push_back(std::move(phi));
  }

  auto& corpus = out.corpus;
  corpus.channels = config.channels;
  truth.theta = MatrixD(config.num_docs, k);
  corpus.tuples.resize(config.num_docs);
  const auto id_width = std::to_string(config.num_docs - 1).size();
  std::vector<double> rate_replace(num_channels, 0.0), rate_delete(num_channels, 0.0);
  for (const auto& c : config.corruption) {
    const auto l = static_cast<std::size_t>(
        std::find(config.channels.begin(), config.channels.end(), c.channel) - config.channels.begin());
    rate_replace[l] = c.replacement_rate;
    rate_delete[l] = c.deletion_rate;
  }

  for (std::size_t d = 0; d < config.num_docs; ++d) {
    Rng rng(derive_seed(derive_seed(config.seed, 20), d));
    Rng damage(derive_seed(derive_seed(config.seed, 21), d));
    auto& tuple = corpus.tuples[d];
    const auto digits = std::to_string(d);
    tuple.article_id = "doc" + std::string(id_width - digits.size(), '0') + digits;
    const auto theta = sample_dirichlet(rng, config.alpha, k);
    std::copy(theta.begin(), theta.end(), truth.theta.row(d).begin());
    std::vector<double> theta_cdf(k);
    std::partial_sum(theta.begin(), theta.end(), theta_cdf.begin());
    tuple.docs.resize(num_channels);
    for (std::size_t l = 0; l < num_channels; ++l) {
      std::size_t n = config.tokens_per_doc;
      if (config.poisson_lengths) {
        std::poisson_distribution<std::size_t> length(static_cast<double>(config.tokens_per_doc));
        n = length(rng);
      }
      std::vector<WordId> ids(n);
      for (auto& w : ids) {
        const auto z = sample_cumulative(rng, theta_cdf);
        const auto& cdf = cumulative[l][z];
        const double u = uniform01(rng) * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        w = static_cast<WordId>(std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1));
      }
      if (rate_replace[l] > 0.0 || rate_delete[l] > 0.0) {
        ids = corrupt_tokens(std::move(ids), config.vocab_sizes[l], rate_replace[l], rate_delete[l], damage);
      }
      tuple.docs[l] = bow_from_ids(std::move(ids), tuple.article_id, config.channels[l]);
    }
  }
  for (std::size_t l = 0; l < num_channels; ++l) {
    corpus.vocabularies.push_back(synth_vocabulary(corpus, l, config.vocab_sizes[l]));
  }
  return out;
}

void corrupt_documents(TupleCorpus& corpus, std::size_t channel, std::span<const std::size_t> tuples,
                       double replacement_rate, double deletion_rate, std::uint64_t seed) {
  if (channel >= corpus.num_channels()) throw InvalidArgument("corrupt_documents: bad channel");
  if (!(replacement_rate >= 0.0 && replacement_rate <= 1.0) ||
      !(deletion_rate >= 0.0 && deletion_rate <= 1.0)) {
    throw InvalidArgument("corrupt_documents: rates must lie in [0, 1]");
  }
  const auto& vocab = corpus.vocabularies[channel];
  for (auto d : tuples) {
    auto& doc = corpus.tuples.at(d).docs[channel];
    if (!doc) continue;
    Rng rng(derive_seed(seed, d));
    auto ids = corrupt_tokens(expand(*doc), vocab.size(), replacement_rate, deletion_rate, rng);
    doc = bow_from_ids(std::move(ids), doc->article_id, doc->channel);
  }
  auto refreshed = synth_vocabulary(corpus, channel, vocab.size());
  corpus.vocabularies[channel] = Vocabulary(vocab.channel(), vocab.words(), refreshed.collection_counts(),
                                            refreshed.document_frequencies());
}

std::string format_truth(const SynthTruth& truth, const std::vector<std::string>& channels,
                         const std::vector<std::string>& article_ids) {
  std::string out;
  char buf[64];
  auto put_row = [&](std::span<const double> row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i == 0 ? "" : "\t", row[i]);
      out += buf;
    }
    out += '\n';
  };
  out += "#theta\t" + std::to_string(truth.theta.rows()) + "\t" + std::to_string(truth.theta.cols()) + "\n";
  for (std::size_t d = 0; d < truth.theta.rows(); ++d) {
    out += (d < article_ids.size() ? article_ids[d] : std::to_string(d)) + "\t";
    put_row(truth.theta.row(d));
  }
  for (std::size_t l = 0; l < truth.phi.size(); ++l) {
    const auto& phi = truth.phi[l];
    out += "#phi\t" + channels[l] + "\t" + std::to_string(phi.rows()) + "\t" + std::to_string(phi.cols()) + "\n";
    for (std::size_t t = 0; t < phi.rows(); ++t) put_row(phi.row(t));
  }
  return out;
}

}  // namespace mltm
