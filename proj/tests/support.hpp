#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/model.hpp"
#include "mltm/synth.hpp"

namespace mltm::testing {

// Channel l of tuple d holds the token ids docs[d][l]; nullopt means absent.
// Vocabulary words are synth_word(i, V_l).
inline TupleCorpus make_corpus(const std::vector<std::string>& channels,
                               const std::vector<std::size_t>& vocab_sizes,
                               const std::vector<std::vector<std::optional<std::vector<WordId>>>>& docs) {
  TupleCorpus c;
  c.channels = channels;
  std::vector<std::vector<std::uint64_t>> counts(channels.size()), dfs(channels.size());
  for (std::size_t l = 0; l < channels.size(); ++l) {
    counts[l].assign(vocab_sizes[l], 0);
    dfs[l].assign(vocab_sizes[l], 0);
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    ArticleTuple t;
    t.article_id = "a" + std::to_string(100 + d);
    for (std::size_t l = 0; l < channels.size(); ++l) {
      if (!docs[d][l]) {
        t.docs.emplace_back();
        continue;
      }
      std::vector<std::uint32_t> n(vocab_sizes[l], 0);
      for (auto w : *docs[d][l]) ++n[w];
      BowDocument doc{t.article_id, channels[l], {}, 0};
      for (WordId w = 0; w < n.size(); ++w) {
        if (!n[w]) continue;
        doc.entries.push_back({w, n[w]});
        doc.total_tokens += n[w];
        counts[l][w] += n[w];
        ++dfs[l][w];
      }
      t.docs.push_back(std::move(doc));
    }
    c.tuples.push_back(std::move(t));
  }
  for (std::size_t l = 0; l < channels.size(); ++l) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < vocab_sizes[l]; ++i) words.push_back(synth_word(i, vocab_sizes[l]));
    c.vocabularies.emplace_back(channels[l], words, counts[l], dfs[l]);
  }
  return c;
}

// log Dirichlet-multinomial normaliser ratio for one count vector under a
// symmetric Dirichlet(a): log B(n + a) - log B(a).
inline double log_dm(const std::vector<int>& n, double a) {
  double total = 0.0, out = 0.0;
  for (int x : n) {
    out += std::lgamma(x + a) - std::lgamma(a);
    total += x;
  }
  const double dim = static_cast<double>(n.size());
  return out + std::lgamma(dim * a) - std::lgamma(total + dim * a);
}

// Token list (channel, word) of tuple d, in the sampler's order.
struct Token {
  std::size_t channel;
  WordId word;
};

inline std::vector<Token> tokens_of(const TupleCorpus& c, std::size_t d) {
  std::vector<Token> out;
  for (std::size_t l = 0; l < c.num_channels(); ++l) {
    if (!c.tuples[d].docs[l]) continue;
    for (const auto& e : c.tuples[d].docs[l]->entries) {
      for (std::uint32_t i = 0; i < e.count; ++i) out.push_back({l, e.word});
    }
  }
  return out;
}

// Exact posterior over topic assignments of a single-tuple corpus by
// enumeration: returns log p(w, z) for every z in K^N (z encoded base K,
// token 0 least significant) and log p(w).
struct Enumeration {
  std::vector<Token> tokens;
  std::vector<double> log_joint;
  double log_evidence = 0.0;
};

inline Enumeration enumerate_single_tuple(const TupleCorpus& c, std::size_t k, double alpha,
                                          const std::vector<double>& beta) {
  Enumeration e;
  e.tokens = tokens_of(c, 0);
  const std::size_t n = e.tokens.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  double max_log = -INFINITY;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> z(n);
    std::size_t x = code;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = static_cast<int>(x % k);
      x /= k;
    }
    std::vector<int> dt(k, 0);
    for (int t : z) ++dt[t];
    double lp = log_dm(dt, alpha);
    for (std::size_t l = 0; l < c.num_channels(); ++l) {
      const auto v = c.vocabularies[l].size();
      for (std::size_t t = 0; t < k; ++t) {
        std::vector<int> wt(v, 0);
        for (std::size_t i = 0; i < n; ++i) {
          if (e.tokens[i].channel == l && static_cast<std::size_t>(z[i]) == t) ++wt[e.tokens[i].word];
        }
        lp += log_dm(wt, beta[l]);
      }
    }
    e.log_joint.push_back(lp);
    max_log = std::max(max_log, lp);
  }
  double s = 0.0;
  for (double lp : e.log_joint) s += std::exp(lp - max_log);
  e.log_evidence = max_log + std::log(s);
  return e;
}

inline std::vector<int> decode(std::size_t code, std::size_t n, std::size_t k) {
  std::vector<int> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = static_cast<int>(code % k);
    code /= k;
  }
  return z;
}

}  // namespace mltm::testing
