#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/matrix.hpp"
#include "mltm/rng.hpp"

namespace mltm {

// Post-generation damage applied to every document of one channel.
// Deletion thins tokens binomially; replacement swaps a token for a
// uniformly drawn vocabulary word.
struct ChannelCorruption {
  std::string channel;
  double deletion_rate = 0.0;
  double replacement_rate = 0.0;
};

struct SynthConfig {
  std::size_t num_topics = 10;
  std::vector<std::string> channels;      // first entry is the query channel
  std::vector<std::size_t> vocab_sizes;   // per channel
  std::size_t num_docs = 1000;
  // Fixed document length, or the Poisson mean when poisson_lengths is set.
  std::size_t tokens_per_doc = 100;
  bool poisson_lengths = false;
  double alpha = 0.5;
  std::vector<double> beta;  // per channel
  std::uint64_t seed = 0;
  std::vector<ChannelCorruption> corruption;

  void validate() const;
};

struct SynthTruth {
  MatrixD theta;             // D x K
  std::vector<MatrixD> phi;  // per channel, K x V_l
};

struct SynthCorpus {
  TupleCorpus corpus;
  SynthTruth truth;
};

// Samples the multilingual generative process: phi^l_k ~ Dir(beta_l),
// theta_d ~ Dir(alpha), then for each channel and token z ~ theta_d and
// w ~ phi^l_z. Corruption is applied afterwards from an independent stream,
// so a zero-rate corruption leaves the corpus unchanged.
SynthCorpus generate_pltm_corpus(const SynthConfig& config);

// Draw from a symmetric Dirichlet; robust for concentrations well below 1.
std::vector<double> sample_dirichlet(Rng& rng, double concentration, std::size_t dim);

// Replaces/deletes tokens in the chosen tuples of one channel and refreshes
// that channel's vocabulary statistics.
void corrupt_documents(TupleCorpus& corpus, std::size_t channel, std::span<const std::size_t> tuples,
                       double replacement_rate, double deletion_rate, std::uint64_t seed);

// Vocabulary word for synthetic id `id` in a vocabulary of `size` words;
// zero-padded so lexicographic and numeric order agree.
std::string synth_word(std::size_t id, std::size_t size);

// Text dump: "theta" block (D rows) then one "phi <channel>" block per channel.
std::string format_truth(const SynthTruth& truth, const std::vector<std::string>& channels,
                         const std::vector<std::string>& article_ids);

}  // namespace mltm
