#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mltm {

using WordId = std::uint32_t;

// One representation of one article, as read from the input manifest.
struct RawArticle {
  std::string article_id;
  std::string channel;
  std::string text;
};

// Effective-vocabulary filter. Defaults follow common practice for
// scholarly full text; all rules apply uniformly to every channel.
struct FilterConfig {
  std::size_t min_frequency = 10;
  std::size_t min_token_length = 4;
  // Number of most collection-frequent tokens treated as stopwords.
  std::size_t top_frequent_cutoff = 100;
  std::set<std::string> stopwords;
  bool drop_numeric = true;

  void validate() const;
};

// Counts of tokens removed by each vocabulary rule, for reporting.
struct FilterStats {
  std::size_t distinct_tokens = 0;
  std::size_t removed_stopwords = 0;
  std::size_t removed_top_frequent = 0;
  std::size_t removed_rare = 0;
};

// Word <-> dense id bijection for one channel. Ids follow lexicographic
// word order. Collection and document frequencies are kept per word.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Words must be strictly increasing; counts are parallel to words.
  Vocabulary(std::string channel, std::vector<std::string> words,
             std::vector<std::uint64_t> collection_counts,
             std::vector<std::uint64_t> document_frequencies);

  const std::string& channel() const { return channel_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  std::optional<WordId> id_of(std::string_view word) const;
  const std::string& word_of(WordId id) const { return words_.at(id); }
  const std::vector<std::string>& words() const { return words_; }

  std::uint64_t collection_count(WordId id) const { return collection_counts_.at(id); }
  std::uint64_t document_frequency(WordId id) const { return document_frequencies_.at(id); }
  const std::vector<std::uint64_t>& collection_counts() const { return collection_counts_; }
  const std::vector<std::uint64_t>& document_frequencies() const {
    return document_frequencies_;
  }

  FilterStats filter_stats;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.channel_ == b.channel_ && a.words_ == b.words_ &&
           a.collection_counts_ == b.collection_counts_ &&
           a.document_frequencies_ == b.document_frequencies_;
  }

 private:
  std::string channel_;
  std::vector<std::string> words_;
  std::vector<std::uint64_t> collection_counts_;
  std::vector<std::uint64_t> document_frequencies_;
  std::unordered_map<std::string, WordId> ids_;
};

struct BowEntry {
  WordId word = 0;
  std::uint32_t count = 0;
  friend bool operator==(const BowEntry&, const BowEntry&) = default;
};

// Bag of words: entries sorted by strictly increasing word id, counts >= 1.
struct BowDocument {
  std::string article_id;
  std::string channel;
  std::vector<BowEntry> entries;
  std::uint64_t total_tokens = 0;

  // Checks the ordering/count invariants and that ids are < vocab_size.
  void validate(std::size_t vocab_size) const;

  friend bool operator==(const BowDocument&, const BowDocument&) = default;
};

// All representations of one article; docs is indexed like
// TupleCorpus::channels, with nullopt for a channel that is absent.
struct ArticleTuple {
  std::string article_id;
  std::vector<std::optional<BowDocument>> docs;

  std::uint64_t total_tokens() const;
  friend bool operator==(const ArticleTuple&, const ArticleTuple&) = default;
};

struct TupleCorpus {
  std::vector<std::string> channels;
  std::vector<ArticleTuple> tuples;
  std::vector<Vocabulary> vocabularies;

  std::size_t size() const { return tuples.size(); }
  std::size_t num_channels() const { return channels.size(); }
  std::optional<std::size_t> channel_index(std::string_view name) const;
  std::size_t require_channel(std::string_view name) const;
  std::uint64_t total_tokens() const;
  std::uint64_t channel_tokens(std::size_t channel) const;

  // Throws IntegrityError if any structural invariant is violated.
  void validate() const;

  friend bool operator==(const TupleCorpus&, const TupleCorpus&) = default;
};

enum class MissingPolicy { drop, allow_missing };

MissingPolicy parse_missing_policy(std::string_view text);
std::string_view to_string(MissingPolicy policy);

// Lowercases ASCII, splits on anything that is not an ASCII letter/digit
// (bytes >= 0x80 are kept so UTF-8 words stay intact), then drops numeric
// and short tokens per `config`.
std::vector<std::string> tokenize(std::string_view text, const FilterConfig& config);

// Builds the effective vocabulary of one channel from tokenized documents.
// Throws EmptyCorpusError when every token is filtered out.
Vocabulary build_vocabulary(std::string channel,
                            std::span<const std::vector<std::string>> docs,
                            const FilterConfig& config);

// Out-of-vocabulary tokens are silently dropped.
BowDocument to_bow(std::span<const std::string> tokens, const Vocabulary& vocab,
                   std::string article_id = {});

struct AlignResult {
  TupleCorpus corpus;
  std::vector<std::string> excluded_ids;
};

// Groups articles by id, applies the missing-channel policy, then builds
// per-channel vocabularies and bags of words. Articles lacking
// `query_channel` are always excluded.
AlignResult align_tuples(std::span<const RawArticle> articles,
                         const std::vector<std::string>& channels, MissingPolicy policy,
                         const FilterConfig& filter, std::string_view query_channel = "full");

// Tuples at `indices`, in the given order, sharing the vocabularies.
TupleCorpus subset(const TupleCorpus& corpus, std::span<const std::size_t> indices);

// Seeded random partition; both halves keep the original tuple order.
// The test half has round(D * test_fraction) tuples.
std::pair<TupleCorpus, TupleCorpus> split_corpus(const TupleCorpus& corpus,
                                                 double test_fraction, std::uint64_t seed);

// Seeded permutation of [0, n) (Fisher-Yates over mltm::Rng).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// Re-encodes `corpus` against other vocabularies (matched by channel name),
// dropping words the target vocabulary lacks. Channels without a target
// vocabulary are removed.
TupleCorpus reencode_corpus(const TupleCorpus& corpus,
                            const std::vector<std::string>& channels,
                            const std::vector<Vocabulary>& vocabularies);

}  // namespace mltm
