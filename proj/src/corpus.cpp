#include "mltm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "mltm/error.hpp"
#include "mltm/rng.hpp"

namespace mltm {

void FilterConfig::validate() const {
  if (min_frequency < 1) throw ConfigError("min_frequency must be >= 1");
  if (min_token_length < 1) throw ConfigError("min_token_length must be >= 1");
}

Vocabulary::Vocabulary(std::string channel, std::vector<std::string> words,
                       std::vector<std::uint64_t> collection_counts,
                       std::vector<std::uint64_t> document_frequencies)
    : channel_(std::move(channel)),
      words_(std::move(words)),
      collection_counts_(std::move(collection_counts)),
      document_frequencies_(std::move(document_frequencies)) {
  if (collection_counts_.size() != words_.size() ||
      document_frequencies_.size() != words_.size()) {
    throw IntegrityError("vocabulary '" + channel_ + "': count arrays do not match word list");
  }
  ids_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (i > 0 && !(words_[i - 1] < words_[i])) {
      throw IntegrityError("vocabulary '" + channel_ + "': words not strictly increasing at '" +
                           words_[i] + "'");
    }
    ids_.emplace(words_[i], static_cast<WordId>(i));
  }
}

std::optional<WordId> Vocabulary::id_of(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void BowDocument::validate(std::size_t vocab_size) const {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.count < 1) throw IntegrityError("document '" + article_id + "': zero count entry");
    if (e.word >= vocab_size) {
      throw IntegrityError("document '" + article_id + "': word id out of range");
    }
    if (i > 0 && entries[i - 1].word >= e.word) {
      throw IntegrityError("document '" + article_id + "': word ids not strictly increasing");
    }
    total += e.count;
  }
  if (total != total_tokens) {
    throw IntegrityError("document '" + article_id + "': total_tokens mismatch");
  }
}

std::uint64_t ArticleTuple::total_tokens() const {
  std::uint64_t n = 0;
  for (const auto& doc : docs) {
    if (doc) n += doc->total_tokens;
  }
  return n;
}

std::optional<std::size_t> TupleCorpus::channel_index(std::string_view name) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t TupleCorpus::require_channel(std::string_view name) const {
  auto idx = channel_index(name);
  if (!idx) throw InvalidArgument("channel '" + std::string(name) + "' not in corpus");
  return *idx;
}

std::uint64_t TupleCorpus::total_tokens() const {
  std::uint64_t n = 0;
  for (const auto& t : tuples) n += t.total_tokens();
  return n;
}

std::uint64_t TupleCorpus::channel_tokens(std::size_t channel) const {
  std::uint64_t n = 0;
  for (const auto& t : tuples) {
    if (t.docs[channel]) n += t.docs[channel]->total_tokens;
  }
  return n;
}

void TupleCorpus::validate() const {
  if (vocabularies.size() != channels.size()) {
    throw IntegrityError("corpus: vocabulary count does not match channel count");
  }
  std::unordered_set<std::string> ids;
  for (const auto& t : tuples) {
    if (!ids.insert(t.article_id).second) {
      throw IntegrityError("corpus: duplicate tuple id '" + t.article_id + "'");
    }
    if (t.docs.size() != channels.size()) {
      throw IntegrityError("corpus: tuple '" + t.article_id + "' has wrong channel count");
    }
    for (std::size_t l = 0; l < channels.size(); ++l) {
      if (t.docs[l]) t.docs[l]->validate(vocabularies[l].size());
    }
  }
}

MissingPolicy parse_missing_policy(std::string_view text) {
  if (text == "drop") return MissingPolicy::drop;
  if (text == "allow-missing") return MissingPolicy::allow_missing;
  throw ConfigError("unknown missing-channel policy '" + std::string(text) + "'");
}

std::string_view to_string(MissingPolicy policy) {
  return policy == MissingPolicy::drop ? "drop" : "allow-missing";
}

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_numeric(std::string_view token) {
  return std::all_of(token.begin(), token.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const FilterConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    // Length is counted in bytes.
    const bool too_short = current.size() < config.min_token_length;
    if (!too_short && !(config.drop_numeric && is_numeric(current))) {
      tokens.push_back(current);
    }
    current.clear();
  };
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary build_vocabulary(std::string channel, std::span<const std::vector<std::string>> docs,
                            const FilterConfig& config) {
  config.validate();
  if (docs.empty()) throw InvalidArgument("build_vocabulary: no documents for '" + channel + "'");

  struct Stat {
    std::uint64_t count = 0;
    std::uint64_t df = 0;
  };
  std::map<std::string, Stat> stats;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& token : doc) {
      auto& s = stats[token];
      ++s.count;
      if (seen.insert(token).second) ++s.df;
    }
  }

  FilterStats fs;
  fs.distinct_tokens = stats.size();
  for (const auto& stop : config.stopwords) fs.removed_stopwords += stats.erase(stop);

  if (config.top_frequent_cutoff > 0) {
    std::vector<std::pair<std::uint64_t, std::string>> by_count;
    by_count.reserve(stats.size());
    for (const auto& [word, s] : stats) by_count.emplace_back(s.count, word);
    const auto n = std::min(config.top_frequent_cutoff, by_count.size());
    std::partial_sort(by_count.begin(), by_count.begin() + static_cast<std::ptrdiff_t>(n),
                      by_count.end(), [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    for (std::size_t i = 0; i < n; ++i) stats.erase(by_count[i].second);
    fs.removed_top_frequent = n;
  }

  std::vector<std::string> words;
  std::vector<std::uint64_t> counts, dfs;
  for (const auto& [word, s] : stats) {
    if (s.count < config.min_frequency) {
      ++fs.removed_rare;
      continue;
    }
    words.push_back(word);
    counts.push_back(s.count);
    dfs.push_back(s.df);
  }
  if (words.empty()) {
    throw EmptyCorpusError("channel '" + channel + "': effective vocabulary is empty after filtering");
  }
  Vocabulary vocab(std::move(channel), std::move(words), std::move(counts), std::move(dfs));
  vocab.filter_stats = fs;
  return vocab;
}

BowDocument to_bow(std::span<const std::string> tokens, const Vocabulary& vocab,
                   std::string article_id) {
  std::vector<WordId> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) {
    if (auto id = vocab.id_of(token)) ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  BowDocument doc;
  doc.article_id = std::move(article_id);
  doc.channel = vocab.channel();
  for (WordId id : ids) {
    if (doc.entries.empty() || doc.entries.back().word != id) {
      doc.entries.push_back({id, 0});
    }
    ++doc.entries.back().count;
  }
  doc.total_tokens = ids.size();
  return doc;
}

AlignResult align_tuples(std::span<const RawArticle> articles,
                         const std::vector<std::string>& channels, MissingPolicy policy,
                         const FilterConfig& filter, std::string_view query_channel) {
  if (channels.empty()) throw ConfigError("align_tuples: channel list is empty");
  std::map<std::string, std::size_t> channel_pos;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (!channel_pos.emplace(channels[i], i).second) {
      throw ConfigError("align_tuples: duplicate channel '" + channels[i] + "'");
    }
  }
  const auto query_it = channel_pos.find(std::string(query_channel));
  if (query_it == channel_pos.end()) {
    throw ConfigError("align_tuples: query channel '" + std::string(query_channel) +
                      "' not in channel list");
  }

  // article id -> per-channel raw text; std::map keeps a deterministic order.
  std::map<std::string, std::vector<const std::string*>> grouped;
  for (const auto& a : articles) {
    if (a.article_id.empty()) throw InvalidArgument("align_tuples: empty article id");
    auto pos = channel_pos.find(a.channel);
    if (pos == channel_pos.end()) {
      throw InvalidArgument("align_tuples: article '" + a.article_id + "' has undeclared channel '" +
                            a.channel + "'");
    }
    auto& slots = grouped[a.article_id];
    slots.resize(channels.size(), nullptr);
    if (slots[pos->second]) {
      throw InvalidArgument("align_tuples: duplicate (article, channel) pair ('" + a.article_id +
                            "', '" + a.channel + "')");
    }
    slots[pos->second] = &a.text;
  }

  AlignResult result;
  std::vector<std::pair<std::string, std::vector<const std::string*>>> kept;
  for (auto& [id, slots] : grouped) {
    const bool has_query = slots[query_it->second] != nullptr;
    const bool complete = std::all_of(slots.begin(), slots.end(), [](auto* p) { return p != nullptr; });
    if (!has_query || (policy == MissingPolicy::drop && !complete)) {
      result.excluded_ids.push_back(id);
      continue;
    }
    kept.emplace_back(id, std::move(slots));
  }
  if (kept.empty()) throw EmptyCorpusError("align_tuples: no article tuples survive alignment");

  auto& corpus = result.corpus;
  corpus.channels = channels;
  corpus.tuples.resize(kept.size());
  for (std::size_t d = 0; d < kept.size(); ++d) {
    corpus.tuples[d].article_id = kept[d].first;
    corpus.tuples[d].docs.resize(channels.size());
  }
  for (std::size_t l = 0; l < channels.size(); ++l) {
    std::vector<std::vector<std::string>> tokens(kept.size());
    std::vector<std::vector<std::string>> present;
    for (std::size_t d = 0; d < kept.size(); ++d) {
      if (kept[d].second[l]) {
        tokens[d] = tokenize(*kept[d].second[l], filter);
        present.push_back(tokens[d]);
      }
    }
    if (present.empty()) {
      throw EmptyCorpusError("channel '" + channels[l] + "' has no documents");
    }
    corpus.vocabularies.push_back(build_vocabulary(channels[l], present, filter));
    for (std::size_t d = 0; d < kept.size(); ++d) {
      if (kept[d].second[l]) {
        corpus.tuples[d].docs[l] = to_bow(tokens[d], corpus.vocabularies[l], kept[d].first);
      }
    }
  }
  return result;
}

TupleCorpus subset(const TupleCorpus& corpus, std::span<const std::size_t> indices) {
  TupleCorpus out;
  out.channels = corpus.channels;
  out.vocabularies = corpus.vocabularies;
  out.tuples.reserve(indices.size());
  for (auto i : indices) out.tuples.push_back(corpus.tuples.at(i));
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b117));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  }
  return perm;
}

std::pair<TupleCorpus, TupleCorpus> split_corpus(const TupleCorpus& corpus, double test_fraction,
                                                 std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  const auto d = corpus.size();
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(d) * test_fraction));
  if (n_test == 0 || n_test >= d) {
    throw ConfigError("test_fraction " + std::to_string(test_fraction) + " on " + std::to_string(d) +
                      " tuples leaves an empty train or test set");
  }
  auto perm = seeded_permutation(d, seed);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {subset(corpus, train), subset(corpus, test)};
}

TupleCorpus reencode_corpus(const TupleCorpus& corpus, const std::vector<std::string>& channels,
                            const std::vector<Vocabulary>& vocabularies) {
  TupleCorpus out;
  std::vector<std::pair<std::size_t, std::size_t>> mapping;  // (source, target)
  for (std::size_t t = 0; t < channels.size(); ++t) {
    if (auto s = corpus.channel_index(channels[t])) mapping.emplace_back(*s, t);
  }
  for (auto [s, t] : mapping) {
    out.channels.push_back(channels[t]);
    out.vocabularies.push_back(vocabularies[t]);
  }
  std::vector<bool> identical;
  for (auto [s, t] : mapping) identical.push_back(corpus.vocabularies[s] == vocabularies[t]);
  out.tuples.reserve(corpus.size());
  for (const auto& tuple : corpus.tuples) {
    ArticleTuple nt;
    nt.article_id = tuple.article_id;
    for (std::size_t m = 0; m < mapping.size(); ++m) {
      const auto [s, t] = mapping[m];
      const auto& src = tuple.docs[s];
      if (!src) {
        nt.docs.emplace_back();
        continue;
      }
      const auto& from = corpus.vocabularies[s];
      const auto& to = vocabularies[t];
      if (identical[m]) {
        nt.docs.push_back(src);
        continue;
      }
      BowDocument doc;
      doc.article_id = src->article_id;
      doc.channel = channels[t];
      for (const auto& e : src->entries) {
        if (auto id = to.id_of(from.word_of(e.word))) {
          doc.entries.push_back({*id, e.count});
          doc.total_tokens += e.count;
        }
      }
      std::sort(doc.entries.begin(), doc.entries.end(),
                [](const BowEntry& a, const BowEntry& b) { return a.word < b.word; });
      nt.docs.push_back(std::move(doc));
    }
    out.tuples.push_back(std::move(nt));
  }
  return out;
}

}  // namespace mltm
