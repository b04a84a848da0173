#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/matrix.hpp"

namespace mltm {

struct ModelConfig {
  std::size_t num_topics = 0;
  // Symmetric document-topic concentration (per topic).
  double alpha = 0.0;
  // Symmetric topic-word concentration, one per channel.
  std::vector<double> beta;
  std::uint64_t seed = 0;

  static double default_alpha(std::size_t num_topics) { return 50.0 / static_cast<double>(num_topics); }
  static constexpr double kDefaultBeta = 0.01;

  // Config with default alpha = 50/K and beta = 0.01 for every channel.
  static ModelConfig with_defaults(std::size_t num_topics, std::size_t num_channels,
                                   std::uint64_t seed = 0);

  void validate(std::size_t num_channels) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// A point on the probability simplex.
class TopicDistribution {
 public:
  static constexpr double kTolerance = 1e-6;

  TopicDistribution() = default;
  // Throws InvalidArgument unless entries are >= 0 and sum to 1 within kTolerance.
  explicit TopicDistribution(std::vector<double> theta);

  std::size_t size() const { return theta_.size(); }
  double operator[](std::size_t i) const { return theta_[i]; }
  std::span<const double> values() const { return theta_; }
  operator std::span<const double>() const { return theta_; }

  static TopicDistribution uniform(std::size_t k);
  // Normalises non-negative weights with a positive sum.
  static TopicDistribution normalized(std::vector<double> weights);

  friend bool operator==(const TopicDistribution&, const TopicDistribution&) = default;

 private:
  std::vector<double> theta_;
};

// theta_t = (C_t + alpha) / (sum_j C_j + K alpha)
TopicDistribution estimate_theta(std::span<const int> doc_topic_counts, double alpha);
TopicDistribution estimate_theta(std::span<const double> doc_topic_counts, double alpha);

// phi_w = (C_w + beta) / (sum_v C_v + V beta)
std::vector<double> estimate_phi(std::span<const int> word_topic_counts, double beta);

// Topic assignments and the count matrices they induce.
struct AssignmentState {
  std::size_t num_topics = 0;
  // z[d][l][i]: topic of the i-th token of channel l in tuple d. Tokens are
  // the bag-of-words entries expanded in ascending word-id order.
  std::vector<std::vector<std::vector<int>>> z;
  MatrixI doc_topic_counts;                 // D x K
  std::vector<MatrixI> word_topic_counts;   // per channel, V_l x K
  std::vector<std::vector<int>> topic_totals;  // per channel, K

  // Builds the count matrices from explicit assignments.
  static AssignmentState from_assignments(const TupleCorpus& corpus, std::size_t num_topics,
                                          std::vector<std::vector<std::vector<int>>> z);

  // True when every count equals the value recomputed from z.
  bool consistent_with(const TupleCorpus& corpus) const;
};

// Expands a bag of words into its token sequence (ascending word id).
std::vector<WordId> expand_tokens(const BowDocument& doc);

struct Provenance {
  std::string backend;  // "gibbs" or "vb"
  std::vector<std::pair<std::string, std::string>> metadata;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Trained, immutable model: per-channel topic-word distributions.
struct TopicModel {
  ModelConfig config;
  std::vector<std::string> channels;
  std::vector<Vocabulary> vocabularies;
  std::vector<MatrixD> phi;     // per channel, K x V_l, rows on the simplex
  std::vector<MatrixD> lambda;  // VB topic-word parameters; empty for Gibbs models
  Provenance provenance;

  std::size_t num_topics() const { return config.num_topics; }
  std::optional<std::size_t> channel_index(std::string_view name) const;
  std::size_t require_channel(std::string_view name) const;

  // Row sums within 1e-6 and strictly positive entries.
  void validate() const;

  friend bool operator==(const TopicModel&, const TopicModel&) = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;
std::string serialize_model(const TopicModel& model);
TopicModel deserialize_model(std::string_view bytes);
void save_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_model(const std::filesystem::path& path);

}  // namespace mltm
