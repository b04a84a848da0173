#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/eval.hpp"
#include "mltm/model.hpp"

namespace mltm {

struct FlagRecord {
  std::string article_id;
  std::string target_channel;
  double divergence = 0.0;  // JS between full-text and channel theta
  std::size_t rank_of_truth = 1;
  std::vector<std::string> assigned_terms;

  friend bool operator==(const FlagRecord&, const FlagRecord&) = default;
};

struct AuditOptions {
  std::string channel;
  // Channel whose terms are attached to each record; empty means `channel`.
  std::string terms_channel;
  std::string query_channel = "full";
  double threshold = 0.01;
  InferenceOptions inference;
};

// Per-article signals for one audited channel.
struct ArticleDivergence {
  std::size_t tuple = 0;
  std::string article_id;
  double divergence = 0.0;
  std::size_t rank_of_truth = 1;
};

// Articles lacking the query or audited channel are skipped. Ranks use the
// same ordering as retrieval: ascending JS, ties by tuple order.
std::vector<ArticleDivergence> channel_divergences(const TopicModel& model, const TupleCorpus& test,
                                                   const AuditOptions& options);

// Flags articles with divergence > threshold or rank_of_truth > 1, sorted by
// descending divergence (ties by article id). Terms are the distinct words
// of the terms channel document in `test`.
std::vector<FlagRecord> flags_from_divergences(std::span<const ArticleDivergence> divergences,
                                               const TupleCorpus& test, const AuditOptions& options,
                                               double threshold);

std::vector<FlagRecord> flag_dissimilar(const TopicModel& model, const TupleCorpus& test,
                                        const AuditOptions& options);

// Linear-interpolation percentile (p in [0, 100]) of a non-empty sample.
double percentile(std::vector<double> values, double p);

struct TermSummary {
  std::string term;
  std::size_t count = 0;  // flagged articles carrying the term
  double fraction = 0.0;

  friend bool operator==(const TermSummary&, const TermSummary&) = default;
};

// Most frequent terms across flagged articles, by count then term.
std::vector<TermSummary> summarize_flags(std::span<const FlagRecord> flags, std::size_t top_n);

// Tab-separated: article_id, channel, js, rank_of_truth, terms joined by "|".
std::string format_flags(std::span<const FlagRecord> flags);
// Tab-separated: term, count, fraction.
std::string format_summary(std::span<const TermSummary> summary);

}  // namespace mltm
