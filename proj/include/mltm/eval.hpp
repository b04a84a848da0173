#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mltm/corpus.hpp"
#include "mltm/gibbs.hpp"
#include "mltm/model.hpp"
#include "mltm/simplex.hpp"
#include "mltm/vb.hpp"

namespace mltm {

enum class Backend { gibbs, vb };

Backend parse_backend(std::string_view text);
std::string_view to_string(Backend backend);

// How held-out topic distributions are inferred.
struct InferenceOptions {
  Backend backend = Backend::gibbs;
  GibbsConfig gibbs;
  VbConfig vb;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// thetas[d][l]: inferred distribution for channel l of test tuple d, one
// channel at a time; nullopt when the channel is absent from the tuple.
using ThetaTable = std::vector<std::vector<std::optional<TopicDistribution>>>;

// Re-encodes `test` against the model vocabularies and lays its documents
// out in model channel order; channels the test corpus lacks are absent in
// every tuple. Throws InvalidArgument for a test channel the model lacks.
TupleCorpus align_to_model(const TopicModel& model, const TupleCorpus& test);

// `test` must already be encoded against the model vocabularies and carry
// the model's channels in the same order (see reencode_corpus).
ThetaTable infer_thetas(const TopicModel& model, const TupleCorpus& test,
                        const InferenceOptions& options);

struct RankedCandidate {
  std::size_t index = 0;
  double score = 0.0;
};

// Candidates ordered by ascending divergence from the query; equal scores
// keep ascending candidate index.
std::vector<RankedCandidate> rank_candidates(std::span<const double> query,
                                             std::span<const TopicDistribution> candidates,
                                             Metric metric);

struct RetrievalRun {
  std::string query_channel;
  std::string target_channel;
  Metric metric = Metric::js;
  // rankings[q] ranks candidate indices for query q.
  std::vector<std::vector<RankedCandidate>> rankings;
};

// truth[q] is the correct candidate for query q, or nullopt when the query
// has no correct candidate (always a miss). Throws InvalidArgument if truth
// does not cover every query.
double precision_at_1(const RetrievalRun& run, std::span<const std::optional<std::size_t>> truth);

// Queries whose first and second ranked scores are exactly equal.
std::size_t count_top_ties(const RetrievalRun& run);

struct ReportRow {
  std::string channel;
  std::size_t num_topics = 0;
  double fraction = 1.0;
  std::string backend;
  std::uint64_t seed = 0;
  double p_at_1 = 0.0;
  std::size_t num_queries = 0;
  std::size_t num_ties = 0;
  std::size_t num_missing = 0;
};

struct EvalOptions {
  Metric metric = Metric::js;
  std::string query_channel = "full";
  InferenceOptions inference;
  double fraction = 1.0;  // recorded in the report rows only
};

// One retrieval experiment per non-query channel, using full-text thetas
// as queries and that channel's test thetas as candidates.
std::vector<ReportRow> evaluate_representations(const TopicModel& model, const TupleCorpus& test,
                                                const EvalOptions& options);

// Same experiments from already inferred thetas (channels as in `channels`).
std::vector<ReportRow> evaluate_thetas(const ThetaTable& thetas,
                                       const std::vector<std::string>& channels,
                                       std::size_t query_channel, Metric metric);
std::vector<ReportRow> evaluate_thetas(const ThetaTable& thetas,
                                       const std::vector<std::string>& channels,
                                       std::size_t query_channel, Metric metric, std::size_t workers);

struct SweepOptions {
  std::vector<std::size_t> topics{50, 100, 500};
  std::vector<double> fractions{1.0};
  std::vector<std::uint64_t> seeds{0};
  Backend backend = Backend::gibbs;
  std::optional<double> alpha;  // default 50/K per cell
  std::vector<double> beta;     // default 0.01 per channel
  GibbsConfig gibbs;
  VbConfig vb;
  Metric metric = Metric::js;
  std::string query_channel = "full";
  std::size_t workers = 1;
};

struct SweepCellError {
  std::size_t num_topics = 0;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::string message;
};

struct SweepResult {
  std::vector<ReportRow> rows;
  std::vector<SweepCellError> errors;
};

// Nested seeded training subsets: for each seed the training tuples are
// permuted once and fraction f keeps the first round(f * D) of them.
std::vector<std::size_t> training_subset(std::size_t train_size, double fraction, std::uint64_t seed);

// Trains and evaluates every (K, fraction, seed) cell against the fixed
// test set. A failing cell is recorded and the sweep continues.
SweepResult sweep(const TupleCorpus& train, const TupleCorpus& test, const SweepOptions& options);

// Tab-separated: channel, K, fraction, backend, seed, P@1, num_queries, num_ties.
std::string format_report_tsv(const std::vector<ReportRow>& rows);
// One JSON object per line, including num_missing.
std::string format_report_jsonl(const std::vector<ReportRow>& rows);
// Plot-ready series keyed by file name: "series_<channel>_K<k>.tsv" holds
// (fraction, mean P@1) and "series_<channel>_by_K.tsv" holds (K, mean P@1)
// at the largest fraction. Means are over seeds.
std::map<std::string, std::string> format_report_series(const std::vector<ReportRow>& rows);

// Greedy one-to-one topic alignment by smallest mean (over channels)
// Hellinger distance between topic-word rows.
struct TopicMatching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> distances;
  double mean_distance = 0.0;
};

TopicMatching match_topics(const std::vector<MatrixD>& a, const std::vector<MatrixD>& b);

}  // namespace mltm
