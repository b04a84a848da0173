#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <random>

#include "mltm/error.hpp"
#include "mltm/synth.hpp"
#include "mltm/vb.hpp"
#include "support.hpp"

namespace mltm {
namespace {

using boost::math::digamma;
using testing::make_corpus;

std::vector<double> oracle_elog(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x;
  std::vector<double> out;
  for (double x : a) out.push_back(digamma(x) - digamma(s));
  return out;
}

double log_dirichlet_norm(const std::vector<double>& a) {
  double s = 0.0, out = 0.0;
  for (double x : a) {
    s += x;
    out -= std::lgamma(x);
  }
  return out + std::lgamma(s);
}

// Mean-field ELBO written out term by term:
// E[log p(theta)] - E[log q(theta)] + E[log p(z|theta)] + E[log p(w|z,phi)]
// - E[log q(z)] + E[log p(phi)] - E[log q(phi)].
double oracle_elbo(const TupleCorpus& c, const VariationalState& s, const ModelConfig& cfg) {
  const auto k = cfg.num_topics;
  double total = 0.0;
  std::vector<std::vector<std::vector<double>>> elog_phi(c.num_channels());
  for (std::size_t l = 0; l < c.num_channels(); ++l) {
    for (std::size_t t = 0; t < k; ++t) {
      std::vector<double> row(s.lambda[l].row(t).begin(), s.lambda[l].row(t).end());
      elog_phi[l].push_back(oracle_elog(row));
      const std::vector<double> prior(row.size(), cfg.beta[l]);
      double e_prior = log_dirichlet_norm(prior), e_q = log_dirichlet_norm(row);
      for (std::size_t w = 0; w < row.size(); ++w) {
        e_prior += (cfg.beta[l] - 1) * elog_phi[l][t][w];
        e_q += (row[w] - 1) * elog_phi[l][t][w];
      }
      total += e_prior - e_q;
    }
  }
  for (std::size_t d = 0; d < c.size(); ++d) {
    std::vector<double> gamma(s.gamma.row(d).begin(), s.gamma.row(d).end());
    const auto et = oracle_elog(gamma);
    double e_prior = log_dirichlet_norm(std::vector<double>(k, cfg.alpha)), e_q = log_dirichlet_norm(gamma);
    for (std::size_t t = 0; t < k; ++t) {
      e_prior += (cfg.alpha - 1) * et[t];
      e_q += (gamma[t] - 1) * et[t];
    }
    total += e_prior - e_q;
    for (std::size_t l = 0; l < c.num_channels(); ++l) {
      if (!c.tuples[d].docs[l]) continue;
      const auto& entries = c.tuples[d].docs[l]->entries;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        for (std::size_t t = 0; t < k; ++t) {
          const double r = s.responsibilities[d][l](i, t);
          if (r == 0.0) continue;
          total += entries[i].count * r * (et[t] + elog_phi[l][t][entries[i].word] - std::log(r));
        }
      }
    }
  }
  return total;
}

SynthCorpus small_synth(std::size_t k, std::size_t l, std::size_t d, std::uint64_t seed) {
  SynthConfig s;
  s.num_topics = k;
  for (std::size_t i = 0; i < l; ++i) {
    s.channels.push_back(i == 0 ? "full" : "c" + std::to_string(i));
    s.vocab_sizes.push_back(40);
    s.beta.push_back(0.1);
  }
  s.num_docs = d;
  s.tokens_per_doc = 30;
  s.alpha = 0.5;
  s.seed = seed;
  return generate_pltm_corpus(s);
}

TEST(VbConfig, ValidationAndPasses) {
  VbConfig v;
  EXPECT_EQ(v.resolved_passes(), 100u);
  v.mode = VbMode::online;
  EXPECT_EQ(v.resolved_passes(), 1u);
  v.kappa = 0.4;
  EXPECT_THROW(v.validate(), ConfigError);
  v = VbConfig{};
  v.local_max_iters = 0;
  EXPECT_THROW(v.validate(), ConfigError);
  EXPECT_EQ(parse_vb_mode("online"), VbMode::online);
  EXPECT_THROW(parse_vb_mode("stochastic"), ConfigError);
}

TEST(Vb, ExpectedLogsMatchDigamma) {
  const std::vector<double> gamma{0.3, 2.0, 7.5};
  const auto got = expected_log_theta(gamma);
  const auto expect = oracle_elog(gamma);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
  MatrixD lambda(2, 3);
  lambda(0, 0) = 0.01, lambda(0, 1) = 5, lambda(0, 2) = 1;
  lambda(1, 0) = 3, lambda(1, 1) = 3, lambda(1, 2) = 3;
  const auto e = expected_log_topic_word(lambda);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto o = oracle_elog({lambda(t, 0), lambda(t, 1), lambda(t, 2)});
    for (std::size_t w = 0; w < 3; ++w) EXPECT_NEAR(e(t, w), o[w], 1e-12);
  }
  const auto weights = word_topic_weights(e);
  EXPECT_EQ(weights.rows(), 3u);
  // Rows are scaled per word; ratios between topics are preserved.
  for (std::size_t w = 0; w < 3; ++w) {
    EXPECT_NEAR(weights(w, 0) / weights(w, 1), std::exp(e(0, w) - e(1, w)), 1e-9);
    EXPECT_DOUBLE_EQ(std::max(weights(w, 0), weights(w, 1)), 1.0);
  }
}

TEST(Vb, ResponsibilitiesAreNormalisedProducts) {
  MatrixD elog(2, 3);
  elog(0, 0) = -0.5, elog(0, 1) = -1.5, elog(0, 2) = -2.0;
  elog(1, 0) = -3.0, elog(1, 1) = -0.2, elog(1, 2) = -1.0;
  const auto weights = word_topic_weights(elog);
  BowDocument doc{"a", "full", {{0, 2}, {2, 1}}, 3};
  const std::vector<double> et{-0.1, -2.0};
  MatrixD r;
  update_responsibilities({&doc, &weights}, et, r);
  ASSERT_EQ(r.rows(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const WordId w = doc.entries[i].word;
    const double a = std::exp(et[0] + elog(0, w)), b = std::exp(et[1] + elog(1, w));
    EXPECT_NEAR(r(i, 0), a / (a + b), 1e-12);
    EXPECT_NEAR(r(i, 1), b / (a + b), 1e-12);
  }
}

TEST(Vb, ExtremeLogWeightsStayFinite) {
  MatrixD elog(2, 2);
  elog(0, 0) = -900, elog(0, 1) = -0.1, elog(1, 0) = -950, elog(1, 1) = -2.4;
  const auto weights = word_topic_weights(elog);
  BowDocument doc{"a", "full", {{0, 4}}, 4};
  MatrixD r;
  update_responsibilities({&doc, &weights}, std::vector<double>{-0.7, -0.7}, r);
  EXPECT_TRUE(std::isfinite(r(0, 0)));
  EXPECT_NEAR(r(0, 0) + r(0, 1), 1.0, 1e-12);
  EXPECT_GT(r(0, 0), 0.99);
}

TEST(Vb, EStepReachesFixedPoint) {
  const auto synth = small_synth(3, 2, 1, 4);
  const auto& c = synth.corpus;
  std::vector<MatrixD> weights;
  for (const auto& phi : synth.truth.phi) {
    MatrixD e(phi.rows(), phi.cols());
    for (std::size_t t = 0; t < phi.rows(); ++t) {
      for (std::size_t w = 0; w < phi.cols(); ++w) e(t, w) = std::log(phi(t, w) + 1e-300);
    }
    weights.push_back(word_topic_weights(e));
  }
  std::vector<ChannelDoc> docs;
  for (std::size_t l = 0; l < 2; ++l) docs.push_back({&*c.tuples[0].docs[l], &weights[l]});
  VbConfig cfg;
  cfg.local_convergence = 1e-10;
  cfg.local_max_iters = 5000;
  const auto local = e_step(docs, 0.5, 3, cfg);
  const auto gamma = update_gamma(docs, local.responsibilities, 0.5, 3);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(gamma[t], local.gamma[t], 1e-6);
  double total = 0.0;
  for (double g : local.gamma) total += g;
  EXPECT_NEAR(total, 1.5 + 60.0, 1e-9);
}

TEST(Vb, ElboMatchesTermByTermOracle) {
  const auto synth = small_synth(3, 2, 15, 5);
  const ModelConfig cfg{3, 0.5, {0.1, 0.1}, 2};
  VbConfig v;
  v.passes = 5;
  VariationalState state;
  train_vb(synth.corpus, cfg, v, nullptr, &state);
  EXPECT_NEAR(elbo(synth.corpus, state, cfg), oracle_elbo(synth.corpus, state, cfg), 1e-7);
}

TEST(Vb, ElboBoundsEnumeratedEvidence) {
  const auto c = make_corpus({"full", "abstract"}, {3, 2},
                             {{std::vector<WordId>{0, 0, 2, 1}, std::vector<WordId>{1, 0}}});
  const ModelConfig cfg{2, 0.8, {0.6, 1.2}, 1};
  const auto e = testing::enumerate_single_tuple(c, 2, cfg.alpha, cfg.beta);
  VbConfig v;
  v.passes = 200;
  v.local_convergence = 1e-9;
  VariationalState state;
  train_vb(c, cfg, v, nullptr, &state);
  const double bound = elbo(c, state, cfg);
  EXPECT_LE(bound, e.log_evidence + 1e-9);
  EXPECT_GT(bound, e.log_evidence - 2.0);
}

// Independent check of the enumeration oracle itself: midpoint quadrature of
// p(w) = int Dir(theta) Dir(phi_0) Dir(phi_1) prod_i sum_t theta_t phi_t[w_i]
// for K = 2, V = 2, one channel, where every simplex is one-dimensional.
TEST(Vb, EnumerationAgreesWithQuadrature) {
  const std::vector<WordId> words{0, 1, 1, 0, 1};
  const auto c = make_corpus({"full"}, {2}, {{words}});
  const double a = 1.5, b = 2.0;
  const auto e = testing::enumerate_single_tuple(c, 2, a, {b});
  const int grid = 120;
  const auto dens = [](double x, double conc) {
    return std::exp(std::lgamma(2 * conc) - 2 * std::lgamma(conc) + (conc - 1) * std::log(x * (1 - x)));
  };
  double integral = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double th = (i + 0.5) / grid;
    for (int j = 0; j < grid; ++j) {
      const double p0 = (j + 0.5) / grid;
      for (int m = 0; m < grid; ++m) {
        const double p1 = (m + 0.5) / grid;
        double lik = 1.0;
        for (auto w : words) {
          const double f0 = w == 0 ? p0 : 1 - p0, f1 = w == 0 ? p1 : 1 - p1;
          lik *= th * f0 + (1 - th) * f1;
        }
        integral += dens(th, a) * dens(p0, b) * dens(p1, b) * lik;
      }
    }
  }
  integral /= static_cast<double>(grid) * grid * grid;
  EXPECT_NEAR(std::log(integral), e.log_evidence, 1e-3);
}

TEST(Vb, BatchElboNonDecreasing) {
  const auto synth = small_synth(4, 2, 40, 6);
  const ModelConfig cfg{4, 0.5, {0.1, 0.1}, 3};
  VbConfig v;
  v.passes = 40;
  std::vector<PassRecord> trace;
  train_vb(synth.corpus, cfg, v, &trace);
  ASSERT_EQ(trace.size(), 40u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i].elbo, trace[i - 1].elbo - 1e-6);
}

TEST(Vb, WorkerCountDoesNotChangeResult) {
  const auto synth = small_synth(3, 2, 30, 7);
  const ModelConfig cfg{3, 0.5, {0.1, 0.1}, 3};
  VbConfig v;
  v.passes = 5;
  const auto a = train_vb(synth.corpus, cfg, v);
  v.workers = 3;
  EXPECT_EQ(train_vb(synth.corpus, cfg, v), a);
  v.mode = VbMode::online;
  v.batch_size = 8;
  v.passes = 3;
  v.workers = 1;
  const auto o1 = train_vb(synth.corpus, cfg, v);
  v.workers = 4;
  EXPECT_EQ(train_vb(synth.corpus, cfg, v), o1);
  o1.validate();
}

TEST(Vb, OnlineLearningRate) {
  EXPECT_DOUBLE_EQ(online_learning_rate(1024, 0.7, 0), std::pow(1024.0, -0.7));
  EXPECT_DOUBLE_EQ(online_learning_rate(1.0, 0.5, 3), 0.5);
  std::vector<MatrixD> lam{MatrixD(1, 2)}, est{MatrixD(1, 2)};
  lam[0](0, 0) = 2, lam[0](0, 1) = 4;
  est[0](0, 0) = 6, est[0](0, 1) = 0;
  blend_lambda(lam, est, 0.25);
  EXPECT_DOUBLE_EQ(lam[0](0, 0), 3.0);
  EXPECT_DOUBLE_EQ(lam[0](0, 1), 3.0);
}

TEST(Vb, InferencerProducesSimplexAndIsDeterministic) {
  const auto synth = small_synth(3, 2, 30, 8);
  const ModelConfig cfg{3, 0.5, {0.1, 0.1}, 3};
  VbConfig v;
  v.passes = 10;
  const auto m = train_vb(synth.corpus, cfg, v);
  VbInferencer inf(m, v);
  const auto& doc = *synth.corpus.tuples[0].docs[1];
  const auto a = inf.infer(doc, 1);
  EXPECT_EQ(a, inf.infer(doc, 1));
  EXPECT_EQ(a, infer_theta_vb(doc, m, 1, v));
  BowDocument empty{"x", "c1", {}, 0};
  const auto u = inf.infer(empty, 1);
  for (double x : u.values()) EXPECT_NEAR(x, 1.0 / 3, 1e-12);
}

TEST(Vb, EmptyCorpusRejected) {
  TupleCorpus empty;
  empty.channels = {"full"};
  empty.vocabularies = {Vocabulary("full", {"word"}, {1}, {1})};
  EXPECT_THROW(train_vb(empty, ModelConfig::with_defaults(2, 1), VbConfig{}), EmptyCorpusError);
}

}  // namespace
}  // namespace mltm
