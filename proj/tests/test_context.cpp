#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "dar/context.hpp"

using namespace dar;

TEST_CASE("flat label history lists one-hot blocks most recent first") {
  // labels: t0=2, t1=0, t2=1; at t=3 with scope 3 the blocks are [1, 0, 2]
  const std::vector<std::size_t> labels{2, 0, 1};
  Tensor f = labels_flat(labels, 3, 3, 4);
  REQUIRE(f.size() == 12);
  std::vector<Scalar> expected(12, 0.0);
  expected[0 * 4 + 1] = 1.0;  // t-1 label 1
  expected[1 * 4 + 0] = 1.0;  // t-2 label 0
  expected[2 * 4 + 2] = 1.0;  // t-3 label 2
  REQUIRE(f.values == expected);
}

TEST_CASE("positions before the dialog start are all-zero blocks") {
  const std::vector<std::size_t> labels{2, 0, 1};
  Tensor f = labels_flat(labels, 1, 3, 4);
  // one real block (label 2), two zero blocks
  REQUIRE(f.values[2] == 1.0);
  Scalar sum = 0.0;
  for (Scalar v : f.values) sum += v;
  REQUIRE(sum == 1.0);

  Tensor start = labels_flat(labels, 0, 3, 4);
  for (Scalar v : start.values) REQUIRE(v == 0.0);
}

TEST_CASE("flat full history is right-aligned and capped") {
  std::vector<std::size_t> labels(10, 1);
  Tensor f = labels_flat(labels, 10, kScopeAll, 2, 4);  // cap at 4 blocks
  REQUIRE(f.size() == 8);
  for (std::size_t b = 0; b < 4; ++b) REQUIRE(f.values[b * 2 + 1] == 1.0);
}

TEST_CASE("turn flags mark consecutive speaker changes, most recent first") {
  // speakers: A A B A; at t=3: flag1 compares (t, t-1)=(A,B)=1,
  // flag2 compares (t-1, t-2)=(B,A)=1, flag3 compares (t-2, t-3)=(A,A)=0
  const std::vector<std::string> speakers{"A", "A", "B", "A"};
  Tensor f = turn_flags(speakers, 3, 3);
  REQUIRE(f.values == std::vector<Scalar>{1.0, 1.0, 0.0});

  Tensor start = turn_flags(speakers, 0, 3);
  REQUIRE(start.values == std::vector<Scalar>{0.0, 0.0, 0.0});
}

TEST_CASE("turn flags can compare each preceding speaker to the current one") {
  const std::vector<std::string> speakers{"B", "A", "B", "A"};
  Tensor f = turn_flags(speakers, 3, 3, 128, true);
  // current A vs t-1 B, t-2 A, t-3 B
  REQUIRE(f.values == std::vector<Scalar>{1.0, 0.0, 1.0});
}

TEST_CASE("context configs validate scope and future-flat combinations") {
  ContextConfig c;
  c.scope = 2;
  REQUIRE_THROWS_AS(c.validate(), ConfigError);
  c.scope = 3;
  REQUIRE_NOTHROW(c.validate());

  ContextConfig future;
  future.source = ContextSource::kLabelsFuture;
  future.repr = ContextRepr::kFlat;
  future.scope = 1;
  REQUIRE_THROWS_AS(future.validate(), ConfigError);
  future.repr = ContextRepr::kSummary;
  REQUIRE_NOTHROW(future.validate());
}

namespace {

ContextFeatureBuilder make_builder(ParameterStore& store, ContextConfig cfg,
                                   std::size_t num_classes, std::uint64_t seed) {
  SeededRng rng(seed);
  return ContextFeatureBuilder(store, "ctx", cfg, num_classes, rng);
}

}  // namespace

TEST_CASE("builder dimensions follow source, scope and representation") {
  ParameterStore s1, s2, s3, s4;
  ContextConfig flat3;
  flat3.scope = 3;
  REQUIRE(make_builder(s1, flat3, 5, 1).dim() == 15);

  ContextConfig summary;
  summary.repr = ContextRepr::kSummary;
  summary.scope = kScopeAll;
  REQUIRE(make_builder(s2, summary, 5, 1).dim() == 5);

  ContextConfig turns;
  turns.source = ContextSource::kTurnTaking;
  turns.scope = 3;
  REQUIRE(make_builder(s3, turns, 5, 1).dim() == 3);

  ContextConfig turn_summary;
  turn_summary.source = ContextSource::kTurnTaking;
  turn_summary.repr = ContextRepr::kSummary;
  turn_summary.scope = kScopeAll;
  REQUIRE(make_builder(s4, turn_summary, 5, 1).dim() == 1);
}

TEST_CASE("preceding-label features never read the present or the future") {
  for (ContextRepr repr : {ContextRepr::kFlat, ContextRepr::kSummary}) {
    ParameterStore store;
    ContextConfig cfg;
    cfg.scope = 3;
    cfg.repr = repr;
    ContextFeatureBuilder b = make_builder(store, cfg, 4, 11);

    const std::vector<std::string> speakers{"A", "B", "A", "B", "A"};
    const std::vector<std::size_t> base{1, 2, 0, 3, 1};
    std::vector<std::size_t> perturbed = base;
    perturbed[3] = 0;  // position t
    perturbed[4] = 2;  // future position

    Graph g1, g2;
    Var v1 = b.build(g1, base, speakers, 3);
    Var v2 = b.build(g2, perturbed, speakers, 3);
    REQUIRE(v1->value.values == v2->value.values);
  }
}

TEST_CASE("future-label summaries read strictly after t, processed backwards") {
  ParameterStore store;
  ContextConfig cfg;
  cfg.source = ContextSource::kLabelsFuture;
  cfg.repr = ContextRepr::kSummary;
  cfg.scope = kScopeAll;
  ContextFeatureBuilder b = make_builder(store, cfg, 3, 13);
  REQUIRE(b.uses_future_labels());

  const std::vector<std::string> speakers{"A", "B", "A", "B"};
  const std::vector<std::size_t> base{0, 1, 2, 1};
  std::vector<std::size_t> past_changed = base;
  past_changed[0] = 2;
  past_changed[1] = 0;  // position t itself changes too

  Graph g1, g2;
  Var v1 = b.build(g1, base, speakers, 1);
  Var v2 = b.build(g2, past_changed, speakers, 1);
  REQUIRE(v1->value.values == v2->value.values);  // past and present ignored

  std::vector<std::size_t> future_changed = base;
  future_changed[3] = 0;
  Graph g3;
  Var v3 = b.build(g3, future_changed, speakers, 1);
  REQUIRE(v1->value.values != v3->value.values);
}

TEST_CASE("label summaries process the window chronologically") {
  ParameterStore store;
  ContextConfig cfg;
  cfg.repr = ContextRepr::kSummary;
  cfg.scope = 3;
  ContextFeatureBuilder b = make_builder(store, cfg, 3, 17);

  const std::vector<std::string> speakers{"A", "B", "A", "B"};
  // order matters to a GRU: [0,1,2] vs [2,1,0] before t=3 must differ
  Graph g1, g2;
  Var v1 = b.build(g1, {0, 1, 2, 0}, speakers, 3);
  Var v2 = b.build(g2, {2, 1, 0, 0}, speakers, 3);
  REQUIRE(v1->value.values != v2->value.values);
}

TEST_CASE("identical label sequences give identical features regardless of provenance") {
  ParameterStore store;
  ContextConfig cfg;
  cfg.scope = 1;
  ContextFeatureBuilder b = make_builder(store, cfg, 4, 19);
  const std::vector<std::string> speakers{"A", "B"};
  const std::vector<std::size_t> gold{2, 1};
  const std::vector<std::size_t> predicted{2, 3};  // same value before t=1
  Graph g1, g2;
  Var v1 = b.build(g1, gold, speakers, 1);
  Var v2 = b.build(g2, predicted, speakers, 1);
  REQUIRE(v1->value.values == v2->value.values);
}

TEST_CASE("zero features have the builder's dimension and vanish") {
  ParameterStore store;
  ContextConfig cfg;
  cfg.scope = 3;
  ContextFeatureBuilder b = make_builder(store, cfg, 5, 23);
  Graph g;
  Var z = b.zero(g);
  REQUIRE(z->value.size() == b.dim());
  for (Scalar v : z->value.values) REQUIRE(v == 0.0);
}

TEST_CASE("summary builders own trainable parameters, flat builders none") {
  ParameterStore flat_store, summary_store;
  ContextConfig flat;
  flat.scope = 1;
  make_builder(flat_store, flat, 4, 29);
  REQUIRE(flat_store.names().empty());

  ContextConfig summary;
  summary.repr = ContextRepr::kSummary;
  summary.scope = kScopeAll;
  make_builder(summary_store, summary, 4, 29);
  REQUIRE_FALSE(summary_store.names().empty());
}

TEST_CASE("turn-taking summary consumes flags oldest first through a scalar gru") {
  ParameterStore store;
  ContextConfig cfg;
  cfg.source = ContextSource::kTurnTaking;
  cfg.repr = ContextRepr::kSummary;
  cfg.scope = 3;
  ContextFeatureBuilder b = make_builder(store, cfg, 4, 31);
  REQUIRE(b.dim() == 1);

  const std::vector<std::size_t> labels{0, 0, 0, 0};
  Graph g1, g2;
  Var v1 = b.build(g1, labels, {"A", "B", "B", "B"}, 3);
  Var v2 = b.build(g2, labels, {"A", "A", "A", "B"}, 3);
  REQUIRE(v1->value.values != v2->value.values);  // flag order is visible
}
