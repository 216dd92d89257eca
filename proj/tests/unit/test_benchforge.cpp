#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "oodbench/benchforge.hpp"
#include "oodbench/refdata.hpp"
#include "oodbench/semantic_metrics.hpp"

using namespace oodbench;
using namespace oodbench::bench;
using wordnet::SynsetId;

namespace fs = std::filesystem;

namespace {

// a ─┬─ b ── d
//    └─ c
// e (separate root)
wordnet::Taxonomy small_taxonomy() {
  return wordnet::parse_wordnet_text(
      refdata::render_data_noun({{}, {0}, {0}, {1}, {}}, {"a", "b", "c", "d", "e"}));
}

SynsetId sid(const wordnet::Taxonomy& t, const std::string& lemma) { return t.resolve(lemma + ".n.01"); }

ClassMapping mapping_of(const wordnet::Taxonomy& t,
                        const std::map<ClassKey, std::vector<std::string>>& lemmas) {
  std::map<ClassKey, std::vector<SynsetId>> automatic;
  for (const auto& [k, ls] : lemmas)
    for (const auto& l : ls) automatic[k].push_back(sid(t, l));
  return load_class_mapping(automatic, {}, t);
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("oodbench_bench_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Labels, Normalization) {
  EXPECT_EQ(normalize_label("/c/Church/indoor"), "church");
  EXPECT_EQ(normalize_label("dressing room"), "dressing_room");
  EXPECT_EQ(normalize_label("  Shoe__Shop "), "shoe_shop");
  EXPECT_EQ(normalize_label("/a/abbey"), "abbey");
}

TEST(Labels, AutoMap) {
  const auto t = small_taxonomy();
  EXPECT_EQ(auto_map_label("B", t), std::vector<SynsetId>{sid(t, "b")});
  EXPECT_TRUE(auto_map_label("xyzzy_nonsense", t).empty());
}

TEST(Mapping, ManualWinsAndGapsAreErrors) {
  const auto t = small_taxonomy();
  std::map<ClassKey, std::vector<SynsetId>> automatic{
      {{"ds", "x"}, {}}, {{"ds", "b"}, {sid(t, "b")}}, {{"ds", "c"}, {sid(t, "c")}}};
  std::vector<OverrideRow> manual{{{"ds", "x"}, {sid(t, "d")}, 2},
                                  {{"ds", "b"}, {sid(t, "e")}, {}},
                                  {{"ds", "c"}, {}, 1}};
  const auto m = load_class_mapping(automatic, manual, t);
  EXPECT_EQ(m.at({"ds", "x"}).synsets, std::vector<SynsetId>{sid(t, "d")});
  EXPECT_EQ(m.at({"ds", "x"}).level, 2);
  EXPECT_EQ(m.at({"ds", "b"}).synsets, std::vector<SynsetId>{sid(t, "e")});
  EXPECT_EQ(m.at({"ds", "b"}).source, MappingSource::manual);
  EXPECT_EQ(m.at({"ds", "c"}).synsets, std::vector<SynsetId>{sid(t, "c")});  // level-only row
  EXPECT_EQ(m.at({"ds", "c"}).level, 1);

  try {
    load_class_mapping({{{"ds", "ghost"}, {}}}, {}, t);
    FAIL();
  } catch (const UserError& e) {
    EXPECT_NE(std::string(e.what()).find("ds:ghost"), std::string::npos);
  }
  EXPECT_THROW(load_class_mapping({{{"ds", "q"}, {SynsetId{'n', 424242}}}}, {}, t), UserError);
}

TEST(Mapping, OverrideFileParsing) {
  std::istringstream in(
      "# comment\n"
      "places\tshoe shop\tn00000000,n00000044\t-\n"
      "\n"
      "places\tabbey\tn00000044\t3\n"
      "places\tfield\t\n");
  const auto rows = parse_overrides(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].synsets.size(), 2u);
  EXPECT_FALSE(rows[0].level);
  EXPECT_EQ(rows[1].level, 3);
  EXPECT_TRUE(rows[2].synsets.empty());

  std::istringstream bad_level("p\tc\tn00000000\t7\n");
  EXPECT_THROW(parse_overrides(bad_level), ParseError);
  std::istringstream bad_id("p\tc\tzz\n");
  EXPECT_THROW(parse_overrides(bad_id), ParseError);
  std::istringstream short_row("p\tc\n");
  EXPECT_THROW(parse_overrides(short_row), ParseError);
}

TEST(Mapping, FileRoundTrip) {
  const auto t = small_taxonomy();
  auto m = mapping_of(t, {{{"ds", "b"}, {"b", "c"}}, {{"ds", "d"}, {"d"}}});
  const auto dir = temp_dir("mapping");
  write_mapping(dir / "m.tsv", m);
  const auto back = read_mapping(dir / "m.tsv", t);
  ASSERT_EQ(back.entries().size(), 2u);
  EXPECT_EQ(back.at({"ds", "b"}).synsets, m.at({"ds", "b"}).synsets);
}

TEST(ClassSimilarity, Examples) {
  const auto t = small_taxonomy();
  const auto m = mapping_of(t, {{{"p", "bc"}, {"b", "c"}},
                                {{"p", "b"}, {"b"}},
                                {{"q", "d"}, {"d"}},
                                {{"q", "c"}, {"c"}}});
  EXPECT_DOUBLE_EQ(class_similarity(m, t, {"p", "bc"}, {"p", "b"}, ClassMetric::combined), 1.0);
  EXPECT_DOUBLE_EQ(class_similarity(m, t, {"p", "b"}, {"q", "d"}, ClassMetric::combined),
                   wordnet::combined_benchmark_similarity(t, sid(t, "b"), sid(t, "d")));
  const double via_b = wordnet::combined_benchmark_similarity(t, sid(t, "b"), sid(t, "d"));
  const double via_c = wordnet::combined_benchmark_similarity(t, sid(t, "c"), sid(t, "d"));
  EXPECT_DOUBLE_EQ(class_similarity(m, t, {"p", "bc"}, {"q", "d"}, ClassMetric::combined),
                   std::max(via_b, via_c));
  EXPECT_DOUBLE_EQ(class_similarity(m, t, {"q", "d"}, {"p", "bc"}, ClassMetric::prediction),
                   class_similarity(m, t, {"p", "bc"}, {"q", "d"}, ClassMetric::prediction));
  EXPECT_THROW(class_similarity(m, t, {"p", "zz"}, {"p", "b"}, ClassMetric::combined), UserError);
}

TEST(DistanceTable, Examples) {
  const auto t = small_taxonomy();  // D = 3
  const auto m = mapping_of(t, {{{"id", "b"}, {"b"}},
                                {{"id", "e"}, {"e"}},
                                {{"src", "b"}, {"b"}},
                                {{"src", "c"}, {"c"}}});
  const auto table = build_distance_table(m, t, "src", m.classes_of("id"));
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0].source, (ClassKey{"src", "b"}));
  EXPECT_DOUBLE_EQ(table[0].distance, 0.0);
  // c vs b: sp 2, wup 2·1/(2+2), lch ln(6/3)/ln 6; c vs e only meets at the root.
  const double expected = (1.0 / 3 + 0.5 + std::log(2.0) / std::log(6.0)) / 3;
  EXPECT_NEAR(table[1].similarity, expected, 1e-12);
  EXPECT_EQ(table[1].nearest_id, (ClassKey{"id", "b"}));
  EXPECT_NEAR(table[1].distance, 1.0 - expected, 1e-12);
  EXPECT_THROW(build_distance_table(m, t, "src", {}), UserError);

  const auto dir = temp_dir("table");
  write_distance_table(dir / "t.tsv", table);
  const auto back = read_distance_table(dir / "t.tsv");
  ASSERT_EQ(back.size(), table.size());
  EXPECT_EQ(back[1].distance, table[1].distance);  // 17 significant digits round-trip
  EXPECT_EQ(back[1].nearest_id, table[1].nearest_id);
}

TEST(Assign, ThresholdsAndPresets) {
  SemanticDistanceTable table{{{"s", "zero"}, 1.0, {"id", "x"}, 0.0},
                              {{"s", "one"}, 0.0, {"id", "x"}, 1.0},
                              {{"s", "edge"}, 0.55, {"id", "x"}, 0.45}};
  const auto l = assign_ood_labels(table, 0.5);
  EXPECT_EQ(l.at({"s", "zero"}), 0);
  EXPECT_EQ(l.at({"s", "one"}), 1);
  EXPECT_EQ(assign_ood_labels(table, tau_preset("t45")).at({"s", "edge"}), 0);  // ≤ is ID
  EXPECT_EQ(assign_ood_labels(table, tau_preset("t40")).at({"s", "edge"}), 1);
  EXPECT_DOUBLE_EQ(tau_preset("t50"), 0.5);
  EXPECT_THROW(tau_preset("t60"), UserError);
  EXPECT_THROW(assign_ood_labels(table, 1.5), UserError);
  EXPECT_THROW(assign_ood_labels(table, -0.1), UserError);

  const auto dir = temp_dir("labels");
  write_labels(dir / "l.tsv", l);
  EXPECT_EQ(read_labels(dir / "l.tsv"), l);
}

TEST(Assign, ThresholdNestingOnRandomTables) {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    SemanticDistanceTable table;
    for (int i = 0; i < 50; ++i) {
      const double d = rng.below(4) == 0 ? 0.05 * static_cast<double>(rng.below(21)) : rng.uniform();
      table.push_back({{"s", std::to_string(i)}, 1.0 - d, {"id", "x"}, d});
    }
    const auto a = assign_ood_labels(table, 0.40), b = assign_ood_labels(table, 0.45),
               c = assign_ood_labels(table, 0.50);
    for (const auto& [k, z] : a) {
      if (z == 0) ASSERT_EQ(b.at(k), 0);
      if (b.at(k) == 0) ASSERT_EQ(c.at(k), 0);
    }
  }
}

TEST(Sampling, StratifiedSample) {
  const std::map<std::string, std::vector<std::string>> classes{{"x", {"x1", "x2", "x3"}},
                                                                {"y", {"y1", "y2", "y3", "y4"}}};
  auto all = stratified_sample({{"x", classes.at("x")}}, 3, 1);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, classes.at("x"));
  EXPECT_TRUE(stratified_sample(classes, 0, 1).empty());
  const auto a = stratified_sample(classes, 2, 7), b = stratified_sample(classes, 2, 7);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0][0], 'x');
  EXPECT_EQ(a[2][0], 'y');
  EXPECT_THROW(stratified_sample(classes, 4, 7), UserError);
  EXPECT_EQ(stratified_sample(classes, 4, 7, true).size(), 7u);
  // a class's draw does not depend on its neighbours
  const auto x_alone = stratified_sample({{"x", classes.at("x")}}, 2, 7);
  EXPECT_EQ(std::vector<std::string>(a.begin(), a.begin() + 2), x_alone);
}

namespace {

std::vector<ClassPool> pools_with_ids(const std::vector<std::pair<ClassKey, std::size_t>>& spec) {
  std::vector<ClassPool> out;
  for (const auto& [key, n] : spec) {
    ClassPool p{key, {}, n};
    for (std::size_t i = 0; i < n; ++i) p.samples.push_back(key.str() + "#" + std::to_string(i));
    out.push_back(std::move(p));
  }
  return out;
}

void check_conservation(const BenchmarkManifest& m) {
  for (const char* split : {"val", "test"}) {
    std::size_t id = 0, ood = 0;
    for (const auto& e : m.entries)
      if (e.split == split) (e.z == 0 ? id : ood) += e.count;
    EXPECT_EQ(m.totals(split).id_samples, id);
    EXPECT_EQ(m.totals(split).ood_samples, ood);
  }
  std::set<std::string> val_ids;
  for (const auto& e : m.entries)
    if (e.split == "val" && e.samples) val_ids.insert(e.samples->begin(), e.samples->end());
  for (const auto& e : m.entries) {
    if (e.samples) EXPECT_EQ(e.samples->size(), e.count);
    if (e.split == "test" && e.samples)
      for (const auto& s : *e.samples) EXPECT_FALSE(val_ids.contains(s)) << s;
  }
}

}  // namespace

TEST(Manifest, FacetsRules) {
  ManifestRequest req;
  req.id_dataset = "places";
  req.pools = pools_with_ids({{{"places", "abbey"}, 10},
                              {{"facets", "l0"}, 10},
                              {{"facets", "l1"}, 10},
                              {{"facets", "l2"}, 10},
                              {{"facets", "l3"}, 10}});
  req.levels = {{{"facets", "l0"}, 0}, {{"facets", "l1"}, 1}, {{"facets", "l2"}, 2}, {{"facets", "l3"}, 3}};
  req.id_quota = 2;
  req.ood_quota = 3;
  req.recipe = Recipe::facets_t1;
  auto z_of = [](const BenchmarkManifest& m, const std::string& label) {
    for (const auto& e : m.entries)
      if (e.label == label) return e.z;
    return -1;
  };
  const auto t1 = build_manifest(req);
  EXPECT_EQ(z_of(t1, "l0"), 0);
  EXPECT_EQ(z_of(t1, "l1"), 0);
  EXPECT_EQ(z_of(t1, "l2"), 1);
  EXPECT_EQ(z_of(t1, "l3"), 1);
  check_conservation(t1);
  req.recipe = Recipe::facets_t2;
  const auto t2 = build_manifest(req);
  EXPECT_EQ(z_of(t2, "l2"), 0);
  EXPECT_EQ(z_of(t2, "l3"), 1);
  EXPECT_EQ(t2.totals("val").ood_classes, 1u);
  EXPECT_EQ(t2.totals("test").ood_samples, 3u);
  req.levels.erase({"facets", "l2"});
  EXPECT_THROW(build_manifest(req), UserError);
}

TEST(Manifest, DeterministicAndConserving) {
  ManifestRequest req;
  req.recipe = Recipe::inter_dataset;
  req.id_dataset = "places";
  req.pools = pools_with_ids({{{"places", "/s/shoe_shop"}, 30},
                              {{"places", "/a/abbey"}, 30},
                              {{"sun", "shoe shop"}, 30},
                              {{"sun", "volcano"}, 30}});
  req.id_quota = 5;
  req.ood_quota = 4;
  req.seed = 99;
  const auto a = manifest_jsonl(build_manifest(req));
  const auto b = manifest_jsonl(build_manifest(req));
  EXPECT_EQ(a, b);
  const auto m = build_manifest(req);
  check_conservation(m);
  for (const auto& e : m.entries) EXPECT_NE(e.label, "shoe shop");  // shared with an ID class
  EXPECT_EQ(m.totals("val").id_classes, 2u);
  EXPECT_EQ(m.totals("val").ood_classes, 1u);
  EXPECT_EQ(m.entries.front().split, "val");
  EXPECT_EQ(m.entries.back().split, "test");
  req.seed = 100;
  EXPECT_NE(manifest_jsonl(build_manifest(req)), a);

  std::istringstream in(a);
  EXPECT_EQ(manifest_jsonl(parse_manifest_jsonl(in)), a);
}

TEST(Manifest, BaselineCollapsesOodDataset) {
  ManifestRequest req;
  req.recipe = Recipe::baseline;
  req.id_dataset = "places";
  req.pools = pools_with_ids({{{"places", "abbey"}, 10}, {{"svhn", "0"}, 5}, {{"svhn", "1"}, 5}});
  req.id_quota = 2;
  req.ood_quota = 4;
  const auto m = build_manifest(req);
  ASSERT_EQ(m.entries.size(), 4u);
  EXPECT_EQ(m.entries[1].label, "number");
  EXPECT_EQ(m.entries[1].z, 1);
  EXPECT_EQ(m.entries[1].count, 4u);
  check_conservation(m);
}

TEST(Manifest, WordnetTkUsesLabelsAndQuotaErrorsNameTheClass) {
  ManifestRequest req;
  req.recipe = Recipe::wordnet_tk;
  req.id_dataset = "places";
  req.pools = {{{"places", "abbey"}, {}, 100}, {{"in", "dog"}, {}, 100}, {{"in", "tiny"}, {}, 4}};
  req.labels = {{{"in", "dog"}, 1}, {{"in", "tiny"}, 0}};
  req.id_quota = 2;
  req.ood_quota = 10;
  const auto m = build_manifest(req);
  for (const auto& e : m.entries) EXPECT_FALSE(e.samples);  // counts only
  EXPECT_EQ(m.totals("val").id_classes, 2u);
  req.id_quota = 5;
  try {
    build_manifest(req);
    FAIL();
  } catch (const UserError& e) {
    EXPECT_NE(std::string(e.what()).find("in:tiny"), std::string::npos);
  }
  req.cap_to_available = true;
  const auto capped = build_manifest(req);
  check_conservation(capped);
  req.labels.erase({"in", "dog"});
  EXPECT_THROW(build_manifest(req), UserError);
}

TEST(SemanticMetrics, PredictionSimilarityAndAggregation) {
  const auto t = small_taxonomy();
  const auto m = mapping_of(t, {{{"p", "b"}, {"b"}}, {{"p", "d"}, {"d"}}, {{"p", "c"}, {"c"}}});
  const ClassKey b{"p", "b"}, c{"p", "c"}, d{"p", "d"};
  EXPECT_DOUBLE_EQ(metrics::prediction_similarity(b, b, m, t), 1.0);
  // d is a child of b: path 0.5, wup 2·2/(3+2)
  EXPECT_NEAR(metrics::prediction_similarity(d, b, m, t), (0.5 + 0.8) / 2, 1e-12);
  EXPECT_EQ(metrics::prediction_similarity(d, b, m, t), metrics::prediction_similarity(b, d, m, t));

  using P = std::pair<ClassKey, ClassKey>;
  const auto one = metrics::aggregate_similarity({P{d, b}}, metrics::GroupBy::gt, m, t);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_NEAR(one[0].mean, 0.65, 1e-12);
  const auto two = metrics::aggregate_similarity({P{d, b}, P{d, b}}, metrics::GroupBy::gt, m, t);
  EXPECT_EQ(two[0].mean, one[0].mean);
  EXPECT_EQ(two[0].count, 2u);

  // three groups by prediction: b ← {b, d}, c ← {b}, d ← {d}
  const auto agg = metrics::aggregate_similarity({P{b, b}, P{d, b}, P{b, c}, P{d, d}},
                                                 metrics::GroupBy::pred, m, t);
  ASSERT_EQ(agg.size(), 3u);
  EXPECT_EQ(agg[0].group, d);  // 1.0, tie with nothing
  EXPECT_NEAR(agg[1].mean, (1.0 + 0.65) / 2, 1e-12);
  const double bc = (0.5 + 1.0 / 3) / 2;  // wup 2·1/4, path 1/3
  EXPECT_NEAR(agg[2].mean, bc, 1e-12);
  EXPECT_EQ(metrics::top_k(agg, 2).size(), 2u);
  EXPECT_EQ(metrics::bottom_k(agg, 1)[0].group, c);
  EXPECT_EQ(metrics::top_k(agg, 10).size(), 3u);
}
