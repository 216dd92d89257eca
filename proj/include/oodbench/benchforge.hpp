#ifndef OODBENCH_BENCHFORGE_HPP
#define OODBENCH_BENCHFORGE_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "text.hpp"
#include "wordnet.hpp"

namespace oodbench::bench {

using wordnet::SynsetId;
using wordnet::Taxonomy;

struct ClassKey {
  std::string dataset;
  std::string label;

  friend auto operator<=>(const ClassKey&, const ClassKey&) = default;

  std::string str() const { return dataset + ":" + label; }
};

enum class MappingSource { automatic, manual };

struct MappingEntry {
  std::vector<SynsetId> synsets;
  MappingSource source = MappingSource::automatic;
  std::optional<int> level;  // manual OODness 0..3
};

class ClassMapping {
 public:
  const MappingEntry& at(const ClassKey& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.synsets.empty())
      throw UserError("class " + key.str() + " is not mapped to any synset");
    return it->second;
  }

  bool contains(const ClassKey& key) const { return entries_.contains(key); }

  const std::map<ClassKey, MappingEntry>& entries() const { return entries_; }

  std::vector<ClassKey> classes_of(const std::string& dataset) const {
    std::vector<ClassKey> out;
    for (const auto& [k, _] : entries_)
      if (k.dataset == dataset) out.push_back(k);
    return out;
  }

  void set(const ClassKey& key, MappingEntry e) { entries_[key] = std::move(e); }

 private:
  std::map<ClassKey, MappingEntry> entries_;
};

// ---------------------------------------------------------------------------
// Label mapping

/// Lowercase head term in WordNet lemma form: "/c/Church/indoor" -> "church",
/// "dressing room" -> "dressing_room".
inline std::string normalize_label(std::string_view label) {
  std::string head = text::lower(text::scene_head(text::trim(label)));
  std::string out;
  for (char c : head) {
    const char ch = (c == ' ' || c == '_' || c == '\t') ? '_' : c;
    if (ch == '_' && (out.empty() || out.back() == '_')) continue;
    out += ch;
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

/// Noun synsets whose lemma set holds the normalized label. An empty result
/// means the class needs a manual mapping.
inline std::vector<SynsetId> auto_map_label(std::string_view label, const Taxonomy& t) {
  const auto hits = t.lookup(normalize_label(label), 'n');
  return {hits.begin(), hits.end()};
}

struct OverrideRow {
  ClassKey key;
  std::vector<SynsetId> synsets;  // empty: keep the automatic synsets, set the level only
  std::optional<int> level;
};

/// Tab-separated `dataset<TAB>class<TAB>synset_ids(comma)<TAB>level`; `#`
/// comments and blank lines are skipped, level may be empty or `-`. A fifth
/// column (mapping source, as written by `write_mapping`) is ignored.
inline std::vector<OverrideRow> parse_overrides(std::istream& in,
                                                const std::string& source = "<overrides>") {
  std::vector<OverrideRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() < 3 || f.size() > 5)
      throw ParseError(source, lineno, "expected dataset, class, synsets[, level]");
    OverrideRow row;
    row.key = {text::trim(f[0]), text::trim(f[1])};
    if (row.key.dataset.empty() || row.key.label.empty())
      throw ParseError(source, lineno, "empty dataset or class");
    for (const auto& id : text::split(f[2], ',')) {
      const auto trimmed = text::trim(id);
      if (trimmed.empty()) continue;
      try {
        row.synsets.push_back(SynsetId::parse(trimmed));
      } catch (const UserError& e) {
        throw ParseError(source, lineno, e.what());
      }
    }
    if (f.size() >= 4) {
      const auto lvl = text::trim(f[3]);
      if (!lvl.empty() && lvl != "-") {
        if (lvl.size() != 1 || lvl[0] < '0' || lvl[0] > '3')
          throw ParseError(source, lineno, "OODness level must be 0..3, got '" + lvl + "'");
        row.level = lvl[0] - '0';
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<OverrideRow> read_overrides(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return parse_overrides(in, path.string());
}

/// Manual rows win over automatic results. Every class named by either side
/// must end up with at least one synset that resolves in `t`.
inline ClassMapping load_class_mapping(const std::map<ClassKey, std::vector<SynsetId>>& automatic,
                                       const std::vector<OverrideRow>& overrides,
                                       const Taxonomy& t) {
  ClassMapping m;
  for (const auto& [key, ids] : automatic) m.set(key, {ids, MappingSource::automatic, {}});
  for (const auto& row : overrides) {
    MappingEntry e;
    if (m.contains(row.key)) e = m.entries().at(row.key);
    if (!row.synsets.empty()) e.synsets = row.synsets;
    e.source = MappingSource::manual;
    if (row.level) e.level = row.level;
    m.set(row.key, std::move(e));
  }
  std::vector<std::string> gaps;
  for (const auto& [key, e] : m.entries()) {
    if (e.synsets.empty()) gaps.push_back(key.str());
    for (const auto& id : e.synsets)
      if (!t.contains(id)) throw UserError("class " + key.str() + " maps to unknown synset " + id.str());
  }
  if (!gaps.empty())
    throw UserError("no synset mapping for " + std::to_string(gaps.size()) +
                    " class(es): " + text::join(gaps, ", "));
  return m;
}

/// Same layout as the override file plus a trailing `auto`/`manual` column.
inline void write_mapping(const std::filesystem::path& path, const ClassMapping& m) {
  io::write_atomic(path, [&](std::ostream& out) {
    for (const auto& [key, e] : m.entries()) {
      std::vector<std::string> ids;
      for (const auto& id : e.synsets) ids.push_back(id.str());
      out << key.dataset << '\t' << key.label << '\t' << text::join(ids, ",") << '\t'
          << (e.level ? std::to_string(*e.level) : "-") << '\t'
          << (e.source == MappingSource::manual ? "manual" : "auto") << '\n';
    }
  });
}

inline ClassMapping read_mapping(const std::filesystem::path& path, const Taxonomy& t) {
  return load_class_mapping({}, read_overrides(path), t);
}

// ---------------------------------------------------------------------------
// Similarity and distance tables

enum class ClassMetric { combined, prediction };

/// Maximum pairwise similarity over the two classes' synsets.
inline double class_similarity(const ClassMapping& m, const Taxonomy& t, const ClassKey& a,
                               const ClassKey& b, ClassMetric metric) {
  const auto& sa = m.at(a).synsets;
  const auto& sb = m.at(b).synsets;
  double best = 0.0;
  for (const auto& s1 : sa)
    for (const auto& s2 : sb) {
      const double sim = metric == ClassMetric::combined
                             ? wordnet::combined_benchmark_similarity(t, s1, s2)
                             : wordnet::prediction_pair_similarity(t, s1, s2);
      if (sim > best) best = sim;
    }
  return best;
}

struct DistanceRow {
  ClassKey source;
  double similarity = 0.0;
  ClassKey nearest_id;
  double distance = 1.0;
};

using SemanticDistanceTable = std::vector<DistanceRow>;

/// One row per class of `source_dataset`: its best combined similarity to any
/// ID class (first ID class wins ties) and distance = 1 − similarity.
inline SemanticDistanceTable build_distance_table(const ClassMapping& m, const Taxonomy& t,
                                                  const std::string& source_dataset,
                                                  const std::vector<ClassKey>& id_classes) {
  if (id_classes.empty()) throw UserError("distance table needs at least one ID class");
  SemanticDistanceTable table;
  for (const auto& cls : m.classes_of(source_dataset)) {
    DistanceRow row{cls, -1.0, {}, 1.0};
    for (const auto& id_cls : id_classes) {
      const double sim = class_similarity(m, t, cls, id_cls, ClassMetric::combined);
      if (sim > row.similarity) {
        row.similarity = sim;
        row.nearest_id = id_cls;
      }
    }
    row.distance = 1.0 - row.similarity;
    table.push_back(std::move(row));
  }
  return table;
}

inline void write_distance_table(const std::filesystem::path& path, const SemanticDistanceTable& t) {
  io::write_atomic(path, [&](std::ostream& out) {
    out.precision(17);
    out << "dataset\tclass\tsimilarity\tnearest_id\tdistance\n";
    for (const auto& r : t)
      out << r.source.dataset << '\t' << r.source.label << '\t' << r.similarity << '\t'
          << r.nearest_id.str() << '\t' << r.distance << '\n';
  });
}

inline SemanticDistanceTable read_distance_table(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::string line;
  std::getline(in, line);
  SemanticDistanceTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 5) throw ParseError(path.string(), lineno, "expected 5 columns");
    DistanceRow r;
    r.source = {f[0], f[1]};
    const auto colon = f[3].find(':');
    r.nearest_id = {f[3].substr(0, colon), colon == std::string::npos ? "" : f[3].substr(colon + 1)};
    try {
      r.similarity = std::stod(f[2]);
      r.distance = std::stod(f[4]);
    } catch (const std::logic_error&) {
      throw ParseError(path.string(), lineno, "bad number");
    }
    table.push_back(std::move(r));
  }
  return table;
}

/// Named thresholds: t40 / t45 / t50.
inline double tau_preset(std::string_view name) {
  if (name == "t40") return 0.40;
  if (name == "t45") return 0.45;
  if (name == "t50") return 0.50;
  throw UserError("unknown threshold preset '" + std::string(name) + "' (t40, t45, t50)");
}

/// z = 0 (ID) iff distance <= tau.
inline std::map<ClassKey, int> assign_ood_labels(const SemanticDistanceTable& table, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw UserError("distance threshold must lie in [0, 1]");
  std::map<ClassKey, int> out;
  for (const auto& r : table) out[r.source] = r.distance <= tau ? 0 : 1;
  return out;
}

inline void write_labels(const std::filesystem::path& path, const std::map<ClassKey, int>& labels) {
  io::write_atomic(path, [&](std::ostream& out) {
    for (const auto& [k, z] : labels) out << k.dataset << '\t' << k.label << '\t' << z << '\n';
  });
}

inline std::map<ClassKey, int> read_labels(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::map<ClassKey, int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 3 || (f[2] != "0" && f[2] != "1"))
      throw ParseError(path.string(), lineno, "expected dataset, class, z in {0,1}");
    out[{f[0], f[1]}] = f[2] == "1";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling and manifests

/// Exactly `n` ids per class (all of them when capped), drawn by a seeded
/// shuffle whose stream depends only on (seed, class name). Classes are
/// emitted in key order.
inline std::vector<std::string> stratified_sample(
    const std::map<std::string, std::vector<std::string>>& classes, std::size_t n,
    std::uint64_t seed, bool cap_to_available = false) {
  std::vector<std::string> out;
  for (const auto& [name, ids] : classes) {
    if (n > ids.size() && !cap_to_available)
      throw UserError("class " + name + " has " + std::to_string(ids.size()) +
                      " samples, cannot draw " + std::to_string(n));
    auto pool = ids;
    Rng rng(derive_seed(seed, "stratified_sample/" + name));
    rng.shuffle(pool);
    pool.resize(std::min(n, pool.size()));
    out.insert(out.end(), pool.begin(), pool.end());
  }
  return out;
}

enum class Recipe { baseline, inter_dataset, wordnet_tk, facets_t1, facets_t2 };

inline Recipe parse_recipe(std::string_view s) {
  if (s == "baseline") return Recipe::baseline;
  if (s == "inter_dataset") return Recipe::inter_dataset;
  if (s == "wordnet_tk") return Recipe::wordnet_tk;
  if (s == "facets_t1") return Recipe::facets_t1;
  if (s == "facets_t2") return Recipe::facets_t2;
  throw UserError("unknown recipe '" + std::string(s) +
                  "' (baseline, inter_dataset, wordnet_tk, facets_t1, facets_t2)");
}

inline std::string recipe_name(Recipe r) {
  switch (r) {
    case Recipe::baseline: return "baseline";
    case Recipe::inter_dataset: return "inter_dataset";
    case Recipe::wordnet_tk: return "wordnet_tk";
    case Recipe::facets_t1: return "facets_t1";
    case Recipe::facets_t2: return "facets_t2";
  }
  return "?";
}

/// Sample ids are optional; without them only `available` is known.
struct ClassPool {
  ClassKey key;
  std::vector<std::string> samples;
  std::size_t available = 0;

  std::size_t size() const { return samples.empty() ? available : samples.size(); }
};

struct ManifestRequest {
  Recipe recipe = Recipe::baseline;
  std::string name;
  std::string id_dataset;
  std::vector<ClassPool> pools;
  std::map<ClassKey, int> labels;  // wordnet_tk: z for non-ID classes
  std::map<ClassKey, int> levels;  // facets: OODness 0..3 (ID-dataset classes default to 0)
  std::size_t id_quota = 0;        // per class and split
  std::size_t ood_quota = 0;
  bool cap_to_available = false;
  bool include_samples = true;
  std::string collapsed_class = "number";
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::string dataset;
  std::string label;
  std::string split;  // "val" or "test"
  int z = 0;
  std::optional<int> level;
  std::size_t count = 0;
  std::optional<std::vector<std::string>> samples;
};

struct SplitTotals {
  std::size_t id_classes = 0, ood_classes = 0, id_samples = 0, ood_samples = 0;
};

struct BenchmarkManifest {
  std::string name;
  std::vector<ManifestEntry> entries;

  SplitTotals totals(std::string_view split) const {
    SplitTotals t;
    for (const auto& e : entries) {
      if (e.split != split) continue;
      (e.z == 0 ? t.id_classes : t.ood_classes)++;
      (e.z == 0 ? t.id_samples : t.ood_samples) += e.count;
    }
    return t;
  }
};

/// T1: levels {0,1} ID. T2: levels {0,1,2} ID.
inline int facets_z(Recipe r, int level) {
  return r == Recipe::facets_t1 ? (level >= 2 ? 1 : 0) : (level == 3 ? 1 : 0);
}

/// Deterministic for (request, seed). Each kept class contributes one `val`
/// and one `test` entry drawn from a single seeded shuffle, so the splits
/// never share a sample.
inline BenchmarkManifest build_manifest(const ManifestRequest& req) {
  struct Planned {
    ClassPool pool;
    int z;
    std::optional<int> level;
  };
  std::vector<Planned> plan;

  std::set<std::string> id_names;
  for (const auto& p : req.pools)
    if (p.key.dataset == req.id_dataset) id_names.insert(normalize_label(p.key.label));

  std::map<std::string, ClassPool> collapsed;  // baseline: one OOD class per dataset
  for (const auto& p : req.pools) {
    const bool is_id = p.key.dataset == req.id_dataset;
    switch (req.recipe) {
      case Recipe::baseline:
        if (is_id) {
          plan.push_back({p, 0, {}});
        } else {
          auto& c = collapsed[p.key.dataset];
          c.key = {p.key.dataset, req.collapsed_class};
          c.samples.insert(c.samples.end(), p.samples.begin(), p.samples.end());
          c.available += p.size();
        }
        break;
      case Recipe::inter_dataset:
        if (is_id)
          plan.push_back({p, 0, {}});
        else if (!id_names.contains(normalize_label(p.key.label)))
          plan.push_back({p, 1, {}});
        break;
      case Recipe::wordnet_tk: {
        if (is_id) {
          plan.push_back({p, 0, {}});
          break;
        }
        auto it = req.labels.find(p.key);
        if (it == req.labels.end()) throw UserError("no ID/OOD label for class " + p.key.str());
        plan.push_back({p, it->second, {}});
        break;
      }
      case Recipe::facets_t1:
      case Recipe::facets_t2: {
        auto it = req.levels.find(p.key);
        if (it == req.levels.end() && !is_id)
          throw UserError("no OODness level for class " + p.key.str());
        const int level = it == req.levels.end() ? 0 : it->second;
        if (level < 0 || level > 3) throw UserError("OODness level out of range for " + p.key.str());
        plan.push_back({p, facets_z(req.recipe, level), level});
        break;
      }
    }
  }
  for (auto& [_, c] : collapsed) {
    if (c.available != c.samples.size() && !c.samples.empty())
      throw UserError("baseline collapse mixes pools with and without sample ids");
    plan.push_back({std::move(c), 1, {}});
  }

  BenchmarkManifest m;
  m.name = req.name.empty() ? recipe_name(req.recipe) : req.name;
  std::vector<ManifestEntry> val, test;
  for (const auto& item : plan) {
    const std::size_t quota = item.z == 0 ? req.id_quota : req.ood_quota;
    const std::size_t want = 2 * quota;
    const std::size_t have = item.pool.size();
    if (want > have && !req.cap_to_available)
      throw UserError("class " + item.pool.key.str() + " has " + std::to_string(have) +
                      " samples, quota needs " + std::to_string(want));
    const std::size_t take = std::min(want, have);
    const std::size_t n_val = (take + 1) / 2;

    ManifestEntry ev{item.pool.key.dataset, item.pool.key.label, "val", item.z, item.level, n_val, {}};
    ManifestEntry et{item.pool.key.dataset, item.pool.key.label, "test", item.z, item.level,
                     take - n_val, {}};
    if (!item.pool.samples.empty()) {
      const auto drawn = stratified_sample({{item.pool.key.str(), item.pool.samples}}, take,
                                           derive_seed(req.seed, recipe_name(req.recipe)), true);
      if (req.include_samples) {
        ev.samples = std::vector<std::string>(drawn.begin(), drawn.begin() + static_cast<long>(n_val));
        et.samples = std::vector<std::string>(drawn.begin() + static_cast<long>(n_val), drawn.end());
      }
    }
    val.push_back(std::move(ev));
    test.push_back(std::move(et));
  }
  m.entries = std::move(val);
  m.entries.insert(m.entries.end(), test.begin(), test.end());
  return m;
}

/// JSON-lines, one entry per line, keys in fixed order.
inline std::string manifest_jsonl(const BenchmarkManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    nlohmann::ordered_json j;
    j["dataset"] = e.dataset;
    j["class"] = e.label;
    j["split"] = e.split;
    j["z"] = e.z;
    j["level"] = e.level ? nlohmann::ordered_json(*e.level) : nlohmann::ordered_json(nullptr);
    j["count"] = e.count;
    j["samples"] = e.samples ? nlohmann::ordered_json(*e.samples) : nlohmann::ordered_json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

inline BenchmarkManifest parse_manifest_jsonl(std::istream& in, const std::string& name = "") {
  BenchmarkManifest m;
  m.name = name;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.dataset = j.at("dataset").get<std::string>();
      e.label = j.at("class").get<std::string>();
      e.split = j.at("split").get<std::string>();
      e.z = j.at("z").get<int>();
      if (!j.at("level").is_null()) e.level = j["level"].get<int>();
      e.count = j.at("count").get<std::size_t>();
      if (j.contains("samples") && !j["samples"].is_null())
        e.samples = j["samples"].get<std::vector<std::string>>();
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(name.empty() ? "<manifest>" : name, lineno, ex.what());
    }
  }
  return m;
}

/// Pool file: JSON-lines {dataset, class, count} or {dataset, class, samples}.
inline std::vector<ClassPool> read_pools(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::vector<ClassPool> pools;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClassPool p;
      p.key = {j.at("dataset").get<std::string>(), j.at("class").get<std::string>()};
      if (j.contains("samples")) {
        p.samples = j["samples"].get<std::vector<std::string>>();
        p.available = p.samples.size();
      } else {
        p.available = j.at("count").get<std::size_t>();
      }
      pools.push_back(std::move(p));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path.string(), lineno, ex.what());
    }
  }
  return pools;
}

}  // namespace oodbench::bench

#endif  // OODBENCH_BENCHFORGE_HPP
