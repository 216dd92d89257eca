#ifndef OODBENCH_WORDNET_HPP
#define OODBENCH_WORDNET_HPP

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace oodbench::wordnet {

/// Offset reserved for the per-pos virtual root. Real offsets have 8 decimal
/// digits, so this value can never collide with one.
inline constexpr std::uint32_t kVirtualRootOffset = 100000000;

/// Canonical part-of-speech letter: satellite adjectives fold into 'a'.
inline char canonical_pos(char c) {
  switch (c) {
    case 'n': case 'v': case 'a': case 'r': return c;
    case 's': return 'a';
    default: throw UserError(std::string("unknown part of speech '") + c + "'");
  }
}

struct SynsetId {
  char pos = 'n';
  std::uint32_t offset = 0;

  friend auto operator<=>(const SynsetId&, const SynsetId&) = default;

  bool is_virtual_root() const { return offset == kVirtualRootOffset; }

  /// `n02084071` style; virtual roots render as `n*root*`.
  std::string str() const {
    if (is_virtual_root()) return std::string(1, pos) + "*root*";
    std::string digits = std::to_string(offset);
    return std::string(1, pos) + std::string(8 - digits.size(), '0') + digits;
  }

  static SynsetId parse(std::string_view s) {
    if (s.size() != 9) throw UserError("malformed synset id '" + std::string(s) + "'");
    SynsetId id;
    id.pos = canonical_pos(s[0]);
    auto [p, ec] = std::from_chars(s.data() + 1, s.data() + 9, id.offset);
    if (ec != std::errc() || p != s.data() + 9)
      throw UserError("malformed synset id '" + std::string(s) + "'");
    return id;
  }

  std::uint64_t key() const { return (static_cast<std::uint64_t>(pos) << 32) | offset; }
};

struct HypernymRef {
  SynsetId target;
  bool instance = false;
};

struct Synset {
  SynsetId id;
  std::vector<std::string> lemmas;
  std::vector<HypernymRef> hypernyms;  // real edges only, never the virtual root
  std::string gloss;
};

/// Hypernym DAG over parsed synsets plus one virtual root per part of speech.
/// Immutable once built.
class Taxonomy {
 public:
  std::size_t size() const { return nodes_.size() - roots_.size(); }

  bool contains(SynsetId id) const { return index_.contains(id.key()); }

  const Synset& synset(SynsetId id) const { return nodes_[require(id)].synset; }

  SynsetId virtual_root(char pos) const {
    return SynsetId{canonical_pos(pos), kVirtualRootOffset};
  }

  /// Synsets carrying `lemma` (exact, lowercase, underscores for spaces), in
  /// sense order when an index file was supplied, data-file order otherwise.
  std::span<const SynsetId> lookup(std::string_view lemma, char pos = 'n') const {
    auto it = lemma_index_.find(lemma_key(lemma, canonical_pos(pos)));
    if (it == lemma_index_.end()) return {};
    return it->second;
  }

  /// Resolves `n02084071` ids and `dog.n.01` sense names.
  SynsetId resolve(std::string_view name) const {
    if (name.size() == 9 && std::isdigit(static_cast<unsigned char>(name[1])) &&
        name.find('.') == std::string_view::npos) {
      const auto id = SynsetId::parse(name);
      require(id);
      return id;
    }
    const auto parts = text::split(name, '.');
    if (parts.size() < 3) throw UserError("cannot resolve synset '" + std::string(name) + "'");
    const std::string sense = parts.back();
    const char pos = canonical_pos(parts[parts.size() - 2].empty() ? '?' : parts[parts.size() - 2][0]);
    std::string lemma = parts[0];
    for (std::size_t i = 1; i + 2 < parts.size(); ++i) lemma += "." + parts[i];
    const auto hits = lookup(text::lower(lemma), pos);
    int n = 0;
    auto [p, ec] = std::from_chars(sense.data(), sense.data() + sense.size(), n);
    if (ec != std::errc() || n < 1 || static_cast<std::size_t>(n) > hits.size())
      throw UserError("no synset named '" + std::string(name) + "'");
    return hits[static_cast<std::size_t>(n - 1)];
  }

  /// Longest root path in node count; the virtual root has depth 0.
  int depth(SynsetId id) const { return nodes_[require(id)].depth; }

  /// Maximum depth over real synsets of `pos`, 0 when there are none.
  int max_depth(char pos = 'n') const {
    auto it = max_depth_.find(canonical_pos(pos));
    return it == max_depth_.end() ? 0 : it->second;
  }

  /// Direct hypernyms, with the virtual root standing in for none.
  std::vector<SynsetId> parents(SynsetId id) const {
    std::vector<SynsetId> out;
    for (auto p : nodes_[require(id)].parents) out.push_back(nodes_[p].synset.id);
    return out;
  }

  /// Every real synset id in (pos, offset) order.
  std::vector<SynsetId> ids() const {
    std::vector<SynsetId> out;
    for (const auto& n : nodes_)
      if (!n.synset.id.is_virtual_root()) out.push_back(n.synset.id);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Minimum upward edge count from `id` to each ancestor (self at 0,
  /// virtual root included).
  std::unordered_map<std::uint32_t, int> ancestor_distances(std::uint32_t start) const {
    std::unordered_map<std::uint32_t, int> dist{{start, 0}};
    std::deque<std::uint32_t> queue{start};
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto p : nodes_[u].parents) {
        if (dist.emplace(p, dist[u] + 1).second) queue.push_back(p);
      }
    }
    return dist;
  }

  std::uint32_t require(SynsetId id) const {
    auto it = index_.find(id.key());
    if (it == index_.end()) throw UserError("unknown synset " + id.str());
    return it->second;
  }

  const SynsetId& id_at(std::uint32_t idx) const { return nodes_[idx].synset.id; }

 private:
  friend class TaxonomyBuilder;

  struct Node {
    Synset synset;
    std::vector<std::uint32_t> parents;
    int depth = 0;
  };

  static std::string lemma_key(std::string_view lemma, char pos) {
    std::string key(lemma);
    key += '\t';
    key += pos;
    return key;
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
  std::map<char, std::uint32_t> roots_;
  std::unordered_map<std::string, std::vector<SynsetId>> lemma_index_;
  std::map<char, int> max_depth_;
};

/// Accumulates `data.<pos>` (and optional `index.<pos>`) text, then resolves
/// edges, links orphans to the virtual root and computes depths.
class TaxonomyBuilder {
 public:
  void add_data(std::istream& in, const std::string& source = "<data>") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == ' ') continue;  // license preamble
      parse_data_line(line, source, lineno);
    }
  }

  void add_data_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open " + path.string());
    add_data(in, path.string());
  }

  /// `index.<pos>` lines fix sense order: lemma pos synset_cnt p_cnt
  /// [ptr_symbol...] sense_cnt tagsense_cnt synset_offset...
  void add_index(std::istream& in, const std::string& source = "<index>") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line.front() == ' ') continue;
      const auto f = text::split_ws(line);
      if (f.size() < 4) throw ParseError(source, lineno, "truncated index line");
      const char pos = canonical_pos(f[1].empty() ? '?' : f[1][0]);
      const std::size_t synset_cnt = to_size(f[2], source, lineno);
      const std::size_t p_cnt = to_size(f[3], source, lineno);
      const std::size_t first = 4 + p_cnt + 2;
      if (f.size() < first + synset_cnt) throw ParseError(source, lineno, "truncated index line");
      std::vector<SynsetId> order;
      for (std::size_t i = 0; i < synset_cnt; ++i)
        order.push_back(SynsetId{pos, parse_offset(f[first + i], source, lineno)});
      sense_order_[text::lower(f[0]) + '\t' + pos] = std::move(order);
    }
  }

  void add_index_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open " + path.string());
    add_index(in, path.string());
  }

  Taxonomy build() && {
    Taxonomy t;
    auto ensure_root = [&](char pos) {
      if (t.roots_.contains(pos)) return;
      const auto idx = static_cast<std::uint32_t>(t.nodes_.size());
      Synset root{SynsetId{pos, kVirtualRootOffset}, {"*root*"}, {}, {}};
      t.nodes_.push_back({std::move(root), {}, 0});
      t.index_.emplace(t.nodes_.back().synset.id.key(), idx);
      t.roots_.emplace(pos, idx);
    };
    ensure_root('n');

    std::sort(synsets_.begin(), synsets_.end(),
              [](const Synset& a, const Synset& b) { return a.id < b.id; });
    for (auto& s : synsets_) {
      ensure_root(s.id.pos);
      const auto idx = static_cast<std::uint32_t>(t.nodes_.size());
      t.index_.emplace(s.id.key(), idx);
      t.nodes_.push_back({std::move(s), {}, 0});
    }
    synsets_.clear();

    for (auto& node : t.nodes_) {
      if (node.synset.id.is_virtual_root()) continue;
      for (const auto& h : node.synset.hypernyms) {
        auto it = t.index_.find(h.target.key());
        if (it == t.index_.end())
          throw UserError("synset " + node.synset.id.str() + " names unknown hypernym " +
                          h.target.str());
        if (h.target.pos != node.synset.id.pos)
          throw UserError("synset " + node.synset.id.str() + " has cross-pos hypernym " +
                          h.target.str());
        if (std::find(node.parents.begin(), node.parents.end(), it->second) == node.parents.end())
          node.parents.push_back(it->second);
      }
      if (node.parents.empty()) node.parents.push_back(t.roots_.at(node.synset.id.pos));
      for (const auto& lemma : node.synset.lemmas)
        t.lemma_index_[Taxonomy::lemma_key(lemma, node.synset.id.pos)].push_back(node.synset.id);
    }

    for (auto& [key, order] : sense_order_) {
      auto it = t.lemma_index_.find(key);
      if (it == t.lemma_index_.end()) continue;
      std::vector<SynsetId> merged;
      for (const auto& id : order)
        if (std::find(it->second.begin(), it->second.end(), id) != it->second.end())
          merged.push_back(id);
      for (const auto& id : it->second)
        if (std::find(merged.begin(), merged.end(), id) == merged.end()) merged.push_back(id);
      it->second = std::move(merged);
    }

    compute_depths(t);
    return t;
  }

 private:
  static std::size_t to_size(const std::string& s, const std::string& source, std::size_t line,
                             int base = 10) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ParseError(source, line, "expected a number, got '" + s + "'");
    return v;
  }

  static std::uint32_t parse_offset(const std::string& s, const std::string& source,
                                    std::size_t line) {
    if (s.size() != 8) throw ParseError(source, line, "offset '" + s + "' is not 8 digits");
    return static_cast<std::uint32_t>(to_size(s, source, line));
  }

  static std::string clean_lemma(std::string word) {
    // Adjective syntactic markers: "(a)", "(p)", "(ip)".
    if (auto paren = word.find('('); paren != std::string::npos && word.back() == ')')
      word.erase(paren);
    return text::lower(word);
  }

  void parse_data_line(const std::string& line, const std::string& source, std::size_t lineno) {
    const auto bar = line.find(" | ");
    const std::string head = bar == std::string::npos ? line : line.substr(0, bar);
    const auto f = text::split_ws(head);
    if (f.size() < 5) throw ParseError(source, lineno, "truncated synset line");

    Synset s;
    s.id.offset = parse_offset(f[0], source, lineno);
    if (f[2].size() != 1) throw ParseError(source, lineno, "bad ss_type '" + f[2] + "'");
    try {
      s.id.pos = canonical_pos(f[2][0]);
    } catch (const UserError& e) {
      throw ParseError(source, lineno, e.what());
    }
    const std::size_t w_cnt = to_size(f[3], source, lineno, 16);
    if (w_cnt == 0) throw ParseError(source, lineno, "synset with no words");
    std::size_t i = 4;
    if (f.size() < i + 2 * w_cnt + 1) throw ParseError(source, lineno, "truncated word list");
    for (std::size_t w = 0; w < w_cnt; ++w, i += 2) s.lemmas.push_back(clean_lemma(f[i]));
    const std::size_t p_cnt = to_size(f[i++], source, lineno);
    if (f.size() < i + 4 * p_cnt) throw ParseError(source, lineno, "truncated pointer list");
    for (std::size_t p = 0; p < p_cnt; ++p, i += 4) {
      const std::string& sym = f[i];
      if (sym != "@" && sym != "@i") continue;
      HypernymRef ref;
      ref.instance = sym == "@i";
      ref.target.offset = parse_offset(f[i + 1], source, lineno);
      if (f[i + 2].size() != 1) throw ParseError(source, lineno, "bad pointer pos");
      try {
        ref.target.pos = canonical_pos(f[i + 2][0]);
      } catch (const UserError& e) {
        throw ParseError(source, lineno, e.what());
      }
      s.hypernyms.push_back(ref);
    }
    if (bar != std::string::npos) s.gloss = text::trim(line.substr(bar + 3));

    if (!seen_.insert(s.id.key()).second)
      throw ParseError(source, lineno, "duplicate offset " + s.id.str());
    synsets_.push_back(std::move(s));
  }

  static void compute_depths(Taxonomy& t) {
    const std::size_t n = t.nodes_.size();
    std::vector<std::vector<std::uint32_t>> children(n);
    std::vector<std::size_t> pending(n, 0);
    for (std::uint32_t i = 0; i < n; ++i) {
      pending[i] = t.nodes_[i].parents.size();
      for (auto p : t.nodes_[i].parents) children[p].push_back(i);
    }
    std::deque<std::uint32_t> ready;
    for (std::uint32_t i = 0; i < n; ++i)
      if (pending[i] == 0) ready.push_back(i);
    std::size_t done = 0;
    while (!ready.empty()) {
      const auto u = ready.front();
      ready.pop_front();
      ++done;
      for (auto c : children[u]) {
        t.nodes_[c].depth = std::max(t.nodes_[c].depth, t.nodes_[u].depth + 1);
        if (--pending[c] == 0) ready.push_back(c);
      }
    }
    if (done != n) {
      // Every unfinished node keeps an unfinished parent, so walking parents
      // must revisit a node; that node sits on a cycle.
      std::uint32_t u = 0;
      while (pending[u] == 0) ++u;
      std::vector<bool> visited(n, false);
      while (!visited[u]) {
        visited[u] = true;
        for (auto p : t.nodes_[u].parents)
          if (pending[p] != 0) {
            u = p;
            break;
          }
      }
      throw UserError("hypernym cycle through synset " + t.nodes_[u].synset.id.str());
    }
    for (const auto& node : t.nodes_) {
      if (node.synset.id.is_virtual_root()) continue;
      auto& m = t.max_depth_[node.synset.id.pos];
      m = std::max(m, node.depth);
    }
  }

  std::vector<Synset> synsets_;
  std::unordered_set<std::uint64_t> seen_;
  std::map<std::string, std::vector<SynsetId>> sense_order_;
};

inline Taxonomy parse_wordnet(std::span<const std::filesystem::path> data_files) {
  TaxonomyBuilder b;
  for (const auto& p : data_files) b.add_data_file(p);
  return std::move(b).build();
}

inline Taxonomy parse_wordnet_text(const std::string& data) {
  TaxonomyBuilder b;
  std::istringstream in(data);
  b.add_data(in);
  return std::move(b).build();
}

/// Loads `data.<pos>` for each requested pos from a WordNet `dict/` directory,
/// along with `index.<pos>` for sense order when it is present.
inline Taxonomy load_dict(const std::filesystem::path& dir,
                          const std::vector<std::string>& pos_names = {"noun"}) {
  TaxonomyBuilder b;
  for (const auto& pos : pos_names) {
    b.add_data_file(dir / ("data." + pos));
    const auto index = dir / ("index." + pos);
    if (std::filesystem::exists(index)) b.add_index_file(index);
  }
  return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Similarity. Paths run through common subsumers: the distance between a and
// b is the minimum, over shared ancestors s (self and virtual root included),
// of up(a, s) + up(b, s).

namespace detail {
inline void require_same_pos(SynsetId a, SynsetId b) {
  if (a.pos != b.pos)
    throw UserError("synsets " + a.str() + " and " + b.str() + " differ in part of speech");
}
}  // namespace detail

inline int shortest_path_len(const Taxonomy& t, SynsetId a, SynsetId b) {
  const auto ia = t.require(a);
  const auto ib = t.require(b);
  detail::require_same_pos(a, b);
  if (ia == ib) return 0;
  const auto da = t.ancestor_distances(ia);
  const auto db = t.ancestor_distances(ib);
  int best = std::numeric_limits<int>::max();
  for (const auto& [node, d] : da) {
    auto it = db.find(node);
    if (it != db.end()) best = std::min(best, d + it->second);
  }
  if (best == std::numeric_limits<int>::max())
    throw InvariantError("no common subsumer for " + a.str() + " and " + b.str());
  return best;
}

/// Deepest common subsumer; ties go to the smallest id.
inline SynsetId lcs(const Taxonomy& t, SynsetId a, SynsetId b) {
  const auto ia = t.require(a);
  const auto ib = t.require(b);
  detail::require_same_pos(a, b);
  const auto da = t.ancestor_distances(ia);
  const auto db = t.ancestor_distances(ib);
  std::optional<SynsetId> best;
  int best_depth = -1;
  for (const auto& [node, d] : da) {
    if (!db.contains(node)) continue;
    const SynsetId id = t.id_at(node);
    const int depth = t.depth(id);
    if (depth > best_depth || (depth == best_depth && id < *best)) {
      best = id;
      best_depth = depth;
    }
  }
  return *best;
}

inline double path_similarity(const Taxonomy& t, SynsetId a, SynsetId b) {
  return 1.0 / (shortest_path_len(t, a, b) + 1.0);
}

/// 2·depth(lcs) / (depth(a) + depth(b)); 0 when only the virtual root subsumes both.
inline double wup_similarity(const Taxonomy& t, SynsetId a, SynsetId b) {
  const SynsetId s = lcs(t, a, b);
  return 2.0 * t.depth(s) / static_cast<double>(t.depth(a) + t.depth(b));
}

inline double lch_max(const Taxonomy& t, char pos = 'n') {
  const int d = t.max_depth(pos);
  if (d < 1) throw UserError("Leacock-Chodorow needs a taxonomy depth of at least 1");
  return std::log(2.0 * d);
}

inline double lch_similarity(const Taxonomy& t, SynsetId a, SynsetId b) {
  const int sp = shortest_path_len(t, a, b);
  const int d = t.max_depth(a.pos);
  if (d < 1) throw UserError("Leacock-Chodorow needs a taxonomy depth of at least 1");
  // ln(2D) - ln(sp + 1) == -ln((sp + 1) / 2D), exact at sp = 0.
  return std::log(2.0 * d) - std::log(sp + 1.0);
}

/// LCH divided by ln(2D), clamped into [0, 1].
inline double lch_normalized(const Taxonomy& t, SynsetId a, SynsetId b) {
  return std::clamp(lch_similarity(t, a, b) / lch_max(t, a.pos), 0.0, 1.0);
}

/// Mean of path, Wu-Palmer and normalized Leacock-Chodorow.
inline double combined_benchmark_similarity(const Taxonomy& t, SynsetId a, SynsetId b) {
  return (path_similarity(t, a, b) + wup_similarity(t, a, b) + lch_normalized(t, a, b)) / 3.0;
}

/// Prediction-pair score: mean of Wu-Palmer and path similarity.
inline double prediction_pair_similarity(const Taxonomy& t, SynsetId a, SynsetId b) {
  return (wup_similarity(t, a, b) + path_similarity(t, a, b)) / 2.0;
}

}  // namespace oodbench::wordnet

#endif  // OODBENCH_WORDNET_HPP
