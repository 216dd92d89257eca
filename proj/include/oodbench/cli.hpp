#ifndef OODBENCH_CLI_HPP
#define OODBENCH_CLI_HPP

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "benchforge.hpp"
#include "error.hpp"
#include "io.hpp"
#include "matrix_store.hpp"
#include "metrics.hpp"
#include "oodl.hpp"
#include "predgraph.hpp"
#include "refdata.hpp"
#include "report.hpp"
#include "scorers.hpp"
#include "scores.hpp"
#include "wordnet.hpp"

namespace oodbench::cli {

namespace fs = std::filesystem;

inline constexpr const char* kSeedEnv = "OODBENCH_SEED";

namespace detail {

struct TaxonomySource {
  std::string dict;
  std::vector<std::string> data;

  void attach(CLI::App* app) {
    auto* d = app->add_option("--dict", dict, "WordNet dict/ directory (data.noun, index.noun)");
    auto* f = app->add_option("--data", data, "WordNet-format data file(s)");
    d->excludes(f);
  }

  wordnet::Taxonomy load() const {
    if (!dict.empty()) return wordnet::load_dict(dict);
    if (data.empty()) throw UserError("one of --dict or --data is required");
    std::vector<fs::path> paths(data.begin(), data.end());
    return wordnet::parse_wordnet(paths);
  }
};

inline std::vector<bench::ClassKey> read_class_list(const fs::path& path) {
  auto in = io::open_input(path);
  std::vector<bench::ClassKey> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto f = text::split(line, '\t');
    if (f.size() < 2) throw ParseError(path.string(), lineno, "expected dataset<TAB>class");
    out.push_back({f[0], f[1]});
  }
  return out;
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  io::write_atomic(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UserError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

/// Runs one subcommand. 0 on success, 1 on user error (bad flags, bad input),
/// 2 on an internal invariant violation.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"oodbench: semantic OOD benchmark construction and evaluation", "oodbench"};
  app.require_subcommand(1);
  app.allow_windows_style_options(false);
  std::function<void()> action;
  auto on = [&](CLI::App* sub, std::function<void()> fn) {
    sub->callback([&action, fn = std::move(fn)] { action = fn; });
  };
  auto seed_option = [](CLI::App* sub, std::uint64_t& seed) {
    sub->add_option("--seed", seed, "global seed")->envname(kSeedEnv)->capture_default_str();
  };

  // wordnet ------------------------------------------------------------------
  auto* wn = app.add_subcommand("wordnet", "taxonomy statistics and synset similarity");
  wn->require_subcommand(1);
  detail::TaxonomySource wn_src_info, wn_src_sim;
  auto* wn_info = wn->add_subcommand("info", "synset count and maximum depth");
  wn_src_info.attach(wn_info);
  on(wn_info, [&] {
    const auto t = wn_src_info.load();
    nlohmann::ordered_json j;
    j["synsets"] = t.size();
    j["max_depth"] = t.max_depth('n');
    out << j.dump(2) << "\n";
  });
  auto* wn_sim = wn->add_subcommand("similarity", "path, Wu-Palmer, Leacock-Chodorow and combined scores");
  wn_src_sim.attach(wn_sim);
  std::string syn_a, syn_b;
  wn_sim->add_option("--a", syn_a, "synset (n02084071 or dog.n.01)")->required();
  wn_sim->add_option("--b", syn_b, "synset (n02121620 or cat.n.01)")->required();
  on(wn_sim, [&] {
    const auto t = wn_src_sim.load();
    const auto a = t.resolve(syn_a), b = t.resolve(syn_b);
    nlohmann::ordered_json j;
    j["a"] = a.str();
    j["b"] = b.str();
    j["shortest_path"] = wordnet::shortest_path_len(t, a, b);
    j["lcs"] = wordnet::lcs(t, a, b).str();
    j["path"] = wordnet::path_similarity(t, a, b);
    j["wup"] = wordnet::wup_similarity(t, a, b);
    j["lch"] = wordnet::lch_similarity(t, a, b);
    j["combined"] = wordnet::combined_benchmark_similarity(t, a, b);
    out << j.dump(2) << "\n";
  });

  // bench --------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "class mapping, distances, labels and manifests");
  bench_cmd->require_subcommand(1);

  auto* b_map = bench_cmd->add_subcommand("map", "map dataset classes to synsets");
  detail::TaxonomySource map_src;
  map_src.attach(b_map);
  std::string map_classes, map_overrides, map_out;
  b_map->add_option("--classes", map_classes, "TSV dataset<TAB>class")->required();
  b_map->add_option("--overrides", map_overrides, "manual mapping TSV");
  b_map->add_option("--out", map_out, "mapping TSV")->required();
  on(b_map, [&] {
    const auto t = map_src.load();
    std::map<bench::ClassKey, std::vector<wordnet::SynsetId>> automatic;
    for (const auto& key : detail::read_class_list(map_classes))
      automatic[key] = bench::auto_map_label(key.label, t);
    std::vector<bench::OverrideRow> overrides;
    if (!map_overrides.empty()) overrides = bench::read_overrides(map_overrides);
    const auto m = bench::load_class_mapping(automatic, overrides, t);
    bench::write_mapping(map_out, m);
    out << "mapped " << m.entries().size() << " classes\n";
  });

  auto* b_dist = bench_cmd->add_subcommand("distances", "semantic distance of each class to the ID set");
  detail::TaxonomySource dist_src;
  dist_src.attach(b_dist);
  std::string dist_mapping, dist_id, dist_source, dist_out;
  b_dist->add_option("--mapping", dist_mapping, "mapping TSV")->required();
  b_dist->add_option("--id-dataset", dist_id, "in-distribution dataset name")->required();
  b_dist->add_option("--source-dataset", dist_source, "dataset whose classes are scored")->required();
  b_dist->add_option("--out", dist_out, "distance table TSV")->required();
  on(b_dist, [&] {
    const auto t = dist_src.load();
    const auto m = bench::read_mapping(dist_mapping, t);
    const auto table = bench::build_distance_table(m, t, dist_source, m.classes_of(dist_id));
    bench::write_distance_table(dist_out, table);
    out << "wrote " << table.size() << " rows\n";
  });

  auto* b_assign = bench_cmd->add_subcommand("assign", "ID/OOD labels from a distance threshold");
  std::string assign_table, assign_preset, assign_out;
  double assign_tau = -1.0;
  b_assign->add_option("--table", assign_table, "distance table TSV")->required();
  auto* tau_opt = b_assign->add_option("--tau", assign_tau, "distance threshold, ID iff distance <= tau");
  b_assign->add_option("--preset", assign_preset, "t40, t45 or t50")->excludes(tau_opt);
  b_assign->add_option("--out", assign_out, "labels TSV")->required();
  on(b_assign, [&] {
    double tau = assign_tau;
    if (!assign_preset.empty()) tau = bench::tau_preset(assign_preset);
    else if (assign_tau < 0.0) throw UserError("one of --tau or --preset is required");
    const auto labels = bench::assign_ood_labels(bench::read_distance_table(assign_table), tau);
    bench::write_labels(assign_out, labels);
    std::size_t n_id = 0;
    for (const auto& [_, z] : labels) n_id += z == 0;
    out << "ID classes: " << n_id << ", OOD classes: " << labels.size() - n_id << "\n";
  });

  auto* b_build = bench_cmd->add_subcommand("build", "write a benchmark manifest");
  std::string build_recipe, build_pools, build_id, build_labels, build_levels, build_name, build_out;
  std::size_t build_id_quota = 0, build_ood_quota = 0;
  bool build_cap = false, build_no_samples = false;
  std::uint64_t build_seed = 0;
  b_build->add_option("--recipe", build_recipe,
                      "baseline, inter_dataset, wordnet_tk, facets_t1, facets_t2")->required();
  b_build->add_option("--pools", build_pools, "class pool JSONL")->required();
  b_build->add_option("--id-dataset", build_id, "in-distribution dataset name")->required();
  b_build->add_option("--id-quota", build_id_quota, "samples per ID class and split")->required();
  b_build->add_option("--ood-quota", build_ood_quota, "samples per OOD class and split")->required();
  b_build->add_option("--labels", build_labels, "labels TSV (wordnet_tk)");
  b_build->add_option("--levels", build_levels, "mapping TSV carrying OODness levels (facets)");
  b_build->add_option("--name", build_name, "manifest name");
  b_build->add_flag("--cap", build_cap, "draw fewer samples when a class is too small");
  b_build->add_flag("--no-samples", build_no_samples, "omit sample id lists");
  seed_option(b_build, build_seed);
  b_build->add_option("--out", build_out, "manifest JSONL")->required();
  on(b_build, [&] {
    bench::ManifestRequest req;
    req.recipe = bench::parse_recipe(build_recipe);
    req.name = build_name.empty() ? bench::recipe_name(req.recipe) : build_name;
    req.id_dataset = build_id;
    req.pools = bench::read_pools(build_pools);
    if (!build_labels.empty()) req.labels = bench::read_labels(build_labels);
    if (!build_levels.empty())
      for (const auto& row : bench::read_overrides(build_levels))
        if (row.level) req.levels[row.key] = *row.level;
    req.id_quota = build_id_quota;
    req.ood_quota = build_ood_quota;
    req.cap_to_available = build_cap;
    req.include_samples = !build_no_samples;
    req.seed = build_seed;
    const auto m = bench::build_manifest(req);
    io::write_atomic(build_out, bench::manifest_jsonl(m));
    for (const char* split : {"val", "test"}) {
      const auto t = m.totals(split);
      out << split << ": ID " << t.id_classes << " classes / " << t.id_samples << " samples, OOD "
          << t.ood_classes << " classes / " << t.ood_samples << " samples\n";
    }
  });

  // score --------------------------------------------------------------------
  auto* score_cmd = app.add_subcommand("score", "confidence scores from logits or a reference network");
  std::string score_method = "msp", score_logits, score_net, score_inputs, score_out;
  double score_t = 1000.0, score_eps = 0.0014;
  score_cmd->add_option("--method", score_method, "msp, ts, mlv, odin, ip_ts_mlv")->capture_default_str();
  score_cmd->add_option("--T", score_t, "temperature")->capture_default_str();
  score_cmd->add_option("--eps", score_eps, "perturbation magnitude")->capture_default_str();
  score_cmd->add_option("--logits", score_logits, "logit matrix store");
  score_cmd->add_option("--net", score_net, "reference network JSON (odin, ip_ts_mlv)");
  score_cmd->add_option("--inputs", score_inputs, "input matrix store (odin, ip_ts_mlv)");
  score_cmd->add_option("--out", score_out, "score CSV")->required();
  on(score_cmd, [&] {
    scorers::ScorerConfig cfg{scorers::parse_method(score_method), score_t, score_eps};
    ScoreVector s;
    if (cfg.method == scorers::Method::odin || cfg.method == scorers::Method::ip_ts_mlv) {
      if (score_net.empty() || score_inputs.empty())
        throw UserError(score_method + " needs --net and --inputs");
      s = scorers::perturb_and_score(scorers::refnet_from_json(detail::read_json(score_net)),
                                     store::read(score_inputs), cfg);
    } else {
      if (score_logits.empty()) throw UserError(score_method + " needs --logits");
      s = scorers::score_logits(store::read(score_logits), cfg);
    }
    write_scores_csv(score_out, s);
    out << "scored " << s.size() << " samples\n";
  });

  // oodl ---------------------------------------------------------------------
  auto* oodl_cmd = app.add_subcommand("oodl", "one-class detectors on layer features");
  oodl_cmd->require_subcommand(1);
  oodl::DetectorConfig det_cfg;
  auto detector_options = [&](CLI::App* sub) {
    seed_option(sub, det_cfg.seed);
    sub->add_option("--epochs", det_cfg.epochs, "passes over the training batches")->capture_default_str();
    sub->add_option("--batch-size", det_cfg.batch_size, "rows per batch")->capture_default_str();
    sub->add_option("--components", det_cfg.n_components, "kernel map dimension")->capture_default_str();
  };
  std::string oodl_features, oodl_val, oodl_out;
  auto* o_train = oodl_cmd->add_subcommand("train", "grid-train a detector on one layer");
  o_train->add_option("--features", oodl_features, "training feature store (ID rows)")->required();
  o_train->add_option("--val", oodl_val, "validation feature store (ID and OOD rows)")->required();
  o_train->add_option("--out", oodl_out, "model JSON")->required();
  detector_options(o_train);
  on(o_train, [&] {
    det_cfg.on_candidate = [&](const oodl::CandidateInfo& c) {
      out << "cell " << c.index << " nu=" << c.nu << " kernel=" << oodl::kernel_name(c.kernel)
          << " average=" << (c.average ? "true" : "false") << " val_auroc=" << c.val_auroc << "\n";
    };
    const auto r = oodl::train_detector(store::read(oodl_features), store::read(oodl_val), det_cfg);
    detail::write_json(oodl_out, oodl::model_to_json(r.model));
    out << "selected val_auroc=" << r.model.val_auroc << "\n";
  });

  std::string sel_train, sel_val, sel_out;
  auto* o_sel = oodl_cmd->add_subcommand("select-layer", "train per layer and keep the best");
  o_sel->add_option("--train", sel_train, "training feature archive")->required();
  o_sel->add_option("--val", sel_val, "validation feature archive")->required();
  o_sel->add_option("--out", sel_out, "model JSON")->required();
  detector_options(o_sel);
  on(o_sel, [&] {
    const auto sel = oodl::select_layer(store::read_archive(sel_train), store::read_archive(sel_val), det_cfg);
    for (const auto& [layer, auc] : sel.per_layer) out << "layer " << layer << " val_auroc=" << auc << "\n";
    out << "selected layer " << sel.layer << "\n";
    detail::write_json(sel_out, oodl::model_to_json(sel.model));
  });

  std::string os_model, os_features, os_out;
  auto* o_score = oodl_cmd->add_subcommand("score", "score features with a trained model");
  o_score->add_option("--model", os_model, "model JSON")->required();
  o_score->add_option("--features", os_features, "feature store")->required();
  o_score->add_option("--out", os_out, "score CSV")->required();
  on(o_score, [&] {
    const auto model = oodl::model_from_json(detail::read_json(os_model));
    const auto s = model.score(store::read(os_features));
    write_scores_csv(os_out, s);
    out << "scored " << s.size() << " samples\n";
  });

  // eval ---------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "AUROC, FPR at target TPR and detection error");
  std::string eval_scores, eval_out, eval_method, eval_dataset, eval_mode = "at_tpr";
  double eval_tpr = 0.95;
  eval_cmd->add_option("--scores", eval_scores, "score CSV")->required();
  eval_cmd->add_option("--out", eval_out, "report JSON")->required();
  eval_cmd->add_option("--method", eval_method, "method label (default: score file stem)");
  eval_cmd->add_option("--dataset", eval_dataset, "dataset label");
  eval_cmd->add_option("--tpr", eval_tpr, "target TPR")->capture_default_str();
  eval_cmd->add_option("--det-err", eval_mode, "at_tpr or min")
      ->check(CLI::IsMember({"at_tpr", "min"}))
      ->capture_default_str();
  on(eval_cmd, [&] {
    auto r = metrics::evaluate(read_scores_csv(eval_scores), eval_tpr,
                               eval_mode == "min" ? metrics::DetectionErrorMode::minimum
                                                  : metrics::DetectionErrorMode::at_target_tpr);
    r.method = eval_method.empty() ? fs::path(eval_scores).stem().string() : eval_method;
    r.dataset = eval_dataset;
    detail::write_json(eval_out, report::to_json(r));
    out << "auroc=" << r.auroc << " fpr95=" << r.fpr95 << " det_err=" << r.det_err << "\n";
  });

  // graph --------------------------------------------------------------------
  auto* graph_cmd = app.add_subcommand("graph", "misclassification graph");
  graph_cmd->require_subcommand(1);
  std::string gb_pred, gb_out;
  auto* g_build = graph_cmd->add_subcommand("build", "edge list from gt<TAB>pred pairs");
  g_build->add_option("--predictions", gb_pred, "TSV gt<TAB>pred")->required();
  g_build->add_option("--out", gb_out, "edge TSV")->required();
  on(g_build, [&] {
    const auto g = graph::build_graph(graph::read_predictions(gb_pred));
    graph::write_graph_tsv(gb_out, g);
    out << "nodes " << g.node_count() << ", edges " << g.edge_count() << "\n";
  });

  std::string gp_graph, gp_out, gp_log;
  graph::PruneConfig prune_cfg;
  bool keep_self = false, keep_intra = false, keep_same = false, keep_isolated = false;
  auto* g_prune = graph_cmd->add_subcommand("prune", "staged edge filtering");
  g_prune->add_option("--graph", gp_graph, "edge TSV")->required();
  g_prune->add_option("--out", gp_out, "pruned edge TSV")->required();
  g_prune->add_option("--log", gp_log, "stage log JSON");
  g_prune->add_option("--min-weight", prune_cfg.min_weight, "drop edges lighter than this")
      ->capture_default_str();
  g_prune->add_flag("--keep-self-loops", keep_self);
  g_prune->add_flag("--keep-intra-dataset", keep_intra);
  g_prune->add_flag("--keep-same-name", keep_same);
  g_prune->add_flag("--keep-isolated", keep_isolated);
  on(g_prune, [&] {
    prune_cfg.drop_self_loops = !keep_self;
    prune_cfg.drop_intra_dataset = !keep_intra;
    prune_cfg.drop_same_name = !keep_same;
    prune_cfg.drop_isolated = !keep_isolated;
    const auto r = graph::prune_graph(graph::read_graph_tsv(gp_graph), prune_cfg);
    graph::write_graph_tsv(gp_out, r.graph);
    if (!gp_log.empty()) io::write_atomic(gp_log, graph::stage_log_json(r.log));
    for (const auto& s : r.log) out << s.stage << ": " << s.nodes << " nodes, " << s.edges << " edges\n";
  });

  std::string gl_graph, gl_out;
  std::size_t gl_iterations = 100;
  std::uint64_t gl_seed = 0;
  graph::Fa2Params fa2;
  auto* g_layout = graph_cmd->add_subcommand("layout", "ForceAtlas2 positions");
  g_layout->add_option("--graph", gl_graph, "edge TSV")->required();
  g_layout->add_option("--out", gl_out, "layout JSON")->required();
  g_layout->add_option("--iterations", gl_iterations)->capture_default_str();
  g_layout->add_option("--gravity", fa2.gravity)->capture_default_str();
  g_layout->add_option("--scaling", fa2.scaling)->capture_default_str();
  g_layout->add_flag("--linlog", fa2.linlog);
  seed_option(g_layout, gl_seed);
  on(g_layout, [&] {
    const auto layout = graph::layout_forceatlas2(graph::read_graph_tsv(gl_graph), gl_iterations, gl_seed, fa2);
    io::write_atomic(gl_out, graph::layout_json(layout));
    out << "laid out " << layout.positions.size() << " nodes in " << layout.iterations << " iterations\n";
  });

  // fixtures -----------------------------------------------------------------
  auto* fx = app.add_subcommand("fixtures", "synthetic fixtures in the interchange formats");
  fx->require_subcommand(1);

  refdata::TaxonomySpec tax_spec;
  std::string tax_kind = "chain", tax_out;
  auto* f_tax = fx->add_subcommand("taxonomy", "toy taxonomy as a WordNet data file");
  f_tax->add_option("--kind", tax_kind, "chain, diamond, star, random")
      ->check(CLI::IsMember({"chain", "diamond", "star", "random"}))
      ->capture_default_str();
  f_tax->add_option("--nodes", tax_spec.nodes)->capture_default_str();
  f_tax->add_option("--edge-probability", tax_spec.edge_probability)->capture_default_str();
  seed_option(f_tax, tax_spec.seed);
  f_tax->add_option("--out", tax_out, "data file")->required();
  on(f_tax, [&] {
    tax_spec.kind = tax_kind == "chain"     ? refdata::TaxonomyKind::chain
                    : tax_kind == "diamond" ? refdata::TaxonomyKind::diamond
                    : tax_kind == "star"    ? refdata::TaxonomyKind::star
                                            : refdata::TaxonomyKind::random;
    const auto data = refdata::gen_taxonomy(tax_spec);
    wordnet::parse_wordnet_text(data);
    io::write_atomic(tax_out, data);
  });

  refdata::GaussianSpec g_spec;
  std::string g_out;
  auto* f_gauss = fx->add_subcommand("gaussians", "ID train split and ID+OOD validation split");
  f_gauss->add_option("--layer", g_spec.layer)->capture_default_str();
  f_gauss->add_option("--dims", g_spec.dims)->capture_default_str();
  f_gauss->add_option("--n-train", g_spec.n_train)->capture_default_str();
  f_gauss->add_option("--n-val-id", g_spec.n_val_id)->capture_default_str();
  f_gauss->add_option("--n-val-ood", g_spec.n_val_ood)->capture_default_str();
  f_gauss->add_option("--separation", g_spec.separation, "OOD mean offset per coordinate, in sigmas")
      ->capture_default_str();
  f_gauss->add_option("--sigma", g_spec.sigma)->capture_default_str();
  seed_option(f_gauss, g_spec.seed);
  f_gauss->add_option("--out", g_out, "output directory (train/, val/)")->required();
  on(f_gauss, [&] {
    const auto split = refdata::gen_gaussians(g_spec);
    store::write_dir(fs::path(g_out) / "train", split.train);
    store::write_dir(fs::path(g_out) / "val", split.val);
  });

  std::uint64_t arc_seed = 0;
  std::string arc_out;
  auto* f_arc = fx->add_subcommand("archive", "two-layer archive: a separable layer and a noise layer");
  seed_option(f_arc, arc_seed);
  f_arc->add_option("--out", arc_out, "output directory (train/, val/)")->required();
  on(f_arc, [&] {
    refdata::GaussianSpec sep{.layer = "separable", .separation = 6.0, .seed = arc_seed};
    refdata::GaussianSpec noise{.layer = "noise", .separation = 0.0, .seed = arc_seed};
    const auto [train, val] = refdata::gen_layer_archive({sep, noise});
    store::write_archive(fs::path(arc_out) / "train", train);
    store::write_archive(fs::path(arc_out) / "val", val);
  });

  refdata::ClassifierSpec c_spec;
  std::string c_out;
  auto* f_cls = fx->add_subcommand("classifier", "toy classification problem with a trained network");
  f_cls->add_option("--classes", c_spec.classes)->capture_default_str();
  f_cls->add_option("--dims", c_spec.dims)->capture_default_str();
  f_cls->add_option("--hidden", c_spec.hidden)->capture_default_str();
  f_cls->add_option("--n-per-class", c_spec.n_per_class)->capture_default_str();
  f_cls->add_option("--n-ood", c_spec.n_ood)->capture_default_str();
  f_cls->add_option("--separation", c_spec.separation)->capture_default_str();
  f_cls->add_option("--iterations", c_spec.iterations)->capture_default_str();
  seed_option(f_cls, c_spec.seed);
  f_cls->add_option("--out", c_out, "output directory")->required();
  on(f_cls, [&] {
    const auto p = refdata::gen_classifier_problem(c_spec);
    const fs::path dir = c_out;
    store::write_dir(dir / "inputs", p.inputs);
    store::write_dir(dir / "logits", scorers::refnet_logits(p.net, p.inputs));
    store::write_archive(dir / "archive", refdata::classifier_archive(p, c_spec.layers));
    detail::write_json(dir / "net.json", scorers::refnet_to_json(p.net));
    out << "train accuracy " << p.train_accuracy << "\n";
  });

  // report -------------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "results table from report JSON files");
  std::vector<std::string> rep_inputs;
  std::string rep_out, rep_csv;
  rep->add_option("--reports", rep_inputs, "report JSON files")->required();
  rep->add_option("--out", rep_out, "text table (stdout when omitted)");
  rep->add_option("--csv", rep_csv, "CSV table");
  on(rep, [&] {
    std::vector<metrics::EvalReport> reports;
    for (const auto& p : rep_inputs) reports.push_back(report::from_json(detail::read_json(p)));
    const auto r = report::render_report(reports);
    if (rep_out.empty()) out << r.text;
    else io::write_atomic(rep_out, r.text);
    if (!rep_csv.empty()) io::write_atomic(rep_csv, r.csv);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  try {
    if (action) action();
    return 0;
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace oodbench::cli

#endif  // OODBENCH_CLI_HPP
