#ifndef OODBENCH_REPORT_HPP
#define OODBENCH_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "metrics.hpp"

namespace oodbench::report {

using metrics::EvalReport;

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["method"] = r.method;
  j["dataset"] = r.dataset;
  j["auroc"] = r.auroc;
  j["fpr95"] = r.fpr95;
  j["det_err"] = r.det_err;
  j["n_id"] = r.n_id;
  j["n_ood"] = r.n_ood;
  j["threshold"] = r.threshold;
  return j;
}

inline EvalReport from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.auroc = j.at("auroc").get<double>();
    r.fpr95 = j.at("fpr95").get<double>();
    r.det_err = j.at("det_err").get<double>();
    r.n_id = j.at("n_id").get<std::size_t>();
    r.n_ood = j.at("n_ood").get<std::size_t>();
    r.threshold = j.value("threshold", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw UserError(std::string("bad report JSON: ") + e.what());
  }
  return r;
}

struct RenderedReport {
  std::string text;
  std::string csv;
};

namespace detail {

inline double pct(double v) { return std::round(v * 10000.0) / 100.0; }

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void first_seen(std::vector<std::string>& order, const std::string& s) {
  if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

/// Rows are datasets, columns methods; each cell is FPR@TPR / detection error
/// / AUROC in percent. Within a row the best value of each metric gets a `*`
/// (lower FPR and error, higher AUROC); equal displayed values are all marked.
inline RenderedReport render_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UserError("render_report: no reports given");
  std::vector<std::string> datasets, methods;
  std::map<std::pair<std::string, std::string>, EvalReport> cells;
  for (const auto& r : reports) {
    detail::first_seen(datasets, r.dataset);
    detail::first_seen(methods, r.method);
    if (!cells.emplace(std::pair{r.dataset, r.method}, r).second)
      throw UserError("duplicate report for dataset '" + r.dataset + "', method '" + r.method + "'");
  }

  std::vector<std::vector<std::string>> grid;
  grid.push_back({"dataset"});
  for (const auto& m : methods) grid.front().push_back(m);

  std::string csv = "dataset";
  for (const auto& m : methods) csv += "," + m + ":fpr95," + m + ":det_err," + m + ":auroc";
  csv += "\n";

  for (const auto& d : datasets) {
    std::optional<double> best_fpr, best_err, best_auc;
    for (const auto& m : methods) {
      auto it = cells.find({d, m});
      if (it == cells.end()) continue;
      const double f = detail::pct(it->second.fpr95), e = detail::pct(it->second.det_err),
                   a = detail::pct(it->second.auroc);
      best_fpr = best_fpr ? std::min(*best_fpr, f) : f;
      best_err = best_err ? std::min(*best_err, e) : e;
      best_auc = best_auc ? std::max(*best_auc, a) : a;
    }
    std::vector<std::string> row{d};
    csv += d;
    for (const auto& m : methods) {
      auto it = cells.find({d, m});
      if (it == cells.end()) {
        row.push_back("-");
        csv += ",,,";
        continue;
      }
      const double f = detail::pct(it->second.fpr95), e = detail::pct(it->second.det_err),
                   a = detail::pct(it->second.auroc);
      row.push_back(detail::fmt2(f) + (f == *best_fpr ? "*" : "") + "/" + detail::fmt2(e) +
                    (e == *best_err ? "*" : "") + "/" + detail::fmt2(a) + (a == *best_auc ? "*" : ""));
      csv += "," + detail::fmt2(f) + "," + detail::fmt2(e) + "," + detail::fmt2(a);
    }
    csv += "\n";
    grid.push_back(std::move(row));
  }

  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string text;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < grid[r].size(); ++c) {
      if (c) line += " | ";
      line += detail::pad(grid[r][c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    text += line + "\n";
    if (r == 0) {
      std::string rule;
      for (std::size_t c = 0; c < width.size(); ++c) {
        if (c) rule += "-+-";
        rule += std::string(width[c], '-');
      }
      text += rule + "\n";
    }
  }
  text += "cells: FPR@95%TPR / detection error / AUROC (%), * = best in row\n";
  return {std::move(text), std::move(csv)};
}

}  // namespace oodbench::report

#endif  // OODBENCH_REPORT_HPP
