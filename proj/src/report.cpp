#include "dgtta/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dgtta/error.hpp"
#include "dgtta/io.hpp"
#include "dgtta/kvdoc.hpp"
#include "dgtta/stats.hpp"

namespace dgtta {

ScoreTable score_case(const LabelMap& pred, const LabelMap& ref, const std::vector<int>& classes,
                      const std::string& method, const std::string& stage, const std::string& case_id,
                      HausdorffVariant variant) {
  ScoreTable out;
  for (int c : classes) {
    ScoreRow r{method, stage, case_id, c, dice_score(pred, ref, c), std::nullopt};
    r.hd95 = hd95(pred, ref, c, ref.spacing(), variant).value;
    out.push_back(std::move(r));
  }
  return out;
}

ScoreTable evaluate_directory(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir,
                              const std::vector<int>& classes, const std::string& method, const std::string& stage,
                              HausdorffVariant variant) {
  std::vector<std::string> ids;
  const std::string suffix = "_label.meta";
  if (!std::filesystem::is_directory(pred_dir)) throw DataError(pred_dir.string() + ": not a directory");
  for (const auto& e : std::filesystem::directory_iterator(pred_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) ids.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw DataError(pred_dir.string() + ": no *_label predictions found");
  ScoreTable out;
  for (const auto& id : ids) {
    const auto pred = load_labels(pred_dir / (id + "_label"));
    const auto ref_path = ref_dir / (id + "_label");
    if (!std::filesystem::exists(raw_meta_path(ref_path))) {
      throw DataError("no reference for case '" + id + "' in " + ref_dir.string());
    }
    const auto ref = load_labels(ref_path);
    auto rows = score_case(pred, ref, classes, method, stage, id, variant);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::string scores_csv(const ScoreTable& t) {
  std::ostringstream out;
  out << "method,stage,case,class,dice,hd95\n";
  for (const auto& r : t) {
    out << r.method << ',' << r.stage << ',' << r.case_id << ',' << r.class_id << ',' << format_double(r.dice) << ','
        << (r.hd95 ? format_double(*r.hd95) : std::string("NA")) << '\n';
  }
  return out.str();
}

void write_scores(const ScoreTable& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << scores_csv(t);
}

ScoreTable read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "method,stage,case,class,dice,hd95") {
    throw FormatError(path.string() + ": unexpected header");
  }
  ScoreTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    try {
      ScoreRow r{f[0], f[1], f[2], std::stoi(f[3]), std::stod(f[4]), std::nullopt};
      if (f[5] != "NA") r.hd95 = std::stod(f[5]);
      t.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return t;
}

namespace {

struct Group {
  std::string method, stage;
  std::vector<std::string> cases;                 // first-appearance order
  std::map<std::string, std::map<int, const ScoreRow*>> rows;  // case -> class -> row
  std::vector<int> classes;
};

std::vector<Group> group_rows(const ScoreTable& t) {
  std::vector<Group> groups;
  for (const auto& r : t) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.method == r.method && g.stage == r.stage; });
    if (it == groups.end()) {
      groups.push_back({r.method, r.stage, {}, {}, {}});
      it = groups.end() - 1;
    }
    if (!it->rows.count(r.case_id)) it->cases.push_back(r.case_id);
    it->rows[r.case_id][r.class_id] = &r;
    if (std::find(it->classes.begin(), it->classes.end(), r.class_id) == it->classes.end()) {
      it->classes.push_back(r.class_id);
    }
  }
  for (auto& g : groups) std::sort(g.classes.begin(), g.classes.end());
  return groups;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

// Class-averaged Dice per case.
std::map<std::string, double> case_dice(const Group& g) {
  std::map<std::string, double> out;
  for (const auto& [id, by_class] : g.rows) {
    double s = 0.0;
    for (const auto& [c, r] : by_class) s += r->dice;
    out[id] = s / static_cast<double>(by_class.size());
  }
  return out;
}

std::map<std::string, double> case_hd95(const Group& g) {
  std::map<std::string, double> out;
  for (const auto& [id, by_class] : g.rows) {
    double s = 0.0;
    int n = 0;
    for (const auto& [c, r] : by_class) {
      if (r->hd95) {
        s += *r->hd95;
        ++n;
      }
    }
    if (n > 0) out[id] = s / n;
  }
  return out;
}

}  // namespace

std::vector<SummaryRow> summarize(const ScoreTable& t, const std::string& reference) {
  const auto groups = group_rows(t);
  std::vector<std::map<std::string, double>> per_case;
  for (const auto& g : groups) per_case.push_back(case_dice(g));

  // Mean rank: cases scored by every group, ranked by class-averaged Dice with
  // ties sharing the average rank.
  std::vector<double> rank_sum(groups.size(), 0.0);
  std::size_t ranked_cases = 0;
  if (!groups.empty()) {
    for (const auto& id : groups[0].cases) {
      bool everywhere = true;
      for (const auto& pc : per_case) everywhere = everywhere && pc.count(id);
      if (!everywhere) continue;
      ++ranked_cases;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        double better = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < groups.size(); ++j) {
          if (per_case[j].at(id) > per_case[i].at(id)) better += 1.0;
          if (per_case[j].at(id) == per_case[i].at(id)) equal += 1.0;
        }
        rank_sum[i] += better + (equal + 1.0) / 2.0;
      }
    }
  }

  std::optional<std::size_t> ref_index;
  if (!reference.empty()) {
    for (std::size_t i = 0; i < groups.size() && !ref_index; ++i) {
      if (groups[i].method + "/" + groups[i].stage == reference) ref_index = i;
    }
    for (std::size_t i = 0; i < groups.size() && !ref_index; ++i) {
      if (groups[i].method == reference) ref_index = i;
    }
    if (!ref_index) throw InvalidArgument("reference '" + reference + "' does not name a scored method");
  }

  std::vector<SummaryRow> out;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    SummaryRow s;
    s.method = g.method;
    s.stage = g.stage;
    s.classes = g.classes;
    for (int c : g.classes) {
      std::vector<double> d, h;
      for (const auto& id : g.cases) {
        const auto& by_class = g.rows.at(id);
        auto it = by_class.find(c);
        if (it == by_class.end()) continue;
        d.push_back(it->second->dice);
        if (it->second->hd95) h.push_back(*it->second->hd95);
      }
      auto [dm, ds] = mean_std(d);
      auto [hm, hs] = mean_std(h);
      s.dice_mean.push_back(dm);
      s.dice_std.push_back(ds);
      s.hd95_mean.push_back(hm);
      s.hd95_std.push_back(hs);
    }
    std::vector<double> cd;
    for (const auto& id : g.cases) cd.push_back(per_case[gi].at(id));
    std::tie(s.mean_dice, s.std_dice) = mean_std(cd);
    s.mean_rank = ranked_cases ? rank_sum[gi] / static_cast<double>(ranked_cases) : std::nan("");
    if (ref_index && *ref_index != gi) {
      std::vector<double> x, y;
      for (const auto& id : g.cases) {
        if (!per_case[*ref_index].count(id)) continue;
        x.push_back(per_case[gi].at(id));
        y.push_back(per_case[*ref_index].at(id));
      }
      try {
        s.p_value = wilcoxon_one_sided(x, y).p_value;
        s.stars = significance_stars(*s.p_value);
      } catch (const InsufficientData&) {
        s.p_value.reset();
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string fmt(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

}  // namespace

void write_summary(const std::vector<SummaryRow>& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  std::vector<int> classes;
  for (const auto& r : s)
    for (int c : r.classes)
      if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
  std::sort(classes.begin(), classes.end());
  out << "method,stage";
  for (int c : classes) out << ",dice_c" << c << ",dice_c" << c << "_std";
  for (int c : classes) out << ",hd95_c" << c << ",hd95_c" << c << "_std";
  out << ",mean_dice,mean_dice_std,mean_rank,p_vs_reference,stars\n";
  for (const auto& r : s) {
    out << r.method << ',' << r.stage;
    auto column = [&](const std::vector<double>& m, const std::vector<double>& sd) {
      for (int c : classes) {
        auto it = std::find(r.classes.begin(), r.classes.end(), c);
        if (it == r.classes.end()) {
          out << ",NA,NA";
        } else {
          const auto k = static_cast<std::size_t>(it - r.classes.begin());
          out << ',' << fmt(m[k]) << ',' << fmt(sd[k]);
        }
      }
    };
    column(r.dice_mean, r.dice_std);
    column(r.hd95_mean, r.hd95_std);
    out << ',' << fmt(r.mean_dice) << ',' << fmt(r.std_dice) << ',' << fmt(r.mean_rank, 3) << ','
        << (r.p_value ? fmt(*r.p_value, 6) : std::string("NA")) << ',' << r.stars << '\n';
  }
}

std::string boxplot_svg(const ScoreTable& t, bool use_hd95, const std::string& title) {
  const auto groups = group_rows(t);
  struct Box {
    std::string label;
    std::vector<double> v;
  };
  std::vector<Box> boxes;
  double lo = 0.0, hi = use_hd95 ? 1.0 : 1.0;
  for (const auto& g : groups) {
    Box b{g.method + " " + g.stage, {}};
    const auto m = use_hd95 ? case_hd95(g) : case_dice(g);
    for (const auto& id : g.cases) {
      if (m.count(id)) b.v.push_back(m.at(id));
    }
    for (double v : b.v) hi = std::max(hi, v);
    boxes.push_back(std::move(b));
  }
  if (use_hd95) hi *= 1.05;
  const double W = 120.0 * static_cast<double>(std::max<std::size_t>(boxes.size(), 1)) + 100.0, H = 420.0;
  const double top = 40.0, bottom = 330.0, left = 70.0;
  auto ypos = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W, 0) << "\" height=\"" << fmt(H, 0)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << fmt(W / 2, 1) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = lo + (hi - lo) * k / 5.0;
    s << "<line x1=\"" << left - 4 << "\" y1=\"" << fmt(ypos(v), 1) << "\" x2=\"" << W - 20 << "\" y2=\""
      << fmt(ypos(v), 1) << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << left - 8 << "\" y=\"" << fmt(ypos(v) + 4, 1) << "\" text-anchor=\"end\">" << fmt(v, 2)
      << "</text>\n";
  }
  s << "<text x=\"16\" y=\"" << fmt((top + bottom) / 2, 1) << "\" transform=\"rotate(-90 16 "
    << fmt((top + bottom) / 2, 1) << ")\" text-anchor=\"middle\">" << (use_hd95 ? "HD95 [mm]" : "Dice") << "</text>\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double cx = left + 60.0 + 120.0 * static_cast<double>(i);
    const auto& b = boxes[i];
    s << "<text x=\"" << fmt(cx, 1) << "\" y=\"" << bottom + 20 << "\" text-anchor=\"middle\">" << b.label
      << "</text>\n";
    if (b.v.empty()) continue;
    const double q1 = percentile(b.v, 25.0), med = percentile(b.v, 50.0), q3 = percentile(b.v, 75.0);
    const double iqr = q3 - q1;
    double wlo = q3, whi = q1;
    for (double v : b.v) {
      if (v >= q1 - 1.5 * iqr) wlo = std::min(wlo, v);
      if (v <= q3 + 1.5 * iqr) whi = std::max(whi, v);
    }
    s << "<line x1=\"" << fmt(cx, 1) << "\" y1=\"" << fmt(ypos(whi), 1) << "\" x2=\"" << fmt(cx, 1) << "\" y2=\""
      << fmt(ypos(wlo), 1) << "\" stroke=\"black\"/>\n";
    s << "<rect x=\"" << fmt(cx - 30, 1) << "\" y=\"" << fmt(ypos(q3), 1) << "\" width=\"60\" height=\""
      << fmt(std::max(ypos(q1) - ypos(q3), 0.5), 1) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << fmt(cx - 30, 1) << "\" y1=\"" << fmt(ypos(med), 1) << "\" x2=\"" << fmt(cx + 30, 1)
      << "\" y2=\"" << fmt(ypos(med), 1) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double v : b.v) {
      if (v < wlo || v > whi) {
        s << "<circle cx=\"" << fmt(cx, 1) << "\" cy=\"" << fmt(ypos(v), 1) << "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
      }
    }
  }
  s << "</svg>\n";
  return s.str();
}

void write_report(const ScoreTable& t, const std::filesystem::path& dir, const std::string& reference) {
  std::filesystem::create_directories(dir);
  write_summary(summarize(t, reference), dir / "summary.csv");
  for (bool h : {false, true}) {
    std::ofstream out(dir / (h ? "hd95_boxplot.svg" : "dice_boxplot.svg"), std::ios::binary | std::ios::trunc);
    out << boxplot_svg(t, h, h ? "HD95 per case (class mean)" : "Dice per case (class mean)");
  }
}

}  // namespace dgtta
