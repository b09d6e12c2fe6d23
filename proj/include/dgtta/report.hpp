#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dgtta/metrics.hpp"

namespace dgtta {

struct ScoreRow {
  std::string method;
  std::string stage;  ///< BS, +A, +A-nor, +A-enc, ...
  std::string case_id;
  int class_id = 0;
  double dice = 0.0;
  std::optional<double> hd95;  ///< empty when undefined for this case and class
};

using ScoreTable = std::vector<ScoreRow>;

/// Scores every "<case>_label" map in `pred_dir` against the same name in `ref_dir`.
ScoreTable evaluate_directory(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir,
                              const std::vector<int>& classes, const std::string& method, const std::string& stage,
                              HausdorffVariant variant = HausdorffVariant::Pooled);

ScoreTable score_case(const LabelMap& pred, const LabelMap& ref, const std::vector<int>& classes,
                      const std::string& method, const std::string& stage, const std::string& case_id,
                      HausdorffVariant variant = HausdorffVariant::Pooled);

/// Header: method,stage,case,class,dice,hd95. Undefined HD95 is written as NA.
void write_scores(const ScoreTable& t, const std::filesystem::path& path);
ScoreTable read_scores(const std::filesystem::path& path);
std::string scores_csv(const ScoreTable& t);

struct SummaryRow {
  std::string method;
  std::string stage;
  std::vector<int> classes;
  std::vector<double> dice_mean, dice_std;  ///< per class
  std::vector<double> hd95_mean, hd95_std;  ///< per class over defined cases (NaN if none)
  double mean_dice = 0.0;                   ///< over cases of the class-averaged Dice
  double std_dice = 0.0;
  double mean_rank = 0.0;                   ///< average per-case rank of class-averaged Dice (1 = best)
  std::optional<double> p_value;            ///< one-sided signed-rank test against the reference
  std::string stars;
};

/// Groups rows by (method, stage) in order of first appearance. `reference`
/// names a "method" or "method/stage" group to test every other group against.
std::vector<SummaryRow> summarize(const ScoreTable& t, const std::string& reference = "");

void write_summary(const std::vector<SummaryRow>& s, const std::filesystem::path& path);

/// Box plot (one box per group, whiskers at 1.5 IQR) of per-case class-averaged
/// Dice or HD95 as a standalone SVG document.
std::string boxplot_svg(const ScoreTable& t, bool hd95, const std::string& title);

/// summary.csv, dice_boxplot.svg and hd95_boxplot.svg into `dir`.
void write_report(const ScoreTable& t, const std::filesystem::path& dir, const std::string& reference = "");

}  // namespace dgtta
