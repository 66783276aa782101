#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lain/model.hpp"

namespace lain {

double iou(const Box& a, const Box& b);

// S * S_H^lambda * S_O^lambda, rows scaled by their pair's confidences.
std::vector<double> fuse_scores(std::span<const double> scores, std::size_t num_categories,
                                std::span<const double> human_conf, std::span<const double> object_conf,
                                double lambda);

struct Prediction {
    std::size_t scene = 0;
    std::size_t pair = 0;
    std::size_t category = 0;
    double score = 0.0;
    Box human, object;
};

struct GroundTruth {
    std::size_t scene = 0;
    std::size_t category = 0;
    Box human, object;
};

// Greedy matching in ranking order (score desc, then scene, pair, category).
// A prediction matches the unmatched gt with the largest min(IoU_h, IoU_o)
// among those whose IoUs both exceed `iou_threshold` (ties: lower gt index).
// Returns nullopt when there is no gt.
std::optional<double> average_precision(std::vector<Prediction> predictions, const std::vector<GroundTruth>& gt,
                                        double iou_threshold);

enum class BoxRole { Human, Object };

struct SizeBand {
    std::string name;
    double lo = 0.0;  // inclusive
    double hi = 1.0;  // exclusive, except a band ending at 1 includes 1
    bool contains(double area) const { return area >= lo && (area < hi || (hi >= 1.0 && area <= hi)); }
};

std::vector<SizeBand> default_size_bands();

// Band-restricted AP: gt outside the band is ignored (a prediction matching
// it is neither a hit nor a false positive), and unmatched predictions whose
// role box lies outside the band are ignored too.
std::optional<double> average_precision_in_band(std::vector<Prediction> predictions,
                                                const std::vector<GroundTruth>& gt, double iou_threshold,
                                                BoxRole role, const SizeBand& band);

struct CategoryAp {
    std::size_t category = 0;
    bool unseen = false;
    std::size_t n_gt = 0;
    std::optional<double> ap;
};

struct BandAp {
    BoxRole role = BoxRole::Human;
    std::string band;
    std::optional<double> ap;  // mean over categories with gt in the band
};

struct ApReport {
    std::vector<CategoryAp> categories;
    std::optional<double> map_unseen, map_seen, map_full;
    std::vector<BandAp> bands;
};

struct EvalOptions {
    double lambda = 1.0;
    double iou_threshold = 0.5;
    std::vector<SizeBand> bands = default_size_bands();
};

struct Collected {
    std::vector<Prediction> predictions;  // every pair x every category
    std::vector<GroundTruth> gt;
};

Collected collect_predictions(const LainModel& model, const std::vector<SceneRecord>& records, double lambda);

ApReport build_report(const Collected& data, const CategorySpace& space, const ZeroShotSplit& split,
                      const EvalOptions& options);

ApReport evaluate(const LainModel& model, const std::vector<SceneRecord>& records, const ZeroShotSplit& split,
                  const EvalOptions& options = {});

// "category_name,set,AP,n_gt" rows followed by a summary block.
std::string report_csv(const ApReport& report, const CategorySpace& space);
std::string report_json(const ApReport& report, const CategorySpace& space);

}  // namespace lain
