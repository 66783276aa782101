#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lain/grad_check.hpp"
#include "lain/run_config.hpp"
#include "lain/training.hpp"

namespace lain {

std::shared_ptr<const CategorySpace> make_space(const RunConfig& cfg);
SceneSpec make_scene_spec(const RunConfig& cfg, std::shared_ptr<const CategorySpace> space);
DetectorNoise make_detector_noise(const RunConfig& cfg);
ModelConfig make_model_config(const RunConfig& cfg);
TrainConfig make_train_config(const RunConfig& cfg);
EvalOptions make_eval_options(const RunConfig& cfg);
ZeroShotSplit make_split(const RunConfig& cfg, const CategorySpace& space, const std::vector<SceneRecord>& train);

struct DataSplits {
    std::vector<SceneRecord> train, val, test;
};

// Scene seeds: train from data_seed * 1e6, val and test in disjoint blocks above it.
DataSplits generate_data(const RunConfig& cfg, const CategorySpace& space);
std::vector<SceneRecord> generate_records(const SceneSpec& spec, const DetectorNoise& noise, std::size_t count,
                                          std::uint64_t first_seed);

struct GradSuiteItem {
    std::string name;
    GradCheckResult result;
    bool passed = false;
};

// Finite-difference checks of the full loss (every trainable group, gates
// randomized, a 2-pair scene) and of conv2d, layer_norm, attention,
// roi_align and focal_bce.
std::vector<GradSuiteItem> gradient_suite(const RunConfig& cfg);

struct AblationRow {
    bool la = false, ia = false;
    std::vector<double> unseen, seen, full;  // one entry per seed
    double mean_unseen() const;
    double mean_seen() const;
    double mean_full() const;
};

// Trains baseline / LA-only / IA-only / LA+IA on one fixed dataset and split
// for `ablate_seeds` seeds each and evaluates on the test set.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const DataSplits& data,
                                      const std::function<void(const std::string&)>& progress = {});

// "LA,IA,unseen,seen,full" with one row per variant.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace lain
