#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lain/evaluation.hpp"
#include "lain/model.hpp"

namespace lain {

struct TrainConfig {
    double alpha = 0.25;
    double gamma = 2.0;
    double iou_threshold = 0.5;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    double eval_lambda = 1.0;

    void validate() const;
};

// N_pair x N_categories in {0,1}. Unseen-category columns stay zero when a split is given.
Tensor assign_labels(const std::vector<Detection>& detections, const HoPairIndex& pairs,
                     const std::vector<HoiInstance>& instances, const CategorySpace& space,
                     const ZeroShotSplit* split, double iou_threshold);

// Decoupled-weight-decay Adam over the trainable parameters of a store.
class AdamW {
public:
    AdamW(ParamStore& params, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);
    void step();
    std::size_t steps() const { return t_; }
    double lr = 1e-3;
    double weight_decay = 1e-4;

private:
    struct Slot {
        Tensor param;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepResult {
    bool skipped = false;  // no HO pairs
    double loss = 0.0;
    std::size_t pairs = 0;
    std::size_t positives = 0;
};

StepResult train_step(LainModel& model, const SceneRecord& record, const ZeroShotSplit& split, AdamW& optimizer,
                      const TrainConfig& config);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::optional<double> val_map_seen, val_map_unseen;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t skipped_scenes = 0;
    std::size_t best_epoch = 0;  // 0 = initialization
    std::optional<double> best_val;
};

std::string training_log_csv(const std::vector<EpochLog>& log);

// Trains on `train_records` (labels filtered by `split`), validates on
// `val_records` after each epoch by seen mAP, and leaves the best-by-validation
// parameters in `model` (the final epoch when no validation set is given).
TrainResult train(LainModel& model, const std::vector<SceneRecord>& train_records,
                  const std::vector<SceneRecord>& val_records, const ZeroShotSplit& split, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace lain
