#include "lain/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace lain {

void TrainConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
    };
    need(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
    need(gamma >= 0.0, "gamma must be non-negative");
    need(iou_threshold > 0.0 && iou_threshold < 1.0, "iou_threshold must lie in (0, 1)");
    need(lr >= 0.0 && weight_decay >= 0.0, "lr and weight_decay must be non-negative");
    need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
    need(adam_eps > 0.0, "adam_eps must be positive");
    need(eval_lambda >= 0.0, "eval_lambda must be non-negative");
}

Tensor assign_labels(const std::vector<Detection>& detections, const HoPairIndex& pairs,
                     const std::vector<HoiInstance>& instances, const CategorySpace& space,
                     const ZeroShotSplit* split, double iou_threshold) {
    const std::size_t n = pairs.count(), nc = space.num_categories();
    std::vector<double> y(n * nc, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& h = detections[pairs.pairs[i].first];
        const auto& o = detections[pairs.pairs[i].second];
        for (const auto& g : instances) {
            if (split && split->is_unseen(g.category)) continue;
            if (o.class_index != g.object_class) continue;
            if (iou(h.box, g.human_box) > iou_threshold && iou(o.box, g.object_box) > iou_threshold)
                y[i * nc + g.category] = 1.0;
        }
    }
    return Tensor::from({n, nc}, std::move(y));
}

AdamW::AdamW(ParamStore& params, double lr_, double wd, double beta1, double beta2, double eps)
    : lr(lr_), weight_decay(wd), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& [name, t] : params.trainable()) slots_.push_back({t, std::vector<double>(t.numel(), 0.0),
                                                                  std::vector<double>(t.numel(), 0.0)});
}

void AdamW::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& s : slots_) {
        auto w = s.param.mutable_data();
        const bool has = s.param.has_grad();
        auto g = has ? s.param.grad() : std::span<const double>{};
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = has ? g[i] : 0.0;
            s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * gi;
            s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * gi * gi;
            const double mhat = s.m[i] / c1, vhat = s.v[i] / c2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * w[i]);
        }
    }
}

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string first_non_finite(const LainModel& model, const Tensor& scores) {
    for (const auto& [name, t] : model.params().entries())
        if (!all_finite(t.data())) return "parameter '" + name + "'";
    if (!all_finite(scores.data())) return "score matrix";
    return "loss";
}

}  // namespace

StepResult train_step(LainModel& model, const SceneRecord& record, const ZeroShotSplit& split, AdamW& optimizer,
                      const TrainConfig& config) {
    StepResult res;
    auto scored = score_scene(record.scene.pixels, record.detections, model);
    res.pairs = scored.pairs.count();
    if (res.pairs == 0) {
        res.skipped = true;
        return res;
    }
    auto labels = assign_labels(record.detections, scored.pairs, record.scene.instances, model.space(), &split,
                                config.iou_threshold);
    for (double y : labels.data()) res.positives += y > 0.0;
    auto loss = ops::focal_bce(scored.scores, labels, config.alpha, config.gamma);
    res.loss = loss.item();
    if (!std::isfinite(res.loss))
        throw NonFiniteError("non-finite loss (scene seed " + std::to_string(record.scene.seed) +
                             "); first non-finite tensor: " + first_non_finite(model, scored.scores));
    model.params().zero_grad();
    loss.backward();
    optimizer.step();
    return res;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,mean_loss,val_mAP_seen,val_mAP_unseen,wall_seconds\n";
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string("absent");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10f", *v);
        return std::string(buf);
    };
    for (const auto& e : log) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10f", e.mean_loss);
        char wall[32];
        std::snprintf(wall, sizeof wall, "%.3f", e.wall_seconds);
        out += std::to_string(e.epoch) + "," + buf + "," + opt(e.val_map_seen) + "," + opt(e.val_map_unseen) + "," +
               wall + "\n";
    }
    return out;
}

TrainResult train(LainModel& model, const std::vector<SceneRecord>& train_records,
                  const std::vector<SceneRecord>& val_records, const ZeroShotSplit& split, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (train_records.empty()) throw std::invalid_argument("training set is empty");
    TrainResult result;
    AdamW opt(model.params(), config.lr, config.weight_decay, config.beta1, config.beta2, config.adam_eps);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train_records.size());
    std::iota(order.begin(), order.end(), 0);
    std::optional<ParamStore> best;
    const auto start = std::chrono::steady_clock::now();
    EvalOptions eval_opts;
    eval_opts.lambda = config.eval_lambda;
    eval_opts.iou_threshold = config.iou_threshold;
    eval_opts.bands.clear();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        std::size_t steps = 0;
        for (auto idx : order) {
            auto r = train_step(model, train_records[idx], split, opt, config);
            if (r.skipped) {
                ++result.skipped_scenes;
                continue;
            }
            total += r.loss;
            ++steps;
        }
        EpochLog e;
        e.epoch = epoch;
        e.mean_loss = steps ? total / static_cast<double>(steps) : 0.0;
        if (!val_records.empty()) {
            auto rep = evaluate(model, val_records, split, eval_opts);
            e.val_map_seen = rep.map_seen;
            e.val_map_unseen = rep.map_unseen;
            const double score = rep.map_seen.value_or(0.0);
            if (!result.best_val || score > *result.best_val) {
                result.best_val = score;
                result.best_epoch = epoch;
                best = model.params().clone();
            }
        } else {
            result.best_epoch = epoch;
        }
        e.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(e);
        if (on_epoch) on_epoch(e);
    }
    if (best) model.params().copy_values_from(*best);
    return result;
}

}  // namespace lain
