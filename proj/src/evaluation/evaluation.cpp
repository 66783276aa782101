#include "lain/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace lain {

double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<double> fuse_scores(std::span<const double> scores, std::size_t num_categories,
                                std::span<const double> human_conf, std::span<const double> object_conf,
                                double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
    const std::size_t n = human_conf.size();
    if (object_conf.size() != n || scores.size() != n * num_categories)
        throw std::invalid_argument("fuse_scores: score and confidence sizes disagree");
    std::vector<double> out(scores.begin(), scores.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double f = std::pow(human_conf[i], lambda) * std::pow(object_conf[i], lambda);
        for (std::size_t c = 0; c < num_categories; ++c) out[i * num_categories + c] *= f;
    }
    return out;
}

std::vector<SizeBand> default_size_bands() { return {{"S", 0.0, 0.01}, {"M", 0.01, 0.09}, {"L", 0.09, 1.0}}; }

namespace {

const Box& role_box(const Box& human, const Box& object, BoxRole role) {
    return role == BoxRole::Human ? human : object;
}

void rank(std::vector<Prediction>& p) {
    std::sort(p.begin(), p.end(), [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.scene != b.scene) return a.scene < b.scene;
        if (a.pair != b.pair) return a.pair < b.pair;
        return a.category < b.category;
    });
}

std::optional<double> ap_core(std::vector<Prediction> preds, const std::vector<GroundTruth>& gt, double thr,
                              const SizeBand* band, BoxRole role) {
    std::vector<bool> active(gt.size(), true);
    std::size_t n_active = 0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        if (band) active[g] = band->contains(role_box(gt[g].human, gt[g].object, role).area());
        n_active += active[g];
    }
    if (n_active == 0) return std::nullopt;
    rank(preds);

    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> by_key;
    for (std::size_t g = 0; g < gt.size(); ++g) by_key[{gt[g].scene, gt[g].category}].push_back(g);
    std::vector<bool> matched(gt.size(), false);
    std::vector<int> outcome;  // 1 hit, 0 false positive
    outcome.reserve(preds.size());

    for (const auto& p : preds) {
        auto it = by_key.find({p.scene, p.category});
        auto best_in = [&](bool want_active) -> long {
            long best = -1;
            double best_ov = -1.0;
            if (it == by_key.end()) return best;
            for (auto g : it->second) {
                if (matched[g] || active[g] != want_active) continue;
                const double ih = iou(p.human, gt[g].human), io = iou(p.object, gt[g].object);
                if (!(ih > thr && io > thr)) continue;
                const double ov = std::min(ih, io);
                if (ov > best_ov) {
                    best_ov = ov;
                    best = static_cast<long>(g);
                }
            }
            return best;
        };
        if (long g = best_in(true); g >= 0) {
            matched[g] = true;
            outcome.push_back(1);
            continue;
        }
        if (band) {
            if (long g = best_in(false); g >= 0) {
                matched[g] = true;
                continue;
            }
            if (!band->contains(role_box(p.human, p.object, role).area())) continue;
        }
        outcome.push_back(0);
    }

    std::vector<double> rec, prec;
    double tp = 0.0, fp = 0.0;
    for (int o : outcome) {
        (o ? tp : fp) += 1.0;
        rec.push_back(tp / static_cast<double>(n_active));
        prec.push_back(tp / (tp + fp));
    }
    for (std::size_t i = prec.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        ap += (rec[i] - prev) * prec[i];
        prev = rec[i];
    }
    return ap;
}

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string fmt(const std::optional<double>& v) {
    if (!v) return "absent";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10f", *v);
    return buf;
}

const char* role_name(BoxRole r) { return r == BoxRole::Human ? "human" : "object"; }

}  // namespace

std::optional<double> average_precision(std::vector<Prediction> predictions, const std::vector<GroundTruth>& gt,
                                        double iou_threshold) {
    return ap_core(std::move(predictions), gt, iou_threshold, nullptr, BoxRole::Human);
}

std::optional<double> average_precision_in_band(std::vector<Prediction> predictions,
                                                const std::vector<GroundTruth>& gt, double iou_threshold,
                                                BoxRole role, const SizeBand& band) {
    return ap_core(std::move(predictions), gt, iou_threshold, &band, role);
}

Collected collect_predictions(const LainModel& model, const std::vector<SceneRecord>& records, double lambda) {
    NoGradGuard no_grad;
    Collected out;
    const std::size_t nc = model.space().num_categories();
    for (std::size_t s = 0; s < records.size(); ++s) {
        const auto& r = records[s];
        for (const auto& inst : r.scene.instances) out.gt.push_back({s, inst.category, inst.human_box, inst.object_box});
        auto scored = score_scene(r.scene.pixels, r.detections, model);
        const std::size_t n = scored.pairs.count();
        if (n == 0) continue;
        std::vector<double> sh(n), so(n);
        for (std::size_t i = 0; i < n; ++i) {
            sh[i] = r.detections[scored.pairs.pairs[i].first].confidence;
            so[i] = r.detections[scored.pairs.pairs[i].second].confidence;
        }
        auto fused = fuse_scores(scored.scores.data(), nc, sh, so, lambda);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& [u, v] = scored.pairs.pairs[i];
            for (std::size_t c = 0; c < nc; ++c)
                out.predictions.push_back({s, i, c, fused[i * nc + c], r.detections[u].box, r.detections[v].box});
        }
    }
    return out;
}

ApReport build_report(const Collected& data, const CategorySpace& space, const ZeroShotSplit& split,
                      const EvalOptions& options) {
    const std::size_t nc = space.num_categories();
    std::vector<std::vector<Prediction>> preds(nc);
    std::vector<std::vector<GroundTruth>> gts(nc);
    for (const auto& p : data.predictions) preds.at(p.category).push_back(p);
    for (const auto& g : data.gt) gts.at(g.category).push_back(g);

    ApReport rep;
    std::vector<double> unseen, seen, full;
    for (std::size_t c = 0; c < nc; ++c) {
        CategoryAp cat;
        cat.category = c;
        cat.unseen = !split.unseen_mask.empty() && split.is_unseen(c);
        cat.n_gt = gts[c].size();
        cat.ap = average_precision(preds[c], gts[c], options.iou_threshold);
        if (cat.ap) {
            full.push_back(*cat.ap);
            (cat.unseen ? unseen : seen).push_back(*cat.ap);
        }
        rep.categories.push_back(cat);
    }
    rep.map_unseen = mean_of(unseen);
    rep.map_seen = mean_of(seen);
    rep.map_full = mean_of(full);

    for (auto role : {BoxRole::Human, BoxRole::Object})
        for (const auto& band : options.bands) {
            std::vector<double> aps;
            for (std::size_t c = 0; c < nc; ++c)
                if (auto ap = average_precision_in_band(preds[c], gts[c], options.iou_threshold, role, band))
                    aps.push_back(*ap);
            rep.bands.push_back({role, band.name, mean_of(aps)});
        }
    return rep;
}

ApReport evaluate(const LainModel& model, const std::vector<SceneRecord>& records, const ZeroShotSplit& split,
                  const EvalOptions& options) {
    return build_report(collect_predictions(model, records, options.lambda), model.space(), split, options);
}

std::string report_csv(const ApReport& report, const CategorySpace& space) {
    std::string out = "category_name,set,AP,n_gt\n";
    for (const auto& c : report.categories)
        out += space.category_name(c.category) + "," + (c.unseen ? "unseen" : "seen") + "," + fmt(c.ap) + "," +
               std::to_string(c.n_gt) + "\n";
    out += "\nmetric,value\n";
    out += "mAP_unseen," + fmt(report.map_unseen) + "\n";
    out += "mAP_seen," + fmt(report.map_seen) + "\n";
    out += "mAP_full," + fmt(report.map_full) + "\n";
    for (const auto& b : report.bands)
        out += "AP_" + b.band + "_" + role_name(b.role) + "," + fmt(b.ap) + "\n";
    return out;
}

std::string report_json(const ApReport& report, const CategorySpace& space) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["categories"] = json::array();
    for (const auto& c : report.categories)
        j["categories"].push_back({{"category_name", space.category_name(c.category)},
                                   {"set", c.unseen ? "unseen" : "seen"},
                                   {"AP", opt(c.ap)},
                                   {"n_gt", c.n_gt}});
    j["mAP_unseen"] = opt(report.map_unseen);
    j["mAP_seen"] = opt(report.map_seen);
    j["mAP_full"] = opt(report.map_full);
    for (const auto& b : report.bands) j["AP_" + b.band + "_" + role_name(b.role)] = opt(b.ap);
    return j.dump(2) + "\n";
}

}  // namespace lain
