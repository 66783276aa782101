#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lain/dataset_io.hpp"
#include "lain/experiments.hpp"
#include "lain/fnv.hpp"
#include "oracle_suite.hpp"

namespace fs = std::filesystem;
using namespace lain;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kDataKeys{
    "objects",      "verbs",      "human_name", "train_scenes", "val_scenes",    "test_scenes",
    "data_seed",    "image_size", "patch_size", "max_humans",   "max_objects",   "cue_scale",
    "cue_palette",  "interact_prob", "box_jitter", "class_flip", "miss",        "feature_noise",
    "feature_seed", "flip_penalty", "d_det"};

std::string data_digest(const RunConfig& cfg) {
    Fnv1a f;
    for (const auto& k : kDataKeys) f.str(k + "=" + cfg.values().at(k) + "\n");
    return hex64(f.h);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw UsageError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string run_dir;
    bool force = false;
};

fs::path make_run_dir(const Common& c, const RunConfig& cfg, const std::string& command) {
    fs::path dir;
    if (!c.run_dir.empty()) {
        dir = c.run_dir;
    } else {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
        dir = fs::path(cfg.get_text("out_dir")) / (std::string(stamp) + "-" + command + "-" + cfg.digest_hex());
    }
    fs::create_directories(dir);
    write_file(dir / "config.txt", "# digest " + cfg.digest_hex() + "\n" + cfg.canonical());
    return dir;
}

fs::path data_dir(const RunConfig& cfg, bool force) {
    const auto& d = cfg.get_text("data_dir");
    if (d.empty()) throw UsageError("no dataset directory given (use --data or data_dir=...)");
    const fs::path dir(d);
    const auto stamp = dir / "data_digest.txt";
    if (!fs::exists(stamp)) throw UsageError("not a dataset directory: " + dir.string());
    std::string recorded = read_file(stamp);
    while (!recorded.empty() && (recorded.back() == '\n' || recorded.back() == '\r')) recorded.pop_back();
    if (recorded != data_digest(cfg) && !force)
        throw UsageError("dataset in " + dir.string() + " was generated under data digest " + recorded +
                         ", current config gives " + data_digest(cfg) + " (use --force to override)");
    return dir;
}

std::vector<SceneRecord> load_records(const fs::path& p) { return read_dataset(p.string()).records; }

int cmd_gen(const Common& c, const RunConfig& cfg) {
    auto dir = make_run_dir(c, cfg, "gen");
    auto space = make_space(cfg);
    auto data = generate_data(cfg, *space);
    write_dataset((dir / "train.lainds").string(), {records_digest(data.train), data.train});
    write_dataset((dir / "val.lainds").string(), {records_digest(data.val), data.val});
    write_dataset((dir / "test.lainds").string(), {records_digest(data.test), data.test});
    write_file(dir / "data_digest.txt", data_digest(cfg) + "\n");
    std::cout << "wrote " << data.train.size() << "/" << data.val.size() << "/" << data.test.size()
              << " train/val/test scenes to " << dir.string() << "\n";
    return kOk;
}

int cmd_train(const Common& c, const RunConfig& cfg) {
    const auto data = data_dir(cfg, c.force);
    auto train_recs = load_records(data / "train.lainds");
    auto val_recs = load_records(data / "val.lainds");
    auto space = make_space(cfg);
    const auto split = make_split(cfg, *space, train_recs);
    auto dir = make_run_dir(c, cfg, "train");
    write_file(dir / "split.txt", serialize_split(split, *space));
    LainModel model(make_model_config(cfg), space);
    auto result = train(model, train_recs, val_recs, split, make_train_config(cfg), [](const EpochLog& e) {
        std::printf("epoch %zu loss %.6f val_seen %.4f val_unseen %.4f\n", e.epoch, e.mean_loss,
                    e.val_map_seen.value_or(-1.0), e.val_map_unseen.value_or(-1.0));
        std::fflush(stdout);
    });
    write_file(dir / "training_log.csv", training_log_csv(result.log));
    save_checkpoint((dir / "best.ckpt").string(), model, cfg.digest());
    std::cout << "best epoch " << result.best_epoch << ", checkpoint " << (dir / "best.ckpt").string() << "\n";
    return kOk;
}

int cmd_eval(const Common& c, const RunConfig& cfg) {
    const auto data = data_dir(cfg, c.force);
    const auto& ckpt = cfg.get_text("checkpoint");
    if (ckpt.empty()) throw UsageError("no checkpoint given (use --checkpoint or checkpoint=...)");
    if (!fs::exists(ckpt)) throw UsageError("checkpoint not found: " + ckpt);
    auto test_recs = load_records(data / "test.lainds");
    auto space = make_space(cfg);
    const auto split = make_split(cfg, *space, load_records(data / "train.lainds"));
    LainModel model(make_model_config(cfg), space);
    load_checkpoint(ckpt, model, c.force);
    auto rep = evaluate(model, test_recs, split, make_eval_options(cfg));
    auto dir = make_run_dir(c, cfg, "eval");
    write_file(dir / "report.csv", report_csv(rep, *space));
    write_file(dir / "report.json", report_json(rep, *space));
    std::printf("mAP unseen %.4f seen %.4f full %.4f\n", rep.map_unseen.value_or(-1.0), rep.map_seen.value_or(-1.0),
                rep.map_full.value_or(-1.0));
    std::cout << "report " << (dir / "report.csv").string() << "\n";
    return kOk;
}

int cmd_gradcheck(const Common&, const RunConfig& cfg) {
    const double tol = cfg.get_real("gradcheck_tolerance");
    double worst = 0.0;
    std::string worst_name;
    bool ok = true;
    for (const auto& item : gradient_suite(cfg)) {
        std::printf("%-12s max_rel_err %.3e on %s %s\n", item.name.c_str(), item.result.max_rel_error,
                    item.result.worst_param.c_str(), item.passed ? "ok" : "FAIL");
        if (!item.result.finite) std::printf("  %s\n", item.result.failure.c_str());
        if (item.result.max_rel_error >= worst) {
            worst = item.result.max_rel_error;
            worst_name = item.name + " / " + item.result.worst_param;
        }
        ok = ok && item.passed;
    }
    std::printf("max relative error %.3e (%s), tolerance %.1e\n", worst, worst_name.c_str(), tol);
    return ok ? kOk : kCheckFailed;
}

int cmd_oracle(const Common&, const RunConfig&) {
    bool ok = true;
    for (const auto& c : oracle::run_suite()) {
        std::printf("%-28s err %.3e tol %.0e %s\n", c.name.c_str(), c.error, c.tolerance, c.passed() ? "ok" : "FAIL");
        ok = ok && c.passed();
    }
    return ok ? kOk : kCheckFailed;
}

int cmd_ablate(const Common& c, const RunConfig& cfg) {
    auto dir = make_run_dir(c, cfg, "ablate");
    auto space = make_space(cfg);
    auto data = generate_data(cfg, *space);
    auto rows = run_ablation(cfg, data, [](const std::string& line) {
        std::cout << line << std::endl;
    });
    const auto csv = ablation_csv(rows);
    write_file(dir / "ablation.csv", csv);
    std::cout << csv;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale LAIN zero-shot HOI detector"};
    app.require_subcommand(1);
    Common common;
    std::string data, checkpoint;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_path, "key=value config file");
        sub->add_option("-s,--set", common.overrides, "override key=value (repeatable, last wins)");
        sub->add_option("--run-dir", common.run_dir, "output directory instead of <out_dir>/<timestamp>-<digest>");
        return sub;
    };
    auto* gen = add_common(app.add_subcommand("gen", "generate train/val/test datasets"));
    auto* tr = add_common(app.add_subcommand("train", "train and keep the best-by-validation checkpoint"));
    auto* ev = add_common(app.add_subcommand("eval", "evaluate a checkpoint on the test set"));
    auto* gc = add_common(app.add_subcommand("gradcheck", "finite-difference gradient suite"));
    auto* orc = add_common(app.add_subcommand("oracle", "brute-force equivalence suites"));
    auto* ab = add_common(app.add_subcommand("ablate", "baseline / LA / IA / LA+IA comparison"));
    for (auto* sub : {tr, ev}) {
        sub->add_option("--data", data, "dataset directory written by gen");
        sub->add_flag("--force", common.force, "accept digest mismatches");
    }
    ev->add_option("--checkpoint", checkpoint, "checkpoint written by train");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    RunConfig cfg;
    try {
        auto overrides = common.overrides;
        if (!data.empty()) overrides.push_back("data_dir=" + data);
        if (!checkpoint.empty()) overrides.push_back("checkpoint=" + checkpoint);
        cfg = load_config(common.config_path, overrides);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(common, cfg);
        if (tr->parsed()) return cmd_train(common, cfg);
        if (ev->parsed()) return cmd_eval(common, cfg);
        if (gc->parsed()) return cmd_gradcheck(common, cfg);
        if (orc->parsed()) return cmd_oracle(common, cfg);
        if (ab->parsed()) return cmd_ablate(common, cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return kCheckFailed;
    }
    return kUsage;
}
