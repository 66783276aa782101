#include "lain/category_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lain {

CategorySpace::CategorySpace(std::vector<std::string> objects, std::vector<std::string> verbs,
                             std::vector<HoiCategory> categories, std::size_t human_object_index)
    : objects_(std::move(objects)), verbs_(std::move(verbs)), categories_(std::move(categories)),
      human_(human_object_index) {
    auto unique = [](const std::vector<std::string>& names, const char* what) {
        std::set<std::string> seen;
        for (const auto& n : names) {
            if (n.empty() || n.find_first_of(" \t\n,") != std::string::npos)
                throw std::invalid_argument(std::string("invalid ") + what + " name '" + n + "'");
            if (!seen.insert(n).second) throw std::invalid_argument(std::string("duplicate ") + what + " name: " + n);
        }
    };
    unique(objects_, "object");
    unique(verbs_, "verb");
    if (human_ >= objects_.size()) throw std::invalid_argument("human object index out of range");
    lookup_.assign(objects_.size() * verbs_.size(), 0);
    for (std::size_t c = 0; c < categories_.size(); ++c) {
        const auto& cat = categories_[c];
        if (cat.object >= objects_.size() || cat.verb >= verbs_.size())
            throw std::invalid_argument("category " + std::to_string(c) + " indexes an unknown object or verb");
        auto& slot = lookup_[cat.object * verbs_.size() + cat.verb];
        if (slot) throw std::invalid_argument("duplicate category " + std::to_string(c));
        slot = c + 1;
    }
}

CategorySpace CategorySpace::cartesian(std::vector<std::string> objects, std::vector<std::string> verbs,
                                       std::size_t human_object_index, bool include_human) {
    std::vector<HoiCategory> cats;
    for (std::size_t o = 0; o < objects.size(); ++o) {
        if (o == human_object_index && !include_human) continue;
        for (std::size_t v = 0; v < verbs.size(); ++v) cats.push_back({o, v});
    }
    return CategorySpace(std::move(objects), std::move(verbs), std::move(cats), human_object_index);
}

std::optional<std::size_t> CategorySpace::category_index(std::size_t object, std::size_t verb) const {
    if (object >= objects_.size() || verb >= verbs_.size()) return std::nullopt;
    auto slot = lookup_[object * verbs_.size() + verb];
    if (!slot) return std::nullopt;
    return slot - 1;
}

std::string CategorySpace::category_name(std::size_t category) const {
    const auto& c = categories_.at(category);
    return verbs_[c.verb] + " " + objects_[c.object];
}

std::optional<std::size_t> CategorySpace::object_index(const std::string& name) const {
    auto it = std::find(objects_.begin(), objects_.end(), name);
    if (it == objects_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - objects_.begin());
}

std::optional<std::size_t> CategorySpace::verb_index(const std::string& name) const {
    auto it = std::find(verbs_.begin(), verbs_.end(), name);
    if (it == verbs_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - verbs_.begin());
}

std::vector<std::size_t> CategorySpace::interaction_objects() const {
    std::set<std::size_t> s;
    for (const auto& c : categories_) s.insert(c.object);
    return {s.begin(), s.end()};
}

std::string to_string(SplitSetting setting) {
    switch (setting) {
        case SplitSetting::UC: return "UC";
        case SplitSetting::RF_UC: return "RF-UC";
        case SplitSetting::NF_UC: return "NF-UC";
        case SplitSetting::UO: return "UO";
        case SplitSetting::UV: return "UV";
        case SplitSetting::FULL: return "FULL";
    }
    return "FULL";
}

SplitSetting parse_split_setting(const std::string& text) {
    for (auto s : {SplitSetting::UC, SplitSetting::RF_UC, SplitSetting::NF_UC, SplitSetting::UO, SplitSetting::UV,
                   SplitSetting::FULL})
        if (to_string(s) == text) return s;
    throw std::invalid_argument("unknown split setting '" + text + "'");
}

std::vector<std::size_t> ZeroShotSplit::unseen() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < unseen_mask.size(); ++c)
        if (unseen_mask[c]) out.push_back(c);
    return out;
}

std::vector<std::size_t> ZeroShotSplit::seen() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < unseen_mask.size(); ++c)
        if (!unseen_mask[c]) out.push_back(c);
    return out;
}

std::size_t resolve_split_count(double k, std::size_t universe) {
    if (!(k >= 0.0)) throw std::invalid_argument("split size must be non-negative");
    if (k < 1.0 && k > 0.0) return static_cast<std::size_t>(std::llround(k * static_cast<double>(universe)));
    if (k != std::floor(k)) throw std::invalid_argument("split size must be an integer count or a fraction below 1");
    return static_cast<std::size_t>(k);
}

namespace {

ZeroShotSplit closure_split(const CategorySpace& space, SplitSetting setting, const std::vector<std::size_t>& picked,
                            bool by_object) {
    ZeroShotSplit split;
    split.setting = setting;
    split.unseen_mask.assign(space.num_categories(), false);
    for (std::size_t c = 0; c < space.num_categories(); ++c) {
        const auto& cat = space.categories()[c];
        const auto key = by_object ? cat.object : cat.verb;
        if (std::find(picked.begin(), picked.end(), key) != picked.end()) split.unseen_mask[c] = true;
    }
    return split;
}

std::vector<std::size_t> frequency_order(const FrequencyTable& freq, bool ascending) {
    std::vector<std::size_t> idx(freq.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (freq[a] != freq[b]) return ascending ? freq[a] < freq[b] : freq[a] > freq[b];
        return a < b;
    });
    return idx;
}

bool covers_all(const CategorySpace& space, const std::vector<bool>& unseen) {
    std::set<std::size_t> objs, verbs;
    for (std::size_t c = 0; c < space.num_categories(); ++c)
        if (!unseen[c]) {
            objs.insert(space.categories()[c].object);
            verbs.insert(space.categories()[c].verb);
        }
    std::set<std::size_t> all_objs, all_verbs;
    for (const auto& c : space.categories()) {
        all_objs.insert(c.object);
        all_verbs.insert(c.verb);
    }
    return objs == all_objs && verbs == all_verbs;
}

}  // namespace

ZeroShotSplit build_split(const CategorySpace& space, SplitSetting setting, const FrequencyTable* freq,
                          std::size_t k, std::uint64_t seed) {
    const std::size_t n = space.num_categories();
    ZeroShotSplit split;
    split.setting = setting;
    split.seed = seed;
    split.unseen_mask.assign(n, false);
    if (setting == SplitSetting::FULL || k == 0) return split;

    std::mt19937_64 rng(seed);
    switch (setting) {
        case SplitSetting::RF_UC:
        case SplitSetting::NF_UC: {
            if (!freq) throw std::invalid_argument(to_string(setting) + " requires a frequency table");
            if (freq->size() != n) throw std::invalid_argument("frequency table length does not match category count");
            if (k >= n) throw std::invalid_argument("split size must be smaller than the category count");
            auto order = frequency_order(*freq, setting == SplitSetting::RF_UC);
            for (std::size_t i = 0; i < k; ++i) split.unseen_mask[order[i]] = true;
            return split;
        }
        case SplitSetting::UC: {
            if (k >= n) throw std::invalid_argument("split size must be smaller than the category count");
            std::vector<std::size_t> idx(n);
            for (int attempt = 0; attempt < 1000; ++attempt) {
                std::iota(idx.begin(), idx.end(), 0);
                std::shuffle(idx.begin(), idx.end(), rng);
                std::vector<bool> mask(n, false);
                for (std::size_t i = 0; i < k; ++i) mask[idx[i]] = true;
                if (covers_all(space, mask)) {
                    split.unseen_mask = std::move(mask);
                    return split;
                }
            }
            throw SplitError("UC: no sample of " + std::to_string(k) +
                             " categories keeps every object and verb seen (1000 attempts)");
        }
        case SplitSetting::UO: {
            std::vector<std::size_t> pool;
            for (auto o : space.interaction_objects())
                if (o != space.human_object_index()) pool.push_back(o);
            if (k >= pool.size()) throw std::invalid_argument("UO: split size must be smaller than the object count");
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(k);
            std::sort(pool.begin(), pool.end());
            auto s = closure_split(space, setting, pool, true);
            s.seed = seed;
            return s;
        }
        case SplitSetting::UV: {
            std::vector<std::size_t> pool(space.num_verbs());
            std::iota(pool.begin(), pool.end(), 0);
            if (k >= pool.size()) throw std::invalid_argument("UV: split size must be smaller than the verb count");
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(k);
            std::sort(pool.begin(), pool.end());
            auto s = closure_split(space, setting, pool, false);
            s.seed = seed;
            return s;
        }
        case SplitSetting::FULL: break;
    }
    return split;
}

ZeroShotSplit split_from_unseen_objects(const CategorySpace& space, const std::vector<std::size_t>& objects) {
    for (auto o : objects) {
        if (o >= space.num_objects()) throw std::invalid_argument("UO: object index out of range");
        if (o == space.human_object_index()) throw std::invalid_argument("UO: the human class cannot be unseen");
    }
    return closure_split(space, SplitSetting::UO, objects, true);
}

ZeroShotSplit split_from_unseen_verbs(const CategorySpace& space, const std::vector<std::size_t>& verbs) {
    for (auto v : verbs)
        if (v >= space.num_verbs()) throw std::invalid_argument("UV: verb index out of range");
    return closure_split(space, SplitSetting::UV, verbs, false);
}

std::string serialize_split(const ZeroShotSplit& split, const CategorySpace& space) {
    std::ostringstream os;
    os << "setting=" << to_string(split.setting) << "\n";
    os << "seed=" << split.seed << "\n";
    for (auto c : split.unseen()) {
        const auto& cat = space.categories()[c];
        os << "unseen " << space.objects()[cat.object] << " " << space.verbs()[cat.verb] << "\n";
    }
    return os.str();
}

ZeroShotSplit parse_split(const std::string& text, const CategorySpace& space) {
    ZeroShotSplit split;
    split.unseen_mask.assign(space.num_categories(), false);
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool have_setting = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto where = " at line " + std::to_string(lineno);
        if (line.rfind("setting=", 0) == 0) {
            split.setting = parse_split_setting(line.substr(8));
            have_setting = true;
        } else if (line.rfind("seed=", 0) == 0) {
            split.seed = std::stoull(line.substr(5));
        } else if (line.rfind("unseen ", 0) == 0) {
            std::istringstream ls(line.substr(7));
            std::string obj, verb;
            if (!(ls >> obj >> verb)) throw std::invalid_argument("malformed unseen entry" + where);
            auto o = space.object_index(obj);
            auto v = space.verb_index(verb);
            if (!o || !v) throw std::invalid_argument("unknown category '" + obj + " " + verb + "'" + where);
            auto c = space.category_index(*o, *v);
            if (!c) throw std::invalid_argument("no category for '" + obj + " " + verb + "'" + where);
            split.unseen_mask[*c] = true;
        } else {
            throw std::invalid_argument("unrecognised split line" + where);
        }
    }
    if (!have_setting) throw std::invalid_argument("split text lacks a setting line");
    return split;
}

}  // namespace lain
