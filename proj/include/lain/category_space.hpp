#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lain {

struct HoiCategory {
    std::size_t object = 0;
    std::size_t verb = 0;
    friend bool operator==(const HoiCategory&, const HoiCategory&) = default;
};

// Object, verb and HOI-category universes. One object class is the human.
class CategorySpace {
public:
    CategorySpace(std::vector<std::string> objects, std::vector<std::string> verbs,
                  std::vector<HoiCategory> categories, std::size_t human_object_index);

    // Every (object, verb) pair; the human class is excluded as an interaction
    // object unless include_human is set.
    static CategorySpace cartesian(std::vector<std::string> objects, std::vector<std::string> verbs,
                                   std::size_t human_object_index, bool include_human = false);

    const std::vector<std::string>& objects() const { return objects_; }
    const std::vector<std::string>& verbs() const { return verbs_; }
    const std::vector<HoiCategory>& categories() const { return categories_; }
    std::size_t num_objects() const { return objects_.size(); }
    std::size_t num_verbs() const { return verbs_.size(); }
    std::size_t num_categories() const { return categories_.size(); }
    std::size_t human_object_index() const { return human_; }

    std::optional<std::size_t> category_index(std::size_t object, std::size_t verb) const;
    // "<verb> <object>", e.g. "hold cup".
    std::string category_name(std::size_t category) const;
    std::optional<std::size_t> object_index(const std::string& name) const;
    std::optional<std::size_t> verb_index(const std::string& name) const;

    // Objects that occur in at least one category.
    std::vector<std::size_t> interaction_objects() const;

private:
    std::vector<std::string> objects_;
    std::vector<std::string> verbs_;
    std::vector<HoiCategory> categories_;
    std::size_t human_;
    std::vector<std::size_t> lookup_;  // object * num_verbs + verb -> category + 1, 0 if absent
};

enum class SplitSetting { UC, RF_UC, NF_UC, UO, UV, FULL };

std::string to_string(SplitSetting setting);
SplitSetting parse_split_setting(const std::string& text);

struct ZeroShotSplit {
    SplitSetting setting = SplitSetting::FULL;
    std::uint64_t seed = 0;
    std::vector<bool> unseen_mask;  // per category

    bool is_unseen(std::size_t category) const { return unseen_mask.at(category); }
    std::vector<std::size_t> unseen() const;
    std::vector<std::size_t> seen() const;
};

// Per-category training occurrence counts.
using FrequencyTable = std::vector<std::size_t>;

class SplitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Resolves a split size given as a count (>= 1) or a fraction (< 1) of `universe`.
std::size_t resolve_split_count(double k, std::size_t universe);

// RF-UC / NF-UC: k least / most frequent categories (ties by ascending index).
// UC: k categories sampled so every object and verb keeps a seen category.
// UO / UV: k non-human objects / k verbs drawn by seed, unseen = their closure.
// Pure in its arguments.
ZeroShotSplit build_split(const CategorySpace& space, SplitSetting setting, const FrequencyTable* freq,
                          std::size_t k, std::uint64_t seed);

ZeroShotSplit split_from_unseen_objects(const CategorySpace& space, const std::vector<std::size_t>& objects);
ZeroShotSplit split_from_unseen_verbs(const CategorySpace& space, const std::vector<std::size_t>& verbs);

// Text form: "setting=..", "seed=..", then one "unseen <object> <verb>" line per
// unseen category in ascending category order.
std::string serialize_split(const ZeroShotSplit& split, const CategorySpace& space);
ZeroShotSplit parse_split(const std::string& text, const CategorySpace& space);

}  // namespace lain
