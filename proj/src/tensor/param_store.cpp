#include "lain/param_store.hpp"

#include <bit>
#include <stdexcept>

#include "lain/fnv.hpp"

namespace lain {

Tensor ParamStore::add(const std::string& name, Tensor value, bool trainable) {
    if (entries_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    value.set_requires_grad(trainable);
    entries_.emplace(name, value);
    return value;
}

Tensor ParamStore::add_normal(const std::string& name, Shape shape, double stddev, bool trainable,
                              std::mt19937_64& rng) {
    std::vector<double> values(shape_numel(shape), 0.0);
    if (stddev > 0.0) {
        std::normal_distribution<double> dist(0.0, stddev);
        for (auto& v : values) v = dist(rng);
    }
    return add(name, Tensor::from(std::move(shape), std::move(values)), trainable);
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, double value, bool trainable) {
    return add(name, Tensor::full(std::move(shape), value), trainable);
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::vector<std::pair<std::string, Tensor>> ParamStore::trainable() const { return trainable_with_prefix(""); }

std::vector<std::pair<std::string, Tensor>> ParamStore::frozen() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, t] : entries_)
        if (!t.requires_grad()) out.emplace_back(name, t);
    return out;
}

std::vector<std::pair<std::string, Tensor>> ParamStore::trainable_with_prefix(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, t] : entries_)
        if (t.requires_grad() && name.compare(0, prefix.size(), prefix) == 0) out.emplace_back(name, t);
    return out;
}

std::size_t ParamStore::trainable_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_)
        if (t.requires_grad()) n += t.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [name, t] : entries_) t.zero_grad();
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
    for (auto& [name, t] : entries_)
        if (name.compare(0, prefix.size(), prefix) == 0) t.set_requires_grad(trainable);
}

std::uint64_t ParamStore::checksum(bool frozen_only) const {
    Fnv1a f;
    for (const auto& [name, t] : entries_) {
        if (frozen_only && t.requires_grad()) continue;
        f.bytes(name.data(), name.size());
        for (auto d : t.shape()) f.u64(d);
        for (double v : t.data()) f.u64(std::bit_cast<std::uint64_t>(v));
    }
    return f.h;
}

ParamStore ParamStore::clone() const {
    ParamStore out;
    for (const auto& [name, t] : entries_) out.entries_.emplace(name, Tensor::from(t.shape(), {t.data().begin(), t.data().end()}, t.requires_grad()));
    return out;
}

void ParamStore::copy_values_from(const ParamStore& other) {
    if (other.entries_.size() != entries_.size()) throw std::invalid_argument("parameter sets differ in size");
    for (auto& [name, t] : entries_) {
        const auto& src = other.get(name);
        if (src.shape() != t.shape())
            throw std::invalid_argument("shape mismatch for " + name + ": " + shape_str(src.shape()) + " vs " +
                                        shape_str(t.shape()));
        std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
    }
}

}  // namespace lain
