#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lain/fnv.hpp"
#include "lain/model.hpp"

namespace lain {

namespace {

constexpr char kMagic[8] = {'L', 'A', 'I', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out += static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;
    template <class T>
    T get() {
        if (s.size() - pos < sizeof(T)) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
        pos += sizeof(T);
        return static_cast<T>(v);
    }
    std::string bytes(std::size_t n) {
        if (s.size() - pos < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos));
        auto out = s.substr(pos, n);
        pos += n;
        return out;
    }
};

}  // namespace

std::uint64_t model_digest(const LainModel& model) {
    Fnv1a h;
    h.str(model.config().canonical());
    const auto& sp = model.space();
    for (const auto& o : sp.objects()) h.str("o:" + o + "\n");
    for (const auto& v : sp.verbs()) h.str("v:" + v + "\n");
    for (const auto& c : sp.categories()) h.str("c:" + std::to_string(c.object) + "," + std::to_string(c.verb) + "\n");
    h.u64(sp.human_object_index());
    return h.h;
}

void save_checkpoint(const std::string& path, const LainModel& model, std::uint64_t run_digest) {
    const auto& entries = model.params().entries();
    std::string head(kMagic, 8);
    put<std::uint32_t>(head, kVersion);
    put<std::uint64_t>(head, model_digest(model));
    put<std::uint64_t>(head, run_digest);
    put<std::uint32_t>(head, static_cast<std::uint32_t>(entries.size()));
    std::size_t manifest = 0;
    for (const auto& [name, t] : entries) manifest += 4 + name.size() + 4 + 8 * t.rank() + 1 + 8;
    std::uint64_t offset = head.size() + manifest;
    std::string payload;
    for (const auto& [name, t] : entries) {
        put<std::uint32_t>(head, static_cast<std::uint32_t>(name.size()));
        head += name;
        put<std::uint32_t>(head, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(head, d);
        put<std::uint8_t>(head, t.requires_grad() ? 0 : 1);
        put<std::uint64_t>(head, offset);
        for (double v : t.data()) put<std::uint64_t>(payload, std::bit_cast<std::uint64_t>(v));
        offset += 8 * t.numel();
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw CheckpointError("write to '" + path + "' failed");
}

std::uint64_t load_checkpoint(const std::string& path, LainModel& model, bool force) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string data = ss.str();
    Reader r{data};
    if (r.bytes(8) != std::string(kMagic, 8)) throw CheckpointError("'" + path + "' is not a checkpoint");
    if (auto v = r.get<std::uint32_t>(); v != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
    const auto digest = r.get<std::uint64_t>();
    const auto run_digest = r.get<std::uint64_t>();
    if (digest != model_digest(model) && !force)
        throw CheckpointError("checkpoint model digest does not match the current configuration");
    const auto count = r.get<std::uint32_t>();
    auto& params = model.params();
    if (count != params.size())
        throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                              std::to_string(params.size()));
    struct Pending {
        Tensor target;
        std::uint64_t offset;
    };
    std::vector<Pending> pending;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name = r.bytes(r.get<std::uint32_t>());
        if (!params.contains(name)) throw CheckpointError("checkpoint tensor '" + name + "' is not a model parameter");
        Tensor t = params.get(name);
        const auto rank = r.get<std::uint32_t>();
        Shape shape;
        for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint64_t>());
        if (shape != t.shape())
            throw CheckpointError("shape mismatch for '" + name + "': checkpoint " + shape_str(shape) + ", model " +
                                  shape_str(t.shape()));
        r.get<std::uint8_t>();
        const auto offset = r.get<std::uint64_t>();
        if (offset > data.size() || (data.size() - offset) / 8 < t.numel())
            throw CheckpointError("payload of '" + name + "' lies outside the file");
        pending.push_back({t, offset});
    }
    for (auto& p : pending) {
        auto out = p.target.mutable_data();
        Reader pr{data, p.offset};
        for (auto& v : out) v = std::bit_cast<double>(pr.get<std::uint64_t>());
    }
    return run_digest;
}

}  // namespace lain
