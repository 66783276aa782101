#include "lain/dataset_io.hpp"

#include <bit>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lain/fnv.hpp"

namespace lain {

DatasetParseError::DatasetParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

namespace {

constexpr std::size_t kMaxImageSize = 4096;
constexpr std::size_t kMaxCount = 1u << 20;

void put_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out += buf;
}

void put_box(std::string& out, const Box& b) {
    put_double(out, b.x1);
    put_double(out, b.y1);
    put_double(out, b.x2);
    put_double(out, b.y2);
}

void put_records(std::string& out, const std::vector<SceneRecord>& records, PixelEncoding enc) {
    static constexpr char hex[] = "0123456789abcdef";
    for (const auto& r : records) {
        const auto& s = r.scene;
        out += "SCENE " + std::to_string(s.seed) + " " + std::to_string(s.image_size) + " " +
               std::to_string(s.entities.size()) + " " + std::to_string(s.instances.size()) + " " +
               std::to_string(r.detections.size()) + "\n";
        if (enc == PixelEncoding::Hex) {
            out += "PIX ";
            for (float p : s.pixels) {
                auto bits = std::bit_cast<std::uint32_t>(p);
                for (int k = 7; k >= 0; --k) out += hex[(bits >> (4 * k)) & 0xF];
            }
            out += "\n";
        } else {
            out += "PIX " + std::to_string(s.pixels.size() * 4) + "\n";
            for (float p : s.pixels) {
                auto bits = std::bit_cast<std::uint32_t>(p);
                for (int k = 0; k < 4; ++k) out += static_cast<char>((bits >> (8 * k)) & 0xFF);
            }
            out += "\n";
        }
        for (const auto& e : s.entities) {
            out += "E";
            put_box(out, e.box);
            out += " " + std::to_string(e.class_index) + "\n";
        }
        for (const auto& i : s.instances) {
            out += "I " + std::to_string(i.human_entity) + " " + std::to_string(i.object_entity);
            put_box(out, i.human_box);
            put_box(out, i.object_box);
            out += " " + std::to_string(i.object_class) + " " + std::to_string(i.verb) + " " +
                   std::to_string(i.category) + "\n";
        }
        for (const auto& d : r.detections) {
            out += "D";
            put_box(out, d.box);
            out += " " + std::to_string(d.class_index);
            put_double(out, d.confidence);
            out += " " + std::to_string(d.feature.size());
            for (double f : d.feature) put_double(out, f);
            out += "\n";
        }
        out += "END\n";
    }
}

class Cursor {
public:
    explicit Cursor(const std::string& s) : s_(s) {}

    [[noreturn]] void fail(const std::string& what) const { throw DatasetParseError(what, pos_); }
    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= s_.size(); }

    void literal(std::string_view lit) {
        if (s_.compare(pos_, lit.size(), lit) != 0) fail("expected '" + std::string(lit) + "'");
        pos_ += lit.size();
    }
    void space() {
        if (at_end() || s_[pos_] != ' ') fail("expected space");
        ++pos_;
    }
    void eol() {
        if (at_end() || s_[pos_] != '\n') fail("expected end of line");
        ++pos_;
    }
    std::string_view token() {
        const auto start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '\n') ++pos_;
        if (pos_ == start) fail("expected a value");
        return std::string_view(s_).substr(start, pos_ - start);
    }
    std::uint64_t u64(int base = 10) {
        const auto start = pos_;
        auto t = token();
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v, base);
        if (ec != std::errc() || p != t.data() + t.size()) {
            pos_ = start;
            fail("malformed integer");
        }
        return v;
    }
    std::size_t count(std::size_t limit) {
        const auto start = pos_;
        auto v = u64();
        if (v > limit) {
            pos_ = start;
            fail("count out of range");
        }
        return static_cast<std::size_t>(v);
    }
    double f64() {
        const auto start = pos_;
        std::string t(token());
        char* endp = nullptr;
        errno = 0;
        double v = std::strtod(t.c_str(), &endp);
        if (endp != t.c_str() + t.size() || errno == ERANGE) {
            pos_ = start;
            fail("malformed number");
        }
        return v;
    }
    Box box() {
        Box b;
        space();
        b.x1 = f64();
        space();
        b.y1 = f64();
        space();
        b.x2 = f64();
        space();
        b.y2 = f64();
        return b;
    }
    std::string_view take(std::size_t n) {
        if (s_.size() - pos_ < n) fail("unexpected end of data");
        auto v = std::string_view(s_).substr(pos_, n);
        pos_ += n;
        return v;
    }
    std::string_view rest_of_line() {
        auto nl = s_.find('\n', pos_);
        if (nl == std::string::npos) fail("unterminated line");
        auto v = std::string_view(s_).substr(pos_, nl - pos_);
        pos_ = nl;
        return v;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

SceneRecord parse_record(Cursor& c, PixelEncoding enc) {
    SceneRecord r;
    auto& s = r.scene;
    c.literal("SCENE ");
    s.seed = c.u64();
    c.space();
    const auto size_pos = c.pos();
    s.image_size = c.count(kMaxImageSize);
    if (s.image_size == 0) throw DatasetParseError("image size must be positive", size_pos);
    c.space();
    const auto n_ent = c.count(kMaxCount);
    c.space();
    const auto n_inst = c.count(kMaxCount);
    c.space();
    const auto n_det = c.count(kMaxCount);
    c.eol();

    const std::size_t n_pix = s.image_size * s.image_size * 3;
    s.pixels.resize(n_pix);
    c.literal("PIX ");
    if (enc == PixelEncoding::Hex) {
        const auto start = c.pos();
        auto line = c.rest_of_line();
        if (line.size() != n_pix * 8) throw DatasetParseError("pixel payload has wrong length", start);
        for (std::size_t i = 0; i < n_pix; ++i) {
            std::uint32_t bits = 0;
            for (std::size_t k = 0; k < 8; ++k) {
                int h = hex_value(line[i * 8 + k]);
                if (h < 0) throw DatasetParseError("invalid hex digit", start + i * 8 + k);
                bits = (bits << 4) | static_cast<std::uint32_t>(h);
            }
            s.pixels[i] = std::bit_cast<float>(bits);
        }
    } else {
        const auto start = c.pos();
        if (c.u64() != n_pix * 4) throw DatasetParseError("pixel byte count does not match image size", start);
        c.eol();
        auto raw = c.take(n_pix * 4);
        for (std::size_t i = 0; i < n_pix; ++i) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k)
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[i * 4 + k])) << (8 * k);
            s.pixels[i] = std::bit_cast<float>(bits);
        }
    }
    c.eol();

    for (std::size_t i = 0; i < n_ent; ++i) {
        c.literal("E");
        Entity e;
        e.box = c.box();
        c.space();
        e.class_index = c.u64();
        c.eol();
        s.entities.push_back(e);
    }
    for (std::size_t i = 0; i < n_inst; ++i) {
        c.literal("I ");
        HoiInstance h;
        const auto refs = c.pos();
        h.human_entity = c.u64();
        c.space();
        h.object_entity = c.u64();
        if (h.human_entity >= n_ent || h.object_entity >= n_ent)
            throw DatasetParseError("instance references a missing entity", refs);
        h.human_box = c.box();
        h.object_box = c.box();
        c.space();
        h.object_class = c.u64();
        c.space();
        h.verb = c.u64();
        c.space();
        h.category = c.u64();
        c.eol();
        s.instances.push_back(h);
    }
    for (std::size_t i = 0; i < n_det; ++i) {
        c.literal("D");
        Detection d;
        d.box = c.box();
        c.space();
        d.class_index = c.u64();
        c.space();
        d.confidence = c.f64();
        c.space();
        const auto dim = c.count(kMaxCount);
        d.feature.resize(dim);
        for (auto& f : d.feature) {
            c.space();
            f = c.f64();
        }
        c.eol();
        r.detections.push_back(std::move(d));
    }
    c.literal("END");
    c.eol();
    return r;
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset, PixelEncoding encoding) {
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(dataset.digest));
    std::string out = "LAINDS 1 digest=" + std::string(digest) + " scenes=" + std::to_string(dataset.records.size()) +
                      " pixel_encoding=" + (encoding == PixelEncoding::Hex ? "hex" : "raw") + "\n";
    put_records(out, dataset.records, encoding);
    return out;
}

Dataset parse_dataset(const std::string& bytes) {
    Cursor c(bytes);
    Dataset ds;
    c.literal("LAINDS ");
    const auto vpos = c.pos();
    if (c.u64() != 1) throw DatasetParseError("unsupported dataset version", vpos);
    c.literal(" digest=");
    ds.digest = c.u64(16);
    c.literal(" scenes=");
    const auto n = c.count(kMaxCount);
    c.literal(" pixel_encoding=");
    const auto epos = c.pos();
    auto enc_name = c.token();
    PixelEncoding enc;
    if (enc_name == "hex")
        enc = PixelEncoding::Hex;
    else if (enc_name == "raw")
        enc = PixelEncoding::Raw;
    else
        throw DatasetParseError("unknown pixel encoding", epos);
    c.eol();
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.records.push_back(parse_record(c, enc));
    if (!c.at_end()) c.fail("trailing data after last record");
    return ds;
}

void write_dataset(const std::string& path, const Dataset& dataset, PixelEncoding encoding) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    const auto text = serialize_dataset(dataset, encoding);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open dataset '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_dataset(ss.str());
}

std::uint64_t records_digest(const std::vector<SceneRecord>& records) {
    std::string text;
    put_records(text, records, PixelEncoding::Hex);
    Fnv1a h;
    h.str(text);
    return h.h;
}

}  // namespace lain
