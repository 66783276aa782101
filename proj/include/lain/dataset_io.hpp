#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lain/scene.hpp"

namespace lain {

enum class PixelEncoding { Hex, Raw };

struct Dataset {
    std::uint64_t digest = 0;
    std::vector<SceneRecord> records;
};

class DatasetParseError : public std::runtime_error {
public:
    DatasetParseError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

// Layout (one token group per line):
//   LAINDS 1 digest=<16 hex> scenes=<n> pixel_encoding=hex|raw
//   SCENE <seed> <image_size> <n_entities> <n_instances> <n_detections>
//   PIX <hex floats>                        | PIX <nbytes>\n<raw LE float32 bytes>
//   E <x1> <y1> <x2> <y2> <class>
//   I <h_ent> <o_ent> <hbox x4> <obox x4> <object_class> <verb> <category>
//   D <x1> <y1> <x2> <y2> <class> <confidence> <dim> <feature...>
//   END
// Doubles are written with 17 significant digits.
std::string serialize_dataset(const Dataset& dataset, PixelEncoding encoding = PixelEncoding::Hex);
Dataset parse_dataset(const std::string& bytes);

void write_dataset(const std::string& path, const Dataset& dataset, PixelEncoding encoding = PixelEncoding::Hex);
Dataset read_dataset(const std::string& path);

// FNV-1a over the serialized records (independent of pixel encoding).
std::uint64_t records_digest(const std::vector<SceneRecord>& records);

}  // namespace lain
