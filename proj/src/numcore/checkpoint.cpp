// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/numcore/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace fepcross::numcore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const NamedTensors& tensors) {
  fs::create_directories(dir);
  json header = json::array();
  std::vector<char> blob;
  for (const auto& [name, t] : tensors) {
    const std::size_t offset = blob.size();
    const std::size_t length = t.size() * sizeof(float);
    blob.resize(offset + length);
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(t[i]));
      std::memcpy(blob.data() + offset + i * sizeof(float), &bits, sizeof(bits));
    }
    header.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"offset", offset}, {"length", length}});
  }
  std::ofstream hs(dir / "header.json");
  if (!hs) throw CheckpointError("cannot write " + (dir / "header.json").string());
  hs << header.dump(2) << '\n';
  std::ofstream ws(dir / "weights.bin", std::ios::binary);
  if (!ws) throw CheckpointError("cannot write " + (dir / "weights.bin").string());
  ws.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!ws) throw CheckpointError("short write to " + (dir / "weights.bin").string());
}

NamedTensors load_checkpoint(const fs::path& dir) {
  std::ifstream hs(dir / "header.json");
  if (!hs) throw CheckpointError("missing " + (dir / "header.json").string());
  json header;
  try {
    hs >> header;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed header.json: " + std::string(e.what()));
  }
  std::ifstream ws(dir / "weights.bin", std::ios::binary);
  if (!ws) throw CheckpointError("missing " + (dir / "weights.bin").string());
  std::vector<char> blob((std::istreambuf_iterator<char>(ws)), std::istreambuf_iterator<char>());

  NamedTensors out;
  std::size_t total = 0;
  for (const auto& entry : header) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto length = entry.at("length").get<std::size_t>();
    if (entry.at("dtype").get<std::string>() != "f32") throw CheckpointError(name + ": unsupported dtype");
    if (length != shape_size(shape) * sizeof(float)) throw CheckpointError(name + ": length disagrees with shape");
    if (offset + length > blob.size()) throw CheckpointError(name + ": extends past end of weights.bin");
    std::vector<float> data(shape_size(shape));
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + offset + i * sizeof(float), sizeof(bits));
      data[i] = std::bit_cast<float>(to_little(bits));
    }
    out.emplace(name, Tensor<float>(shape, std::move(data)));
    total += length;
  }
  if (total != blob.size()) {
    throw CheckpointError("weights.bin holds " + std::to_string(blob.size()) + " bytes, header describes " +
                          std::to_string(total));
  }
  return out;
}

}  // namespace fepcross::numcore
