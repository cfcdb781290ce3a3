// Copyright 2026 The kpirl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kpirl/dynmodel/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "kpirl/error.h"

namespace kpirl {
namespace {

constexpr const char* kFormatName = "kpirl-checkpoint";
constexpr int kFormatVersion = 1;

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t GetU64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string TensorName(const std::string& prefix, int layer, const char* what) {
  return prefix + ".layer" + std::to_string(layer) + "." + what;
}

}  // namespace

const Tensor& Checkpoint::Get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  Fail(ErrorKind::kFormat, "checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::Has(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  nlohmann::json manifest = checkpoint.meta;
  manifest["format"] = kFormatName;
  manifest["version"] = kFormatVersion;
  nlohmann::json entries = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, t] : checkpoint.tensors) {
    entries.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
    PutU64(payload, static_cast<std::uint64_t>(t.size()));
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      PutU64(payload, std::bit_cast<std::uint64_t>(t.data()[k]));
    }
  }
  manifest["tensors"] = entries;
  manifest["payload_bytes"] = payload.size();

  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + tmp);
    out << manifest.dump() << '\n';
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) Fail(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot rename " + tmp + ": " + ec.message());
}

namespace {

Checkpoint ParseCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const size_t newline = bytes.find('\n');
  if (newline == std::string::npos) {
    Fail(ErrorKind::kFormat, path + ": missing manifest line");
  }
  nlohmann::json manifest = nlohmann::json::parse(
      bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(newline),
      nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object() ||
      manifest.value("format", "") != kFormatName ||
      !manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    Fail(ErrorKind::kFormat, path + ": malformed manifest");
  }
  if (manifest.value("version", 0) != kFormatVersion) {
    Fail(ErrorKind::kFormat, path + ": unsupported version");
  }
  const size_t payload_start = newline + 1;
  const size_t payload_size = bytes.size() - payload_start;
  if (!manifest.contains("payload_bytes") ||
      manifest["payload_bytes"].get<std::uint64_t>() != payload_size) {
    Fail(ErrorKind::kFormat, path + ": payload is " +
                                 std::to_string(payload_size) +
                                 " bytes, manifest disagrees (truncated?)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) +
                  payload_start;
  const auto* end = p + payload_size;
  Checkpoint cp;
  for (const auto& entry : manifest["tensors"]) {
    const std::string name = entry.value("name", "");
    const std::int64_t rows = entry.value("rows", -1);
    const std::int64_t cols = entry.value("cols", -1);
    if (rows < 0 || cols < 0) {
      Fail(ErrorKind::kFormat, path + ": bad shape for '" + name + "'");
    }
    if (end - p < 8) Fail(ErrorKind::kFormat, path + ": truncated payload");
    const std::uint64_t count = GetU64(p);
    p += 8;
    if (count != static_cast<std::uint64_t>(rows * cols)) {
      Fail(ErrorKind::kShape, path + ": tensor '" + name + "' holds " +
                                  std::to_string(count) + " values, manifest says " +
                                  std::to_string(rows) + "x" +
                                  std::to_string(cols));
    }
    if (static_cast<std::uint64_t>(end - p) < 8 * count) {
      Fail(ErrorKind::kFormat, path + ": truncated payload");
    }
    Tensor t(rows, cols);
    for (std::uint64_t k = 0; k < count; ++k, p += 8) {
      t.data()[k] = std::bit_cast<double>(GetU64(p));
    }
    cp.tensors.emplace_back(name, std::move(t));
  }
  if (p != end) Fail(ErrorKind::kFormat, path + ": trailing payload bytes");
  manifest.erase("tensors");
  manifest.erase("payload_bytes");
  manifest.erase("format");
  manifest.erase("version");
  cp.meta = std::move(manifest);
  return cp;
}

}  // namespace

Checkpoint LoadCheckpoint(const std::string& path) {
  try {
    return ParseCheckpoint(path);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, path + ": " + e.what());
  }
}

void PutMlp(Checkpoint& checkpoint, const std::string& prefix,
            const MlpParams& params) {
  ValidateMlp(params);
  checkpoint.meta["mlps"][prefix] = {{"sizes", params.sizes},
                                     {"activation", params.activation}};
  for (int i = 0; i < params.num_layers(); ++i) {
    checkpoint.tensors.emplace_back(TensorName(prefix, i, "weight"),
                                    params.weights[i]);
    checkpoint.tensors.emplace_back(TensorName(prefix, i, "bias"),
                                    params.biases[i]);
  }
  checkpoint.tensors.emplace_back(prefix + ".input_mean", params.input_mean);
  checkpoint.tensors.emplace_back(prefix + ".input_scale", params.input_scale);
  checkpoint.tensors.emplace_back(prefix + ".output_scale",
                                  params.output_scale);
}

MlpParams GetMlp(const Checkpoint& checkpoint, const std::string& prefix) {
  const auto& mlps = checkpoint.meta.find("mlps");
  if (mlps == checkpoint.meta.end() || !mlps->contains(prefix)) {
    Fail(ErrorKind::kFormat, "checkpoint has no network '" + prefix + "'");
  }
  const nlohmann::json& desc = (*mlps)[prefix];
  MlpParams params;
  try {
    params.sizes = desc.at("sizes").get<std::vector<int>>();
    params.activation = desc.at("activation").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, "network '" + prefix + "': " + e.what());
  }
  if (params.sizes.size() < 2) {
    Fail(ErrorKind::kFormat, "network '" + prefix + "' has too few layers");
  }
  for (size_t i = 0; i + 1 < params.sizes.size(); ++i) {
    params.weights.push_back(
        checkpoint.Get(TensorName(prefix, static_cast<int>(i), "weight")));
    params.biases.push_back(
        checkpoint.Get(TensorName(prefix, static_cast<int>(i), "bias")));
  }
  params.input_mean = checkpoint.Get(prefix + ".input_mean");
  params.input_scale = checkpoint.Get(prefix + ".input_scale");
  params.output_scale = checkpoint.Get(prefix + ".output_scale");
  ValidateMlp(params);
  return params;
}

}  // namespace kpirl
