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

#include "kpirl/appcli/formats.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kpirl/error.h"

namespace kpirl {
namespace {

using nlohmann::json;

std::string Array(std::initializer_list<double> values) {
  std::string out = "[";
  bool first = true;
  for (double v : values) {
    if (!first) out += ",";
    out += FormatDouble(v);
    first = false;
  }
  return out + "]";
}

std::string Array(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += FormatDouble(v(i));
  }
  return out + "]";
}

const char* Bool(bool b) { return b ? "true" : "false"; }

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

[[noreturn]] void LineError(const std::string& path, size_t line,
                            const std::string& what) {
  Fail(ErrorKind::kFormat, path + ":" + std::to_string(line) + ": " + what);
}

json ParseLine(const std::string& path, size_t line, const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    LineError(path, line, "not a JSON record");
  }
}

Eigen::VectorXd Vec(const json& j, const char* key, int n,
                    const std::string& path, size_t line) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array() || static_cast<int>(it->size()) != n) {
    LineError(path, line, std::string("field '") + key + "' must be an array of " +
                              std::to_string(n) + " numbers");
  }
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    if (!(*it)[i].is_number()) LineError(path, line, std::string("non-numeric '") + key + "'");
    v(i) = (*it)[i].get<double>();
  }
  return v;
}

template <typename T>
T Field(const json& j, const char* key, const std::string& path, size_t line) {
  const auto it = j.find(key);
  try {
    if (it == j.end()) throw std::out_of_range(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw std::out_of_range(key);
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw std::out_of_range(key);
    }
    return it->get<T>();
  } catch (const std::exception&) {
    LineError(path, line, std::string("missing or mistyped field '") + key + "'");
  }
}

// Header first, then records; returns records with their line numbers.
struct Jsonl {
  json header;
  std::vector<std::pair<size_t, json>> records;
  size_t lines = 0;

  void CheckCount(const std::string& path, size_t n) const {
    const auto count = header.find("count");
    if (count == header.end() || !count->is_number_unsigned() ||
        count->get<size_t>() != n) {
      LineError(path, 1, "header count does not match the " + std::to_string(n) +
                             " records");
    }
  }
};

Jsonl ReadJsonl(const std::string& path, const std::string& format) {
  const std::vector<std::string> lines = ReadLines(path);
  if (lines.empty()) LineError(path, 1, "missing header record");
  Jsonl result;
  result.lines = lines.size();
  const json header = ParseLine(path, 1, lines[0]);
  if (!header.is_object() || header.value("type", "") != "header" ||
      header.value("format", "") != format) {
    LineError(path, 1, "expected a '" + format + "' header record");
  }
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json rec = ParseLine(path, i + 1, lines[i]);
    if (!rec.is_object()) LineError(path, i + 1, "record is not an object");
    result.records.emplace_back(i + 1, std::move(rec));
  }
  result.header = header;
  return result;
}

std::string HeaderLine(const json& header, const char* format, size_t count) {
  json h = header;
  h["type"] = "header";
  h["format"] = format;
  h["version"] = 1;
  h["count"] = count;
  return h.dump() + "\n";
}

}  // namespace

std::string FormatDouble(double v) {
  if (!std::isfinite(v)) {
    Fail(ErrorKind::kNumericalDomain, "cannot serialize a non-finite value");
  }
  // "-0" would read back as the integer 0
  if (v == 0.0 && std::signbit(v)) return "-0.0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CheckOutput(const std::string& path, bool overwrite) {
  if (!overwrite && std::filesystem::exists(path)) {
    Fail(ErrorKind::kIo, "'" + path + "' exists; pass --overwrite to replace it");
  }
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  const std::string partial = path + ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write '" + partial + "'");
    out << contents;
    out.flush();
    if (!out) Fail(ErrorKind::kIo, "write to '" + partial + "' failed");
  }
  std::filesystem::rename(partial, path, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot rename onto '" + path + "': " + ec.message());
}

std::string DemosJsonl(const std::vector<Demonstration>& demos,
                       const nlohmann::json& header) {
  size_t frames = 0;
  for (const Demonstration& d : demos) frames += d.frames.size();
  json h = header;
  h["demos"] = demos.size();
  std::string out = HeaderLine(h, "kpirl-demos", frames);
  for (size_t i = 0; i < demos.size(); ++i) {
    const Demonstration& d = demos[i];
    if (d.states.size() != d.frames.size()) {
      Fail(ErrorKind::kInput, "demo " + std::to_string(i) + " lacks world states");
    }
    for (size_t t = 0; t < d.frames.size(); ++t) {
      const WorldState& w = d.states[t];
      std::string kp = "[";
      for (int k = 0; k < kNumKeypoints; ++k) {
        if (k) kp += ",";
        kp += Array({d.frames[t][k].x, d.frames[t][k].y, d.frames[t][k].m});
      }
      kp += "]";
      out += "{\"demo\":" + std::to_string(i) + ",\"frame\":" + std::to_string(t) +
             ",\"scenario\":" + std::to_string(d.scenario_id) +
             ",\"seed\":" + std::to_string(d.seed) + ",\"keypoints\":" + kp +
             ",\"q\":" + Array(w.q) + ",\"q_dot\":" + Array(w.q_dot) +
             ",\"gripper_closed\":" + Bool(w.gripper_closed) +
             ",\"cube\":" + Array(w.cube_pos) + ",\"target\":" + Array(w.target_pos) +
             ",\"attached\":" + Bool(w.attached) +
             ",\"time_index\":" + std::to_string(w.time_index);
      if (t < d.actions.size()) out += ",\"action\":" + Array(d.actions[t]);
      out += "}\n";
    }
  }
  return out;
}

std::vector<Demonstration> ReadDemosJsonl(const std::string& path) {
  std::vector<Demonstration> demos;
  const Jsonl file = ReadJsonl(path, "kpirl-demos");
  for (const auto& [line, rec] : file.records) {
    const int demo = Field<int>(rec, "demo", path, line);
    const int frame = Field<int>(rec, "frame", path, line);
    if (demo == static_cast<int>(demos.size()) && frame == 0) {
      demos.emplace_back();
      demos.back().scenario_id = Field<int>(rec, "scenario", path, line);
      demos.back().seed = Field<std::uint64_t>(rec, "seed", path, line);
    }
    if (demos.empty() || demo != static_cast<int>(demos.size()) - 1 ||
        frame != static_cast<int>(demos.back().frames.size())) {
      LineError(path, line, "demo/frame indices out of sequence");
    }
    Demonstration& d = demos.back();
    const auto kp = rec.find("keypoints");
    if (kp == rec.end() || !kp->is_array() || kp->size() != kNumKeypoints) {
      LineError(path, line, "field 'keypoints' must hold " +
                                std::to_string(kNumKeypoints) + " keypoints");
    }
    KeypointFrame f{};
    for (int k = 0; k < kNumKeypoints; ++k) {
      const json& p = (*kp)[k];
      if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
          !p[2].is_number()) {
        LineError(path, line, "keypoint must be [x, y, m]");
      }
      f[k] = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    }
    WorldState w;
    w.q = Vec(rec, "q", kDof, path, line);
    w.q_dot = Vec(rec, "q_dot", kDof, path, line);
    w.gripper_closed = Field<bool>(rec, "gripper_closed", path, line);
    w.cube_pos = Vec(rec, "cube", 2, path, line);
    w.target_pos = Vec(rec, "target", 2, path, line);
    w.attached = Field<bool>(rec, "attached", path, line);
    w.time_index = Field<int>(rec, "time_index", path, line);
    d.frames.push_back(f);
    d.states.push_back(w);
    if (rec.contains("action")) d.actions.push_back(Vec(rec, "action", kActionDim, path, line));
  }
  file.CheckCount(path, file.records.size());
  for (Demonstration& d : demos) {
    d.q0 = d.states.front().q;
    d.q_dot0 = d.states.front().q_dot;
    d.z_goal = d.frames.back();
  }
  return demos;
}

std::string TransitionsJsonl(const std::vector<Transition>& data,
                             const nlohmann::json& header) {
  std::string out = HeaderLine(header, "kpirl-transitions", data.size());
  for (const Transition& t : data) {
    out += "{\"s\":" + Array(t.s) + ",\"a\":" + Array(t.a) +
           ",\"s_next\":" + Array(t.s_next) + ",\"expert\":" + Bool(t.expert) +
           "}\n";
  }
  return out;
}

std::vector<Transition> ReadTransitionsJsonl(const std::string& path) {
  std::vector<Transition> data;
  const Jsonl file = ReadJsonl(path, "kpirl-transitions");
  for (const auto& [line, rec] : file.records) {
    Transition t;
    t.s = Vec(rec, "s", kLatentDim, path, line);
    t.a = Vec(rec, "a", kActionDim, path, line);
    t.s_next = Vec(rec, "s_next", kLatentDim, path, line);
    t.expert = Field<bool>(rec, "expert", path, line);
    data.push_back(std::move(t));
  }
  file.CheckCount(path, data.size());
  return data;
}

nlohmann::json ReadJsonlHeader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  return ParseLine(path, 1, line);
}

std::string CurveCsv(const Curve& curve, const std::string& provenance) {
  std::string out = "# " + provenance + "\n";
  for (size_t c = 0; c < curve.columns.size(); ++c) {
    out += (c ? "," : "") + curve.columns[c];
  }
  out += "\n";
  for (const auto& row : curve.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      out += c ? "," : "";
      // iteration indices print as integers
      out += c == 0 ? std::to_string(static_cast<long long>(row[c])) : FormatDouble(row[c]);
    }
    out += "\n";
  }
  return out;
}

Curve ReadCurveCsv(const std::string& path) {
  const std::vector<std::string> lines = ReadLines(path);
  Curve curve;
  bool have_header = false;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& text = lines[i];
    if (text.empty() || text[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!text.empty() && text.back() == ',') cells.push_back("");
    if (!have_header) {
      if (cells.empty() || cells[0] != "iteration") {
        LineError(path, i + 1, "header must start with 'iteration'");
      }
      curve.columns = cells;
      have_header = true;
      continue;
    }
    if (cells.size() != curve.columns.size()) {
      LineError(path, i + 1, "expected " + std::to_string(curve.columns.size()) +
                                 " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const std::string& c : cells) {
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = std::string::npos;
      }
      if (used != c.size() || c.empty()) LineError(path, i + 1, "non-numeric field '" + c + "'");
      row.push_back(v);
    }
    if (!curve.rows.empty() && !(row[0] > curve.rows.back()[0])) {
      LineError(path, i + 1, "iteration indices must increase");
    }
    curve.rows.push_back(std::move(row));
  }
  if (!have_header) LineError(path, lines.size() + 1, "missing header row");
  return curve;
}

std::string MergeCurvesCsv(const std::vector<std::pair<std::string, Curve>>& runs,
                           const std::string& provenance) {
  if (runs.empty()) Fail(ErrorKind::kInput, "nothing to merge");
  const std::vector<std::string>& columns = runs.front().second.columns;
  std::string out = "# " + provenance + "\nlabel";
  for (const std::string& c : columns) out += "," + c;
  out += "\n";
  for (const auto& [label, curve] : runs) {
    if (curve.columns != columns) {
      Fail(ErrorKind::kFormat, "run '" + label + "' has different columns");
    }
    for (const auto& row : curve.rows) {
      out += label;
      for (size_t c = 0; c < row.size(); ++c) {
        out += ",";
        out += c == 0 ? std::to_string(static_cast<long long>(row[c])) : FormatDouble(row[c]);
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace kpirl
