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

#ifndef KPIRL_APPCLI_COMMANDS_H_
#define KPIRL_APPCLI_COMMANDS_H_

#include <ostream>
#include <string>
#include <vector>

#include "kpirl/appcli/config.h"
#include "kpirl/error.h"

namespace kpirl {

// 0 success, 2 config, 3 divergence, 4 I/O.
int ExitCode(ErrorKind kind);

std::string OutputPath(const RunConfig& cfg, const std::string& name);
std::string Provenance(const RunConfig& cfg);

void CmdCollect(const RunConfig& cfg, bool overwrite, std::ostream& log);
void CmdTrainDynamics(const RunConfig& cfg, bool overwrite, std::ostream& log);

struct IrlCommand {
  bool feature_matching = false;
  std::string resume;  // checkpoint to continue from; empty starts fresh
};
// Output stem: irl_<variant> or fm_weighted.
std::string IrlStem(const RunConfig& cfg, const IrlCommand& cmd);
void CmdTrainIrl(const RunConfig& cfg, const IrlCommand& cmd, bool overwrite,
                 std::ostream& log);

void CmdTrainAirl(const RunConfig& cfg, bool overwrite, std::ostream& log);
void CmdEval(const RunConfig& cfg, bool overwrite, std::ostream& log);
void CmdPlotExport(const RunConfig& cfg, const std::vector<std::string>& inputs,
                   const std::string& output, bool overwrite, std::ostream& log);

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace kpirl

#endif  // KPIRL_APPCLI_COMMANDS_H_
