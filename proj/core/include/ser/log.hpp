// Copyright 2026 The serbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <string>

#include <spdlog/spdlog.h>

namespace ser::log {

/// Stage logger writing "timestamp stage level message" lines to stderr.
std::shared_ptr<spdlog::logger> get(const std::string& stage);

void set_level(spdlog::level::level_enum level);

}  // namespace ser::log
