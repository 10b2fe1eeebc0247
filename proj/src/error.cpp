// Copyright 2026 The simadapt Authors.
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

#include "simadapt/error.hpp"

namespace simadapt {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::degenerate_data: return "degenerate data";
    case Errc::non_finite: return "non-finite value";
    case Errc::divergence: return "divergence";
    case Errc::bad_magic: return "bad magic";
    case Errc::bad_header: return "bad header";
    case Errc::truncated: return "truncated payload";
    case Errc::dimension_overflow: return "dimension overflow";
    case Errc::io_error: return "i/o error";
    case Errc::not_found: return "not found";
  }
  return "unknown";
}

}  // namespace simadapt
