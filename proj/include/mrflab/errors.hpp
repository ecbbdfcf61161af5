/*
   Copyright 2026 The mrflab Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace mrflab {

/// Requested operation is not defined for the model's formulation or field.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A configured computational cap (enumeration size, epoch count) was hit.
class ResourceLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A sampler could not produce a draw, e.g. CFTP failed to coalesce.
class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

} // namespace detail
} // namespace mrflab
