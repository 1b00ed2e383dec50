/* Copyright 2026 The AMTNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef AMT_COMMON_HPP_
#define AMT_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace amt {

// Error hierarchy. Every failure mode named by the library contracts maps to
// one of these; all derive from Error so callers can catch coarsely.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define AMT_DEFINE_ERROR(NAME)                                   \
  class NAME : public Error {                                    \
   public:                                                       \
    explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
  }

AMT_DEFINE_ERROR(InvalidInput);
AMT_DEFINE_ERROR(InvalidCutoff);
AMT_DEFINE_ERROR(DegenerateSignal);
AMT_DEFINE_ERROR(SignalTooShort);
AMT_DEFINE_ERROR(OutOfMappingRange);
AMT_DEFINE_ERROR(UnmappedRecording);
AMT_DEFINE_ERROR(IngestError);
AMT_DEFINE_ERROR(ManifestError);
AMT_DEFINE_ERROR(NumericalError);
AMT_DEFINE_ERROR(ShapeError);
AMT_DEFINE_ERROR(UnsupportedOperation);
AMT_DEFINE_ERROR(DegenerateEmbedding);
AMT_DEFINE_ERROR(IoError);
AMT_DEFINE_ERROR(ConfigError);

#undef AMT_DEFINE_ERROR

// File formats are little-endian; the library does not byte-swap.
inline void require_little_endian() {
  const std::uint16_t probe = 0x0001;
  if (*reinterpret_cast<const std::uint8_t*>(&probe) != 1)
    throw UnsupportedOperation("big-endian hosts are not supported");
}

}  // namespace amt

#endif  // AMT_COMMON_HPP_
