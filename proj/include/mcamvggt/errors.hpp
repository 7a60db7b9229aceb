/*
 * Copyright 2026 The mcamvggt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MCAMVGGT_ERRORS_HPP_
#define MCAMVGGT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mcamvggt {

// Every failure raised by the library derives from Error so callers can map
// it onto an exit code without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MCAMVGGT_DEFINE_ERROR(Name)       \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

MCAMVGGT_DEFINE_ERROR(DegenerateRig);
MCAMVGGT_DEFINE_ERROR(InvalidQuaternion);
MCAMVGGT_DEFINE_ERROR(NoValidCameras);
MCAMVGGT_DEFINE_ERROR(ShapeError);
MCAMVGGT_DEFINE_ERROR(EmptyScene);
MCAMVGGT_DEFINE_ERROR(NoValidPixels);
MCAMVGGT_DEFINE_ERROR(LengthMismatch);
MCAMVGGT_DEFINE_ERROR(NonFinite);
MCAMVGGT_DEFINE_ERROR(MissingCheckpoint);
MCAMVGGT_DEFINE_ERROR(FingerprintMismatch);
MCAMVGGT_DEFINE_ERROR(ConfigError);
MCAMVGGT_DEFINE_ERROR(IoError);

#undef MCAMVGGT_DEFINE_ERROR

}  // namespace mcamvggt

#endif  // MCAMVGGT_ERRORS_HPP_
