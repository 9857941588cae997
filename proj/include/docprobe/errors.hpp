// Copyright 2026 The docprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace docprobe {

// Every failure raised by the library derives from Error so that callers
// (the sweep runner in particular) can isolate one cell without catching
// unrelated exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DOCPROBE_DEFINE_ERROR(Name)            \
  class Name : public Error {                  \
   public:                                     \
    explicit Name(const std::string& what)     \
        : Error(#Name ": " + what) {}          \
  }

DOCPROBE_DEFINE_ERROR(InvalidArgument);

// corpus
DOCPROBE_DEFINE_ERROR(MalformedInput);
DOCPROBE_DEFINE_ERROR(OffsetResolutionError);
DOCPROBE_DEFINE_ERROR(EmptyCorpus);

// embedstore
DOCPROBE_DEFINE_ERROR(DimensionMismatch);
DOCPROBE_DEFINE_ERROR(IOFailure);
DOCPROBE_DEFINE_ERROR(CorruptFile);
DOCPROBE_DEFINE_ERROR(UnknownDoc);
DOCPROBE_DEFINE_ERROR(LayerNotInBundle);

// probe
DOCPROBE_DEFINE_ERROR(EmptyInput);
DOCPROBE_DEFINE_ERROR(ShapeMismatch);
DOCPROBE_DEFINE_ERROR(NonFiniteLoss);
DOCPROBE_DEFINE_ERROR(EmptySplit);

// runner
DOCPROBE_DEFINE_ERROR(KeyMismatch);

#undef DOCPROBE_DEFINE_ERROR

}  // namespace docprobe
