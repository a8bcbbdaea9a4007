// Copyright 2026 The lqsid Authors
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

#ifndef LQSID_ERROR_HPP_
#define LQSID_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace lqsid {

// A documented precondition was violated: inconsistent dimensions, negative
// scalings, malformed configuration or input files.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed: a factorization that must be positive
// definite was not, a recursion produced non-finite values, or a covariance
// lost positive semi-definiteness beyond tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lqsid

#endif  // LQSID_ERROR_HPP_
