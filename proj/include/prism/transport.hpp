// Copyright 2026 The PRISM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

namespace prism::grad {

/// Exact discrete optimal transport between uniform marginals (1/P on rows,
/// 1/Q on columns): returns the coupling minimizing <cost, T>.
///
/// Solved as an integer transportation problem (row supply Q, column demand
/// P) by successive shortest paths with Dijkstra on reduced costs, so the
/// result is an extreme point of the transport polytope.
Eigen::MatrixXd exact_uniform_transport(const Eigen::MatrixXd& cost);

}  // namespace prism::grad
