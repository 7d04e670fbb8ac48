// Copyright 2026 The Selex Authors.
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

#pragma once

#include <Eigen/Dense>

namespace selex {

struct LogisticFit {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

// Minimizes  sum_i log(1 + exp(-s_i (x_i.w + b))) + l2/2 |w|^2  with
// s_i = +1 for labels[i] = 1 and -1 for labels[i] = 0. The bias is not
// penalized. Truncated Newton with Armijo backtracking, stopping once the
// gradient norm drops to `tolerance`.
LogisticFit fit_logistic(const Eigen::MatrixXd& features,
                         const Eigen::VectorXd& labels, double l2,
                         double tolerance = 1e-6, int max_iterations = 500);

double sigmoid(double z);

}  // namespace selex
