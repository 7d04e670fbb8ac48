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

#include "selex/logistic.hpp"

#include <cmath>

#include "selex/error.hpp"

namespace selex {
namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

struct Problem {
  const Eigen::MatrixXd& x;
  Eigen::VectorXd sign;  // +1 / -1
  double l2;

  Eigen::Index dim() const { return x.cols() + 1; }

  Eigen::VectorXd margins(const Eigen::VectorXd& theta) const {
    const Eigen::Index d = x.cols();
    Eigen::VectorXd z = x * theta.head(d);
    z.array() += theta(d);
    return sign.cwiseProduct(z);
  }

  double objective(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd m = margins(theta);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) loss += log1p_exp_neg(m(i));
    return loss + 0.5 * l2 * theta.head(x.cols()).squaredNorm();
  }

  // Gradient and the per-sample curvature p(1-p).
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta,
                           Eigen::VectorXd& curvature) const {
    const Eigen::Index d = x.cols();
    const Eigen::VectorXd m = margins(theta);
    Eigen::VectorXd coef(m.size());
    curvature.resize(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double p = sigmoid(m(i));  // probability of the observed label
      coef(i) = -(1.0 - p) * sign(i);
      curvature(i) = p * (1.0 - p);
    }
    Eigen::VectorXd g(dim());
    g.head(d) = x.transpose() * coef + l2 * theta.head(d);
    g(d) = coef.sum();
    return g;
  }

  Eigen::VectorXd hessian_times(const Eigen::VectorXd& curvature,
                                const Eigen::VectorXd& v) const {
    const Eigen::Index d = x.cols();
    Eigen::VectorXd xv = x * v.head(d);
    xv.array() += v(d);
    xv = xv.cwiseProduct(curvature);
    Eigen::VectorXd out(dim());
    out.head(d) = x.transpose() * xv + l2 * v.head(d);
    out(d) = xv.sum();
    return out;
  }
};

// Conjugate gradient on H p = -g, stopped at relative residual `eta`.
Eigen::VectorXd newton_direction(const Problem& problem,
                                 const Eigen::VectorXd& curvature,
                                 const Eigen::VectorXd& g, double eta) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(g.size());
  Eigen::VectorXd r = -g;
  Eigen::VectorXd dir = r;
  double rr = r.squaredNorm();
  const double stop = eta * eta * g.squaredNorm();
  const Eigen::Index max_steps = 2 * g.size() + 10;
  for (Eigen::Index k = 0; k < max_steps && rr > stop; ++k) {
    const Eigen::VectorXd hd = problem.hessian_times(curvature, dir);
    const double curv = dir.dot(hd);
    if (curv <= 0) break;
    const double alpha = rr / curv;
    p += alpha * dir;
    r -= alpha * hd;
    const double rr_next = r.squaredNorm();
    dir = r + (rr_next / rr) * dir;
    rr = rr_next;
  }
  if (p.squaredNorm() == 0.0) p = -g;
  return p;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticFit fit_logistic(const Eigen::MatrixXd& features,
                         const Eigen::VectorXd& labels, double l2,
                         double tolerance, int max_iterations) {
  if (features.rows() != labels.size()) {
    throw InvalidArgument("fit_logistic: feature/label row mismatch");
  }
  if (features.rows() == 0) throw InvalidArgument("fit_logistic: no samples");
  if (!(l2 > 0)) throw InvalidArgument("fit_logistic: l2 must be positive");

  Problem problem{features, Eigen::VectorXd(labels.size()), l2};
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    problem.sign(i) = labels(i) > 0.5 ? 1.0 : -1.0;
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(problem.dim());
  Eigen::VectorXd curvature;
  Eigen::VectorXd g = problem.gradient(theta, curvature);
  double f = problem.objective(theta);

  LogisticFit fit;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    const double gnorm = g.norm();
    if (gnorm <= tolerance) break;
    const double eta = std::min(0.5, std::sqrt(gnorm));
    const Eigen::VectorXd step = newton_direction(problem, curvature, g, eta);
    const double slope = g.dot(step);
    double t = 1.0;
    Eigen::VectorXd next = theta + step;
    double f_next = problem.objective(next);
    while (f_next > f + 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      next = theta + t * step;
      f_next = problem.objective(next);
    }
    if (!(f_next <= f) && t <= 1e-12) break;  // no further progress possible
    theta = std::move(next);
    f = f_next;
    g = problem.gradient(theta, curvature);
  }
  const Eigen::Index d = features.cols();
  fit.weights = theta.head(d);
  fit.bias = theta(d);
  fit.iterations = iter;
  fit.gradient_norm = g.norm();
  fit.converged = fit.gradient_norm <= tolerance;
  return fit;
}

}  // namespace selex
