#pragma once

#include <random>
#include <string>
#include <vector>

#include "sdidkit/did.hpp"
#include "sdidkit/panel.hpp"

namespace testing_support {

using sdidkit::Date;
using sdidkit::Panel;
using sdidkit::TreatmentAssignment;

/// Random dated panel: controls first, then treated units, Gaussian outcomes.
inline std::pair<Panel, TreatmentAssignment> random_panel(std::size_t n_co, std::size_t n_tr, std::size_t t_pre,
                                                          std::size_t t_post, std::uint64_t seed,
                                                          double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  Panel p;
  const auto n = static_cast<Eigen::Index>(n_co + n_tr);
  const auto t = static_cast<Eigen::Index>(t_pre + t_post);
  p.outcomes.resize(n, t);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index s = 0; s < t; ++s) p.outcomes(i, s) = z(rng);
  TreatmentAssignment a;
  for (std::size_t i = 0; i < n_co + n_tr; ++i) {
    const bool treated = i >= n_co;
    p.units.push_back((treated ? "t" : "c") + std::to_string(i));
    p.unit_groups.push_back(treated ? "TR" : "CO");
    if (treated) a.treated_units.push_back(p.units.back());
  }
  const Date start = Date{std::chrono::year{2022} / 10 / 2};
  for (Eigen::Index s = 0; s < t; ++s) p.dates.push_back(start + std::chrono::days{s});
  a.t_pre = t_pre;
  a.t_post = t_post;
  return {p, a};
}

/// (treated post - treated pre) - (control post - control pre), by plain loops.
inline double four_means(const Panel& p, std::size_t n_co, std::size_t t_pre) {
  double m[2][2] = {{0, 0}, {0, 0}};
  double c[2][2] = {{0, 0}, {0, 0}};
  for (Eigen::Index i = 0; i < p.outcomes.rows(); ++i)
    for (Eigen::Index s = 0; s < p.outcomes.cols(); ++s) {
      const int g = static_cast<std::size_t>(i) >= n_co;
      const int post = static_cast<std::size_t>(s) >= t_pre;
      m[g][post] += p.outcomes(i, s);
      c[g][post] += 1;
    }
  return (m[1][1] / c[1][1] - m[1][0] / c[1][0]) - (m[0][1] / c[0][1] - m[0][0] / c[0][0]);
}

}  // namespace testing_support
