#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace archrec::svg {

// Static scatter: one labeled dot per row of coords (n x 2). Colors follow
// `groups` when given (-1 is drawn grey).
std::string scatter(const Eigen::MatrixXd& coords, const std::vector<std::string>& labels,
                    const std::vector<int>& groups = {});

// Reachability plot: bar i has height reachability[i] (inf drawn at the top
// with a hatch color), colored by cluster label of the point.
std::string reachability_plot(const std::vector<double>& reachability, const std::vector<int>& labels_in_order);

struct Bar {
  std::string label;
  double value = 0.0;
};

std::string bar_chart(const std::string& title, const std::vector<Bar>& bars);

}  // namespace archrec::svg
