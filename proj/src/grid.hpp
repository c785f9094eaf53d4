#pragma once

#include <string>
#include <vector>

namespace ensctl {

enum class GridKind { kGauss, kUniform };

struct ThetaGrid {
  GridKind kind = GridKind::kGauss;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

ThetaGrid make_grid(GridKind kind, double a, double b, int n);

// Nodes and weights on [-1, 1], nodes ascending.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

GridKind parse_grid_kind(const std::string& name);
const char* grid_kind_name(GridKind kind);

}  // namespace ensctl
