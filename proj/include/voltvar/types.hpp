#pragma once

#include <Eigen/Dense>
#include <vector>

namespace voltvar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Marks which nodes host a DER with Volt/VAR control. Unmarked nodes inject zero.
using DerMask = std::vector<bool>;

inline DerMask all_ders(Index n) { return DerMask(static_cast<std::size_t>(n), true); }

inline std::size_t der_count(const DerMask& mask) {
  std::size_t count = 0;
  for (bool b : mask) count += b ? 1 : 0;
  return count;
}

inline std::vector<Index> der_indices(const DerMask& mask) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<Index>(i));
  return out;
}

}  // namespace voltvar
