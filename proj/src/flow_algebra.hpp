#pragma once

// Linear-algebra view of a network shared by the solvers. Flow variables are
// the (commodity, path) flows x in commodity order; per-road per-type flows are
// z = B x with index (road, type) -> road * m + type.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mixtoll/model.hpp"

namespace mixtoll::detail {

class FlowAlgebra {
 public:
  explicit FlowAlgebra(const Network& net);

  Eigen::Index num_variables() const { return incidence_.cols(); }
  std::size_t num_commodities() const { return offsets_.size(); }
  Eigen::Index offset(std::size_t commodity) const { return offsets_[commodity]; }
  Eigen::Index size(std::size_t commodity) const { return sizes_[commodity]; }
  std::size_t commodity_of(Eigen::Index var) const { return var_commodity_[var]; }

  /// Tolled cost of every path: J x + base + B^T vec(tolls).
  const Eigen::MatrixXd& path_jacobian() const { return jacobian_; }
  const Eigen::VectorXd& path_base() const { return base_; }
  Eigen::VectorXd toll_offset(const TollSchedule& tolls) const;
  Eigen::VectorXd path_costs(const Eigen::VectorXd& x, const Eigen::VectorXd& toll_offset) const;

  /// Social cost x^T J x + base^T x and its gradient (J + J^T) x + base.
  double social_cost(const Eigen::VectorXd& x) const;
  const Eigen::MatrixXd& cost_hessian() const { return hessian_; }
  Eigen::VectorXd cost_gradient(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd edge_flows(const Eigen::VectorXd& x) const;

 private:
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  Eigen::MatrixXd incidence_;
  Eigen::MatrixXd jacobian_;
  Eigen::MatrixXd hessian_;
  Eigen::VectorXd base_;
  std::vector<Eigen::Index> offsets_;
  std::vector<Eigen::Index> sizes_;
  std::vector<std::size_t> var_commodity_;
};

/// Vertices of {x : Aeq x = beq, G x >= h}. dimension is the dimension of the
/// affine solution set of the equalities (0 when it is a single point).
struct PolytopeVertices {
  bool consistent = false;
  Eigen::Index dimension = 0;
  std::vector<Eigen::VectorXd> vertices;
};

PolytopeVertices enumerate_vertices(const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                                    const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                                    double tol);

/// Iterates the cartesian product of nonempty path subsets, one bitmask per
/// commodity, in lexicographic order. Commodities flagged inactive get mask 0.
class SupportPatterns {
 public:
  SupportPatterns(std::vector<Eigen::Index> sizes, std::vector<bool> active,
                  std::vector<unsigned> allowed = {});

  bool next();
  const std::vector<unsigned>& masks() const { return masks_; }

 private:
  bool advance(std::size_t k);

  std::vector<Eigen::Index> sizes_;
  std::vector<bool> active_;
  std::vector<unsigned> allowed_;
  std::vector<unsigned> masks_;
  bool started_ = false;
};

/// Euclidean projection of v onto {x >= 0, sum x = total}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double total);

}  // namespace mixtoll::detail
