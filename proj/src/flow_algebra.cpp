#include "flow_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixtoll::detail {

FlowAlgebra::FlowAlgebra(const Network& net)
    : n_(static_cast<Eigen::Index>(net.num_roads())),
      m_(static_cast<Eigen::Index>(net.num_types())) {
  const Eigen::Index N = static_cast<Eigen::Index>(net.num_path_variables());
  incidence_ = Eigen::MatrixXd::Zero(n_ * m_, N);
  Eigen::Index v = 0;
  for (std::size_t k = 0; k < net.commodities().size(); ++k) {
    const auto& c = net.commodities()[k];
    offsets_.push_back(v);
    sizes_.push_back(static_cast<Eigen::Index>(c.paths.size()));
    for (const auto& path : c.paths) {
      for (std::size_t e : path) {
        incidence_(static_cast<Eigen::Index>(e) * m_ + static_cast<Eigen::Index>(c.type), v) += 1.0;
      }
      var_commodity_.push_back(k);
      ++v;
    }
  }

  // c(z) = A z + b with block A_e = 1 a_e^T: every type on road e sees a_e . z_e.
  Eigen::MatrixXd congestion = Eigen::MatrixXd::Zero(n_ * m_, n_ * m_);
  Eigen::VectorXd free_flow(n_ * m_);
  for (Eigen::Index e = 0; e < n_; ++e) {
    const auto& road = net.road(static_cast<std::size_t>(e));
    for (Eigen::Index j = 0; j < m_; ++j) {
      free_flow[e * m_ + j] = road.intercept;
      for (Eigen::Index jj = 0; jj < m_; ++jj) {
        congestion(e * m_ + j, e * m_ + jj) = road.slopes[static_cast<std::size_t>(jj)];
      }
    }
  }
  jacobian_ = incidence_.transpose() * congestion * incidence_;
  hessian_ = jacobian_ + jacobian_.transpose();
  base_ = incidence_.transpose() * free_flow;
}

Eigen::VectorXd FlowAlgebra::toll_offset(const TollSchedule& tolls) const {
  if (tolls.tolls().rows() != n_ || tolls.tolls().cols() != m_) {
    throw DimensionMismatch("tolls: expected " + std::to_string(n_) + "x" + std::to_string(m_) +
                            " matrix");
  }
  Eigen::VectorXd flat(n_ * m_);
  for (Eigen::Index e = 0; e < n_; ++e) {
    for (Eigen::Index j = 0; j < m_; ++j) flat[e * m_ + j] = tolls.tolls()(e, j);
  }
  return incidence_.transpose() * flat;
}

Eigen::VectorXd FlowAlgebra::path_costs(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& toll_offset) const {
  return jacobian_ * x + base_ + toll_offset;
}

double FlowAlgebra::social_cost(const Eigen::VectorXd& x) const {
  return x.dot(jacobian_ * x) + base_.dot(x);
}

Eigen::VectorXd FlowAlgebra::cost_gradient(const Eigen::VectorXd& x) const {
  return hessian_ * x + base_;
}

Eigen::MatrixXd FlowAlgebra::edge_flows(const Eigen::VectorXd& x) const {
  Eigen::VectorXd flat = incidence_ * x;
  Eigen::MatrixXd z(n_, m_);
  for (Eigen::Index e = 0; e < n_; ++e) {
    for (Eigen::Index j = 0; j < m_; ++j) z(e, j) = flat[e * m_ + j];
  }
  return z;
}

namespace {

bool next_combination(std::vector<Eigen::Index>& idx, Eigen::Index n) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (Eigen::Index j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

double binomial(Eigen::Index n, Eigen::Index k) {
  double r = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

PolytopeVertices enumerate_vertices(const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                                    const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                                    double tol) {
  const Eigen::Index N = Aeq.cols();
  PolytopeVertices out;

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(N);
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(N, N);
  if (Aeq.rows() > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Aeq);
    lu.setThreshold(1e-11);
    x0 = lu.solve(beq);
    const double scale = 1.0 + beq.cwiseAbs().maxCoeff();
    if ((Aeq * x0 - beq).cwiseAbs().maxCoeff() > 1e-9 * scale) return out;
    const Eigen::Index rank = lu.rank();
    if (rank == N) {
      basis.resize(N, 0);
    } else {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(lu.kernel());
      basis = qr.householderQ() * Eigen::MatrixXd::Identity(N, N - rank);
    }
  }
  out.consistent = true;
  out.dimension = basis.cols();

  // Row-normalised inequalities so one tolerance fits all rows.
  Eigen::MatrixXd Gn = G;
  Eigen::VectorXd hn = h;
  for (Eigen::Index r = 0; r < Gn.rows(); ++r) {
    const double norm = Gn.row(r).norm();
    if (norm > 0.0) {
      Gn.row(r) /= norm;
      hn[r] /= norm;
    }
  }
  const double scale = 1.0 + (hn.size() > 0 ? hn.cwiseAbs().maxCoeff() : 0.0) +
                       (x0.size() > 0 ? x0.cwiseAbs().maxCoeff() : 0.0);
  auto feasible = [&](const Eigen::VectorXd& x) {
    return Gn.rows() == 0 || ((Gn * x - hn).array() >= -tol * scale).all();
  };
  auto add_vertex = [&](const Eigen::VectorXd& x) {
    for (const auto& v : out.vertices) {
      if ((v - x).cwiseAbs().maxCoeff() <= 1e-9 * scale) return;
    }
    out.vertices.push_back(x);
  };

  const Eigen::Index d = out.dimension;
  if (d == 0) {
    if (feasible(x0)) add_vertex(x0);
    return out;
  }

  const Eigen::MatrixXd Gy = Gn * basis;
  const Eigen::VectorXd hy = hn - Gn * x0;
  const Eigen::Index R = Gy.rows();
  if (R < d) return out;
  if (binomial(R, d) > 5e6) {
    throw SizeLimitExceeded("vertex enumeration: too many active-set combinations");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Eigen::MatrixXd sub(d, d);
  Eigen::VectorXd rhs(d);
  do {
    for (Eigen::Index r = 0; r < d; ++r) {
      sub.row(r) = Gy.row(idx[static_cast<std::size_t>(r)]);
      rhs[r] = hy[idx[static_cast<std::size_t>(r)]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    lu.setThreshold(1e-10);
    if (lu.rank() < d) continue;
    Eigen::VectorXd x = x0 + basis * lu.solve(rhs);
    if (feasible(x)) add_vertex(x);
  } while (next_combination(idx, R));
  return out;
}

SupportPatterns::SupportPatterns(std::vector<Eigen::Index> sizes, std::vector<bool> active,
                                 std::vector<unsigned> allowed)
    : sizes_(std::move(sizes)), active_(std::move(active)), allowed_(std::move(allowed)) {
  if (allowed_.empty()) {
    for (auto s : sizes_) allowed_.push_back((1u << s) - 1u);
  }
  masks_.assign(sizes_.size(), 0u);
}

bool SupportPatterns::advance(std::size_t k) {
  // Next nonempty submask of allowed_[k] greater than the current one.
  const unsigned allowed = allowed_[k];
  for (unsigned mask = masks_[k] + 1; mask <= allowed; ++mask) {
    if ((mask & ~allowed) == 0u) {
      masks_[k] = mask;
      return true;
    }
  }
  return false;
}

bool SupportPatterns::next() {
  const std::size_t K = sizes_.size();
  if (!started_) {
    started_ = true;
    for (std::size_t k = 0; k < K; ++k) {
      masks_[k] = 0u;
      if (active_[k] && !advance(k)) return false;
    }
    return true;
  }
  for (std::size_t k = K; k-- > 0;) {
    if (!active_[k]) continue;
    if (advance(k)) return true;
    masks_[k] = 0u;
    advance(k);
  }
  return false;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double total) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  if (total <= 0.0) return Eigen::VectorXd::Zero(n);
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += u[static_cast<std::size_t>(i)];
    const double t = (cumulative - total) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

}  // namespace mixtoll::detail
