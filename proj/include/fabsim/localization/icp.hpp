#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "fabsim/errors.hpp"
#include "fabsim/geometry.hpp"
#include "fabsim/localization/tags.hpp"  // PoseEstimate

namespace fabsim::loc {

using geom::Vec3;

struct PointCloud {
  std::vector<Vec3> points;
  std::string frame = "world";

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

// Static 3D kd-tree over a point set; built per registration call.
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Vec3>& pts) : pts_(pts) {
    idx_.resize(pts.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    if (!pts.empty()) build(0, static_cast<int>(pts.size()), 0);
  }

  // Index of the nearest point to p and the squared distance.
  std::pair<int, double> nearest(const Vec3& p) const {
    best_ = -1;
    best_d2_ = std::numeric_limits<double>::infinity();
    search(0, static_cast<int>(idx_.size()), 0, p);
    return {best_ >= 0 ? idx_[best_] : -1, best_d2_};
  }

 private:
  void build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void search(int lo, int hi, int depth, const Vec3& p) const {
    if (lo >= hi) return;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    const double d2 = (pts_[idx_[mid]] - p).squaredNorm();
    if (d2 < best_d2_) {
      best_d2_ = d2;
      best_ = mid;
    }
    const double diff = p[axis] - pts_[idx_[mid]][axis];
    const int near_lo = diff < 0 ? lo : mid + 1;
    const int near_hi = diff < 0 ? mid : hi;
    const int far_lo = diff < 0 ? mid + 1 : lo;
    const int far_hi = diff < 0 ? hi : mid;
    search(near_lo, near_hi, depth + 1, p);
    if (diff * diff < best_d2_) search(far_lo, far_hi, depth + 1, p);
  }

  const std::vector<Vec3>& pts_;
  std::vector<int> idx_;
  mutable int best_ = -1;
  mutable double best_d2_ = 0.0;
};

struct IcpOptions {
  int max_iterations = 100;
  double mean_change_tol = 1e-6;   // metres
  double rejection_factor = 3.0;   // discard pairs beyond factor * median
  // Rejection starts after this iteration: far pairs carry the pull-in
  // signal while the clouds are still badly misaligned.
  int rejection_warmup = 5;
  std::vector<double>* residual_history = nullptr;  // mean distance per iteration
};

namespace detail {

// Second-largest eigenvalue of the scatter matrix; near zero means the
// cloud is collinear (or a single point) and cannot pin a rigid alignment.
inline void check_cloud_geometry(const PointCloud& c, const char* which) {
  if (c.empty()) throw ConfigurationError(std::string("register_icp: empty ") + which + " cloud");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : c.points) mean += p;
  mean /= static_cast<double>(c.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : c.points) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(c.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const double l1 = es.eigenvalues()[2], l2 = es.eigenvalues()[1];
  if (l2 <= 1e-12 * std::max(l1, 1e-12) || l1 <= 0.0) {
    throw DegenerateGeometryError(std::string("register_icp: ") + which +
                                  " cloud is collinear; rigid alignment is rank-deficient");
  }
}

// Weighted Horn/Umeyama rigid fit mapping src -> dst.
inline geom::Pose3 fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                             const std::vector<double>& wgt) {
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    wsum += wgt[i];
    cs += wgt[i] * src[i];
    cd += wgt[i] * dst[i];
  }
  cs /= wsum;
  cd /= wsum;
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    H += wgt[i] * (src[i] - cs) * (dst[i] - cd).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix3d V = svd.matrixV();
    V.col(2) *= -1.0;
    R = V * svd.matrixU().transpose();
  }
  return geom::Pose3(cd - R * cs, geom::Quat(R));
}

}  // namespace detail

// Point-to-point ICP: nearest-neighbour correspondences through a kd-tree,
// median-based pair rejection, closed-form rigid fit per iteration. The
// returned pose maps source-frame coordinates into the reference frame.
inline PoseEstimate register_icp(const PointCloud& source, const PointCloud& reference,
                                 const geom::Pose3& initial_guess, const IcpOptions& opt = {}) {
  detail::check_cloud_geometry(source, "source");
  detail::check_cloud_geometry(reference, "reference");

  const KdTree3 tree(reference.points);
  geom::Pose3 T = initial_guess;
  const std::size_t n = source.size();

  std::vector<Vec3> moved(n);
  std::vector<int> corr(n);
  std::vector<double> dist(n), wgt(n);

  auto correspondences = [&](const geom::Pose3& pose) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      moved[i] = pose.apply(source.points[i]);
      auto [j, d2] = tree.nearest(moved[i]);
      corr[i] = j;
      dist[i] = std::sqrt(d2);
      mean += dist[i];
    }
    return mean / static_cast<double>(n);
  };

  double mean_prev = correspondences(T);
  if (opt.residual_history) opt.residual_history->push_back(mean_prev);
  int iters = 0;
  for (; iters < opt.max_iterations; ++iters) {
    // Median-based rejection.
    double cutoff = std::numeric_limits<double>::infinity();
    if (iters >= opt.rejection_warmup) {
      std::vector<double> sorted = dist;
      std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
      cutoff = std::max(opt.rejection_factor * sorted[n / 2], 1e-12);
    }
    std::vector<Vec3> src_in, dst_in;
    src_in.reserve(n);
    dst_in.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] > cutoff) continue;
      src_in.push_back(moved[i]);
      dst_in.push_back(reference.points[corr[i]]);
    }
    if (src_in.size() < 3) break;
    const std::vector<double> ones(src_in.size(), 1.0);
    const geom::Pose3 delta = detail::fit_rigid(src_in, dst_in, ones);
    const geom::Pose3 T_new = delta * T;

    const double mean_new = correspondences(T_new);
    if (mean_new > mean_prev) {
      correspondences(T);  // restore pairing for the covariance below
      break;               // keep the monotone iterate
    }
    T = T_new;
    const double change = mean_prev - mean_new;
    mean_prev = mean_new;
    if (opt.residual_history) opt.residual_history->push_back(mean_prev);
    if (change < opt.mean_change_tol) break;
  }

  PoseEstimate est;
  est.pose = T;
  est.residual = mean_prev;
  est.num_used = static_cast<int>(n);

  // Gauss-Newton covariance of the point-to-point objective at the solution:
  // residual_i = T(p_i) - q_i, J_i = [I, -skew(T(p_i))].
  geom::Mat6 info = geom::Mat6::Zero();
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 3, 6> Ji;
    Ji.leftCols<3>() = Eigen::Matrix3d::Identity();
    const Vec3& p = moved[i];
    Eigen::Matrix3d sk;
    sk << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
    Ji.rightCols<3>() = -sk;
    info += Ji.transpose() * Ji;
    ss += (moved[i] - reference.points[corr[i]]).squaredNorm();
  }
  const double dof = std::max(1.0, 3.0 * static_cast<double>(n) - 6.0);
  est.covariance = info.ldlt().solve(geom::Mat6::Identity()) * (ss / dof);
  return est;
}

}  // namespace fabsim::loc
