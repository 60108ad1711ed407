#pragma once

#include <string>
#include <vector>

#include "fabsim/localization/icp.hpp"

namespace fabsim::loc {

// A site feature the structure is anchored to (pillar, floor patch): its
// surface model sampled in the CAD frame and a prior placement in the scan.
struct CadFeature {
  std::string name;
  PointCloud model_points;  // CAD frame
  geom::Pose3 prior;        // initial guess mapping CAD coords into the scan
};

struct FeatureReport {
  std::string name;
  bool ok = false;
  double icp_residual = 0.0;
  geom::Vec3 deviation = geom::Vec3::Zero();  // true position - CAD, in CAD frame
  double deviation_norm = 0.0;
  std::string error;
};

struct CadAlignment {
  PoseEstimate world_to_cad;  // maps scan/world coordinates into the CAD frame
  std::vector<FeatureReport> features;
  std::vector<std::string> failures;
};

// Registers each feature model against the site scan, then fuses the
// feature correspondences into a single rigid scan->CAD transform. The fuse
// is trimmed (worst features beyond 3x the median residual are dropped from
// the datum) so a genuinely displaced anchor shows up in its per-feature
// deviation instead of bending the global alignment.
inline CadAlignment align_cad(const PointCloud& site_scan, const std::vector<CadFeature>& features,
                              const IcpOptions& icp_opt = {}) {
  if (features.empty()) throw ConfigurationError("align_cad: no features given");
  if (site_scan.empty()) throw ConfigurationError("align_cad: empty site scan");

  CadAlignment out;
  struct Registered {
    const CadFeature* feature;
    geom::Pose3 scan_from_cad;  // where the feature actually sits in the scan
    geom::Vec3 centroid_cad;
  };
  std::vector<Registered> reg;

  for (const auto& f : features) {
    FeatureReport rep;
    rep.name = f.name;
    try {
      geom::Vec3 centroid = geom::Vec3::Zero();
      for (const auto& p : f.model_points.points) centroid += p;
      centroid /= static_cast<double>(f.model_points.size());

      // Crop the scan around the prior placement so neighbouring features
      // cannot steal correspondences.
      double radius = 0.0;
      for (const auto& p : f.model_points.points) {
        radius = std::max(radius, (p - centroid).norm());
      }
      radius = 1.5 * radius + 0.3;
      const geom::Vec3 center = f.prior.apply(centroid);
      PointCloud crop;
      crop.frame = site_scan.frame;
      for (const auto& p : site_scan.points) {
        if ((p - center).norm() <= radius) crop.points.push_back(p);
      }
      if (crop.size() < 10) {
        throw DegenerateGeometryError("no scan coverage near feature " + f.name);
      }
      const PoseEstimate e = register_icp(f.model_points, crop, f.prior, icp_opt);
      rep.ok = true;
      rep.icp_residual = e.residual;
      reg.push_back({&f, e.pose, centroid});
    } catch (const Error& err) {
      rep.error = err.what();
      out.failures.push_back(f.name);
    }
    out.features.push_back(rep);
  }

  if (reg.size() < 1) {
    throw DegenerateGeometryError("align_cad: every feature registration failed");
  }

  // Correspondence pairs (scan point, CAD point) sampled from each
  // registered feature.
  struct Pairs {
    std::vector<geom::Vec3> scan, cad;
  };
  std::vector<Pairs> per_feature(reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& pts = reg[i].feature->model_points.points;
    const std::size_t stride = std::max<std::size_t>(1, pts.size() / 50);
    for (std::size_t k = 0; k < pts.size(); k += stride) {
      per_feature[i].cad.push_back(pts[k]);
      per_feature[i].scan.push_back(reg[i].scan_from_cad.apply(pts[k]));
    }
  }

  // Trimmed least-squares fuse.
  std::vector<double> feature_weight(reg.size(), 1.0);
  geom::Pose3 T;  // scan -> CAD
  for (int round = 0; round < 4; ++round) {
    std::vector<geom::Vec3> src, dst;
    std::vector<double> w;
    for (std::size_t i = 0; i < reg.size(); ++i) {
      for (std::size_t k = 0; k < per_feature[i].scan.size(); ++k) {
        src.push_back(per_feature[i].scan[k]);
        dst.push_back(per_feature[i].cad[k]);
        w.push_back(feature_weight[i]);
      }
    }
    T = detail::fit_rigid(src, dst, w);

    if (reg.size() < 3) break;  // nothing to trim against
    std::vector<double> res(reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < per_feature[i].scan.size(); ++k) {
        s += (T.apply(per_feature[i].scan[k]) - per_feature[i].cad[k]).norm();
      }
      res[i] = s / static_cast<double>(per_feature[i].scan.size());
    }
    // Lower-median scale: a contaminated first fit inflates every residual,
    // so the upper median would let the outlier itself set the cutoff.
    std::vector<double> sorted = res;
    const std::size_t mid = (sorted.size() - 1) / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    const double cutoff = std::max(3.0 * sorted[mid], 2e-3);
    int kept = 0;
    for (std::size_t i = 0; i < reg.size(); ++i) {
      feature_weight[i] = res[i] <= cutoff ? 1.0 : 0.0;
      kept += feature_weight[i] > 0.0;
    }
    if (kept < 2) {  // keep at least the two best-fitting features
      std::vector<std::size_t> order(reg.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return res[a] < res[b]; });
      std::fill(feature_weight.begin(), feature_weight.end(), 0.0);
      feature_weight[order[0]] = 1.0;
      if (order.size() > 1) feature_weight[order[1]] = 1.0;
    }
  }

  out.world_to_cad.pose = T;
  out.world_to_cad.num_used = static_cast<int>(reg.size());

  // Residual over datum features and per-feature deviations.
  double ss = 0.0;
  int cnt = 0;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (feature_weight[i] <= 0.0) continue;
    for (std::size_t k = 0; k < per_feature[i].scan.size(); ++k) {
      ss += (T.apply(per_feature[i].scan[k]) - per_feature[i].cad[k]).squaredNorm();
      ++cnt;
    }
  }
  out.world_to_cad.residual = cnt > 0 ? std::sqrt(ss / cnt) : 0.0;

  for (std::size_t i = 0; i < reg.size(); ++i) {
    const geom::Vec3 dev = T.apply(reg[i].scan_from_cad.apply(reg[i].centroid_cad)) -
                           reg[i].centroid_cad;
    for (auto& rep : out.features) {
      if (rep.name == reg[i].feature->name) {
        rep.deviation = dev;
        rep.deviation_norm = dev.norm();
      }
    }
  }
  return out;
}

}  // namespace fabsim::loc
