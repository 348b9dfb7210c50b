#include "legodom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "legodom/error.hpp"

namespace legodom {

Alignment parse_alignment(const std::string& name) {
  if (name == "none") return Alignment::None;
  if (name == "rigid") return Alignment::Rigid;
  throw Error("config", "unknown alignment '" + name + "' (expected none or rigid)", "align");
}

std::string alignment_name(Alignment align) { return align == Alignment::None ? "none" : "rigid"; }

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                           const Trajectory& truth,
                                                           double tolerance) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (truth.empty()) return pairs;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].t;
    const auto it = std::lower_bound(truth.begin(), truth.end(), t,
                                     [](const StampedPose& p, double v) { return p.t < v; });
    std::size_t best = truth.size();
    double best_dt = std::numeric_limits<double>::infinity();
    if (it != truth.end()) {
      best = static_cast<std::size_t>(it - truth.begin());
      best_dt = std::abs(it->t - t);
    }
    if (it != truth.begin()) {
      const auto prev = std::prev(it);
      if (std::abs(prev->t - t) < best_dt) {
        best = static_cast<std::size_t>(prev - truth.begin());
        best_dt = std::abs(prev->t - t);
      }
    }
    if (best_dt <= tolerance) pairs.emplace_back(i, best);
  }
  return pairs;
}

AteResult ate(const Trajectory& est, const Trajectory& truth, Alignment align, double tolerance) {
  const auto pairs = associate(est, truth, tolerance);
  if (pairs.empty()) {
    throw Error("evaluation", "no time overlap between estimate and ground truth");
  }
  const auto n = static_cast<Eigen::Index>(pairs.size());

  Mat3 R = Mat3::Identity();
  Vec3 trans = Vec3::Zero();
  if (align == Alignment::Rigid && n >= 1) {
    Eigen::Matrix3Xd src(3, n), dst(3, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      src.col(k) = est[pairs[static_cast<std::size_t>(k)].first].p;
      dst.col(k) = truth[pairs[static_cast<std::size_t>(k)].second].p;
    }
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
    R = T.topLeftCorner<3, 3>();
    trans = T.topRightCorner<3, 1>();
  }

  double sum_p = 0.0, sum_r = 0.0;
  for (const auto& [i, j] : pairs) {
    const Vec3 p = R * est[i].p + trans;
    const Rotation G = so3::project_to_so3(R * est[i].G);
    sum_p += (p - truth[j].p).squaredNorm();
    sum_r += so3::boxminus(G, truth[j].G).squaredNorm();
  }
  AteResult res;
  res.pos = std::sqrt(sum_p / static_cast<double>(n));
  res.att = std::sqrt(sum_r / static_cast<double>(n));
  res.samples = pairs.size();
  return res;
}

RpeResult rpe(const Trajectory& est, const Trajectory& truth, double distance, double tolerance) {
  if (!(distance > 0.0)) throw Error("config", "RPE distance must be > 0", "rpe_distance");
  const auto pairs = associate(est, truth, tolerance);
  if (pairs.empty()) {
    throw Error("evaluation", "no time overlap between estimate and ground truth");
  }
  std::vector<double> arc(pairs.size(), 0.0);
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    arc[k] = arc[k - 1] + (truth[pairs[k].second].p - truth[pairs[k - 1].second].p).norm();
  }
  if (!(arc.back() > distance)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "trajectory length %.6g m is shorter than the RPE distance %.6g m",
                  arc.back(), distance);
    throw Error("evaluation", buf, "rpe_distance");
  }

  double sum_p = 0.0, sum_r = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto it = std::upper_bound(arc.begin() + static_cast<std::ptrdiff_t>(i), arc.end(),
                                     arc[i] + distance);
    if (it == arc.end()) break;
    const std::size_t j = static_cast<std::size_t>(it - arc.begin());
    const StampedPose& ei = est[pairs[i].first];
    const StampedPose& ej = est[pairs[j].first];
    const StampedPose& ti = truth[pairs[i].second];
    const StampedPose& tj = truth[pairs[j].second];
    const Vec3 dp_est = ei.G.transpose() * (ej.p - ei.p);
    const Vec3 dp_true = ti.G.transpose() * (tj.p - ti.p);
    const Rotation dR_est = ei.G.transpose() * ej.G;
    const Rotation dR_true = ti.G.transpose() * tj.G;
    const double scale = distance / (arc[j] - arc[i]);
    const Vec3 e_p = dR_true.transpose() * (dp_est - dp_true);
    const Vec3 e_r = so3::log(so3::project_to_so3(dR_true.transpose() * dR_est));
    sum_p += std::pow(scale * e_p.norm(), 2);
    sum_r += std::pow(scale * e_r.norm(), 2);
    ++count;
  }
  RpeResult res;
  res.pos = std::sqrt(sum_p / static_cast<double>(count));
  res.att = std::sqrt(sum_r / static_cast<double>(count));
  res.pairs = count;
  return res;
}

nlohmann::json MetricReport::to_json() const {
  return {{"ate_pos", ate_pos},
          {"ate_att", ate_att},
          {"rpe_pos", rpe_pos},
          {"rpe_att", rpe_att},
          {"ate_samples", ate_samples},
          {"rpe_pairs", rpe_pairs},
          {"align", alignment_name(align)},
          {"rpe_distance", rpe_distance}};
}

std::string MetricReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "metric    value        unit\n"
                "ATE_pos   %-12.6f m\n"
                "ATE_att   %-12.6f rad\n"
                "RPE_pos   %-12.6f m/%gm\n"
                "RPE_att   %-12.6f rad/%gm\n",
                ate_pos, ate_att, rpe_pos, rpe_distance, rpe_att, rpe_distance);
  return buf;
}

MetricReport evaluate(const Trajectory& est, const Trajectory& truth, Alignment align,
                      double rpe_distance) {
  const AteResult a = ate(est, truth, align);
  const RpeResult r = rpe(est, truth, rpe_distance);
  MetricReport m;
  m.ate_pos = a.pos;
  m.ate_att = a.att;
  m.ate_samples = a.samples;
  m.rpe_pos = r.pos;
  m.rpe_att = r.att;
  m.rpe_pairs = r.pairs;
  m.align = align;
  m.rpe_distance = rpe_distance;
  return m;
}

Eigen::MatrixXd closed_loop_matrix(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                   const Eigen::MatrixXd& K) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || H.cols() != n || K.rows() != n || K.cols() != H.rows()) {
    throw Error("argument", "closed_loop_matrix: dimension mismatch (F " + std::to_string(F.rows()) +
                                "x" + std::to_string(F.cols()) + ", H " + std::to_string(H.rows()) +
                                "x" + std::to_string(H.cols()) + ", K " + std::to_string(K.rows()) +
                                "x" + std::to_string(K.cols()) + ")");
  }
  return (Eigen::MatrixXd::Identity(n, n) - K * H) * F;
}

SpectralRadius spectral_radius(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw Error("argument", "spectral_radius: matrix must be square");
  if (!A.allFinite()) throw Error("argument", "spectral_radius: non-finite entries");
  SpectralRadius out;
  if (A.size() == 0) return out;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  if (es.info() == Eigen::Success) {
    out.rho = es.eigenvalues().cwiseAbs().maxCoeff();
    return out;
  }
  // Fallback: power iteration on A^T A bounds is not tight, so iterate on A
  // and report the last growth factor.
  Eigen::VectorXd x = Eigen::VectorXd::Ones(A.rows()).normalized();
  double est = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd y = A * x;
    const double norm = y.norm();
    if (norm == 0.0) break;
    est = norm;
    x = y / norm;
  }
  out.rho = est;
  out.converged = false;
  return out;
}

Eigen::MatrixXd unobservable_subspace(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                      double relative_tolerance) {
  const Eigen::Index n = F.rows();
  const Eigen::MatrixXd D = F - Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd O(H.rows() * n, n);
  Eigen::MatrixXd block = H;
  for (Eigen::Index k = 0; k < n; ++k) {
    // Each block is normalized; only its row space matters.
    const double norm = block.norm();
    O.middleRows(k * H.rows(), H.rows()) = norm > 0.0 ? Eigen::MatrixXd(block / norm) : block;
    block = (block * D).eval();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = relative_tolerance * (s.size() > 0 ? s[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > cutoff) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

SpectralRadius observable_spectral_radius(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                          const Eigen::MatrixXd& K) {
  const Eigen::MatrixXd Acl = closed_loop_matrix(F, H, K);
  const Eigen::MatrixXd N = unobservable_subspace(F, H);
  const Eigen::Index n = F.rows();
  if (N.cols() == 0) return spectral_radius(Acl);
  // Orthonormal complement of the unobservable subspace.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(N);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd U = Q.rightCols(n - N.cols());
  return spectral_radius(U.transpose() * Acl * U);
}

nlohmann::json ModeTimelineStats::to_json() const {
  nlohmann::json hist = nlohmann::json::array();
  for (std::size_t i = 0; i < dwell_histogram.size(); ++i) {
    const double lo = kDwellEdges[i];
    nlohmann::json bin{{"min_s", lo}, {"count", dwell_histogram[i]}};
    if (i + 1 < kDwellEdges.size()) bin["max_s"] = kDwellEdges[i + 1];
    hist.push_back(bin);
  }
  return {{"inside_mean", inside_mean},
          {"outside_mean", outside_mean},
          {"ratio", std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json("inf")},
          {"inside_samples", inside_samples},
          {"outside_samples", outside_samples},
          {"switches", switches},
          {"dwell_histogram", hist}};
}

ModeTimelineStats mode_timeline_stats(const std::vector<double>& t,
                                      const std::vector<Eigen::VectorXd>& mu,
                                      const std::vector<TimeWindow>& windows) {
  if (t.empty() || mu.size() != t.size()) {
    throw Error("evaluation", "mode timeline is empty or has mismatched lengths");
  }
  ModeTimelineStats st;
  st.dwell_histogram.assign(ModeTimelineStats::kDwellEdges.size(), 0);
  double in_sum = 0.0, out_sum = 0.0;

  const auto dominant = [](const Eigen::VectorXd& m) {
    Eigen::Index i = 0;
    m.maxCoeff(&i);
    return i;
  };
  const auto record_dwell = [&](double d) {
    std::size_t bin = 0;
    while (bin + 1 < ModeTimelineStats::kDwellEdges.size() &&
           d >= ModeTimelineStats::kDwellEdges[bin + 1]) {
      ++bin;
    }
    ++st.dwell_histogram[bin];
  };

  Eigen::Index current = dominant(mu.front());
  double since = t.front();
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double slip = 1.0 - mu[k][0];
    const bool inside = std::any_of(windows.begin(), windows.end(), [&](const TimeWindow& w) {
      return t[k] >= w.t_start && t[k] < w.t_end;
    });
    if (inside) {
      in_sum += slip;
      ++st.inside_samples;
    } else {
      out_sum += slip;
      ++st.outside_samples;
    }
    const Eigen::Index d = dominant(mu[k]);
    if (d != current) {
      ++st.switches;
      record_dwell(t[k] - since);
      current = d;
      since = t[k];
    }
  }
  record_dwell(t.back() - since);

  st.inside_mean = st.inside_samples ? in_sum / static_cast<double>(st.inside_samples) : 0.0;
  st.outside_mean = st.outside_samples ? out_sum / static_cast<double>(st.outside_samples) : 0.0;
  st.ratio = st.outside_mean > 0.0 ? st.inside_mean / st.outside_mean
                                   : std::numeric_limits<double>::infinity();
  return st;
}

}  // namespace legodom
