#include "nearhom/homogenization.hpp"

#include <cmath>

#include "nearhom/errors.hpp"
#include "nearhom/parallel.hpp"

namespace nh {

namespace {

void check_schedule(const RadiusSchedule& s) {
  require(s.r0 > 0.0 && s.growth > 1.0 && s.max_stages >= 2, ErrorCode::kInvalidArgument,
          "radius schedule needs r0 > 0, growth > 1, max_stages >= 2");
}

// Radial ladder for a vector-valued g(r); stops on plateau or a non-finite value.
template <class G>
int ladder(const RadiusSchedule& sched, G g, Vec& value, std::vector<double>* radii, std::vector<double>* residuals,
           bool* converged, bool* backed_off) {
  check_schedule(sched);
  double r = sched.r0;
  Vec prev;
  bool have = false;
  *converged = false;
  *backed_off = false;
  int stage = 0;
  for (; stage < sched.max_stages; ++stage, r *= sched.growth) {
    Vec cur;
    try {
      cur = g(r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumerical) throw;
      *backed_off = true;
      break;
    }
    if (!cur.allFinite()) {
      *backed_off = true;
      break;
    }
    if (radii) radii->push_back(r);
    if (have) {
      double diff = (cur - prev).norm();
      if (residuals) residuals->push_back(diff);
      if (diff < sched.rel_tol * cur.norm() + sched.abs_tol) {
        prev = std::move(cur);
        *converged = true;
        ++stage;
        break;
      }
    }
    prev = std::move(cur);
    have = true;
  }
  require(have, ErrorCode::kNumerical, "homogenization overflowed at the first radius");
  value = prev;
  return stage;
}

}  // namespace

HomogenizationEstimate estimate_fM(const NetworkModel& model, const Vec& theta, const Vec& x, int M,
                                   const NonnegPoly& pa, const RadiusSchedule& sched) {
  require(M >= 1, ErrorCode::kInvalidArgument, "order must be positive");
  double nt = theta.norm();
  require(nt > 0.0, ErrorCode::kDomain, "homogenization needs a nonzero parameter vector");
  HomogenizationEstimate est;
  Vec v;
  ladder(sched, [&](double r) { return Vec::Constant(1, model.forward(r * theta, x) / std::pow(r, M)); }, v,
         &est.radii, &est.residuals, &est.converged, &est.backed_off);
  est.value = v[0];
  double r = est.radii.back();
  est.certified_tolerance = pa(r * nt) / std::pow(r, M);
  return est;
}

GradientEstimate estimate_gradM(const NetworkModel& model, const Vec& theta, const Vec& x, int M,
                                const RadiusSchedule& sched) {
  require(M >= 1, ErrorCode::kInvalidArgument, "order must be positive");
  require(theta.norm() > 0.0, ErrorCode::kDomain, "homogenization needs a nonzero parameter vector");
  GradientEstimate est;
  bool backed = false;
  est.stages = ladder(sched, [&](double r) { return Vec(model.grad_params(r * theta, x) / std::pow(r, M - 1)); },
                      est.value, nullptr, nullptr, &est.converged, &backed);
  return est;
}

ErrorBoundReport check_error_bound(const NetworkModel& model, const std::vector<Vec>& thetas, const Dataset& data,
                                   int M, const NonnegPoly& pa, const RadiusSchedule& sched, int threads) {
  struct Item {
    double raw = -std::numeric_limits<double>::infinity(), cert = raw, absr = 0.0;
    int unconverged = 0;
  };
  std::vector<Item> items(thetas.size());
  parallel_for(static_cast<int>(thetas.size()), threads, [&](int s) {
    const Vec& th = thetas[s];
    double bound = pa(th.norm());
    for (int i = 0; i < data.n(); ++i) {
      Vec x = data.X.row(i).transpose();
      HomogenizationEstimate e = estimate_fM(model, th, x, M, pa, sched);
      double res = std::abs(model.forward(th, x) - e.value) - bound;
      items[s].raw = std::max(items[s].raw, res);
      items[s].cert = std::max(items[s].cert, res - e.certified_tolerance);
      items[s].absr = std::max(items[s].absr, std::abs(res));
      if (!e.converged) ++items[s].unconverged;
    }
  });
  ErrorBoundReport rep;
  for (const auto& it : items) {
    rep.max_residual = std::max(rep.max_residual, it.raw);
    rep.max_certified_residual = std::max(rep.max_certified_residual, it.cert);
    rep.max_abs_residual = std::max(rep.max_abs_residual, it.absr);
    rep.unconverged += it.unconverged;
  }
  rep.evaluations = static_cast<int>(thetas.size()) * data.n();
  return rep;
}

BlockwiseEstimate blockwise_homogenize(const NetworkModel& model, const Vec& theta, const Vec& x,
                                       const RadiusSchedule& sched) {
  BlockwiseEstimate out;
  Vec h = x;
  for (std::size_t i = 0; i < model.blocks().size(); ++i) {
    const Block& b = *model.blocks()[i];
    OrderDescriptor o = b.order();
    const double* th = theta.data() + model.param_offset(i);
    Vec local(b.param_dim());
    for (int k = 0; k < b.param_dim(); ++k) local[k] = th[k];
    int deg = o.m_param + o.m_input;
    bool conv = false, backed = false;
    Vec next;
    ladder(sched, [&](double r) {
      Vec scaled = r * local;
      return Vec(b.forward(scaled.data(), r * h) / std::pow(r, deg));
    }, next, nullptr, nullptr, &conv, &backed);
    out.converged = out.converged && conv;
    h = std::move(next);
  }
  out.value = h[0];
  return out;
}

double separability_scale(double fM_margin, const NonnegPoly& pa, int M, int n, double slack, double theta_norm,
                          double c_min) {
  require(fM_margin > 0.0, ErrorCode::kDomain, "homogenized margin must be positive to separate");
  require(M >= 1 && n >= 1 && slack >= 0.0 && c_min > 0.0, ErrorCode::kInvalidArgument, "bad separability scale input");
  const double logn = std::log(static_cast<double>(n));
  auto ok = [&](double c) { return fM_margin * std::pow(c, M) >= 2.0 * pa(c * theta_norm) + logn + slack; };
  if (ok(c_min)) return c_min;
  double hi = c_min;
  int guard = 0;
  while (!ok(hi)) {
    hi *= 2.0;
    require(++guard < 2000, ErrorCode::kNumerical, "separability scale search diverged");
  }
  double lo = hi / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

Vec homogenized_margins(const NetworkModel& model, const Vec& theta, const Dataset& data, int M,
                        const NonnegPoly& pa, const RadiusSchedule& sched) {
  Vec m(data.n());
  for (int j = 0; j < data.n(); ++j)
    m[j] = data.y[j] * estimate_fM(model, theta, data.X.row(j).transpose(), M, pa, sched).value;
  return m;
}

LeadingComponentReport leading_component_positive(const NetworkModel& model, const Vec& theta_s, const Dataset& data,
                                                  int M, const NonnegPoly& pa, const RadiusSchedule& sched) {
  Vec m = homogenized_margins(model, theta_s, data, M, pa, sched);
  LeadingComponentReport rep;
  Eigen::Index j;
  rep.min_value = m.minCoeff(&j);
  rep.argmin = static_cast<int>(j);
  return rep;
}

}  // namespace nh
