#include "airfl/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace airfl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cone structure of the slack space: `lin` nonnegative rows followed by
// second-order blocks of the given sizes.
struct Cone {
  Eigen::Index lin = 0;
  std::vector<Eigen::Index> soc;

  Eigen::Index dim() const {
    Eigen::Index d = lin;
    for (auto n : soc) d += n;
    return d;
  }
  double degree() const {
    return static_cast<double>(lin) + static_cast<double>(soc.size());
  }

  RVec identity() const {
    RVec v = RVec::Zero(dim());
    v.head(lin).setOnes();
    Eigen::Index off = lin;
    for (auto n : soc) {
      v(off) = 1.0;
      off += n;
    }
    return v;
  }

  // largest boundary violation of u; negative values mean strictly interior
  double violation(const RVec& u) const {
    double a = -kInf;
    for (Eigen::Index i = 0; i < lin; ++i) a = std::max(a, -u(i));
    Eigen::Index off = lin;
    for (auto n : soc) {
      a = std::max(a, u.segment(off + 1, n - 1).norm() - u(off));
      off += n;
    }
    return a;
  }

  // sup { t >= 0 : u + t du in cone }, for strictly interior u
  double max_step(const RVec& u, const RVec& du) const {
    double step = kInf;
    for (Eigen::Index i = 0; i < lin; ++i)
      if (du(i) < 0.0) step = std::min(step, -u(i) / du(i));
    Eigen::Index off = lin;
    for (auto n : soc) {
      const double u0 = u(off), d0 = du(off);
      const auto u1 = u.segment(off + 1, n - 1);
      const auto d1 = du.segment(off + 1, n - 1);
      const double a = d0 * d0 - d1.squaredNorm();
      const double b = 2.0 * (u0 * d0 - u1.dot(d1));
      const double c = u0 * u0 - u1.squaredNorm();
      double bound = kInf;
      if (std::abs(a) < 1e-300) {
        if (b < 0.0) bound = -c / b;
      } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          // numerically stable pair of roots
          const double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
          double r1 = qq / a;
          double r2 = (qq != 0.0) ? c / qq : kInf;
          if (r1 > r2) std::swap(r1, r2);
          if (r1 > 0.0)
            bound = r1;
          else if (r2 > 0.0 && a < 0.0)
            bound = r2;
          else if (r2 > 0.0 && r1 <= 0.0 && c < 0.0)
            bound = r2;
        }
      }
      step = std::min(step, bound);
      off += n;
    }
    return step;
  }
};

// Nesterov-Todd scaling point of the pair (s, z), per cone block.
struct Scaling {
  RVec w_lin;                // sqrt(s/z) per linear row
  std::vector<RVec> v;       // per soc block
  std::vector<double> beta;  // per soc block
  RVec lambda;               // scaled point W z = W^{-1} s
};

// cone residue s0^2 - ||s1||^2 in the cancellation-safe product form,
// clamped away from zero so boundary-grazing iterates cannot poison the
// scaling with NaNs
double soc_residue(const Eigen::Ref<const RVec>& u) {
  const double tail = u.tail(u.size() - 1).norm();
  const double res = (u(0) - tail) * (u(0) + tail);
  const double floor_val = 1e-15 * u(0) * u(0) + 1e-300;
  return std::max(res, floor_val);
}

Scaling make_scaling(const Cone& cone, const RVec& s, const RVec& z) {
  Scaling sc;
  sc.w_lin.resize(cone.lin);
  sc.lambda.resize(cone.dim());
  for (Eigen::Index i = 0; i < cone.lin; ++i) {
    const double si = std::max(s(i), 1e-300);
    const double zi = std::max(z(i), 1e-300);
    sc.w_lin(i) = std::sqrt(si / zi);
    sc.lambda(i) = std::sqrt(si * zi);
  }
  Eigen::Index off = cone.lin;
  for (auto n : cone.soc) {
    const auto sb = s.segment(off, n);
    const auto zb = z.segment(off, n);
    const double rs = soc_residue(sb);
    const double rz = soc_residue(zb);
    RVec shat = sb / std::sqrt(rs);
    RVec zhat = zb / std::sqrt(rz);
    const double gamma =
        std::sqrt(std::max((1.0 + shat.dot(zhat)) / 2.0, 1e-15));
    RVec jz = zhat;
    jz.tail(n - 1) = -jz.tail(n - 1);
    // NT point wbar, then its Jordan square root: the scaling matrix is
    // beta * (2 v v' - J) with v = wbar^{1/2}, not P(wbar) itself
    RVec wbar = (shat + jz) / (2.0 * gamma);
    RVec v = wbar;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (1.0 + wbar(0)));
    const double beta = std::pow(rs / rz, 0.25);
    // lambda = W z = beta (2 v (v'z) - J z)
    RVec jzb = zb;
    jzb.tail(n - 1) = -jzb.tail(n - 1);
    sc.lambda.segment(off, n) = beta * (2.0 * v * v.dot(zb) - jzb);
    sc.v.push_back(std::move(v));
    sc.beta.push_back(beta);
    off += n;
  }
  return sc;
}

RVec apply_w_inv(const Cone& cone, const Scaling& sc, const RVec& u) {
  RVec out(u.size());
  out.head(cone.lin) =
      u.head(cone.lin).cwiseQuotient(sc.w_lin);
  Eigen::Index off = cone.lin;
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const Eigen::Index n = cone.soc[b];
    const RVec& v = sc.v[b];
    const auto ub = u.segment(off, n);
    RVec ju = ub;
    ju.tail(n - 1) = -ju.tail(n - 1);
    RVec jv = v;
    jv.tail(n - 1) = -jv.tail(n - 1);
    // W^{-1} u = (1/beta) (2 Jv (v'Ju) - J u); note v'Ju = (Jv)'u
    out.segment(off, n) = (2.0 * jv * jv.dot(ub) - ju) / sc.beta[b];
    off += n;
  }
  return out;
}

RMat apply_w_inv_cols(const Cone& cone, const Scaling& sc, const RMat& g) {
  RMat out(g.rows(), g.cols());
  out.topRows(cone.lin) =
      sc.w_lin.cwiseInverse().asDiagonal() * g.topRows(cone.lin);
  Eigen::Index off = cone.lin;
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const Eigen::Index n = cone.soc[b];
    RVec jv = sc.v[b];
    jv.tail(n - 1) = -jv.tail(n - 1);
    RMat jg = g.middleRows(off, n);
    jg.bottomRows(n - 1) = -jg.bottomRows(n - 1);
    out.middleRows(off, n) =
        (2.0 * jv * (jv.transpose() * g.middleRows(off, n)) - jg) / sc.beta[b];
    off += n;
  }
  return out;
}

RVec jordan_mul(const Cone& cone, const RVec& a, const RVec& b) {
  RVec out(a.size());
  out.head(cone.lin) = a.head(cone.lin).cwiseProduct(b.head(cone.lin));
  Eigen::Index off = cone.lin;
  for (auto n : cone.soc) {
    const auto ab = a.segment(off, n);
    const auto bb = b.segment(off, n);
    out(off) = ab.dot(bb);
    out.segment(off + 1, n - 1) =
        ab(0) * bb.tail(n - 1) + bb(0) * ab.tail(n - 1);
    off += n;
  }
  return out;
}

// solve lambda o x = d for x
RVec jordan_div(const Cone& cone, const RVec& lambda, const RVec& d) {
  RVec out(d.size());
  out.head(cone.lin) = d.head(cone.lin).cwiseQuotient(lambda.head(cone.lin));
  Eigen::Index off = cone.lin;
  for (auto n : cone.soc) {
    const auto lb = lambda.segment(off, n);
    const auto db = d.segment(off, n);
    const double det = lb(0) * lb(0) - lb.tail(n - 1).squaredNorm();
    const double x0 = (lb(0) * db(0) - lb.tail(n - 1).dot(db.tail(n - 1))) / det;
    out(off) = x0;
    out.segment(off + 1, n - 1) =
        (db.tail(n - 1) - x0 * lb.tail(n - 1)) / lb(0);
    off += n;
  }
  return out;
}

// shift a least-squares point into the cone interior
RVec to_interior(const Cone& cone, RVec u) {
  const double a = cone.violation(u);
  if (a >= -1e-9) u += (1.0 + a) * cone.identity();
  return u;
}

}  // namespace

ConeProblem::ConeProblem(Eigen::Index nvars) : nvars_(nvars) {
  c_ = RVec::Zero(nvars);
}

void ConeProblem::set_objective(const RVec& c) {
  if (c.size() != nvars_) throw std::logic_error("objective size mismatch");
  c_ = c;
}

void ConeProblem::add_linear(const RVec& row, double rhs) {
  if (row.size() != nvars_) throw std::logic_error("linear row size mismatch");
  lin_rows_.push_back(row);
  lin_rhs_.push_back(rhs);
}

void ConeProblem::add_soc(const RVec& a0, double b0, const RMat& A1,
                          const RVec& b1) {
  if (a0.size() != nvars_ || A1.cols() != nvars_ || A1.rows() != b1.size())
    throw std::logic_error("soc block size mismatch");
  SocBlock blk;
  blk.g.resize(1 + A1.rows(), nvars_);
  blk.g.row(0) = -a0.transpose();
  blk.g.bottomRows(A1.rows()) = -A1;
  blk.h.resize(1 + b1.size());
  blk.h(0) = b0;
  blk.h.tail(b1.size()) = b1;
  soc_.push_back(std::move(blk));
}

void ConeProblem::add_quad_over_lin(const RMat& U, const RVec& u0,
                                    const RVec& y, double y0, const RVec& s,
                                    double s0) {
  // ||u||^2 <= y*s  <=>  ||[2u; y-s]|| <= y+s
  RMat a1(U.rows() + 1, nvars_);
  a1.topRows(U.rows()) = 2.0 * U;
  a1.row(U.rows()) = (y - s).transpose();
  RVec b1(U.rows() + 1);
  b1.head(U.rows()) = 2.0 * u0;
  b1(U.rows()) = y0 - s0;
  add_soc(y + s, y0 + s0, a1, b1);
}

ConeSolution ConeProblem::solve(const SolverOptions& opts) const {
  Cone cone;
  cone.lin = static_cast<Eigen::Index>(lin_rows_.size());
  for (const auto& blk : soc_) cone.soc.push_back(blk.g.rows());
  const Eigen::Index rows = cone.dim();
  const Eigen::Index n = nvars_;

  ConeSolution sol;
  if (rows == 0) {
    sol.x = RVec::Zero(n);
    sol.status = c_.norm() == 0.0 ? SolveStatus::Optimal
                                  : SolveStatus::Unbounded;
    return sol;
  }

  RMat g(rows, n);
  RVec h(rows);
  for (Eigen::Index i = 0; i < cone.lin; ++i) {
    g.row(i) = lin_rows_[static_cast<std::size_t>(i)].transpose();
    h(i) = lin_rhs_[static_cast<std::size_t>(i)];
  }
  Eigen::Index off = cone.lin;
  for (const auto& blk : soc_) {
    g.middleRows(off, blk.g.rows()) = blk.g;
    h.segment(off, blk.h.size()) = blk.h;
    off += blk.g.rows();
  }

  const double nu = cone.degree();
  const double hnorm = std::max(1.0, h.lpNorm<Eigen::Infinity>());
  const double cnorm = std::max(1.0, c_.lpNorm<Eigen::Infinity>());
  const double gnorm = std::max(1.0, g.lpNorm<Eigen::Infinity>());
  const RVec e = cone.identity();

  // least-squares initialization, optionally seeded with a primal hint
  RMat gtg = g.transpose() * g;
  gtg.diagonal().array() += 1e-12 * (1.0 + gtg.trace() / static_cast<double>(n));
  Eigen::LDLT<RMat> init_ldlt(gtg);
  RVec x = (opts.use_hint && opts.x_hint.size() == n)
               ? opts.x_hint
               : RVec(init_ldlt.solve(g.transpose() * h));
  RVec s = to_interior(cone, h - g * x);
  RVec z = to_interior(cone, RVec(-g * init_ldlt.solve(c_)));

  const auto fill_metrics = [&](ConeSolution& out) {
    const RVec rp = g * out.x + out.s - h;
    const RVec rd = c_ + g.transpose() * out.z;
    out.primal_residual = rp.lpNorm<Eigen::Infinity>() / hnorm;
    out.dual_residual = rd.lpNorm<Eigen::Infinity>() / cnorm;
    out.primal_obj = c_.dot(out.x);
    out.dual_obj = -h.dot(out.z);
    out.gap = out.s.dot(out.z);
    out.rel_gap = out.gap / std::max(1.0, std::abs(out.primal_obj));
  };

  // Iterates can degrade once the complementarity gap bottoms out against
  // the attainable dual accuracy, so remember the best point seen and fall
  // back to it whenever the loop ends without a proof of optimality.
  std::string stall_note;
  RVec best_x = x, best_s = s, best_z = z;
  double best_score = kInf;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const RVec rp = g * x + s - h;
    const RVec rd = c_ + g.transpose() * z;
    const double pres = rp.lpNorm<Eigen::Infinity>() / hnorm;
    const double dres = rd.lpNorm<Eigen::Infinity>() / cnorm;
    const double gap = s.dot(z);
    const double pobj = c_.dot(x);
    const double relgap = gap / std::max(1.0, std::abs(pobj));
    sol.iterations = iter;

    if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap)) {
      stall_note = "numerical breakdown";
      break;
    }
    const double score = std::max({pres, dres, relgap});
    if (score < best_score) {
      best_score = score;
      best_x = x;
      best_s = s;
      best_z = z;
    }

    if (pres <= opts.feastol && dres <= opts.feastol &&
        (gap <= opts.abstol || relgap <= opts.reltol)) {
      sol.status = SolveStatus::Optimal;
      break;
    }

    // primal infeasibility: z in cone with G'z ~ 0 and h'z < 0
    const double hz = h.dot(z);
    if (hz < -1e-10 * hnorm) {
      const RVec zc = z / (-hz);
      if ((g.transpose() * zc).lpNorm<Eigen::Infinity>() <= 1e-8 * gnorm) {
        sol.status = SolveStatus::Infeasible;
        std::ostringstream msg;
        msg << "infeasibility certificate concentrates on";
        const double zmax = zc.lpNorm<Eigen::Infinity>();
        for (Eigen::Index i = 0; i < cone.lin; ++i)
          if (zc(i) >= 0.2 * zmax) msg << " lin#" << i;
        Eigen::Index o2 = cone.lin;
        for (std::size_t b = 0; b < cone.soc.size(); ++b) {
          if (zc.segment(o2, cone.soc[b]).lpNorm<Eigen::Infinity>() >=
              0.2 * zmax)
            msg << " soc#" << b;
          o2 += cone.soc[b];
        }
        sol.message = msg.str();
        break;
      }
    }
    // dual infeasibility (primal unbounded): G x + s ~ 0 with c'x < 0
    const double cx = c_.dot(x);
    if (cx < -1e-10 * cnorm) {
      if ((rp + h).lpNorm<Eigen::Infinity>() / (-cx) <= 1e-8 * gnorm) {
        sol.status = SolveStatus::Unbounded;
        sol.message = "objective unbounded below along returned x";
        break;
      }
    }

    const Scaling sc = make_scaling(cone, s, z);
    const RMat b_mat = apply_w_inv_cols(cone, sc, g);
    RMat a_mat = b_mat.transpose() * b_mat;
    // static regularization keeps the factorization alive when the scaling
    // blows up near the boundary; iterative refinement recovers accuracy
    a_mat.diagonal().array() +=
        1e-12 * (1.0 + a_mat.trace() / static_cast<double>(n));
    Eigen::LDLT<RMat> ldlt(a_mat);
    if (ldlt.info() != Eigen::Success) {
      a_mat.diagonal().array() +=
          1e-7 * (1.0 + a_mat.trace() / static_cast<double>(n));
      ldlt.compute(a_mat);
      if (ldlt.info() != Eigen::Success) {
        stall_note = "normal-equation factorization failed";
        break;
      }
    }

    const auto direction = [&](const RVec& d) {
      struct Dir {
        RVec dx, ds, dz;
      } dir;
      const RVec gdiv = jordan_div(cone, sc.lambda, d);
      const RVec rhs =
          -rd - b_mat.transpose() * (gdiv + apply_w_inv(cone, sc, rp));
      dir.dx = ldlt.solve(rhs);
      dir.dx -= ldlt.solve(RVec(a_mat * dir.dx - rhs));  // one refinement
      dir.ds = -rp - g * dir.dx;
      dir.dz =
          apply_w_inv(cone, sc, RVec(gdiv - apply_w_inv(cone, sc, dir.ds)));
      return dir;
    };

    // predictor
    const RVec d_aff = -jordan_mul(cone, sc.lambda, sc.lambda);
    const auto aff = direction(d_aff);
    const double alpha_aff = std::min(
        1.0, std::min(cone.max_step(s, aff.ds), cone.max_step(z, aff.dz)));
    const double mu = gap / nu;
    const double mu_aff = (s + alpha_aff * aff.ds).dot(z + alpha_aff * aff.dz) / nu;
    const double ratio = std::clamp(mu_aff / mu, 0.0, 1.0);
    const double sigma = ratio * ratio * ratio;

    // corrector: d = sigma*mu*e - lambda o lambda - (W^{-1}ds) o (W dz)
    RVec wdz(rows);
    {
      wdz.head(cone.lin) = sc.w_lin.cwiseProduct(aff.dz.head(cone.lin));
      Eigen::Index o3 = cone.lin;
      for (std::size_t b = 0; b < cone.soc.size(); ++b) {
        const Eigen::Index nb = cone.soc[b];
        const RVec& v = sc.v[b];
        const auto ub = aff.dz.segment(o3, nb);
        RVec ju = ub;
        ju.tail(nb - 1) = -ju.tail(nb - 1);
        wdz.segment(o3, nb) = sc.beta[b] * (2.0 * v * v.dot(ub) - ju);
        o3 += nb;
      }
    }
    const RVec d_final =
        sigma * mu * e - jordan_mul(cone, sc.lambda, sc.lambda) -
        jordan_mul(cone, apply_w_inv(cone, sc, aff.ds), wdz);
    const auto comb = direction(d_final);
    double alpha =
        std::min(cone.max_step(s, comb.ds), cone.max_step(z, comb.dz));
    alpha = std::min(1.0, 0.99 * alpha);
    if (opts.trace)
      std::fprintf(stderr,
                   "ipm %3d pobj=% .6e dobj=% .6e gap=%.3e pres=%.3e "
                   "dres=%.3e sigma=%.3f alpha=%.4f\n",
                   iter, pobj, -h.dot(z), gap, pres, dres, sigma, alpha);
    if (!comb.dx.allFinite() || !comb.ds.allFinite() || !comb.dz.allFinite() ||
        !std::isfinite(alpha)) {
      stall_note = "search direction breakdown";
      break;
    }
    if (alpha < 1e-13) {
      stall_note = "step length collapsed";
      break;
    }
    x += alpha * comb.dx;
    s += alpha * comb.ds;
    z += alpha * comb.dz;
    sol.iterations = iter + 1;
  }

  if (sol.status == SolveStatus::MaxIterations) {
    // no proof of optimality and no certificate; pick the better of the
    // final and the best recorded iterate, then see whether it clears the
    // reduced targets
    sol.x = x;
    sol.s = s;
    sol.z = z;
    fill_metrics(sol);
    const double final_score =
        std::max({sol.primal_residual, sol.dual_residual, sol.rel_gap});
    if (!std::isfinite(final_score) || final_score > best_score) {
      sol.x = best_x;
      sol.s = best_s;
      sol.z = best_z;
      fill_metrics(sol);
    }
    const bool feas_ok = sol.primal_residual <= opts.feastol_reduced &&
                         sol.dual_residual <= opts.feastol_reduced;
    const bool gap_ok =
        sol.gap <= opts.abstol_reduced || sol.rel_gap <= opts.reltol_reduced;
    if (feas_ok && gap_ok) {
      sol.status = SolveStatus::Optimal;
      sol.message = stall_note.empty()
                        ? "reduced-accuracy optimum"
                        : stall_note + "; reduced-accuracy optimum";
    } else if (!stall_note.empty()) {
      sol.message = stall_note;
    }
  } else {
    sol.x = x;
    sol.s = s;
    sol.z = z;
    fill_metrics(sol);
  }
  return sol;
}

}  // namespace airfl
