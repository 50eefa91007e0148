#include "pipegrid/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include <Eigen/SparseLU>

namespace pipegrid {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

// largest step in [0, 1] keeping v + a*dv >= (1 - tau) * v, v > 0
double boundary_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double tau) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0)
            a = std::min(a, -tau * v[i] / dv[i]);
    return a;
}

} // namespace

NlpResult solve_nlp(const NlpModel& model, const Eigen::VectorXd& z0, const NlpOptions& opt) {
    const int n = model.num_vars();
    const int me = model.num_eq();
    const int mi = model.num_ineq();
    if (z0.size() != n)
        throw InputError("nlp start point has the wrong size");

    Eigen::VectorXd z = z0;
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(me);
    Eigen::VectorXd s(mi), w(mi);
    if (mi > 0) {
        Eigen::VectorXd g0 = model.ineq_residual(z);
        for (int i = 0; i < mi; ++i)
            s[i] = std::max(1e-2, -g0[i]);
        w.setOnes();
    }

    const double mu_floor = 0.01 * opt.tol;
    double mu = mi > 0 ? std::clamp(s.dot(w) / mi, 0.1, 100.0) : mu_floor;

    auto barrier = [&](const Eigen::VectorXd& zz, const Eigen::VectorXd& ss) {
        double p = model.objective(zz);
        if (mi)
            p -= mu * ss.array().log().sum();
        return p;
    };
    auto violation = [&](const Eigen::VectorXd& zz, const Eigen::VectorXd& ss) {
        double t = 0.0;
        if (me)
            t += model.eq_residual(zz).lpNorm<1>();
        if (mi)
            t += (model.ineq_residual(zz) + ss).lpNorm<1>();
        return t;
    };

    // Steps are screened against a filter of (violation, barrier) pairs rather
    // than a penalty function; entries carry their margins, so domination is a
    // plain comparison. The filter restarts whenever mu moves.
    std::vector<std::pair<double, double>> filter;
    const double gamma_t = 1e-5, gamma_f = 1e-5;
    const double theta_cap = 1e4 * std::max(1.0, violation(z, s));
    auto filter_ok = [&](double th, double ph) {
        if (!(th <= theta_cap))
            return false;
        for (const auto& e : filter)
            if (th >= e.first && ph >= e.second)
                return false;
        return true;
    };

    NlpResult res;
    int mu_age = 0;
    for (int iter = 0; iter < opt.max_iter; ++iter) {
        const Eigen::VectorXd grad = model.gradient(z);
        const Eigen::VectorXd c = model.eq_residual(z);
        const SpMat Jc = model.eq_jacobian(z);
        const Eigen::VectorXd g = mi ? model.ineq_residual(z) : Eigen::VectorXd(0);
        const SpMat Jg = model.ineq_jacobian(z);

        Eigen::VectorXd r_d = grad;
        if (me)
            r_d += Jc.transpose() * lam;
        if (mi)
            r_d += Jg.transpose() * w;
        const Eigen::VectorXd r_g = mi ? Eigen::VectorXd(g + s) : Eigen::VectorXd(0);

        const double stat = inf_norm(r_d);
        const double feas = std::max(inf_norm(c), inf_norm(r_g));
        const double comp = mi ? (s.array() * w.array()).abs().maxCoeff() : 0.0;
        const double comp_dev =
            mi ? (s.array() * w.array() - mu).abs().maxCoeff() : 0.0;

        res.iterations = iter;
        res.stationarity = stat;
        res.feasibility = feas;
        res.complementarity = comp;
        if (std::getenv("PIPEGRID_NLP_TRACE"))
            std::fprintf(stderr, "nlp it %3d mu %.2e stat %.3e feas %.3e comp %.3e\n", iter,
                         mu, stat, feas, comp);
        if (const char* tl = std::getenv("PIPEGRID_NLP_TRACE"); tl && tl[0] == '2') {
            int jmax = 0;
            for (int j = 1; j < n; ++j)
                if (std::abs(r_d[j]) > std::abs(r_d[jmax]))
                    jmax = j;
            int imax = 0;
            if (mi)
                for (int i = 1; i < mi; ++i)
                    if (w[i] > w[imax])
                        imax = i;
            std::fprintf(stderr, "    dual rd[%d]=%.3e wmax[%d]=%.3e smin=%.3e lmax=%.3e\n", jmax,
                         r_d[jmax], imax, mi ? w[imax] : 0.0, mi ? s.minCoeff() : 0.0,
                         me ? inf_norm(lam) : 0.0);
        }
        if (stat <= opt.tol && feas <= opt.tol && comp <= opt.tol) {
            res.converged = true;
            break;
        }

        // barrier subproblem done to its own tolerance: tighten mu; residuals
        // are rescaled when the multipliers run large
        const double mult_avg =
            (lam.lpNorm<1>() + (mi ? w.lpNorm<1>() : 0.0)) / std::max(1, me + mi);
        const double sd = std::max(100.0, mult_avg) / 100.0;
        ++mu_age;
        bool tighten = std::max({stat / sd, feas, comp_dev / sd}) <= 10.0 * mu;
        // a degenerate active set pins the reachable stationarity near
        // sqrt(mu); once the subproblem is feasible, waiting longer at this
        // barrier weight cannot help, so move on regardless
        if (!tighten && mu_age > 25 && feas <= std::sqrt(mu))
            tighten = true;
        if (mu > mu_floor && tighten) {
            mu = std::max(mu_floor, std::min(opt.mu_shrink * mu, std::pow(mu, 1.5)));
            filter.clear();
            mu_age = 0;
        }

        if (inf_norm(z) > 1e12)
            throw SolveError("nlp iterates diverge; problem looks unbounded");

        // search direction, retrying with stronger regularization on failure
        const Eigen::VectorXd sigma =
            mi ? Eigen::VectorXd(w.array() / s.array()) : Eigen::VectorXd(0);
        const SpMat H = model.lagrangian_hessian(z, lam, w);
        SpMat Mz = H;
        if (mi) {
            SpMat JgS = sigma.asDiagonal() * Jg;
            Mz = Mz + SpMat(Jg.transpose() * JgS);
        }

        Eigen::VectorXd rhs1 = -r_d;
        if (mi) {
            Eigen::VectorXd t = (mu / s.array()).matrix() - w +
                                (sigma.array() * r_g.array()).matrix();
            rhs1 -= Jg.transpose() * t;
        }

        const double theta_c = (me ? c.lpNorm<1>() : 0.0) + (mi ? r_g.lpNorm<1>() : 0.0);
        const double phi_c = barrier(z, s);

        const double delta_c = 1e-8;
        double delta_z = 1e-8;
        auto escalate = [&] { delta_z = std::max(delta_z * 100.0, 1e-6); };
        bool accepted = false;
        bool augment = false;
        Eigen::VectorXd z_next, s_next;
        Eigen::VectorXd dlam, dw, dlam_soc;
        double alpha_dual = 1.0;
        double alpha_taken = 1.0;

        for (int reg = 0; reg < 8 && !accepted; ++reg) {
            std::vector<Eigen::Triplet<double>> trip;
            trip.reserve(Mz.nonZeros() + 2 * Jc.nonZeros() + n + me);
            for (int k = 0; k < Mz.outerSize(); ++k)
                for (SpMat::InnerIterator it(Mz, k); it; ++it)
                    trip.emplace_back(it.row(), it.col(), it.value());
            for (int i = 0; i < n; ++i)
                trip.emplace_back(i, i, delta_z);
            for (int k = 0; k < Jc.outerSize(); ++k)
                for (SpMat::InnerIterator it(Jc, k); it; ++it) {
                    trip.emplace_back(n + it.row(), it.col(), it.value());
                    trip.emplace_back(it.col(), n + it.row(), it.value());
                }
            for (int i = 0; i < me; ++i)
                trip.emplace_back(n + i, n + i, -delta_c);

            SpMat K(n + me, n + me);
            K.setFromTriplets(trip.begin(), trip.end());
            K.makeCompressed();
            Eigen::SparseLU<SpMat> lu;
            lu.compute(K);
            if (lu.info() != Eigen::Success) {
                escalate();
                continue;
            }

            Eigen::VectorXd rhs(n + me);
            rhs.head(n) = rhs1;
            rhs.tail(me) = -c;
            auto kkt_solve = [&](const Eigen::VectorXd& b) {
                Eigen::VectorXd x = lu.solve(b);
                // one round of iterative refinement tightens the duals
                x += lu.solve(b - K * x);
                return x;
            };
            Eigen::VectorXd sol = kkt_solve(rhs);

            const Eigen::VectorXd dz = sol.head(n);
            dlam = sol.tail(me);
            Eigen::VectorXd ds, dwv;
            if (mi) {
                ds = -r_g - Jg * dz;
                dwv = (mu / s.array()).matrix() - w - (sigma.array() * ds.array()).matrix();
            }

            const double tau = std::max(0.99, 1.0 - mu);
            double alpha = mi ? boundary_step(s, ds, tau) : 1.0;
            const double alpha_max = alpha;
            alpha_dual = mi ? boundary_step(w, dwv, tau) : 1.0;
            dlam_soc = Eigen::VectorXd::Zero(me);

            double dphi = grad.dot(dz);
            if (mi)
                dphi -= mu * (ds.array() / s.array()).sum();

            // f-type steps need Armijo progress on the barrier objective;
            // otherwise the step must improve the filter envelope
            auto acceptable = [&](double th, double ph, double a) {
                if (!std::isfinite(th) || !std::isfinite(ph) || !filter_ok(th, ph))
                    return false;
                const bool switching =
                    dphi < 0.0 && a * std::pow(-dphi, 2.3) > std::pow(theta_c, 1.1);
                if (switching) {
                    augment = false;
                    return ph <= phi_c + 1e-4 * a * dphi;
                }
                augment = true;
                return th <= (1.0 - gamma_t) * theta_c || ph <= phi_c - gamma_f * theta_c;
            };

            bool ok = false;
            int ls_taken = 0;
            for (int ls = 0; ls < 40; ++ls) {
                ls_taken = ls;
                z_next = z + alpha * dz;
                s_next = mi ? Eigen::VectorXd(s + alpha * ds) : s;
                if (acceptable(violation(z_next, s_next), barrier(z_next, s_next), alpha)) {
                    ok = true;
                    break;
                }
                if (ls == 0 && me > 0) {
                    // second-order correction: cancel the constraint curvature
                    // picked up over the full step before shrinking it
                    Eigen::VectorXd rc(n + me);
                    rc.setZero();
                    rc.tail(me) = -model.eq_residual(z_next);
                    Eigen::VectorXd corr = kkt_solve(rc);
                    Eigen::VectorXd zc = z_next + corr.head(n);
                    Eigen::VectorXd sc = s_next;
                    bool inside = true;
                    if (mi) {
                        Eigen::VectorXd gsoc = model.ineq_residual(zc);
                        for (int i = 0; i < mi; ++i) {
                            sc[i] = std::max(-gsoc[i], (1.0 - tau) * s[i]);
                            if (sc[i] <= 0.0)
                                inside = false;
                        }
                    }
                    if (inside && acceptable(violation(zc, sc), barrier(zc, sc), alpha)) {
                        z_next = zc;
                        s_next = sc;
                        dlam_soc = corr.tail(me);
                        ok = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (ok) {
                dw = mi ? dwv : Eigen::VectorXd(0);
                accepted = true;
                alpha_taken = alpha;
                if (std::getenv("PIPEGRID_NLP_TRACE"))
                    std::fprintf(stderr,
                                 "    step alpha %.3e amax %.3e dz %.2e dphi %.3e |dz| %.2e "
                                 "|dl| %.2e ls %d\n",
                                 alpha, alpha_max, delta_z, dphi, inf_norm(dz),
                                 me ? inf_norm(dlam) : 0.0, ls_taken);
            } else {
                escalate();
            }
        }
        if (!accepted) {
            if (std::getenv("PIPEGRID_NLP_TRACE"))
                std::fprintf(stderr, "    line search stalled at iter %d\n", res.iterations);
            break; // stalled; usually an infeasible or degenerate problem
        }

        if (augment)
            filter.emplace_back((1.0 - gamma_t) * theta_c, phi_c - gamma_f * theta_c);

        z = z_next;
        s = s_next;
        lam += alpha_taken * dlam + dlam_soc;
        if (mi) {
            w += alpha_dual * dw;
            // keep the multipliers within a wide band of the central path
            for (int i = 0; i < mi; ++i)
                w[i] = std::clamp(w[i], mu / (1e10 * s[i]), 1e10 * mu / s[i]);
        }
    }

    res.z = z;
    res.lam_eq = lam;
    res.lam_in = w;
    res.slack = s;
    res.objective = model.objective(z);
    if (!res.converged && opt.require_convergence)
        throw SolveError("nlp did not converge: stationarity " + std::to_string(res.stationarity) +
                         ", feasibility " + std::to_string(res.feasibility));
    return res;
}

namespace {

class LpModel : public NlpModel {
public:
    LpModel(const LinearProgram& lp) : lp_(lp), n_(static_cast<int>(lp.c.size())) {
        if (lp.A_eq.rows() != lp.b_eq.size() || lp.A_in.rows() != lp.b_in.size())
            throw InputError("lp: constraint matrix and rhs sizes disagree");
        if ((lp.A_eq.rows() && lp.A_eq.cols() != n_) || (lp.A_in.rows() && lp.A_in.cols() != n_))
            throw InputError("lp: constraint matrix has the wrong number of columns");
        if ((lp.lb.size() && lp.lb.size() != n_) || (lp.ub.size() && lp.ub.size() != n_))
            throw InputError("lp: bound vectors must have one entry per variable");

        std::vector<Eigen::Triplet<double>> trip;
        std::vector<double> rhs;
        int rows = 0;
        for (int k = 0; k < lp.A_in.outerSize(); ++k)
            for (SpMat::InnerIterator it(lp.A_in, k); it; ++it)
                trip.emplace_back(it.row(), it.col(), it.value());
        rows = static_cast<int>(lp.A_in.rows());
        for (int i = 0; i < static_cast<int>(lp.b_in.size()); ++i)
            rhs.push_back(lp.b_in[i]);
        for (int j = 0; j < n_; ++j) {
            if (lp.ub.size() && std::isfinite(lp.ub[j])) {
                trip.emplace_back(rows++, j, 1.0);
                rhs.push_back(lp.ub[j]);
            }
            if (lp.lb.size() && std::isfinite(lp.lb[j])) {
                trip.emplace_back(rows++, j, -1.0);
                rhs.push_back(-lp.lb[j]);
            }
        }
        G_.resize(rows, n_);
        G_.setFromTriplets(trip.begin(), trip.end());
        G_.makeCompressed();
        h_.resize(rows);
        for (int i = 0; i < rows; ++i)
            h_[i] = rhs[i];
        Aeq_ = lp.A_eq;
        Aeq_.makeCompressed();
        empty_hessian_.resize(n_, n_);
    }

    int num_vars() const override { return n_; }
    int num_eq() const override { return static_cast<int>(Aeq_.rows()); }
    int num_ineq() const override { return static_cast<int>(G_.rows()); }
    double objective(const Eigen::VectorXd& z) const override { return lp_.c.dot(z) + lp_.c0; }
    Eigen::VectorXd gradient(const Eigen::VectorXd&) const override { return lp_.c; }
    Eigen::VectorXd eq_residual(const Eigen::VectorXd& z) const override {
        return Aeq_ * z - lp_.b_eq;
    }
    SpMat eq_jacobian(const Eigen::VectorXd&) const override { return Aeq_; }
    Eigen::VectorXd ineq_residual(const Eigen::VectorXd& z) const override { return G_ * z - h_; }
    SpMat ineq_jacobian(const Eigen::VectorXd&) const override { return G_; }
    SpMat lagrangian_hessian(const Eigen::VectorXd&, const Eigen::VectorXd&,
                             const Eigen::VectorXd&) const override {
        return empty_hessian_;
    }

    int first_bound_row() const { return static_cast<int>(lp_.A_in.rows()); }

private:
    const LinearProgram& lp_;
    int n_;
    SpMat G_, Aeq_;
    SpMat empty_hessian_;
    Eigen::VectorXd h_;
};

LpResult solve_lp_ipm(const LinearProgram& lp, const NlpOptions& opt) {
    LpModel model(lp);
    const int n = model.num_vars();

    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        const double lo = lp.lb.size() ? lp.lb[j] : -kInf;
        const double hi = lp.ub.size() ? lp.ub[j] : kInf;
        if (std::isfinite(lo) && std::isfinite(hi))
            z0[j] = 0.5 * (lo + hi);
        else if (std::isfinite(lo))
            z0[j] = lo + 1.0;
        else if (std::isfinite(hi))
            z0[j] = hi - 1.0;
    }

    NlpResult r = solve_nlp(model, z0, opt);
    LpResult out;
    out.z = r.z;
    out.objective = r.objective;
    out.converged = r.converged;
    out.iterations = r.iterations;
    out.lam_eq = r.lam_eq;
    out.lam_in = r.lam_in.head(model.first_bound_row());
    return out;
}

} // namespace

// Variables pinned by their bounds (and whatever rows collapse onto a single
// variable once those are folded in) leave the interior-point iteration with
// parallel active rows and an unbounded dual ray, so they are eliminated up
// front. The reduced problem goes to the barrier solver; dropped rows keep a
// zero multiplier in the output.
LpResult solve_lp(const LinearProgram& lp, const NlpOptions& opt) {
    const int n = static_cast<int>(lp.c.size());
    const int me = static_cast<int>(lp.A_eq.rows());
    const int mi = static_cast<int>(lp.A_in.rows());
    if (lp.A_eq.rows() != lp.b_eq.size() || lp.A_in.rows() != lp.b_in.size())
        throw InputError("lp: constraint matrix and rhs sizes disagree");
    if ((me && lp.A_eq.cols() != n) || (mi && lp.A_in.cols() != n))
        throw InputError("lp: constraint matrix has the wrong number of columns");
    if ((lp.lb.size() && lp.lb.size() != n) || (lp.ub.size() && lp.ub.size() != n))
        throw InputError("lp: bound vectors must have one entry per variable");

    Eigen::VectorXd lbw = lp.lb.size() ? Eigen::VectorXd(lp.lb) : Eigen::VectorXd::Constant(n, -kInf);
    Eigen::VectorXd ubw = lp.ub.size() ? Eigen::VectorXd(lp.ub) : Eigen::VectorXd::Constant(n, kInf);
    std::vector<char> fixed(n, 0), drop_eq(me, 0), drop_in(mi, 0);
    Eigen::VectorXd xfix = Eigen::VectorXd::Zero(n);
    bool bad = false;

    std::vector<std::vector<std::pair<int, double>>> req(me), rin(mi);
    for (int k = 0; k < lp.A_eq.outerSize(); ++k)
        for (SpMat::InnerIterator it(lp.A_eq, k); it; ++it)
            if (it.value() != 0.0)
                req[it.row()].emplace_back(static_cast<int>(it.col()), it.value());
    for (int k = 0; k < lp.A_in.outerSize(); ++k)
        for (SpMat::InnerIterator it(lp.A_in, k); it; ++it)
            if (it.value() != 0.0)
                rin[it.row()].emplace_back(static_cast<int>(it.col()), it.value());

    auto tol_of = [](double b) { return 1e-8 * std::max(1.0, std::abs(b)); };
    auto pin = [&](int j, double v) {
        if (fixed[j]) {
            if (std::abs(v - xfix[j]) > 1e-7 * std::max(1.0, std::abs(v)))
                bad = true;
            return;
        }
        if (v < lbw[j] - tol_of(v) || v > ubw[j] + tol_of(v)) {
            bad = true;
            return;
        }
        fixed[j] = 1;
        xfix[j] = v;
        if (std::isfinite(lbw[j]))
            xfix[j] = std::max(xfix[j], lbw[j]);
        if (std::isfinite(ubw[j]))
            xfix[j] = std::min(xfix[j], ubw[j]);
    };
    auto near_equal = [&](int j) {
        return std::isfinite(lbw[j]) && std::isfinite(ubw[j]) &&
               ubw[j] - lbw[j] <= 1e-11 * std::max(1.0, std::abs(ubw[j]));
    };

    for (int j = 0; j < n && !bad; ++j) {
        if (lp.lb.size() && lp.ub.size() && lbw[j] > ubw[j] + tol_of(ubw[j]))
            bad = true;
        else if (near_equal(j))
            pin(j, 0.5 * (lbw[j] + ubw[j]));
    }

    for (int sweep = 0; sweep < 20 && !bad; ++sweep) {
        bool changed = false;
        for (int i = 0; i < me && !bad; ++i) {
            if (drop_eq[i])
                continue;
            double rhs = lp.b_eq[i];
            int cnt = 0, last = -1;
            double a = 0.0;
            for (const auto& [j, v] : req[i]) {
                if (fixed[j])
                    rhs -= v * xfix[j];
                else {
                    ++cnt;
                    last = j;
                    a = v;
                }
            }
            if (cnt == 0) {
                if (std::abs(rhs) > tol_of(lp.b_eq[i]))
                    bad = true;
                drop_eq[i] = 1;
                changed = true;
            } else if (cnt == 1) {
                pin(last, rhs / a);
                drop_eq[i] = 1;
                changed = true;
            }
        }
        for (int i = 0; i < mi && !bad; ++i) {
            if (drop_in[i])
                continue;
            double rhs = lp.b_in[i];
            int cnt = 0, last = -1;
            double a = 0.0;
            for (const auto& [j, v] : rin[i]) {
                if (fixed[j])
                    rhs -= v * xfix[j];
                else {
                    ++cnt;
                    last = j;
                    a = v;
                }
            }
            if (cnt == 0) {
                if (rhs < -tol_of(lp.b_in[i]))
                    bad = true;
                drop_in[i] = 1;
                changed = true;
            } else if (cnt == 1) {
                if (a > 0.0)
                    ubw[last] = std::min(ubw[last], rhs / a);
                else
                    lbw[last] = std::max(lbw[last], rhs / a);
                if (lbw[last] > ubw[last] + tol_of(ubw[last]))
                    bad = true;
                else if (near_equal(last))
                    pin(last, 0.5 * (lbw[last] + ubw[last]));
                drop_in[i] = 1;
                changed = true;
            }
        }
        if (!changed)
            break;
    }

    LpResult out;
    out.lam_eq = Eigen::VectorXd::Zero(me);
    out.lam_in = Eigen::VectorXd::Zero(mi);
    if (bad) {
        if (opt.require_convergence)
            throw SolveError("lp infeasible: contradictory rows or bounds");
        out.z = xfix;
        out.objective = kInf;
        return out;
    }

    std::vector<int> colmap(n, -1);
    int nred = 0;
    for (int j = 0; j < n; ++j)
        if (!fixed[j])
            colmap[j] = nred++;

    if (nred == 0) {
        out.z = xfix;
        out.objective = lp.c.dot(out.z) + lp.c0;
        out.converged = true;
        return out;
    }

    LinearProgram red;
    red.c.resize(nred);
    red.lb.resize(nred);
    red.ub.resize(nred);
    red.c0 = lp.c0;
    for (int j = 0; j < n; ++j) {
        if (colmap[j] < 0) {
            red.c0 += lp.c[j] * xfix[j];
            continue;
        }
        red.c[colmap[j]] = lp.c[j];
        red.lb[colmap[j]] = lbw[j];
        red.ub[colmap[j]] = ubw[j];
    }
    std::vector<int> eqmap, inmap;
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> rhs;
    for (int i = 0; i < me; ++i) {
        if (drop_eq[i])
            continue;
        double b = lp.b_eq[i];
        const int row = static_cast<int>(eqmap.size());
        for (const auto& [j, v] : req[i]) {
            if (fixed[j])
                b -= v * xfix[j];
            else
                trip.emplace_back(row, colmap[j], v);
        }
        rhs.push_back(b);
        eqmap.push_back(i);
    }
    red.A_eq.resize(static_cast<int>(eqmap.size()), nred);
    red.A_eq.setFromTriplets(trip.begin(), trip.end());
    red.b_eq = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
    trip.clear();
    rhs.clear();
    for (int i = 0; i < mi; ++i) {
        if (drop_in[i])
            continue;
        double b = lp.b_in[i];
        const int row = static_cast<int>(inmap.size());
        for (const auto& [j, v] : rin[i]) {
            if (fixed[j])
                b -= v * xfix[j];
            else
                trip.emplace_back(row, colmap[j], v);
        }
        rhs.push_back(b);
        inmap.push_back(i);
    }
    red.A_in.resize(static_cast<int>(inmap.size()), nred);
    red.A_in.setFromTriplets(trip.begin(), trip.end());
    red.b_in = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());

    LpResult r = solve_lp_ipm(red, opt);
    out.z = xfix;
    for (int j = 0; j < n; ++j)
        if (colmap[j] >= 0)
            out.z[j] = r.z[colmap[j]];
    out.objective = lp.c.dot(out.z) + lp.c0;
    out.converged = r.converged;
    out.iterations = r.iterations;
    for (size_t i = 0; i < eqmap.size(); ++i)
        out.lam_eq[eqmap[i]] = r.lam_eq[i];
    for (size_t i = 0; i < inmap.size(); ++i)
        out.lam_in[inmap[i]] = r.lam_in[i];
    return out;
}

} // namespace pipegrid
