#include "pipegrid/gas_optimal_control.hpp"

#include <algorithm>
#include <cmath>

namespace pipegrid {

namespace {

// Collocation transcription. Variables per grid point: densities, fluxes,
// boost ratios, then free withdrawals when enabled. Interval residuals use
// midpoint states and controls with a finite-difference time derivative.
class TogfModel : public NlpModel {
public:
    TogfModel(const GasNetwork& net, const std::vector<PwlProfile>& demand,
              const TogfOptions& opt, Eigen::VectorXd x_init)
        : net_(net), demand_(demand), opt_(opt), x_init_(std::move(x_init)) {
        if (opt.n_grid < 2)
            throw InputError("togf needs at least two grid points");
        if (static_cast<int>(demand.size()) != net.n_demand())
            throw InputError("togf: one demand profile per demand node required");
        nd_ = net.n_demand();
        ne_ = net.n_pipes();
        nc_ = static_cast<int>(net.compressor_pipes().size());
        nx_ = nd_ + ne_;
        stride_ = nx_ + nc_ + (opt.free_demand ? nd_ : 0);
        nt_ = opt.n_grid;
        dt_h_ = opt.horizon_hours / (nt_ - 1);
        h_ = dt_h_ / net.scaling().hours_per_time_unit();

        weights_.assign(nt_, h_);
        weights_.front() = 0.5 * h_;
        weights_.back() = 0.5 * h_;

        kappa_ = (net.heat_capacity_ratio() - 1.0) / net.heat_capacity_ratio();
        for (int c = 0; c < nc_; ++c) {
            const Pipe& p = net.pipes()[net.compressor_pipes()[c]];
            coeff_.push_back(p.area / p.efficiency);
        }

        cap_rows_ = opt.discharge_cap ? nc_ : 0;
    }

    // density bounds are skipped at an anchored start point: that state is
    // data, and bounding it would only manufacture infeasibility
    int rho_rows(int k) const { return (!opt_.periodic && k == 0) ? 0 : 2 * nd_; }
    int point_rows(int k) const {
        return rho_rows(k) + 2 * nc_ + cap_rows_ + (opt_.free_demand ? 2 * nd_ : 0);
    }
    int point_base(int k) const {
        return k == 0 ? 0 : point_rows(0) + (k - 1) * point_rows(1);
    }

    int num_vars() const override { return stride_ * nt_; }
    int num_eq() const override {
        // wrap-around rows, or the start state held at the operating point
        return nx_ * (nt_ - 1) + (opt_.periodic ? nx_ + nc_ : nx_);
    }
    int num_ineq() const override { return point_base(nt_ - 1) + point_rows(nt_ - 1); }

    int rho_at(int k, int i) const { return k * stride_ + i; }
    int flux_at(int k, int e) const { return k * stride_ + nd_ + e; }
    int alpha_at(int k, int c) const { return k * stride_ + nx_ + c; }
    int dem_at(int k, int i) const { return k * stride_ + nx_ + nc_ + i; }

    double t_hours(int k) const { return k * dt_h_; }

    struct Point {
        GasState x;
        Eigen::VectorXd alpha;  // compressor order
        Eigen::VectorXd demand; // free-demand values, empty when fixed
    };

    Point point(const Eigen::VectorXd& z, int k) const {
        Point p;
        p.x.rho = z.segment(k * stride_, nd_);
        p.x.flux = z.segment(k * stride_ + nd_, ne_);
        p.alpha = z.segment(k * stride_ + nx_, nc_);
        if (opt_.free_demand)
            p.demand = z.segment(k * stride_ + nx_ + nc_, nd_);
        return p;
    }

    struct Mid {
        GasState x;
        Eigen::VectorXd xdot;
        ControlsAt u;
        double t = 0.0;
    };

    Mid midpoint(const Eigen::VectorXd& z, int k) const {
        Point a = point(z, k), b = point(z, k + 1);
        Mid m;
        m.t = 0.5 * (t_hours(k) + t_hours(k + 1));
        m.x.rho = 0.5 * (a.x.rho + b.x.rho);
        m.x.flux = 0.5 * (a.x.flux + b.x.flux);
        m.xdot.resize(nx_);
        m.xdot.head(nd_) = (b.x.rho - a.x.rho) / h_;
        m.xdot.tail(ne_) = (b.x.flux - a.x.flux) / h_;
        m.u.alpha_full = net_.expand_alpha(0.5 * (a.alpha + b.alpha));
        m.u.demand.resize(nd_);
        if (opt_.free_demand) {
            m.u.demand = 0.5 * (a.demand + b.demand);
        } else {
            for (int i = 0; i < nd_; ++i)
                m.u.demand[i] = demand_[i].value(m.t);
        }
        m.u.s.resize(net_.n_slack());
        m.u.sdot.resize(net_.n_slack());
        const double hpu = net_.scaling().hours_per_time_unit();
        for (int i = 0; i < net_.n_slack(); ++i) {
            const PwlProfile& sp = net_.nodes()[net_.slack_nodes()[i]].slack_density;
            m.u.s[i] = sp.value(m.t);
            m.u.sdot[i] = sp.slope(m.t) * hpu;
        }
        return m;
    }

    double objective(const Eigen::VectorXd& z) const override {
        double J = 0.0;
        const double eps = opt_.smooth_eps;
        for (int k = 0; k < nt_; ++k)
            for (int c = 0; c < nc_; ++c) {
                const double f = z[flux_at(k, net_.compressor_pipes()[c])];
                const double a = z[alpha_at(k, c)];
                J += weights_[k] * coeff_[c] * std::sqrt(f * f + eps * eps) *
                     (std::pow(a, kappa_) - 1.0);
            }
        return J;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const override {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(num_vars());
        const double eps = opt_.smooth_eps;
        for (int k = 0; k < nt_; ++k)
            for (int c = 0; c < nc_; ++c) {
                const int jf = flux_at(k, net_.compressor_pipes()[c]);
                const int ja = alpha_at(k, c);
                const double f = z[jf];
                const double a = z[ja];
                const double sabs = std::sqrt(f * f + eps * eps);
                const double lift = std::pow(a, kappa_) - 1.0;
                grad[jf] += weights_[k] * coeff_[c] * (f / sabs) * lift;
                grad[ja] += weights_[k] * coeff_[c] * sabs * kappa_ * std::pow(a, kappa_ - 1.0);
            }
        return grad;
    }

    Eigen::VectorXd eq_residual(const Eigen::VectorXd& z) const override {
        Eigen::VectorXd r(num_eq());
        for (int k = 0; k < nt_ - 1; ++k) {
            Mid m = midpoint(z, k);
            r.segment(k * nx_, nx_) = dae_residual(net_, m.xdot, m.x, m.u);
        }
        const int base = nx_ * (nt_ - 1);
        Point first = point(z, 0);
        if (opt_.periodic) {
            Point last = point(z, nt_ - 1);
            r.segment(base, nd_) = first.x.rho - last.x.rho;
            r.segment(base + nd_, ne_) = first.x.flux - last.x.flux;
            r.segment(base + nx_, nc_) = first.alpha - last.alpha;
        } else {
            r.segment(base, nd_) = first.x.rho - x_init_.head(nd_);
            r.segment(base + nd_, ne_) = first.x.flux - x_init_.tail(ne_);
        }
        return r;
    }

    SpMat eq_jacobian(const Eigen::VectorXd& z) const override {
        std::vector<Eigen::Triplet<double>> trip;
        for (int k = 0; k < nt_ - 1; ++k) {
            Mid m = midpoint(z, k);
            const Eigen::MatrixXd Jx = dae_jacobian(net_, m.x, m.u, 0.0);
            const Eigen::MatrixXd Jshift = dae_jacobian(net_, m.x, m.u, 1.0);
            const Eigen::MatrixXd Jdot = Jshift - Jx;
            const Eigen::MatrixXd Ja = dae_alpha_jacobian(net_, m.xdot, m.x, m.u);

            for (int r = 0; r < nx_; ++r)
                for (int s = 0; s < nx_; ++s) {
                    const double lo = 0.5 * Jx(r, s) - Jdot(r, s) / h_;
                    const double hi = 0.5 * Jx(r, s) + Jdot(r, s) / h_;
                    if (lo != 0.0)
                        trip.emplace_back(k * nx_ + r, k * stride_ + s, lo);
                    if (hi != 0.0)
                        trip.emplace_back(k * nx_ + r, (k + 1) * stride_ + s, hi);
                }
            for (int r = 0; r < nx_; ++r)
                for (int c = 0; c < nc_; ++c) {
                    const double v = 0.5 * Ja(r, c);
                    if (v != 0.0) {
                        trip.emplace_back(k * nx_ + r, alpha_at(k, c), v);
                        trip.emplace_back(k * nx_ + r, alpha_at(k + 1, c), v);
                    }
                }
            if (opt_.free_demand)
                for (int i = 0; i < nd_; ++i) {
                    trip.emplace_back(k * nx_ + i, dem_at(k, i), 2.0);
                    trip.emplace_back(k * nx_ + i, dem_at(k + 1, i), 2.0);
                }
        }
        const int base = nx_ * (nt_ - 1);
        if (opt_.periodic) {
            for (int s = 0; s < nx_; ++s) {
                trip.emplace_back(base + s, s, 1.0);
                trip.emplace_back(base + s, (nt_ - 1) * stride_ + s, -1.0);
            }
            for (int c = 0; c < nc_; ++c) {
                trip.emplace_back(base + nx_ + c, alpha_at(0, c), 1.0);
                trip.emplace_back(base + nx_ + c, alpha_at(nt_ - 1, c), -1.0);
            }
        } else {
            for (int s = 0; s < nx_; ++s)
                trip.emplace_back(base + s, s, 1.0);
        }
        SpMat J(num_eq(), num_vars());
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }

    Eigen::VectorXd ineq_residual(const Eigen::VectorXd& z) const override {
        Eigen::VectorXd g(num_ineq());
        int row = 0;
        for (int k = 0; k < nt_; ++k) {
            if (rho_rows(k))
                for (int i = 0; i < nd_; ++i) {
                    const GasNode& node = net_.nodes()[net_.demand_nodes()[i]];
                    g[row++] = node.rho_min - z[rho_at(k, i)];
                    g[row++] = z[rho_at(k, i)] - node.rho_max;
                }
            for (int c = 0; c < nc_; ++c) {
                const Pipe& p = net_.pipes()[net_.compressor_pipes()[c]];
                g[row++] = 1.0 - z[alpha_at(k, c)];
                g[row++] = z[alpha_at(k, c)] - p.boost_max;
            }
            if (opt_.discharge_cap)
                for (int c = 0; c < nc_; ++c) {
                    const Pipe& p = net_.pipes()[net_.compressor_pipes()[c]];
                    const GasNode& from = net_.nodes()[p.from];
                    const int fd = net_.demand_position(p.from);
                    const double rho_f =
                        fd >= 0 ? z[rho_at(k, fd)]
                                : from.slack_density.value(t_hours(k));
                    g[row++] = z[alpha_at(k, c)] * rho_f - from.rho_max;
                }
            if (opt_.free_demand)
                for (int i = 0; i < nd_; ++i) {
                    const GasNode& node = net_.nodes()[net_.demand_nodes()[i]];
                    g[row++] = node.withdrawal_min - z[dem_at(k, i)];
                    g[row++] = z[dem_at(k, i)] - node.withdrawal_max;
                }
        }
        return g;
    }

    SpMat ineq_jacobian(const Eigen::VectorXd& z) const override {
        std::vector<Eigen::Triplet<double>> trip;
        int row = 0;
        for (int k = 0; k < nt_; ++k) {
            if (rho_rows(k))
                for (int i = 0; i < nd_; ++i) {
                    trip.emplace_back(row++, rho_at(k, i), -1.0);
                    trip.emplace_back(row++, rho_at(k, i), 1.0);
                }
            for (int c = 0; c < nc_; ++c) {
                trip.emplace_back(row++, alpha_at(k, c), -1.0);
                trip.emplace_back(row++, alpha_at(k, c), 1.0);
            }
            if (opt_.discharge_cap)
                for (int c = 0; c < nc_; ++c) {
                    const Pipe& p = net_.pipes()[net_.compressor_pipes()[c]];
                    const int fd = net_.demand_position(p.from);
                    if (fd >= 0) {
                        trip.emplace_back(row, alpha_at(k, c), z[rho_at(k, fd)]);
                        trip.emplace_back(row, rho_at(k, fd), z[alpha_at(k, c)]);
                    } else {
                        const GasNode& from = net_.nodes()[p.from];
                        trip.emplace_back(row, alpha_at(k, c),
                                          from.slack_density.value(t_hours(k)));
                    }
                    ++row;
                }
            if (opt_.free_demand)
                for (int i = 0; i < nd_; ++i) {
                    trip.emplace_back(row++, dem_at(k, i), -1.0);
                    trip.emplace_back(row++, dem_at(k, i), 1.0);
                }
        }
        SpMat J(num_ineq(), num_vars());
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }

    SpMat lagrangian_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& lam,
                             const Eigen::VectorXd& w) const override {
        std::vector<Eigen::Triplet<double>> trip;
        auto sym = [&](int i, int j, double v) {
            if (v == 0.0)
                return;
            trip.emplace_back(i, j, v);
            if (i != j)
                trip.emplace_back(j, i, v);
        };

        // objective curvature at the grid points
        const double eps = opt_.smooth_eps;
        for (int k = 0; k < nt_; ++k)
            for (int c = 0; c < nc_; ++c) {
                const int jf = flux_at(k, net_.compressor_pipes()[c]);
                const int ja = alpha_at(k, c);
                const double f = z[jf];
                const double a = z[ja];
                const double sabs = std::sqrt(f * f + eps * eps);
                const double lift = std::pow(a, kappa_) - 1.0;
                const double wk = weights_[k] * coeff_[c];
                sym(jf, jf, wk * (eps * eps / (sabs * sabs * sabs)) * lift);
                sym(jf, ja, wk * (f / sabs) * kappa_ * std::pow(a, kappa_ - 1.0));
                sym(ja, ja, wk * sabs * kappa_ * (kappa_ - 1.0) * std::pow(a, kappa_ - 2.0));
            }

        // collocation curvature
        for (int k = 0; k < nt_ - 1; ++k) {
            Mid m = midpoint(z, k);
            const Eigen::VectorXd nu = lam.segment(k * nx_, nx_);
            DaeHessian H = dae_weighted_hessian(net_, m.xdot, m.x, m.u, nu);

            auto state_idx = [&](int blk, int s) { return (k + blk) * stride_ + s; };
            for (int r = 0; r < nx_; ++r)
                for (int s = r; s < nx_; ++s) {
                    const double v = H.xx(r, s);
                    if (v == 0.0)
                        continue;
                    const double q = 0.25 * v;
                    // both variables are midpoint averages
                    sym(state_idx(0, r), state_idx(0, s), q);
                    sym(state_idx(1, r), state_idx(1, s), q);
                    if (r == s) {
                        sym(state_idx(0, r), state_idx(1, s), q);
                    } else {
                        sym(state_idx(0, r), state_idx(1, s), q);
                        sym(state_idx(1, r), state_idx(0, s), q);
                    }
                }
            for (int r = 0; r < nx_; ++r)
                for (int c = 0; c < nc_; ++c) {
                    const double v = H.xa(r, c);
                    if (v != 0.0) {
                        const double q = 0.25 * v;
                        sym(state_idx(0, r), alpha_at(k, c), q);
                        sym(state_idx(0, r), alpha_at(k + 1, c), q);
                        sym(state_idx(1, r), alpha_at(k, c), q);
                        sym(state_idx(1, r), alpha_at(k + 1, c), q);
                    }
                    const double vd = H.dxa(r, c);
                    if (vd != 0.0) {
                        const double q = 0.5 * vd / h_;
                        sym(state_idx(0, r), alpha_at(k, c), -q);
                        sym(state_idx(0, r), alpha_at(k + 1, c), -q);
                        sym(state_idx(1, r), alpha_at(k, c), q);
                        sym(state_idx(1, r), alpha_at(k + 1, c), q);
                    }
                }
            for (int a = 0; a < nc_; ++a)
                for (int b = a; b < nc_; ++b) {
                    const double v = H.aa(a, b);
                    if (v == 0.0)
                        continue;
                    const double q = 0.25 * v;
                    sym(alpha_at(k, a), alpha_at(k, b), q);
                    sym(alpha_at(k + 1, a), alpha_at(k + 1, b), q);
                    if (a == b) {
                        sym(alpha_at(k, a), alpha_at(k + 1, b), q);
                    } else {
                        sym(alpha_at(k, a), alpha_at(k + 1, b), q);
                        sym(alpha_at(k + 1, a), alpha_at(k, b), q);
                    }
                }
        }

        // bilinear discharge caps
        if (opt_.discharge_cap) {
            for (int k = 0; k < nt_; ++k) {
                const int base = point_base(k) + rho_rows(k) + 2 * nc_;
                for (int c = 0; c < nc_; ++c) {
                    const Pipe& p = net_.pipes()[net_.compressor_pipes()[c]];
                    const int fd = net_.demand_position(p.from);
                    if (fd >= 0)
                        sym(alpha_at(k, c), rho_at(k, fd), w[base + c]);
                }
            }
        }

        SpMat H(num_vars(), num_vars());
        H.setFromTriplets(trip.begin(), trip.end());
        return H;
    }

private:
    const GasNetwork& net_;
    const std::vector<PwlProfile>& demand_;
    TogfOptions opt_;
    Eigen::VectorXd x_init_;
    int nd_ = 0, ne_ = 0, nc_ = 0, nx_ = 0, stride_ = 0, nt_ = 0;
    int cap_rows_ = 0;
    double dt_h_ = 0.0, h_ = 0.0, kappa_ = 0.0;
    std::vector<double> weights_;
    std::vector<double> coeff_;
};

} // namespace

TogfResult solve_togf(const GasNetwork& net, const std::vector<PwlProfile>& demand,
                      const TogfOptions& opt) {
    const int nd = net.n_demand();
    const int ne = net.n_pipes();
    const int nc = static_cast<int>(net.compressor_pipes().size());

    // start from the relaxed steady state at the initial demands
    ControlSignal u0 = ControlSignal::neutral(net);
    u0.demand = demand;
    GasState x0;
    try {
        x0 = solve_steady_state(net, u0, 0.0);
    } catch (const SolveError&) {
        x0.rho = Eigen::VectorXd::Ones(nd);
        x0.flux = Eigen::VectorXd::Zero(ne);
    }
    TogfModel model(net, demand, opt, x0.stacked());

    // quasi-static guess: each grid point gets the steady state of its own
    // demand level, which keeps the start near the orbit it has to track
    Eigen::VectorXd z0(model.num_vars());
    for (int k = 0; k < opt.n_grid; ++k) {
        GasState xk = x0;
        try {
            xk = solve_steady_state(net, u0, model.t_hours(k));
        } catch (const SolveError&) {
        }
        z0.segment(model.rho_at(k, 0), nd) = xk.rho;
        z0.segment(model.flux_at(k, 0), ne) = xk.flux;
        for (int c = 0; c < nc; ++c)
            z0[model.alpha_at(k, c)] = 1.0;
        if (opt.free_demand)
            for (int i = 0; i < nd; ++i)
                z0[model.dem_at(k, i)] = demand[i].value(model.t_hours(k));
    }

    NlpResult sol = solve_nlp(model, z0, opt.nlp);

    TogfResult out;
    out.iterations = sol.iterations;
    out.converged = sol.converged;
    out.kkt_stationarity = sol.stationarity;
    out.kkt_feasibility = sol.feasibility;
    out.kkt_complementarity = sol.complementarity;
    out.objective_smooth = sol.objective;

    std::vector<std::vector<PwlProfile::Knot>> aknots(nc);
    for (int k = 0; k < opt.n_grid; ++k) {
        out.times.push_back(model.t_hours(k));
        GasState s;
        s.rho = sol.z.segment(model.rho_at(k, 0), nd);
        s.flux = sol.z.segment(model.flux_at(k, 0), ne);
        out.states.push_back(std::move(s));
        Eigen::VectorXd a(nc);
        for (int c = 0; c < nc; ++c) {
            a[c] = sol.z[model.alpha_at(k, c)];
            aknots[c].push_back({model.t_hours(k), a[c]});
        }
        out.alpha.push_back(std::move(a));
    }

    out.controls.alpha.clear();
    for (int c = 0; c < nc; ++c)
        out.controls.alpha.push_back(PwlProfile(aknots[c]));
    if (opt.free_demand) {
        for (int i = 0; i < nd; ++i) {
            std::vector<PwlProfile::Knot> dk;
            for (int k = 0; k < opt.n_grid; ++k)
                dk.push_back({model.t_hours(k), sol.z[model.dem_at(k, i)]});
            out.controls.demand.push_back(PwlProfile(dk));
        }
    } else {
        out.controls.demand = demand;
    }
    for (int s : net.slack_nodes())
        out.controls.slack_density.push_back(net.nodes()[s].slack_density);

    out.objective = compressor_energy(net, togf_trajectory(net, out)).sum();
    return out;
}

GasTrajectory togf_trajectory(const GasNetwork& net, const TogfResult& r) {
    GasTrajectory traj;
    traj.times = r.times;
    traj.states = r.states;
    traj.controls = r.controls;
    traj.step_times = r.times;
    for (const GasState& s : r.states)
        traj.step_x.push_back(s.stacked());

    // knot derivatives from the grid itself, central in the interior
    const double hpu = net.scaling().hours_per_time_unit();
    const std::size_t n = traj.step_times.size();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = k + 1 == n ? k : k + 1;
        const double dt = (traj.step_times[hi] - traj.step_times[lo]) / hpu;
        if (dt > 0.0)
            traj.step_xdot.push_back((traj.step_x[hi] - traj.step_x[lo]) / dt);
        else
            traj.step_xdot.push_back(Eigen::VectorXd::Zero(traj.step_x[k].size()));
    }
    return traj;
}

Eigen::VectorXd compressor_energy(const GasNetwork& net, const GasTrajectory& traj) {
    const int nc = static_cast<int>(net.compressor_pipes().size());
    Eigen::VectorXd E = Eigen::VectorXd::Zero(nc);
    if (traj.times.size() < 2)
        return E;
    const double hpu = net.scaling().hours_per_time_unit();
    const double kappa = (net.heat_capacity_ratio() - 1.0) / net.heat_capacity_ratio();

    auto integrand = [&](std::size_t k, int c) {
        const int e = net.compressor_pipes()[c];
        const Pipe& p = net.pipes()[e];
        const double phi = traj.states[k].flux[e];
        const double a = traj.controls.alpha[c].value(traj.times[k]);
        return (p.area / p.efficiency) * std::abs(phi) * (std::pow(a, kappa) - 1.0);
    };
    for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (std::size_t k = 1; k < traj.times.size(); ++k) {
            const double dt = (traj.times[k] - traj.times[k - 1]) / hpu;
            acc += 0.5 * (integrand(k - 1, c) + integrand(k, c)) * dt;
        }
        E[c] = acc;
    }
    return E;
}

double compressor_power_scale(const GasNetwork& net) {
    const GasScaling& sc = net.scaling();
    const double g = net.heat_capacity_ratio();
    return (g / (g - 1.0)) * sc.rho0 * sc.c * sc.c * sc.c * sc.area_ref;
}

} // namespace pipegrid
