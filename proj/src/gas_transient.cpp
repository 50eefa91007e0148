#include "pipegrid/gas_transient.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "pipegrid/errors.hpp"

namespace pipegrid {

Eigen::VectorXd GasState::stacked() const {
    Eigen::VectorXd x(rho.size() + flux.size());
    x << rho, flux;
    return x;
}

GasState GasState::from_stacked(const Eigen::VectorXd& x, int n_demand) {
    GasState s;
    s.rho = x.head(n_demand);
    s.flux = x.tail(x.size() - n_demand);
    return s;
}

ControlSignal ControlSignal::neutral(const GasNetwork& net) {
    ControlSignal u;
    for (std::size_t k = 0; k < net.compressor_pipes().size(); ++k)
        u.alpha.push_back(PwlProfile::constant(1.0));
    for (int i = 0; i < net.n_demand(); ++i)
        u.demand.push_back(PwlProfile::constant(0.0));
    for (int s : net.slack_nodes())
        u.slack_density.push_back(net.nodes()[s].slack_density);
    return u;
}

ControlsAt controls_at(const GasNetwork& net, const ControlSignal& u, double t_hours) {
    const int nc = static_cast<int>(net.compressor_pipes().size());
    if (static_cast<int>(u.alpha.size()) != nc || static_cast<int>(u.demand.size()) != net.n_demand() ||
        static_cast<int>(u.slack_density.size()) != net.n_slack())
        throw InputError("control signal does not match network layout");

    ControlsAt v;
    Eigen::VectorXd ac(nc);
    for (int k = 0; k < nc; ++k)
        ac[k] = u.alpha[k].value(t_hours);
    v.alpha_full = net.expand_alpha(ac);
    v.demand.resize(net.n_demand());
    for (int i = 0; i < net.n_demand(); ++i)
        v.demand[i] = u.demand[i].value(t_hours);
    v.s.resize(net.n_slack());
    v.sdot.resize(net.n_slack());
    const double hpu = net.scaling().hours_per_time_unit();
    for (int i = 0; i < net.n_slack(); ++i) {
        v.s[i] = u.slack_density[i].value(t_hours);
        v.sdot[i] = u.slack_density[i].slope(t_hours) * hpu;
    }
    return v;
}

namespace {

// As controls_at, but approaching t from below: a step that ends exactly on a
// control jump must still see the pre-jump values.
ControlsAt controls_at_left(const GasNetwork& net, const ControlSignal& u, double t_hours) {
    const int nc = static_cast<int>(net.compressor_pipes().size());
    ControlsAt v;
    Eigen::VectorXd ac(nc);
    for (int k = 0; k < nc; ++k)
        ac[k] = u.alpha[k].value_left(t_hours);
    v.alpha_full = net.expand_alpha(ac);
    v.demand.resize(net.n_demand());
    for (int i = 0; i < net.n_demand(); ++i)
        v.demand[i] = u.demand[i].value_left(t_hours);
    v.s.resize(net.n_slack());
    v.sdot.resize(net.n_slack());
    const double hpu = net.scaling().hours_per_time_unit();
    for (int i = 0; i < net.n_slack(); ++i) {
        v.s[i] = u.slack_density[i].value_left(t_hours);
        v.sdot[i] = u.slack_density[i].slope_left(t_hours) * hpu;
    }
    return v;
}

// Per-pipe endpoint bookkeeping shared by residual and Jacobian assembly.
struct PipeEnds {
    int fd, fs; // from-node position in the demand / slack ordering, -1 if absent
    int td, ts;
};

std::vector<PipeEnds> pipe_ends(const GasNetwork& net) {
    std::vector<PipeEnds> ends(net.n_pipes());
    for (int e = 0; e < net.n_pipes(); ++e) {
        const Pipe& p = net.pipes()[e];
        ends[e] = {net.demand_position(p.from), net.slack_position(p.from),
                   net.demand_position(p.to), net.slack_position(p.to)};
    }
    return ends;
}

double rho_at(const PipeEnds& pe, bool from_side, const Eigen::VectorXd& rho,
              const Eigen::VectorXd& s) {
    if (from_side)
        return pe.fd >= 0 ? rho[pe.fd] : s[pe.fs];
    return pe.td >= 0 ? rho[pe.td] : s[pe.ts];
}

} // namespace

Eigen::VectorXd dae_residual(const GasNetwork& net, const Eigen::VectorXd& xdot,
                             const GasState& x, const ControlsAt& u) {
    const int nd = net.n_demand();
    const int ne = net.n_pipes();
    const auto ends = pipe_ends(net);
    const Eigen::VectorXd& X = net.pipe_area();
    const Eigen::VectorXd& Lam = net.pipe_length();
    const Eigen::VectorXd& K = net.friction_coeff();

    Eigen::VectorXd F = Eigen::VectorXd::Zero(nd + ne);
    F.head(nd) += 4.0 * u.demand;

    const Eigen::VectorXd rhodot = xdot.head(nd);
    for (int e = 0; e < ne; ++e) {
        const PipeEnds& pe = ends[e];
        const double a = u.alpha_full[e];
        const double rf = rho_at(pe, true, x.rho, u.s);
        const double rt = rho_at(pe, false, x.rho, u.s);
        const double y = a * rf + rt;
        const double w = X[e] * Lam[e];

        // mass balance: mass-matrix and boundary-rate terms land on demand rows
        const double interior_rate = a * (pe.fd >= 0 ? rhodot[pe.fd] : 0.0) +
                                     (pe.td >= 0 ? rhodot[pe.td] : 0.0);
        const double boundary_rate = a * (pe.fs >= 0 ? u.sdot[pe.fs] : 0.0) +
                                     (pe.ts >= 0 ? u.sdot[pe.ts] : 0.0);
        const double rate = w * (interior_rate + boundary_rate);
        if (pe.fd >= 0)
            F[pe.fd] += rate + 4.0 * X[e] * x.flux[e]; // -4*Ad(f,e) = +4
        if (pe.td >= 0)
            F[pe.td] += rate - 4.0 * X[e] * x.flux[e];

        // momentum
        F[nd + e] = xdot[nd + e] + (rt - a * rf) / Lam[e] +
                    K[e] * x.flux[e] * std::abs(x.flux[e]) / y;
    }
    return F;
}

Eigen::MatrixXd dae_jacobian(const GasNetwork& net, const GasState& x, const ControlsAt& u,
                             double shift) {
    const int nd = net.n_demand();
    const int ne = net.n_pipes();
    const auto ends = pipe_ends(net);
    const Eigen::VectorXd& X = net.pipe_area();
    const Eigen::VectorXd& Lam = net.pipe_length();
    const Eigen::VectorXd& K = net.friction_coeff();

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nd + ne, nd + ne);
    for (int e = 0; e < ne; ++e) {
        const PipeEnds& pe = ends[e];
        const double a = u.alpha_full[e];
        const double rf = rho_at(pe, true, x.rho, u.s);
        const double rt = rho_at(pe, false, x.rho, u.s);
        const double y = a * rf + rt;
        const double w = shift * X[e] * Lam[e];
        const double drag = K[e] * x.flux[e] * std::abs(x.flux[e]) / (y * y);

        if (pe.fd >= 0) {
            J(pe.fd, nd + e) += 4.0 * X[e];
            J(pe.fd, pe.fd) += w * a;
            if (pe.td >= 0)
                J(pe.fd, pe.td) += w;
        }
        if (pe.td >= 0) {
            J(pe.td, nd + e) -= 4.0 * X[e];
            J(pe.td, pe.td) += w;
            if (pe.fd >= 0)
                J(pe.td, pe.fd) += w * a;
        }

        J(nd + e, nd + e) = shift + 2.0 * K[e] * std::abs(x.flux[e]) / y;
        if (pe.fd >= 0)
            J(nd + e, pe.fd) += -a / Lam[e] - a * drag;
        if (pe.td >= 0)
            J(nd + e, pe.td) += 1.0 / Lam[e] - drag;
    }
    return J;
}

Eigen::MatrixXd dae_alpha_jacobian(const GasNetwork& net, const Eigen::VectorXd& xdot,
                                   const GasState& x, const ControlsAt& u) {
    const int nd = net.n_demand();
    const int nc = static_cast<int>(net.compressor_pipes().size());
    const auto ends = pipe_ends(net);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nd + net.n_pipes(), nc);
    for (int c = 0; c < nc; ++c) {
        const int e = net.compressor_pipes()[c];
        const PipeEnds& pe = ends[e];
        const double w = net.pipe_area()[e] * net.pipe_length()[e];
        const double rate_from = pe.fd >= 0 ? xdot[pe.fd] : u.sdot[pe.fs];
        if (pe.fd >= 0)
            J(pe.fd, c) += w * rate_from;
        if (pe.td >= 0)
            J(pe.td, c) += w * rate_from;

        const double a = u.alpha_full[e];
        const double rf = rho_at(pe, true, x.rho, u.s);
        const double rt = rho_at(pe, false, x.rho, u.s);
        const double y = a * rf + rt;
        const double K = net.friction_coeff()[e];
        const double Lam = net.pipe_length()[e];
        const double g_y = -K * x.flux[e] * std::abs(x.flux[e]) / (y * y);
        J(nd + e, c) = -rf / Lam + g_y * rf;
    }
    return J;
}

DaeHessian dae_weighted_hessian(const GasNetwork& net, const Eigen::VectorXd& xdot,
                                const GasState& x, const ControlsAt& u,
                                const Eigen::VectorXd& mult) {
    const int nd = net.n_demand();
    const int ne = net.n_pipes();
    const int nx = nd + ne;
    const int nc = static_cast<int>(net.compressor_pipes().size());
    const auto ends = pipe_ends(net);

    DaeHessian H;
    H.xx = Eigen::MatrixXd::Zero(nx, nx);
    H.xa = Eigen::MatrixXd::Zero(nx, nc);
    H.aa = Eigen::MatrixXd::Zero(nc, nc);
    H.dxa = Eigen::MatrixXd::Zero(nx, nc);

    std::vector<int> comp_of(ne, -1);
    for (int c = 0; c < nc; ++c)
        comp_of[net.compressor_pipes()[c]] = c;

    for (int e = 0; e < ne; ++e) {
        const PipeEnds& pe = ends[e];
        const int c = comp_of[e];
        const double a = u.alpha_full[e];
        const double rf = rho_at(pe, true, x.rho, u.s);
        const double rt = rho_at(pe, false, x.rho, u.s);
        const double y = a * rf + rt;
        const double K = net.friction_coeff()[e];
        const double Lam = net.pipe_length()[e];
        const double X = net.pipe_area()[e];
        const double phi = x.flux[e];
        const double lm = mult[nd + e];

        // bilinear mass-rate terms couple alpha with the from-side density rate
        if (c >= 0 && pe.fd >= 0) {
            const double lrows = (pe.fd >= 0 ? mult[pe.fd] : 0.0) +
                                 (pe.td >= 0 ? mult[pe.td] : 0.0);
            H.dxa(pe.fd, c) += X * Lam * lrows;
        }

        // momentum row curvature
        const double sgn = phi > 0.0 ? 1.0 : (phi < 0.0 ? -1.0 : 0.0);
        const double g_y = -K * phi * std::abs(phi) / (y * y);
        const double g_pp = 2.0 * K * sgn / y;
        const double g_py = -2.0 * K * std::abs(phi) / (y * y);
        const double g_yy = 2.0 * K * phi * std::abs(phi) / (y * y * y);

        const int ip = nd + e; // flux position in the state vector
        H.xx(ip, ip) += lm * g_pp;
        if (pe.fd >= 0) {
            H.xx(ip, pe.fd) += lm * g_py * a;
            H.xx(pe.fd, ip) += lm * g_py * a;
            H.xx(pe.fd, pe.fd) += lm * g_yy * a * a;
        }
        if (pe.td >= 0) {
            H.xx(ip, pe.td) += lm * g_py;
            H.xx(pe.td, ip) += lm * g_py;
            H.xx(pe.td, pe.td) += lm * g_yy;
        }
        if (pe.fd >= 0 && pe.td >= 0) {
            H.xx(pe.fd, pe.td) += lm * g_yy * a;
            H.xx(pe.td, pe.fd) += lm * g_yy * a;
        }
        if (c >= 0) {
            H.xa(ip, c) += lm * g_py * rf;
            if (pe.fd >= 0)
                H.xa(pe.fd, c) += lm * (-1.0 / Lam + g_yy * a * rf + g_y);
            if (pe.td >= 0)
                H.xa(pe.td, c) += lm * g_yy * rf;
            H.aa(c, c) += lm * g_yy * rf * rf;
        }
    }
    (void)xdot;
    return H;
}

namespace {

// Smallest sigma-scaled y over pipes; used to keep Newton iterates away from
// the y = 0 singularity of the friction term.
double min_y(const GasNetwork& net, const Eigen::VectorXd& rho, const ControlsAt& u) {
    const auto ends = pipe_ends(net);
    double ymin = std::numeric_limits<double>::infinity();
    for (int e = 0; e < net.n_pipes(); ++e) {
        const double rf = rho_at(ends[e], true, rho, u.s);
        const double rt = rho_at(ends[e], false, rho, u.s);
        ymin = std::min(ymin, u.alpha_full[e] * rf + rt);
    }
    return ymin;
}

Eigen::VectorXd consistent_xdot(const GasNetwork& net, const GasState& x, const ControlsAt& u) {
    const int nd = net.n_demand();
    const int ne = net.n_pipes();
    // residual with xdot = 0 gives the negated explicit right-hand sides,
    // except the rho block still needs the mass matrix applied
    Eigen::VectorXd F0 = dae_residual(net, Eigen::VectorXd::Zero(nd + ne), x, u);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nd, nd);
    const auto ends = pipe_ends(net);
    for (int e = 0; e < ne; ++e) {
        const PipeEnds& pe = ends[e];
        const double w = net.pipe_area()[e] * net.pipe_length()[e];
        const double a = u.alpha_full[e];
        if (pe.fd >= 0) {
            M(pe.fd, pe.fd) += w * a;
            if (pe.td >= 0)
                M(pe.fd, pe.td) += w;
        }
        if (pe.td >= 0) {
            M(pe.td, pe.td) += w;
            if (pe.fd >= 0)
                M(pe.td, pe.fd) += w * a;
        }
    }
    Eigen::VectorXd xdot(nd + ne);
    xdot.head(nd) = M.partialPivLu().solve(-F0.head(nd));
    xdot.tail(ne) = -F0.tail(ne);
    return xdot;
}

GasState initial_guess(const GasNetwork& net, const ControlsAt& u) {
    const int n = net.n_nodes();
    // propagate densities from the slack nodes along a BFS tree, applying the
    // boost ratio across compressors and ignoring friction drop
    std::vector<double> rho_full(n, -1.0);
    std::deque<int> queue;
    for (int i = 0; i < net.n_slack(); ++i) {
        rho_full[net.slack_nodes()[i]] = u.s[i];
        queue.push_back(net.slack_nodes()[i]);
    }
    std::vector<std::vector<std::pair<int, int>>> adj(n); // node -> (pipe, other end)
    for (int e = 0; e < net.n_pipes(); ++e) {
        adj[net.pipes()[e].from].push_back({e, net.pipes()[e].to});
        adj[net.pipes()[e].to].push_back({e, net.pipes()[e].from});
    }
    while (!queue.empty()) {
        const int i = queue.front();
        queue.pop_front();
        for (auto [e, j] : adj[i]) {
            if (rho_full[j] >= 0.0)
                continue;
            const double a = u.alpha_full[e];
            rho_full[j] = (net.pipes()[e].from == i) ? a * rho_full[i] : rho_full[i] / a;
            queue.push_back(j);
        }
    }

    GasState x;
    x.rho.resize(net.n_demand());
    for (int i = 0; i < net.n_demand(); ++i)
        x.rho[i] = rho_full[net.demand_nodes()[i]];

    // flux from the demand balance Ad X Phi = d, minimum-norm on meshes
    Eigen::MatrixXd AdX = net.incidence_demand() * net.pipe_area().asDiagonal();
    Eigen::VectorXd z = AdX.completeOrthogonalDecomposition().solve(u.demand);
    x.flux = z;
    return x;
}

} // namespace

GasState solve_steady_state(const GasNetwork& net, const ControlsAt& u, const SteadyOptions& opt) {
    const int nd = net.n_demand();
    const int ne = net.n_pipes();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nd + ne);

    GasState x = initial_guess(net, u);
    Eigen::VectorXd F = dae_residual(net, zero, x, u);
    double fnorm = F.norm();
    for (int it = 0; it < opt.max_iter; ++it) {
        if (fnorm <= opt.tol)
            return x;
        Eigen::MatrixXd J = dae_jacobian(net, x, u, 0.0);
        Eigen::VectorXd step = J.partialPivLu().solve(-F);

        double sigma = 1.0;
        bool ok = false;
        for (int bt = 0; bt < 40; ++bt) {
            GasState trial = x;
            trial.rho += sigma * step.head(nd);
            trial.flux += sigma * step.tail(ne);
            if (min_y(net, trial.rho, u) > 0.0) {
                Eigen::VectorXd Ft = dae_residual(net, zero, trial, u);
                const double fn = Ft.norm();
                if (fn < fnorm * (1.0 - 1e-4 * sigma) || fn <= opt.tol) {
                    x = trial;
                    F = Ft;
                    fnorm = fn;
                    ok = true;
                    break;
                }
            }
            sigma *= 0.5;
        }
        if (!ok)
            throw SolveError("steady-state solve stalled at residual " + std::to_string(fnorm));
    }
    if (fnorm <= opt.tol)
        return x;
    throw SolveError("steady-state solve did not converge, residual " + std::to_string(fnorm));
}

GasState solve_steady_state(const GasNetwork& net, const ControlSignal& u, double t_hours,
                            const SteadyOptions& opt) {
    return solve_steady_state(net, controls_at(net, u, t_hours), opt);
}

namespace {

double wrms(const Eigen::VectorXd& v, const Eigen::VectorXd& ref, double atol, double rtol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double w = atol + rtol * std::abs(ref[i]);
        const double q = v[i] / w;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
}

struct StepAttempt {
    bool converged = false;
    Eigen::VectorXd x;
    Eigen::VectorXd xdot;
};

} // namespace

GasTrajectory integrate(const GasNetwork& net, const GasState& x0, const ControlSignal& u,
                        double horizon_hours, const IntegrateOptions& opt) {
    if (horizon_hours <= 0.0)
        throw InputError("integration horizon must be positive");
    const int nd = net.n_demand();
    const int nx = nd + net.n_pipes();
    const double hpu = net.scaling().hours_per_time_unit();
    const double T = horizon_hours / hpu; // nondimensional horizon

    // control breakpoints force an integrator restart so ramp corners are hit
    std::vector<double> marks;
    auto collect = [&](const PwlProfile& p) {
        for (double th : p.breakpoints(0.0, horizon_hours))
            marks.push_back(th / hpu);
    };
    for (const auto& p : u.alpha)
        collect(p);
    for (const auto& p : u.demand)
        collect(p);
    for (const auto& p : u.slack_density)
        collect(p);
    marks.push_back(T);
    std::sort(marks.begin(), marks.end());
    std::vector<double> segs;
    for (double m : marks)
        if (segs.empty() || m - segs.back() > 1e-10 * T)
            segs.push_back(m);
    if (segs.back() < T)
        segs.back() = T;

    GasTrajectory traj;
    traj.controls = u;

    Eigen::VectorXd x = x0.stacked();
    {
        const ControlsAt u0 = controls_at(net, u, 0.0);
        if (min_y(net, x0.rho, u0) <= 0.0)
            throw InputError("initial gas state has a non-positive endpoint density sum");
        Eigen::VectorXd xd = consistent_xdot(net, x0, u0);
        traj.step_times.push_back(0.0);
        traj.step_x.push_back(x);
        traj.step_xdot.push_back(xd);
    }

    double t = 0.0;
    double h = std::min(0.01, segs.front());
    long total_steps = 0;

    for (std::size_t seg = 0; seg < segs.size(); ++seg) {
        const double tb = segs[seg];
        // history inside the segment: most recent first
        std::deque<std::pair<double, Eigen::VectorXd>> hist;
        hist.push_front({t, x});
        // derivative consistent with the post-jump controls
        Eigen::VectorXd xdot =
            consistent_xdot(net, GasState::from_stacked(x, nd), controls_at(net, u, t * hpu));
        int order = 1;
        h = std::min(h, tb - t);

        while (t < tb - 1e-12 * T) {
            if (++total_steps > opt.max_steps)
                throw SolveError("gas integrator exceeded the step budget");
            if (h > tb - t || tb - t - h < 0.01 * h)
                h = tb - t;
            const bool hits_end = (h == tb - t);
            const double t_new = hits_end ? tb : t + h;
            const ControlsAt uc = controls_at_left(net, u, t_new * hpu);

            // predictor
            Eigen::VectorXd x_pred;
            if (order == 1 || hist.size() < 3) {
                x_pred = x + h * xdot;
            } else {
                const auto& [t1, x1] = hist[1];
                const auto& [t2, x2] = hist[2];
                const double l0 = (t_new - t1) * (t_new - t2) / ((t - t1) * (t - t2));
                const double l1 = (t_new - t) * (t_new - t2) / ((t1 - t) * (t1 - t2));
                const double l2 = (t_new - t) * (t_new - t1) / ((t2 - t) * (t2 - t1));
                x_pred = l0 * x + l1 * x1 + l2 * x2;
            }

            // BDF coefficients: xdot(t_new) = aplus*x_new - rhs_part
            double aplus;
            Eigen::VectorXd fixed_part(nx);
            if (order == 1 || hist.size() < 2) {
                aplus = 1.0 / h;
                fixed_part = -x / h;
            } else {
                const double h0 = t - hist[1].first;
                aplus = (2.0 * h + h0) / (h * (h + h0));
                const double a0 = -(h + h0) / (h * h0);
                const double am = h / (h0 * (h + h0));
                fixed_part = a0 * x + am * hist[1].second;
            }

            StepAttempt att;
            Eigen::VectorXd z = x_pred;
            Eigen::PartialPivLU<Eigen::MatrixXd> lu;
            for (int it = 0; it < 8; ++it) {
                GasState zs = GasState::from_stacked(z, nd);
                if (min_y(net, zs.rho, uc) <= 0.0)
                    break;
                Eigen::VectorXd zdot = aplus * z + fixed_part;
                Eigen::VectorXd F = dae_residual(net, zdot, zs, uc);
                lu.compute(dae_jacobian(net, zs, uc, aplus));
                Eigen::VectorXd delta = lu.solve(-F);
                z += delta;
                if (wrms(delta, x, opt.atol, opt.rtol) <= 0.05) {
                    GasState zchk = GasState::from_stacked(z, nd);
                    if (min_y(net, zchk.rho, uc) > 0.0) {
                        att.converged = true;
                        att.x = z;
                        att.xdot = aplus * z + fixed_part;
                    }
                    break;
                }
            }

            if (!att.converged) {
                h *= 0.25;
                if (h < 1e-13 * T)
                    throw SolveError("gas integrator step size underflow at t=" +
                                     std::to_string(t * hpu) + " h");
                continue;
            }

            const double ck = (order == 1 || hist.size() < 2) ? 0.5 : 0.3;
            const double est = ck * wrms(att.x - x_pred, x, opt.atol, opt.rtol);
            const int k = (order == 1 || hist.size() < 2) ? 1 : 2;
            const double factor = 0.9 * std::pow(std::max(est, 1e-10), -1.0 / (k + 1));
            if (est <= 1.0) {
                t = t_new;
                x = att.x;
                xdot = att.xdot;
                hist.push_front({t, x});
                if (hist.size() > 3)
                    hist.pop_back();
                traj.step_times.push_back(t * hpu);
                traj.step_x.push_back(x);
                traj.step_xdot.push_back(xdot);
                if (order == 1 && hist.size() >= 2)
                    order = 2;
                h *= std::min(2.5, std::max(0.2, factor));
            } else {
                h *= std::min(0.5, std::max(0.1, factor));
            }
        }
        t = tb;
    }

    // dense output on the uniform grid, linear between accepted steps
    const int n_out = static_cast<int>(std::llround(horizon_hours / opt.output_dt_hours));
    for (int k = 0; k <= n_out; ++k) {
        const double th = std::min(horizon_hours, k * opt.output_dt_hours);
        traj.times.push_back(th);
        traj.states.push_back(traj.state_at(th, net));
    }
    return traj;
}

GasState GasTrajectory::state_at(double t_hours, const GasNetwork& net) const {
    if (step_times.empty())
        throw SolveError("trajectory holds no integrator steps");
    const int nd = net.n_demand();
    if (t_hours <= step_times.front())
        return GasState::from_stacked(step_x.front(), nd);
    if (t_hours >= step_times.back())
        return GasState::from_stacked(step_x.back(), nd);
    auto it = std::upper_bound(step_times.begin(), step_times.end(), t_hours);
    const std::size_t j = static_cast<std::size_t>(it - step_times.begin());
    const double t0 = step_times[j - 1], t1 = step_times[j];
    const double w = (t_hours - t0) / (t1 - t0);
    return GasState::from_stacked((1.0 - w) * step_x[j - 1] + w * step_x[j], nd);
}

ControlSignal apply_contingency(const GasNetwork& net, const ControlSignal& u,
                                const ContingencyWindow& w) {
    const int k = net.compressor_index(w.compressor);
    if (w.t_end <= w.t_start)
        return u;
    ControlSignal out = u;
    out.alpha[k] = out.alpha[k].with_interval(w.t_start, w.t_end, 1.0);
    return out;
}

ControlSignal apply_contingency(const GasNetwork& net, const ControlSignal& u,
                                const std::vector<ContingencyWindow>& windows) {
    ControlSignal out = u;
    for (const auto& w : windows)
        out = apply_contingency(net, out, w);
    return out;
}

std::vector<PressureViolation> min_pressure_violations(const GasTrajectory& traj,
                                                       const GasNetwork& net) {
    std::vector<PressureViolation> out;
    for (int i = 0; i < net.n_demand(); ++i) {
        const GasNode& node = net.nodes()[net.demand_nodes()[i]];
        std::size_t k = 0;
        while (k < traj.times.size()) {
            if (traj.states[k].rho[i] >= node.rho_min) {
                ++k;
                continue;
            }
            PressureViolation v;
            v.node = node.id;
            v.t_start = traj.times[k];
            v.worst_density = traj.states[k].rho[i];
            while (k < traj.times.size() && traj.states[k].rho[i] < node.rho_min) {
                v.worst_density = std::min(v.worst_density, traj.states[k].rho[i]);
                v.t_end = traj.times[k];
                ++k;
            }
            out.push_back(v);
        }
    }
    return out;
}

double linepack(const GasNetwork& net, const GasState& x, const ControlsAt& u) {
    const auto ends = pipe_ends(net);
    double total = 0.0;
    for (int e = 0; e < net.n_pipes(); ++e) {
        const double rf = rho_at(ends[e], true, x.rho, u.s);
        const double rt = rho_at(ends[e], false, x.rho, u.s);
        const double y = u.alpha_full[e] * rf + rt;
        total += net.pipe_area()[e] * net.pipe_length()[e] * 0.5 * y;
    }
    return total;
}

Eigen::VectorXd implied_slack_withdrawal(const GasNetwork& net, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& xdot, const ControlsAt& u) {
    const int nd = net.n_demand();
    const auto ends = pipe_ends(net);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(net.n_slack());
    for (int e = 0; e < net.n_pipes(); ++e) {
        const PipeEnds& pe = ends[e];
        if (pe.fs < 0 && pe.ts < 0)
            continue;
        const double a = u.alpha_full[e];
        const double w = net.pipe_area()[e] * net.pipe_length()[e];
        const double rate = w * (a * (pe.fs >= 0 ? u.sdot[pe.fs] : xdot[pe.fd]) +
                                 (pe.ts >= 0 ? u.sdot[pe.ts] : xdot[pe.td]));
        const double adv = net.pipe_area()[e] * x[nd + e];
        if (pe.fs >= 0)
            d[pe.fs] += -adv - 0.25 * rate; // As(f,e) = -1
        if (pe.ts >= 0)
            d[pe.ts] += adv - 0.25 * rate;
    }
    return d;
}

MassBalanceReport mass_balance_report(const GasNetwork& net, const GasTrajectory& traj) {
    MassBalanceReport rep;
    if (traj.step_times.size() < 2)
        return rep;
    const int nd = net.n_demand();
    const double hpu = net.scaling().hours_per_time_unit();
    const double t0 = traj.step_times.front();
    const double t1 = traj.step_times.back();

    const ControlsAt ua = controls_at(net, traj.controls, t0);
    const ControlsAt ub = controls_at(net, traj.controls, t1);
    rep.linepack_change = linepack(net, GasState::from_stacked(traj.step_x.back(), nd), ub) -
                          linepack(net, GasState::from_stacked(traj.step_x.front(), nd), ua);

    // demand withdrawals integrate exactly; slack supply by trapezoid over steps
    double withdrawn = 0.0;
    for (const auto& p : traj.controls.demand)
        withdrawn += p.integral(t0, t1) / hpu;
    double slack_prev = 0.0;
    for (std::size_t k = 0; k < traj.step_times.size(); ++k) {
        const ControlsAt uc = controls_at(net, traj.controls, traj.step_times[k]);
        const double ds =
            implied_slack_withdrawal(net, traj.step_x[k], traj.step_xdot[k], uc).sum();
        if (k > 0)
            withdrawn += 0.5 * (slack_prev + ds) *
                         (traj.step_times[k] - traj.step_times[k - 1]) / hpu;
        slack_prev = ds;
    }
    rep.net_injection = -withdrawn;
    return rep;
}

} // namespace pipegrid
