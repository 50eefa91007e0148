#pragma once

#include <vector>

#include "pipegrid/errors.hpp"

namespace pipegrid {

/// Piecewise-linear signal of time. Knots are sorted by time; a repeated
/// abscissa encodes a jump, and evaluation is right-continuous there.
/// Outside the knot range the signal is held constant.
class PwlProfile {
public:
    struct Knot {
        double t;
        double v;
    };

    PwlProfile() = default;

    explicit PwlProfile(std::vector<Knot> knots) : knots_(std::move(knots)) {
        for (std::size_t i = 1; i < knots_.size(); ++i) {
            if (knots_[i].t < knots_[i - 1].t)
                throw InputError("PwlProfile: knot times must be non-decreasing");
        }
    }

    static PwlProfile constant(double v) { return PwlProfile({{0.0, v}}); }

    /// Hourly staircase with linear ramps of width `ramp_w` centered on each
    /// hour boundary. values[h] applies on [h, h+1).
    static PwlProfile from_hourly(const std::vector<double>& values, double ramp_w);

    bool empty() const { return knots_.empty(); }
    const std::vector<Knot>& knots() const { return knots_; }

    double value(double t) const;

    /// Limit of the signal from below; differs from value() only at jumps.
    double value_left(double t) const;

    /// Right-sided derivative dv/dt at t (0 in flat regions and past the ends).
    double slope(double t) const;

    /// Left-sided derivative dv/dt at t.
    double slope_left(double t) const;

    /// Exact integral of the signal over [t0, t1].
    double integral(double t0, double t1) const;

    /// Replaces the signal on [t0, t1) with the constant v; the original
    /// profile is kept outside, with jump knots at the boundaries.
    PwlProfile with_interval(double t0, double t1, double v) const;

    /// Knot times inside (t0, t1), deduplicated: integrator restart points.
    std::vector<double> breakpoints(double t0, double t1) const;

private:
    std::vector<Knot> knots_;

    // Index of the last knot with knots_[i].t <= t, or -1.
    int upper_index(double t) const;
};

} // namespace pipegrid
