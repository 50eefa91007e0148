#include "pipegrid/pwl.hpp"

#include <algorithm>
#include <cmath>

namespace pipegrid {

PwlProfile PwlProfile::from_hourly(const std::vector<double>& values, double ramp_w) {
    if (values.empty())
        throw InputError("from_hourly: empty value list");
    std::vector<Knot> k;
    const double half = 0.5 * ramp_w;
    k.push_back({0.0, values[0]});
    for (std::size_t h = 1; h < values.size(); ++h) {
        const double t = static_cast<double>(h);
        if (half > 0.0) {
            k.push_back({t - half, values[h - 1]});
            k.push_back({t + half, values[h]});
        } else {
            k.push_back({t, values[h - 1]});
            k.push_back({t, values[h]});
        }
    }
    k.push_back({static_cast<double>(values.size()), values.back()});
    return PwlProfile(std::move(k));
}

int PwlProfile::upper_index(double t) const {
    // last index with knot time <= t
    int lo = 0, hi = static_cast<int>(knots_.size()) - 1, ans = -1;
    while (lo <= hi) {
        int mid = (lo + hi) / 2;
        if (knots_[mid].t <= t) {
            ans = mid;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    return ans;
}

double PwlProfile::value(double t) const {
    if (knots_.empty())
        throw InputError("PwlProfile: empty profile evaluated");
    int i = upper_index(t);
    if (i < 0)
        return knots_.front().v;
    if (i + 1 >= static_cast<int>(knots_.size()))
        return knots_.back().v;
    const Knot& a = knots_[i];
    const Knot& b = knots_[i + 1];
    if (b.t == a.t)
        return a.v; // upper_index already picked the rightmost knot at t
    const double w = (t - a.t) / (b.t - a.t);
    return a.v + w * (b.v - a.v);
}

double PwlProfile::value_left(double t) const {
    if (knots_.empty())
        throw InputError("PwlProfile: empty profile evaluated");
    // last index with knot time strictly below t
    int i = -1;
    {
        int lo = 0, hi = static_cast<int>(knots_.size()) - 1;
        while (lo <= hi) {
            int mid = (lo + hi) / 2;
            if (knots_[mid].t < t) {
                i = mid;
                lo = mid + 1;
            } else {
                hi = mid - 1;
            }
        }
    }
    if (i < 0)
        return knots_.front().v;
    if (i + 1 >= static_cast<int>(knots_.size()))
        return knots_.back().v;
    const Knot& a = knots_[i];
    const Knot& b = knots_[i + 1];
    if (b.t == a.t)
        return a.v;
    const double w = (std::min(t, b.t) - a.t) / (b.t - a.t);
    return a.v + w * (b.v - a.v);
}

double PwlProfile::slope(double t) const {
    if (knots_.empty())
        throw InputError("PwlProfile: empty profile evaluated");
    int i = upper_index(t);
    if (i < 0 || i + 1 >= static_cast<int>(knots_.size()))
        return 0.0;
    const Knot& a = knots_[i];
    const Knot& b = knots_[i + 1];
    if (b.t == a.t)
        return 0.0;
    return (b.v - a.v) / (b.t - a.t);
}

double PwlProfile::slope_left(double t) const {
    if (knots_.empty())
        throw InputError("PwlProfile: empty profile evaluated");
    int i = -1;
    {
        int lo = 0, hi = static_cast<int>(knots_.size()) - 1;
        while (lo <= hi) {
            int mid = (lo + hi) / 2;
            if (knots_[mid].t < t) {
                i = mid;
                lo = mid + 1;
            } else {
                hi = mid - 1;
            }
        }
    }
    if (i < 0 || i + 1 >= static_cast<int>(knots_.size()))
        return 0.0;
    const Knot& a = knots_[i];
    const Knot& b = knots_[i + 1];
    if (b.t == a.t || b.t < t)
        return 0.0;
    return (b.v - a.v) / (b.t - a.t);
}

double PwlProfile::integral(double t0, double t1) const {
    if (t1 < t0)
        return -integral(t1, t0);
    // exact trapezoid over each linear segment
    double acc = 0.0;
    double t = t0;
    double v = value(t0);
    for (const Knot& k : knots_) {
        if (k.t <= t)
            continue;
        if (k.t >= t1)
            break;
        acc += 0.5 * (v + value_left(k.t)) * (k.t - t);
        t = k.t;
        v = value(k.t); // right-continuous restart at jumps
    }
    acc += 0.5 * (v + value_left(t1)) * (t1 - t);
    return acc;
}

PwlProfile PwlProfile::with_interval(double t0, double t1, double v) const {
    if (t1 <= t0)
        return *this;
    std::vector<Knot> k;
    for (const Knot& kn : knots_)
        if (kn.t < t0)
            k.push_back(kn);
    k.push_back({t0, value(t0)});
    k.push_back({t0, v});
    k.push_back({t1, v});
    k.push_back({t1, value(t1)});
    for (const Knot& kn : knots_)
        if (kn.t > t1)
            k.push_back(kn);
    return PwlProfile(std::move(k));
}

std::vector<double> PwlProfile::breakpoints(double t0, double t1) const {
    std::vector<double> out;
    for (const Knot& k : knots_)
        if (k.t > t0 && k.t < t1)
            out.push_back(k.t);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace pipegrid
