// Copyright 2026 The episcen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "episcen/errors.hpp"
#include "episcen/simenv.hpp"

namespace episcen {

Polyline::Polyline(std::vector<std::array<double, 2>> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InputError("polyline needs at least two points");
    cumulative_.resize(points_.size());
    cumulative_[0] = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double len = std::hypot(points_[i][0] - points_[i - 1][0], points_[i][1] - points_[i - 1][1]);
        if (len <= 0.0) throw InputError("polyline has repeated points");
        cumulative_[i] = cumulative_[i - 1] + len;
    }
}

Pose Polyline::pose_at(double s) const {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    std::size_t seg = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    seg = std::min(seg, points_.size() - 2);
    const auto& a = points_[seg];
    const auto& b = points_[seg + 1];
    const double len = cumulative_[seg + 1] - cumulative_[seg];
    const double ux = (b[0] - a[0]) / len;
    const double uy = (b[1] - a[1]) / len;
    const double u = s - cumulative_[seg];
    return {a[0] + ux * u, a[1] + uy * u, std::atan2(uy, ux)};
}

std::array<double, 2> Polyline::to_world(double s, double d) const {
    const Pose p = pose_at(s);
    return {p.x - std::sin(p.heading) * d, p.y + std::cos(p.heading) * d};
}

std::array<double, 2> Polyline::project(double x, double y) const {
    double best_d2 = std::numeric_limits<double>::infinity();
    std::array<double, 2> best{0.0, 0.0};
    const std::size_t last = points_.size() - 2;
    for (std::size_t seg = 0; seg <= last; ++seg) {
        const auto& a = points_[seg];
        const auto& b = points_[seg + 1];
        const double len = cumulative_[seg + 1] - cumulative_[seg];
        const double ux = (b[0] - a[0]) / len;
        const double uy = (b[1] - a[1]) / len;
        double u = (x - a[0]) * ux + (y - a[1]) * uy;
        // End segments extend to infinity so that points before the start or past the end project sensibly.
        const double lo = seg == 0 ? -std::numeric_limits<double>::infinity() : 0.0;
        const double hi = seg == last ? std::numeric_limits<double>::infinity() : len;
        u = std::clamp(u, lo, hi);
        const double px = a[0] + ux * u;
        const double py = a[1] + uy * u;
        const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
        if (d2 < best_d2) {
            best_d2 = d2;
            const double cross = ux * (y - a[1]) - uy * (x - a[0]);
            best = {cumulative_[seg] + u, cross};
        }
    }
    return best;
}

namespace {

double cosine_ramp(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * u));
}

/// Builds a reference line from straight runs and circular arcs sampled every metre.
class PathBuilder {
public:
    PathBuilder& straight(double length) {
        const int n = static_cast<int>(std::ceil(length));
        const double step = length / n;
        for (int i = 0; i < n; ++i) advance(step);
        return *this;
    }
    /// Positive angle turns left.
    PathBuilder& arc(double radius, double angle_deg) {
        const double angle = angle_deg * std::numbers::pi / 180.0;
        const double length = radius * std::abs(angle);
        const int n = static_cast<int>(std::ceil(length));
        const double dtheta = angle / n;
        for (int i = 0; i < n; ++i) {
            heading_ += dtheta / 2;
            advance(2.0 * radius * std::sin(std::abs(dtheta) / 2));
            heading_ += dtheta / 2;
        }
        return *this;
    }
    Polyline build() const { return Polyline(points_); }

private:
    void advance(double step) {
        x_ += step * std::cos(heading_);
        y_ += step * std::sin(heading_);
        points_.push_back({x_, y_});
    }
    double x_ = 0.0, y_ = 0.0, heading_ = 0.0;
    std::vector<std::array<double, 2>> points_{{0.0, 0.0}};
};

constexpr double kLane = 3.5;

RouteLayout make_env1() {
    // One-way road with four lanes; the AVUT moves from the leftmost lane to the
    // rightmost one in two lane changes.
    RouteLayout l;
    l.id = LayoutId::Env1;
    l.reference = PathBuilder().straight(220.0).build();
    l.start_offset = 1.5 * kLane;
    l.route_shifts = {{50.0, 70.0, -kLane}, {110.0, 135.0, -2.0 * kLane}};
    l.edges = {{0.0, 2.0 * kLane, -2.0 * kLane}};
    return l;
}

RouteLayout make_env2() {
    // Two-way road, one lane per direction, gentle left bend; AVUT keeps its lane.
    RouteLayout l;
    l.id = LayoutId::Env2;
    l.reference = PathBuilder().straight(40.0).arc(60.0, 60.0).straight(60.0).build();
    l.start_offset = 0.0;
    l.edges = {{0.0, 1.5 * kLane, -0.5 * kLane}};
    return l;
}

RouteLayout make_env3() {
    // Two-way road that becomes a one-way road with two lanes after a right
    // turn. A slow sedan in the right lane merges left into the AVUT's lane.
    RouteLayout l;
    l.id = LayoutId::Env3;
    l.reference = PathBuilder().straight(80.0).arc(40.0, -90.0).straight(60.0).build();
    l.start_offset = 0.0;
    l.edges = {{0.0, 1.5 * kLane, -0.5 * kLane}, {80.0, 1.5 * kLane, -1.5 * kLane}};
    l.traffic = ScriptedVehicle{90.0, -kLane, 4.0, 6.0, kLane};
    return l;
}

RouteLayout make_env4() {
    // Four-lane two-way road; the AVUT drives in the right lane of its direction.
    // A sedan ahead in the same lane moves over to the left lane.
    RouteLayout l;
    l.id = LayoutId::Env4;
    l.reference = PathBuilder().straight(60.0).arc(80.0, 45.0).straight(80.0).build();
    l.start_offset = -1.5 * kLane;
    l.edges = {{0.0, 2.0 * kLane, -2.0 * kLane}};
    l.traffic = ScriptedVehicle{25.0, -1.5 * kLane, 8.0, 2.0, kLane};
    return l;
}

}  // namespace

double RouteLayout::route_offset(double s) const noexcept {
    double d = start_offset;
    for (const auto& shift : route_shifts) d += shift.delta * cosine_ramp((s - shift.s_begin) / (shift.s_end - shift.s_begin));
    return d;
}

RoadEdges RouteLayout::edges_at(double s) const noexcept {
    RoadEdges e = edges.front();
    for (const auto& seg : edges)
        if (s >= seg.s_begin) e = seg;
    return e;
}

std::string_view layout_name(LayoutId id) noexcept {
    switch (id) {
        case LayoutId::Env1: return "env1";
        case LayoutId::Env2: return "env2";
        case LayoutId::Env3: return "env3";
        case LayoutId::Env4: return "env4";
    }
    return "?";
}

LayoutId parse_layout(std::string_view name) {
    for (auto id : all_layouts())
        if (layout_name(id) == name) return id;
    throw InputError("unknown layout '" + std::string(name) + "' (expected env1..env4)");
}

std::array<LayoutId, 4> all_layouts() noexcept { return {LayoutId::Env1, LayoutId::Env2, LayoutId::Env3, LayoutId::Env4}; }

const RouteLayout& layout(LayoutId id) {
    static const std::array<RouteLayout, 4> layouts{make_env1(), make_env2(), make_env3(), make_env4()};
    return layouts.at(static_cast<std::size_t>(id));
}

}  // namespace episcen
