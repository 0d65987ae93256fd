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
#include "episcen/rng.hpp"
#include "episcen/simenv.hpp"

namespace episcen {

SimConfig SimConfig::stochastic(double noise) {
    SimConfig cfg;
    cfg.detection_noise = noise;
    return cfg;
}

double detection_range(const SimConfig& cfg, double sun_altitude, double fog_density) {
    const double fog = std::clamp(fog_density, 0.0, 100.0);
    const double sun = std::clamp(sun_altitude, -90.0, 90.0);
    const double light = cfg.light_at_midnight + (1.0 - cfg.light_at_midnight) * (sun + 90.0) / 180.0;
    return cfg.detection_base * (1.0 - cfg.fog_attenuation * fog / 100.0) * light;
}

double EnvState::min_object_distance() const noexcept {
    double d = std::numeric_limits<double>::infinity();
    for (const ActorState* a : {&ped, &npc, &traffic})
        if (a->present) d = std::min(d, a->distance);
    return d;
}

double infraction_score(const InfractionCounts& counts, const SimConfig& cfg) {
    return std::pow(cfg.penalty_ped, counts.ped) * std::pow(cfg.penalty_npc, counts.npc) *
           std::pow(cfg.penalty_static, counts.stat);
}

Metrics derive_metrics(std::span<const EnvState> trace, double route_length, const SimConfig& cfg) {
    if (trace.empty()) throw InputError("derive_metrics: empty trace");
    if (!(route_length > 0.0)) throw InputError("derive_metrics: route length must be positive");
    Metrics m;
    m.md = std::numeric_limits<double>::infinity();
    for (const auto& s : trace) {
        m.md = std::min(m.md, s.min_object_distance());
        if (s.ped.present && s.ped.distance == 0.0) m.infractions.ped = 1;
        if ((s.npc.present && s.npc.distance == 0.0) || (s.traffic.present && s.traffic.distance == 0.0))
            m.infractions.npc = 1;
        if (s.static_clearance == 0.0) m.infractions.stat = 1;
    }
    m.co = (m.infractions.ped + m.infractions.npc) > 0 ? 1 : 0;
    const double progress = trace.back().av_progress;
    m.goal_reached = progress >= route_length;
    m.rc = m.goal_reached ? 100.0 : std::clamp(100.0 * progress / route_length, 0.0, 100.0);
    m.is = infraction_score(m.infractions, cfg);
    m.ds = m.rc * m.is;
    return m;
}

double fitness(const SimOutcome& outcome) {
    if (outcome.trace.empty()) throw InputError("fitness: empty trace");
    double md = std::numeric_limits<double>::infinity();
    for (const auto& s : outcome.trace) md = std::min(md, s.min_object_distance());
    return md;
}

namespace {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Position/velocity of v relative to an observer with the given heading: x forward, y left.
Vec2 in_frame(Vec2 v, double heading) {
    const double c = std::cos(heading), s = std::sin(heading);
    return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

double ramp(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * u));
}

double ramp_rate(double u, double duration) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 0.5 * std::numbers::pi * std::sin(std::numbers::pi * u) / duration;
}

/// Vehicle moving along the reference line with a scripted lateral manoeuvre.
struct LaneVehicle {
    double s = 0.0;
    double d0 = 0.0;
    double speed = 0.0;
    double cruise = 0.0;
    double change_start = 0.0;
    double change_delta = 0.0;

    double d(double t, double duration) const { return d0 + change_delta * ramp((t - change_start) / duration); }

    Vec2 position(const Polyline& ref, double t, double duration) const {
        auto p = ref.to_world(s, d(t, duration));
        return {p[0], p[1]};
    }

    Vec2 velocity(const Polyline& ref, double t, double duration) const {
        const double h = ref.pose_at(s).heading;
        const double lat = change_delta * ramp_rate((t - change_start) / duration, duration);
        return {speed * std::cos(h) - lat * std::sin(h), speed * std::sin(h) + lat * std::cos(h)};
    }
};

struct Body {
    Vec2 p;
    Vec2 v;
};

class Episode {
public:
    Episode(const RouteLayout& layout, const ScenarioGenome& g, std::uint64_t seed, const SimConfig& cfg)
        : layout_(layout), cfg_(cfg), rng_(derive_seed(seed, {0xd17eULL})), sun_(g.sun_altitude()), fog_(g.fog_density()) {
        av_speed_ = cfg.cruise_speed;
        base_range_ = detection_range(cfg, sun_, fog_);

        const Pose start = layout.reference.pose_at(0.0);
        const auto origin = layout.reference.to_world(0.0, layout.route_offset(0.0));
        const Vec2 fwd{std::cos(start.heading), std::sin(start.heading)};
        const Vec2 right{std::sin(start.heading), -std::cos(start.heading)};

        ped_.p = Vec2{origin[0], origin[1]} + g.ped_lon() * fwd + g.ped_lat() * right;
        const double ox = g.ped_orient_x(), oy = g.ped_orient_y();
        const double olen = std::hypot(ox, oy);
        // A zero orientation carries no direction; walk along +x (the route heading).
        ped_.v = olen > 1e-12 ? (g.ped_speed() / olen) * (ox * fwd + oy * right) : g.ped_speed() * fwd;

        npc_.s = g.npc_lon();
        npc_.d0 = layout.route_offset(0.0) - g.npc_lat();
        npc_.cruise = npc_.speed = cfg.npc_speed;
        switch (g.npc_behavior()) {
            case NpcBehavior::KeepLane: break;
            case NpcBehavior::ChangeLeft: npc_.change_delta = layout.lane_width; break;
            case NpcBehavior::ChangeRight: npc_.change_delta = -layout.lane_width; break;
        }

        if (layout.traffic) {
            const auto& tv = *layout.traffic;
            traffic_ = LaneVehicle{tv.s0, tv.d0, tv.speed, tv.speed, tv.change_start, tv.change_delta};
        }
    }

    SimOutcome run() {
        SimOutcome out;
        out.layout = layout_.id;
        out.route_length = layout_.route_length();
        const auto steps = static_cast<long>(std::llround(cfg_.horizon / cfg_.dt));
        out.trace.reserve(static_cast<std::size_t>(steps) + 1);
        out.trace.push_back(snapshot(0.0, base_range_));
        for (long k = 1; k <= steps; ++k) {
            const double t_prev = static_cast<double>(k - 1) * cfg_.dt;
            const double t = static_cast<double>(k) * cfg_.dt;
            const double range = noisy_range();
            step(t_prev, range);
            out.trace.push_back(snapshot(t, range));
            if (av_s_ >= layout_.route_length()) break;
            // Contacts are recorded before the push moves the AVUT away.
            apply_push(npc(t), t);
            if (traffic_) apply_push(traffic(t), t);
        }
        out.metrics = derive_metrics(out.trace, out.route_length, cfg_);
        out.features = featurize(out.trace.front());
        return out;
    }

private:
    double noisy_range() {
        if (cfg_.detection_noise <= 0.0) return base_range_;
        return base_range_ * (1.0 + cfg_.detection_noise * (2.0 * rng_.uniform() - 1.0));
    }

    double av_d() const { return layout_.route_offset(av_s_) + av_push_; }

    Body av(double) const {
        const auto p = layout_.reference.to_world(av_s_, av_d());
        const double h = layout_.reference.pose_at(av_s_).heading;
        return {{p[0], p[1]}, {av_speed_ * std::cos(h), av_speed_ * std::sin(h)}};
    }
    Body npc(double t) const {
        return {npc_.position(layout_.reference, t, cfg_.lane_change_duration),
                npc_.velocity(layout_.reference, t, cfg_.lane_change_duration)};
    }
    Body traffic(double t) const {
        return {traffic_->position(layout_.reference, t, cfg_.lane_change_duration),
                traffic_->velocity(layout_.reference, t, cfg_.lane_change_duration)};
    }

    // True if `other` is predicted to enter the corridor ahead of `self` within `gap`.
    bool threat_ahead(const Body& self, double heading, const Body& other, double gap, double half_width) const {
        const Vec2 rel = in_frame(other.p - self.p, heading);
        const Vec2 relv = in_frame(other.v - self.v, heading);
        for (double tau = 0.0; tau <= cfg_.prediction_horizon + 1e-9; tau += cfg_.dt) {
            const double x = rel.x + relv.x * tau;
            const double y = rel.y + relv.y * tau;
            if (x > 0.0 && x < gap && std::abs(y) < half_width) return true;
        }
        return false;
    }

    bool av_should_brake(double t, double range) const {
        const Body self = av(t);
        const double heading = layout_.reference.pose_at(av_s_).heading;
        auto check = [&](const Body& other, double radius) {
            if (norm(other.p - self.p) > range) return false;
            return threat_ahead(self, heading, other, cfg_.brake_gap, radius + cfg_.corridor_margin);
        };
        if (check(ped_, cfg_.pedestrian_collision)) return true;
        if (check(npc(t), cfg_.vehicle_collision)) return true;
        if (traffic_ && check(traffic(t), cfg_.vehicle_collision)) return true;
        return false;
    }

    // Vehicles keep a gap to anything in their own corridor; they see perfectly.
    bool vehicle_should_yield(const LaneVehicle& v, const Body& self, double t, bool is_npc) const {
        const double heading = layout_.reference.pose_at(v.s).heading;
        const double hw = cfg_.vehicle_collision;
        // Without a prediction window these checks use the current positions only.
        auto blocked = [&](const Body& other, double half_width) {
            const Vec2 rel = in_frame(other.p - self.p, heading);
            return rel.x > 0.0 && rel.x < cfg_.npc_gap && std::abs(rel.y) < half_width;
        };
        if (blocked(av(t), hw)) return true;
        if (blocked(ped_, cfg_.pedestrian_collision)) return true;
        if (is_npc && traffic_ && blocked(traffic(t), hw)) return true;
        if (!is_npc && blocked(npc(t), hw)) return true;
        return false;
    }

    void update_vehicle(LaneVehicle& v, double t, bool is_npc) {
        const Body self = {v.position(layout_.reference, t, cfg_.lane_change_duration),
                           v.velocity(layout_.reference, t, cfg_.lane_change_duration)};
        if (vehicle_should_yield(v, self, t, is_npc))
            v.speed = std::max(0.0, v.speed - cfg_.npc_decel * cfg_.dt);
        else
            v.speed = std::min(v.cruise, v.speed + cfg_.npc_accel * cfg_.dt);
    }

    void step(double t_prev, double range) {
        // Decisions use the state at t_prev; all actors then move simultaneously.
        const bool brake = av_should_brake(t_prev, range);
        update_vehicle(npc_, t_prev, true);
        if (traffic_) update_vehicle(*traffic_, t_prev, false);

        if (brake)
            av_speed_ = std::max(0.0, av_speed_ - cfg_.brake_decel * cfg_.dt);
        else
            av_speed_ = std::min(cfg_.cruise_speed, av_speed_ + cfg_.av_accel * cfg_.dt);
        av_s_ += av_speed_ * cfg_.dt;
        ped_.p = ped_.p + cfg_.dt * ped_.v;
        npc_.s += npc_.speed * cfg_.dt;
        if (traffic_) traffic_->s += traffic_->speed * cfg_.dt;
    }

    // First vehicle contact shoves the AVUT sideways, away from the other vehicle.
    void apply_push(const Body& other, double t) {
        if (pushed_) return;
        const Body self = av(t);
        if (norm(other.p - self.p) > cfg_.vehicle_collision) return;
        const double heading = layout_.reference.pose_at(av_s_).heading;
        const double side = in_frame(other.p - self.p, heading).y;
        av_push_ += side >= 0.0 ? -cfg_.collision_push : cfg_.collision_push;
        pushed_ = true;
    }

    ActorState actor_state(const Body& b, const Body& self, double radius,
                           std::optional<std::array<double, 2>> frenet = std::nullopt) const {
        ActorState a;
        a.present = true;
        a.x = b.p.x;
        a.y = b.p.y;
        a.vx = b.v.x;
        a.vy = b.v.y;
        const auto sd = frenet ? *frenet : layout_.reference.project(b.p.x, b.p.y);
        a.lateral_offset = sd[1] - layout_.route_offset(sd[0]);
        a.lane = static_cast<int>(std::lround(a.lateral_offset / layout_.lane_width));
        a.distance = std::max(0.0, norm(b.p - self.p) - radius);
        return a;
    }

    EnvState snapshot(double t, double range) const {
        EnvState s;
        const Body self = av(t);
        s.t = t;
        s.av_x = self.p.x;
        s.av_y = self.p.y;
        s.av_heading = layout_.reference.pose_at(av_s_).heading;
        s.av_speed = av_speed_;
        s.av_progress = av_s_;
        s.av_lateral = av_push_;
        s.ped = actor_state(ped_, self, cfg_.pedestrian_collision);
        const double dur = cfg_.lane_change_duration;
        s.npc = actor_state(npc(t), self, cfg_.vehicle_collision, std::array{npc_.s, npc_.d(t, dur)});
        if (traffic_)
            s.traffic = actor_state(traffic(t), self, cfg_.vehicle_collision, std::array{traffic_->s, traffic_->d(t, dur)});
        s.sun_altitude = sun_;
        s.fog_density = fog_;
        const RoadEdges e = layout_.edges_at(av_s_);
        const double d = av_d();
        s.static_clearance = std::max(0.0, std::min(e.left - (d + cfg_.av_half_width), (d - cfg_.av_half_width) - e.right));
        s.detection_range = range;
        return s;
    }

    const RouteLayout& layout_;
    SimConfig cfg_;
    Rng rng_;
    double sun_;
    double fog_;
    double base_range_ = 0.0;

    double av_s_ = 0.0;
    double av_speed_ = 0.0;
    double av_push_ = 0.0;
    bool pushed_ = false;
    Body ped_;
    LaneVehicle npc_;
    std::optional<LaneVehicle> traffic_;
};

}  // namespace

SimOutcome run_episode(const RouteLayout& layout, const ScenarioGenome& genome, std::uint64_t seed, const SimConfig& cfg) {
    validate(genome);
    if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) throw InputError("run_episode: dt and horizon must be positive");
    return Episode(layout, genome, seed, cfg).run();
}

FeatureVector featurize(const EnvState& s) {
    constexpr double kLaneWidth = 3.5;
    FeatureVector f{};
    const double h = s.av_heading;
    const Vec2 av_p{s.av_x, s.av_y};
    const Vec2 av_v{s.av_speed * std::cos(h), s.av_speed * std::sin(h)};
    auto rel = [&](const ActorState& a, std::size_t at, double pos_scale) {
        if (!a.present) return;
        const Vec2 p = in_frame(Vec2{a.x, a.y} - av_p, h);
        const Vec2 v = in_frame(Vec2{a.vx, a.vy} - av_v, h);
        f[at] = p.x / pos_scale;
        f[at + 1] = p.y / pos_scale;
        f[at + 2] = v.x / 20.0;
        f[at + 3] = v.y / 20.0;
    };
    rel(s.ped, 0, 20.0);
    rel(s.npc, 4, 40.0);
    f[8] = s.av_speed / 20.0;
    f[9] = s.sun_altitude / 90.0;
    f[10] = s.fog_density / 100.0;
    f[11] = s.av_lateral / (2.0 * kLaneWidth);
    f[12] = s.ped.present ? s.ped.lateral_offset / (4.0 * kLaneWidth) : 0.0;
    f[13] = s.npc.present ? s.npc.lateral_offset / (4.0 * kLaneWidth) : 0.0;
    if (s.traffic.present) {
        const Vec2 p = in_frame(Vec2{s.traffic.x, s.traffic.y} - av_p, h);
        f[14] = p.x / 40.0;
        f[15] = p.y / 40.0;
    }
    for (auto& v : f) v = std::clamp(v, -1.0, 1.0);
    return f;
}

}  // namespace episcen
