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

// Deterministic 2D kinematic driving simulator. An episode places a pedestrian
// and an NPC vehicle around the AVUT according to a ScenarioGenome, sets the
// weather, and drives the AVUT along one of four route layouts with a simple
// perception-and-brake controller.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "episcen/scenario.hpp"

namespace episcen {

inline constexpr std::size_t kFeatureCount = 16;
using FeatureVector = std::array<double, kFeatureCount>;

enum class LayoutId { Env1 = 0, Env2 = 1, Env3 = 2, Env4 = 3 };

std::string_view layout_name(LayoutId id) noexcept;
/// Parses "env1".."env4"; throws InputError otherwise.
LayoutId parse_layout(std::string_view name);
std::array<LayoutId, 4> all_layouts() noexcept;

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Piecewise-linear reference line with arc-length parameterisation.
/// Poses are extrapolated linearly before the start and past the end.
class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<std::array<double, 2>> points);

    double length() const noexcept { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    Pose pose_at(double s) const;
    /// Frenet coordinates (s, d) of a world point; d is positive to the left.
    std::array<double, 2> project(double x, double y) const;
    /// World point at arc length s and signed lateral offset d.
    std::array<double, 2> to_world(double s, double d) const;

private:
    std::vector<std::array<double, 2>> points_;
    std::vector<double> cumulative_;
};

/// Lateral route shift (lane change) ramped with a cosine profile over [s_begin, s_end].
struct LaneShift {
    double s_begin;
    double s_end;
    double delta;
};

struct RoadEdges {
    double s_begin;
    double left;    // signed offset of the left edge (positive)
    double right;   // signed offset of the right edge (negative)
};

/// Pre-existing traffic: a vehicle on the reference line that changes lanes
/// at a scripted time and otherwise keeps a safe gap.
struct ScriptedVehicle {
    double s0;
    double d0;
    double speed;
    double change_start;
    double change_delta;
};

struct RouteLayout {
    LayoutId id = LayoutId::Env1;
    Polyline reference;
    double start_offset = 0.0;
    std::vector<LaneShift> route_shifts;
    std::vector<RoadEdges> edges;   // sorted by s_begin, first at 0
    std::optional<ScriptedVehicle> traffic;
    double lane_width = 3.5;

    double route_length() const noexcept { return reference.length(); }
    /// Lateral offset of the AVUT's planned lane at arc length s.
    double route_offset(double s) const noexcept;
    RoadEdges edges_at(double s) const noexcept;
};

const RouteLayout& layout(LayoutId id);

/// Every tunable constant of the simulator.
struct SimConfig {
    double dt = 0.1;
    double horizon = 60.0;

    double cruise_speed = 8.0;
    double av_accel = 2.0;
    double brake_decel = 6.0;
    double brake_gap = 8.0;
    double prediction_horizon = 1.5;
    double corridor_margin = 0.3;

    double detection_base = 40.0;
    double fog_attenuation = 0.8;
    double light_at_midnight = 0.6;
    /// Relative amplitude of per-step uniform noise on the detection range; 0 = deterministic.
    double detection_noise = 0.0;

    double npc_speed = 10.0;
    double npc_gap = 6.0;
    double npc_decel = 4.0;
    double npc_accel = 2.0;
    double lane_change_duration = 4.0;

    double vehicle_collision = 2.0;
    double pedestrian_collision = 1.0;
    double av_half_width = 1.0;
    double collision_push = 1.5;

    double penalty_ped = 0.50;
    double penalty_npc = 0.60;
    double penalty_static = 0.65;

    /// Stochastic-episode preset: detection noise enabled.
    static SimConfig stochastic(double noise = 0.1);
};

/// Detection range for the given weather, before noise.
double detection_range(const SimConfig& cfg, double sun_altitude, double fog_density);

struct ActorState {
    bool present = false;
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    /// Signed offset from the AVUT's planned lane centre.
    double lateral_offset = 0.0;
    /// Lane index relative to the AVUT's planned lane (positive = left).
    int lane = 0;
    /// Clearance to the AVUT: centre distance minus collision radius, floored at 0.
    double distance = 0.0;
};

struct EnvState {
    double t = 0.0;
    double av_x = 0.0;
    double av_y = 0.0;
    double av_heading = 0.0;
    double av_speed = 0.0;
    double av_progress = 0.0;   // arc length travelled along the route
    double av_lateral = 0.0;    // deviation from the planned lane (collision push)
    ActorState ped;
    ActorState npc;
    ActorState traffic;
    double sun_altitude = 0.0;
    double fog_density = 0.0;
    double static_clearance = 0.0;
    double detection_range = 0.0;

    /// Smallest clearance to any present object.
    double min_object_distance() const noexcept;
};

struct InfractionCounts {
    int ped = 0;
    int npc = 0;
    int stat = 0;
    friend bool operator==(const InfractionCounts&, const InfractionCounts&) = default;
};

struct Metrics {
    double md = 0.0;
    int co = 0;
    double rc = 0.0;
    double is = 1.0;
    double ds = 0.0;
    InfractionCounts infractions;
    bool goal_reached = false;
};

struct SimOutcome {
    LayoutId layout = LayoutId::Env1;
    double route_length = 0.0;
    std::vector<EnvState> trace;
    Metrics metrics;
    FeatureVector features{};
};

/// Product of penalty coefficients raised to the infraction counts.
double infraction_score(const InfractionCounts& counts, const SimConfig& cfg = {});

/// Re-derive every metric from a trace. A contact with an object type is a
/// state whose clearance to that type is 0; each type counts at most once.
Metrics derive_metrics(std::span<const EnvState> trace, double route_length, const SimConfig& cfg = {});

/// Run one episode. Throws InputError on an invalid genome.
SimOutcome run_episode(const RouteLayout& layout, const ScenarioGenome& genome, std::uint64_t seed,
                       const SimConfig& cfg = {});

/// Fitness = minimum distance between the AVUT and any object over the trace.
double fitness(const SimOutcome& outcome);

/// Fixed-length summary of a state in the AVUT frame, every entry in [-1, 1].
FeatureVector featurize(const EnvState& state);

}  // namespace episcen
