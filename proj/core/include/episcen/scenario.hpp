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

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "episcen/rng.hpp"

namespace episcen {

inline constexpr std::size_t kGeneCount = 10;

/// Gene positions. The order is fixed and shared by every report and by the
/// embedding table of the epigenetic model.
enum class Gene : std::size_t {
    NpcLon = 0,
    NpcLat = 1,
    NpcBehavior = 2,
    PedLon = 3,
    PedLat = 4,
    PedOrientX = 5,
    PedOrientY = 6,
    PedSpeed = 7,
    SunAltitude = 8,
    FogDensity = 9,
};

constexpr std::size_t idx(Gene g) noexcept { return static_cast<std::size_t>(g); }

/// Initial behavior of the NPC vehicle; stored in the genome as its integer code.
enum class NpcBehavior : int { KeepLane = 0, ChangeRight = 1, ChangeLeft = 2 };

inline constexpr double kMinNpcDistance = 5.0;

struct GeneSpec {
    enum class Kind { Numeric, Categorical };

    std::size_t index;
    Kind kind;
    double lo;     // numeric bounds; [0, arity - 1] for categorical
    double hi;
    int arity;     // 0 for numeric
    std::string_view name;

    bool is_categorical() const noexcept { return kind == Kind::Categorical; }
};

/// The ten gene specs, indexed by Gene.
std::span<const GeneSpec, kGeneCount> gene_specs() noexcept;

/// Canonical parameter names, in gene order.
std::array<std::string_view, kGeneCount> encode_names() noexcept;

/// Scenario test input: 9 numeric genes plus the categorical NPC behavior.
/// Values are stored positionally so that genetic operators can treat every
/// gene uniformly; the categorical gene holds an exact integer code.
struct ScenarioGenome {
    std::array<double, kGeneCount> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](Gene g) { return values[idx(g)]; }
    double operator[](Gene g) const { return values[idx(g)]; }

    double npc_lon() const { return values[idx(Gene::NpcLon)]; }
    double npc_lat() const { return values[idx(Gene::NpcLat)]; }
    NpcBehavior npc_behavior() const { return static_cast<NpcBehavior>(static_cast<int>(values[idx(Gene::NpcBehavior)])); }
    double ped_lon() const { return values[idx(Gene::PedLon)]; }
    double ped_lat() const { return values[idx(Gene::PedLat)]; }
    double ped_orient_x() const { return values[idx(Gene::PedOrientX)]; }
    double ped_orient_y() const { return values[idx(Gene::PedOrientY)]; }
    double ped_speed() const { return values[idx(Gene::PedSpeed)]; }
    double sun_altitude() const { return values[idx(Gene::SunAltitude)]; }
    double fog_density() const { return values[idx(Gene::FogDensity)]; }

    friend bool operator==(const ScenarioGenome&, const ScenarioGenome&) = default;
};

/// Uniform draw of one gene from its spec (uniform over categories for the
/// categorical gene). Does not look at the NPC distance constraint.
double sample_gene(const GeneSpec& spec, Rng& rng);

/// Uniform genome honoring every invariant; the NPC pair is rejection-resampled.
ScenarioGenome sample_uniform(Rng& rng);

/// Clamp numeric genes to their bounds and project the NPC offset radially
/// onto the 5 m circle when it lies inside it. Idempotent.
ScenarioGenome clamp_repair(const ScenarioGenome& genome);

/// Empty string if valid, otherwise a description of the first violated invariant.
std::string check_invariants(const ScenarioGenome& genome);

/// Throws InputError on any invariant violation.
void validate(const ScenarioGenome& genome);

/// Gene values mapped to [0, 1] by their spec ranges.
std::array<double, kGeneCount> scale_unit(const ScenarioGenome& genome);

std::string_view behavior_name(NpcBehavior b) noexcept;

}  // namespace episcen
