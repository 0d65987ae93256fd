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

#include "episcen/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "episcen/errors.hpp"

namespace episcen {

namespace {

using K = GeneSpec::Kind;

constexpr std::array<GeneSpec, kGeneCount> kSpecs{{
    {0, K::Numeric, -20.0, 20.0, 0, "dis_lo_npc"},
    {1, K::Numeric, -20.0, 20.0, 0, "dis_la_npc"},
    {2, K::Categorical, 0.0, 2.0, 3, "behavior_npc"},
    {3, K::Numeric, -10.0, 10.0, 0, "dis_lo_ped"},
    {4, K::Numeric, -10.0, 10.0, 0, "dis_la_ped"},
    {5, K::Numeric, -1.0, 1.0, 0, "o_x_ped"},
    {6, K::Numeric, -1.0, 1.0, 0, "o_y_ped"},
    {7, K::Numeric, 0.94, 1.43, 0, "v_ped"},
    {8, K::Numeric, -90.0, 90.0, 0, "angle_sun"},
    {9, K::Numeric, 0.0, 100.0, 0, "density_fog"},
}};

constexpr int kMaxNpcAttempts = 10000;

double npc_distance(const ScenarioGenome& g) { return std::hypot(g.npc_lon(), g.npc_lat()); }

}  // namespace

std::span<const GeneSpec, kGeneCount> gene_specs() noexcept { return kSpecs; }

std::array<std::string_view, kGeneCount> encode_names() noexcept {
    std::array<std::string_view, kGeneCount> names;
    for (std::size_t i = 0; i < kGeneCount; ++i) names[i] = kSpecs[i].name;
    return names;
}

double sample_gene(const GeneSpec& spec, Rng& rng) {
    if (spec.is_categorical()) return static_cast<double>(rng.index(static_cast<std::size_t>(spec.arity)));
    return rng.uniform(spec.lo, spec.hi);
}

ScenarioGenome sample_uniform(Rng& rng) {
    ScenarioGenome g;
    for (const auto& spec : kSpecs) g[spec.index] = sample_gene(spec, rng);
    for (int attempt = 0; npc_distance(g) < kMinNpcDistance; ++attempt) {
        if (attempt >= kMaxNpcAttempts) throw InternalError("sample_uniform: NPC placement rejection loop exhausted");
        g[Gene::NpcLon] = sample_gene(kSpecs[idx(Gene::NpcLon)], rng);
        g[Gene::NpcLat] = sample_gene(kSpecs[idx(Gene::NpcLat)], rng);
    }
    return g;
}

ScenarioGenome clamp_repair(const ScenarioGenome& genome) {
    ScenarioGenome g = genome;
    for (const auto& spec : kSpecs) {
        if (spec.is_categorical()) continue;
        g[spec.index] = std::clamp(g[spec.index], spec.lo, spec.hi);
    }
    const double r = npc_distance(g);
    if (r < kMinNpcDistance) {
        if (r == 0.0) {
            // No direction to project along; place the NPC straight ahead.
            g[Gene::NpcLon] = kMinNpcDistance;
            g[Gene::NpcLat] = 0.0;
        } else {
            const double lon = g[Gene::NpcLon];
            const double lat = g[Gene::NpcLat];
            double scale = kMinNpcDistance / r;
            // Rounding can leave the projected point a few ulps inside the radius.
            do {
                g[Gene::NpcLon] = lon * scale;
                g[Gene::NpcLat] = lat * scale;
                scale = std::nextafter(scale, std::numeric_limits<double>::infinity());
            } while (npc_distance(g) < kMinNpcDistance);
        }
    }
    return g;
}

std::string check_invariants(const ScenarioGenome& g) {
    std::ostringstream msg;
    for (const auto& spec : kSpecs) {
        const double v = g[spec.index];
        if (!std::isfinite(v)) {
            msg << spec.name << " is not finite";
            return msg.str();
        }
        if (v < spec.lo || v > spec.hi) {
            msg << spec.name << "=" << v << " outside [" << spec.lo << ", " << spec.hi << "]";
            return msg.str();
        }
        if (spec.is_categorical() && v != std::floor(v)) {
            msg << spec.name << "=" << v << " is not an integer category code";
            return msg.str();
        }
    }
    if (npc_distance(g) < kMinNpcDistance) {
        msg << "NPC initial distance " << npc_distance(g) << " m is below " << kMinNpcDistance << " m";
        return msg.str();
    }
    return {};
}

void validate(const ScenarioGenome& genome) {
    if (auto err = check_invariants(genome); !err.empty()) throw InputError("invalid genome: " + err);
}

std::array<double, kGeneCount> scale_unit(const ScenarioGenome& genome) {
    std::array<double, kGeneCount> out;
    for (const auto& spec : kSpecs) out[spec.index] = (genome[spec.index] - spec.lo) / (spec.hi - spec.lo);
    return out;
}

std::string_view behavior_name(NpcBehavior b) noexcept {
    switch (b) {
        case NpcBehavior::KeepLane: return "KeepLane";
        case NpcBehavior::ChangeRight: return "ChangeRight";
        case NpcBehavior::ChangeLeft: return "ChangeLeft";
    }
    return "?";
}

}  // namespace episcen
