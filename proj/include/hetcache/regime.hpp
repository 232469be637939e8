#pragma once

namespace hetcache {

// Per-timestep compute mode.
enum class Regime { FullCompute, PartialCompute, Reuse };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::FullCompute: return "full";
        case Regime::PartialCompute: return "partial";
        case Regime::Reuse: return "reuse";
    }
    return "?";
}

}  // namespace hetcache
