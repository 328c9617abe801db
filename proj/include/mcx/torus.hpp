#pragma once

#include "mcx/kernel.hpp"
#include "mcx/scheme.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mcx {

enum class TorusVariant { holes, bottleneck };

struct TorusInstance {
    int side = 0;
    TorusVariant variant = TorusVariant::holes;
    std::vector<std::pair<int, int>> removed;
};

/// True when no two removed vertices lie in a common unit square, i.e. every
/// pair is at torus Chebyshev distance at least 2.
bool holes_admissible(int side, const std::vector<std::pair<int, int>>& holes);

/// Validated holes instance; throws invalid_scheme for square-sharing holes.
TorusInstance holes_instance(int side, std::vector<std::pair<int, int>> holes);

/// Removed set {(i,i)} and {(i, i + side/2)} for i = 1 .. side-1.
TorusInstance bottleneck_instance(int side);

/// Parses "i,j;i,j;..." into coordinates.
std::vector<std::pair<int, int>> parse_holes(const std::string& text);

struct TorusChains {
    Kernel k;  // half-lazy SRW on the full torus
    Kernel q;  // Metropolized restriction to the kept vertices
};

TorusChains torus_chains(const TorusInstance& t);

/// Uniform measures on the four neighbours of each hole; single-edge flows for
/// adjacent pairs, the two-step corner path for diagonal pairs, and the two
/// four-step detours (weight 1/2 each) for pairs opposite across a hole.
ExtensionScheme holes_scheme(const TorusInstance& t, const TorusChains& chains);

/// Same measures; every required pair routed along the lexicographically
/// smallest shortest path in the restricted graph.
ExtensionScheme bottleneck_scheme(const TorusInstance& t, const TorusChains& chains);

struct HolesAudit {
    /// Largest number of paths of each case through a single ordered edge.
    int max_paths[3] = {0, 0, 0};
    /// Largest exact per-case bracket contribution on a single ordered edge.
    Rational max_case_load[3] = {Rational(0), Rational(0), Rational(0)};
    Rational max_bracket{0};
};

/// Recounts the holes construction per case, independently of the merged flows.
HolesAudit audit_holes(const TorusInstance& t, const TorusChains& chains);

}  // namespace mcx
