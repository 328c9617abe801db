#pragma once

#include "mcx/kernel.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace mcx {

/// {"states": [...], "triplets": [[i, j, p], ...], "pi": [...], "reversible": b, "half_lazy": b}
nlohmann::json kernel_to_json(const Kernel& k);

/// Flags missing from the document are inferred from the residuals.
Kernel kernel_from_json(const nlohmann::json& doc);

/// Reads "i j weight" lines ('#' starts a comment) as symmetric conductances and
/// returns the half-lazy walk P(x,y) = w(x,y) / (2 W(x)) with pi proportional to
/// W(x) = sum_y w(x,y). State labels are the tokens as written.
Kernel kernel_from_edge_list(std::istream& in);

/// Dispatches on extension: ".json" or anything else as an edge list.
Kernel load_kernel(const std::string& path);

}  // namespace mcx
