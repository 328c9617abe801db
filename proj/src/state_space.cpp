#include "mcx/state_space.hpp"

#include "mcx/error.hpp"

namespace mcx {

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    index_.reserve(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        auto [it, inserted] = index_.emplace(labels_[i], static_cast<int>(i));
        require(inserted, ErrorKind::parameter, "duplicate state label '" + labels_[i] + "'");
    }
}

std::optional<int> StateSpace::find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int StateSpace::index(const std::string& label) const {
    auto id = find(label);
    require(id.has_value(), ErrorKind::dimension, "unknown state label '" + label + "'");
    return *id;
}

}  // namespace mcx
