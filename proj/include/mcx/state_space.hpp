#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mcx {

/// Ordered set of opaque state labels with a dense integer index.
class StateSpace {
public:
    StateSpace() = default;
    explicit StateSpace(std::vector<std::string> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string& label(std::size_t id) const { return labels_.at(id); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    std::optional<int> find(const std::string& label) const;
    int index(const std::string& label) const;  // throws if absent
    bool contains(const std::string& label) const { return find(label).has_value(); }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

using SpacePtr = std::shared_ptr<const StateSpace>;

inline SpacePtr make_space(std::vector<std::string> labels) {
    return std::make_shared<const StateSpace>(std::move(labels));
}

}  // namespace mcx
