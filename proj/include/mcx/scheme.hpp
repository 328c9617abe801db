#pragma once

#include "mcx/kernel.hpp"
#include "mcx/rational.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mcx {

enum class FormMode { dirichlet, f_form };

std::string to_string(FormMode mode);

struct MeasureEntry {
    int state;  // inner index
    Rational weight;
};

struct CouplingEntry {
    int a;  // inner index, marginal of the first endpoint
    int b;  // inner index, marginal of the second endpoint
    Rational weight;
};

/// Weighted paths between pairs of inner states, stored compactly.
///
/// Paths are added in any order; finalize() groups them by (first, last) state,
/// merges identical paths and makes lookups available.
class FlowTable {
public:
    struct PathView {
        std::span<const int> states;
        Rational weight;
        std::size_t steps() const { return states.size() - 1; }
    };

    void add(std::span<const int> path, Rational weight);
    void add(std::initializer_list<int> path, Rational weight) { add(std::span<const int>(path.begin(), path.size()), weight); }
    void finalize();
    bool finalized() const { return finalized_; }
    /// Rescales each pair's weights to sum to 1. Used when a pair's flow is
    /// assembled as a mixture of several weighted path families.
    void normalize();

    std::size_t pair_count() const { return keys_.size(); }
    std::size_t path_count() const { return weights_.size(); }
    int pair_first(std::size_t pair) const { return static_cast<int>(keys_[pair] >> 32); }
    int pair_last(std::size_t pair) const { return static_cast<int>(keys_[pair] & 0xffffffffu); }
    /// Index of the pair (a, b), or -1.
    long find(int a, int b) const;
    std::size_t path_begin(std::size_t pair) const { return pair_ptr_[pair]; }
    std::size_t path_end(std::size_t pair) const { return pair_ptr_[pair + 1]; }
    PathView path(std::size_t index) const;
    std::size_t max_steps() const;

private:
    static std::uint64_t key(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
    }

    bool finalized_ = false;
    std::vector<std::uint64_t> keys_;
    std::vector<std::size_t> pair_ptr_;
    std::vector<std::size_t> vert_ptr_{0};
    std::vector<int> verts_;
    std::vector<Rational> weights_;
};

/// Measures P_x, couplings P_{x,y} and flows relating a chain on Omega (inner)
/// to one on Omega-hat (outer). Inner states are identified with outer states
/// of the same label.
class ExtensionScheme {
public:
    ExtensionScheme(SpacePtr inner, SpacePtr outer, FormMode mode = FormMode::dirichlet);

    const StateSpace& inner() const { return *inner_; }
    const StateSpace& outer() const { return *outer_; }
    const SpacePtr& inner_ptr() const { return inner_; }
    const SpacePtr& outer_ptr() const { return outer_; }
    FormMode mode() const { return mode_; }
    void set_mode(FormMode mode) { mode_ = mode; }

    /// Outer index of inner state i.
    int embed(int inner_state) const { return embed_[static_cast<std::size_t>(inner_state)]; }
    std::span<const int> embedding() const { return embed_; }
    /// Inner index of outer state x, or -1 when x lies outside Omega.
    int inner_of(int outer_state) const { return inner_of_[static_cast<std::size_t>(outer_state)]; }
    bool is_inner(int outer_state) const { return inner_of(outer_state) >= 0; }

    void set_measure(int outer_state, std::vector<MeasureEntry> entries);
    /// P_x as a list; for inner x this is the point mass.
    std::vector<MeasureEntry> measure(int outer_state) const;
    bool has_measure(int outer_state) const;

    /// P_{x,y}. The reverse orientation is served as the transpose.
    void set_coupling(int x, int y, std::vector<CouplingEntry> entries);
    /// Entries of P_{x,y} (transposed if only P_{y,x} was stored); empty when absent.
    std::vector<CouplingEntry> coupling(int x, int y) const;
    bool has_coupling(int x, int y) const;
    std::size_t coupling_count() const { return couplings_.size(); }
    void for_each_coupling(const std::function<void(int, int, const std::vector<CouplingEntry>&)>& fn) const;

    FlowTable& flows() { return flows_; }
    const FlowTable& flows() const { return flows_; }

    /// Human-readable notes attached by builders (e.g. fallbacks taken).
    std::vector<std::string>& notes() { return notes_; }
    const std::vector<std::string>& notes() const { return notes_; }

private:
    static std::uint64_t key(int x, int y) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) | static_cast<std::uint32_t>(y);
    }

    SpacePtr inner_, outer_;
    FormMode mode_;
    std::vector<int> embed_;
    std::vector<int> inner_of_;
    std::unordered_map<int, std::vector<MeasureEntry>> measures_;
    std::unordered_map<std::uint64_t, std::vector<CouplingEntry>> couplings_;
    FlowTable flows_;
    std::vector<std::string> notes_;
};

/// One term of the upper bound E_K(fhat,fhat) <= 1/2 sum_{(a,b)} c(a,b) (f(a) -/+ f(b))^2,
/// split by origin: 0 = both ends inside (R1), 1 = one end outside (R2), 2 = both outside (R3).
struct PairContribution {
    int a;
    int b;
    double coefficient;
    int term;
};

/// Enumerates every contribution to c(a, b). In Dirichlet mode pairs with a == b
/// are skipped since they carry no energy.
void for_each_contribution(const ExtensionScheme& s, const Kernel& k,
                           const std::function<void(const PairContribution&)>& fn);

struct Violation {
    std::string kind;
    std::string witness;
    double defect = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::size_t measures_checked = 0;
    std::size_t couplings_checked = 0;
    std::size_t pairs_required = 0;
    std::size_t paths_checked = 0;
    std::size_t max_path_steps = 0;

    bool ok() const { return violations.empty(); }
    std::size_t count(const std::string& kind) const;
};

/// Checks every scheme invariant against the outer kernel K and inner kernel Q.
/// At most `max_reports` violations of each kind are recorded with witnesses;
/// the rest are only counted in a summary entry.
ValidationReport validate_scheme(const ExtensionScheme& s, const Kernel& k, const Kernel& q, std::size_t max_reports = 20);

/// fhat(x) = sum_y P_x[y] f(y).
Eigen::VectorXd extend(const Eigen::VectorXd& f, const ExtensionScheme& s);

nlohmann::json scheme_to_json(const ExtensionScheme& s);
ExtensionScheme scheme_from_json(const nlohmann::json& doc, SpacePtr inner, SpacePtr outer);

}  // namespace mcx
