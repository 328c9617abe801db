#include "mcx/kernel_io.hpp"

#include "mcx/error.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace mcx {

using nlohmann::json;

json kernel_to_json(const Kernel& k) {
    json doc;
    doc["states"] = k.space().labels();
    json trip = json::array();
    for (const auto& t : k.triplets()) trip.push_back({t.row, t.col, t.value});
    doc["triplets"] = std::move(trip);
    doc["pi"] = std::vector<double>(k.stationary().data(), k.stationary().data() + k.stationary().size());
    doc["reversible"] = k.reversible();
    doc["half_lazy"] = k.half_lazy();
    return doc;
}

Kernel kernel_from_json(const json& doc) {
    for (const char* field : {"states", "triplets", "pi"})
        require(doc.contains(field), ErrorKind::schema, std::string("kernel document missing field '") + field + "'");
    std::vector<std::string> labels;
    for (const auto& s : doc.at("states")) labels.push_back(s.is_string() ? s.get<std::string>() : s.dump());
    std::vector<Triplet> triplets;
    for (const auto& t : doc.at("triplets")) {
        require(t.is_array() && t.size() == 3, ErrorKind::schema, "triplets entries must be [i, j, p]");
        triplets.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<double>()});
    }
    const auto pi_list = doc.at("pi").get<std::vector<double>>();
    Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(pi_list.data(), static_cast<Eigen::Index>(pi_list.size()));
    auto space = make_space(std::move(labels));

    if (doc.contains("reversible") && doc.contains("half_lazy"))
        return Kernel::from_triplets(space, std::move(triplets), pi,
                                     {doc["reversible"].get<bool>(), doc["half_lazy"].get<bool>()});
    Kernel probe = Kernel::from_triplets(space, triplets, pi, {false, false});
    KernelFlags flags{probe.detailed_balance_residual() <= kStructuralTol, probe.min_holding() >= 0.5 - kStructuralTol};
    if (doc.contains("reversible")) flags.reversible = doc["reversible"].get<bool>();
    if (doc.contains("half_lazy")) flags.half_lazy = doc["half_lazy"].get<bool>();
    return Kernel::from_triplets(space, std::move(triplets), pi, flags);
}

Kernel kernel_from_edge_list(std::istream& in) {
    std::vector<std::string> labels;
    std::map<std::string, int> ids;
    auto id_of = [&](const std::string& s) {
        auto [it, inserted] = ids.emplace(s, static_cast<int>(labels.size()));
        if (inserted) labels.push_back(s);
        return it->second;
    };
    std::vector<Triplet> edges;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string a, b;
        if (!(ls >> a)) continue;
        double w = 0.0;
        require(static_cast<bool>(ls >> b >> w), ErrorKind::schema, "edge list line " + std::to_string(lineno) + ": expected 'i j weight'");
        require(w > 0.0, ErrorKind::schema, "edge list line " + std::to_string(lineno) + ": weight must be positive");
        edges.push_back({id_of(a), id_of(b), w});
    }
    require(!labels.empty(), ErrorKind::empty_space, "edge list contains no edges");

    const auto n = labels.size();
    Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (const auto& e : edges) {
        total[e.row] += e.value;
        if (e.row != e.col) total[e.col] += e.value;
    }
    std::vector<Triplet> t;
    for (std::size_t x = 0; x < n; ++x) t.push_back({static_cast<int>(x), static_cast<int>(x), 0.5});
    for (const auto& e : edges) {
        t.push_back({e.row, e.col, e.value / (2.0 * total[e.row])});
        if (e.row != e.col) t.push_back({e.col, e.row, e.value / (2.0 * total[e.col])});
    }
    Eigen::VectorXd pi = total / total.sum();
    Kernel k = Kernel::from_triplets(make_space(std::move(labels)), std::move(t), pi, {true, true});
    require(is_connected(k), ErrorKind::ergodicity, "edge list graph is disconnected");
    return k;
}

Kernel load_kernel(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open '" + path + "'");
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            fail(ErrorKind::schema, "'" + path + "': " + e.what());
        }
        return kernel_from_json(doc);
    }
    return kernel_from_edge_list(in);
}

}  // namespace mcx
