#pragma once
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fertgrid/csv.hpp"
#include "fertgrid/gbdt.hpp"

namespace fertgrid {

// Self-describing portable text format, preorder node list per tree.
// Doubles use the shortest round-tripping decimal so load(save(e)) == e.
inline void save_ensemble(std::ostream& out, const TreeEnsemble& ens) {
    out << "fertgrid-ensemble v1\n";
    out << "n_features " << ens.n_features << "\n";
    out << "base_score " << format_cell(ens.base_score) << "\n";
    out << "n_trees " << ens.trees.size() << "\n";
    for (std::size_t t = 0; t < ens.trees.size(); ++t) {
        const Tree& tree = ens.trees[t];
        out << "tree " << t << " " << tree.nodes.size() << "\n";
        for (const TreeNode& nd : tree.nodes) {
            if (nd.is_leaf())
                out << "leaf " << format_cell(nd.value) << " " << format_cell(nd.cover) << "\n";
            else
                out << "split " << nd.feature << " " << format_cell(nd.threshold) << " "
                    << (nd.missing_left ? 1 : 0) << " " << nd.left << " " << nd.right << " "
                    << format_cell(nd.cover) << "\n";
        }
    }
}

inline void save_ensemble(const std::string& path, const TreeEnsemble& ens) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ensemble: " + path);
    save_ensemble(out, ens);
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline TreeEnsemble load_ensemble(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "fertgrid-ensemble v1")
        throw std::runtime_error("ensemble file: bad header");
    TreeEnsemble ens;
    std::string key;
    std::size_t n_trees = 0;
    {
        std::getline(in, line);
        std::istringstream s(line);
        s >> key >> ens.n_features;
        if (key != "n_features") throw std::runtime_error("ensemble file: expected n_features");
    }
    {
        std::getline(in, line);
        std::istringstream s(line);
        s >> key >> ens.base_score;
        if (key != "base_score") throw std::runtime_error("ensemble file: expected base_score");
    }
    {
        std::getline(in, line);
        std::istringstream s(line);
        s >> key >> n_trees;
        if (key != "n_trees") throw std::runtime_error("ensemble file: expected n_trees");
    }
    ens.trees.resize(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::getline(in, line);
        std::istringstream s(line);
        std::size_t idx = 0, n_nodes = 0;
        s >> key >> idx >> n_nodes;
        if (key != "tree" || idx != t) throw std::runtime_error("ensemble file: bad tree header");
        Tree& tree = ens.trees[t];
        tree.nodes.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            if (!std::getline(in, line)) throw std::runtime_error("ensemble file: truncated");
            std::istringstream ns(line);
            ns >> key;
            TreeNode& nd = tree.nodes[i];
            if (key == "leaf") {
                ns >> nd.value >> nd.cover;
            } else if (key == "split") {
                int mleft = 0;
                ns >> nd.feature >> nd.threshold >> mleft >> nd.left >> nd.right >> nd.cover;
                nd.missing_left = mleft != 0;
            } else {
                throw std::runtime_error("ensemble file: bad node line: " + line);
            }
            if (!ns) throw std::runtime_error("ensemble file: bad node line: " + line);
        }
    }
    return ens;
}

inline TreeEnsemble load_ensemble(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ensemble: " + path);
    return load_ensemble(in);
}

} // namespace fertgrid
