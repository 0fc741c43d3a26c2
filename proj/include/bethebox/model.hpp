#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bethebox/errors.hpp"

namespace bethebox {

struct Edge {
    int i;      // i < j
    int j;
    double w;   // finite, nonzero
};

// Binary pairwise MRF in the energy parameterization
//   E(x) = -sum_i theta_i x_i - sum_{(i,j)} w_ij x_i x_j,  x in {0,1}^n.
//
// Immutable after construction; derived per-node quantities are cached:
//   pos_weight[i] = sum of positive incident weights
//   neg_weight[i] = -(sum of negative incident weights), so both are >= 0
//   degree[i]     = |N(i)|
class Mrf {
public:
    Mrf(std::vector<double> theta, std::vector<Edge> edges,
        bool allow_disconnected = false)
        : theta_(std::move(theta)), edges_(std::move(edges)) {
        validate_and_index(allow_disconnected);
    }

    int size() const { return static_cast<int>(theta_.size()); }
    double theta(int i) const { return theta_[i]; }
    const std::vector<double>& thetas() const { return theta_; }
    const std::vector<Edge>& edges() const { return edges_; }

    // neighbors as (node, weight) pairs
    const std::vector<std::pair<int, double>>& neighbors(int i) const {
        return adj_[i];
    }
    int degree(int i) const { return static_cast<int>(adj_[i].size()); }
    int max_degree() const {
        int d = 0;
        for (int i = 0; i < size(); ++i) d = std::max(d, degree(i));
        return d;
    }
    double pos_weight(int i) const { return pos_w_[i]; }  // W_i
    double neg_weight(int i) const { return neg_w_[i]; }  // V_i

    bool associative() const {
        for (const Edge& e : edges_)
            if (e.w < 0) return false;
        return true;
    }

    double energy(const std::vector<int>& x) const {
        double e = 0.0;
        for (int i = 0; i < size(); ++i) e -= theta_[i] * x[i];
        for (const Edge& ed : edges_) e -= ed.w * x[ed.i] * x[ed.j];
        return e;
    }

private:
    void validate_and_index(bool allow_disconnected);

    std::vector<double> theta_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::pair<int, double>>> adj_;
    std::vector<double> pos_w_, neg_w_;
};

// Subset R of variables to flip (X_i -> 1 - X_i).
struct FlipSet {
    std::vector<bool> flipped;

    static FlipSet none(int n) { return FlipSet{std::vector<bool>(n, false)}; }
    static FlipSet all(int n) { return FlipSet{std::vector<bool>(n, true)}; }
    static FlipSet of(int n, std::initializer_list<int> idx) {
        FlipSet r = none(n);
        for (int i : idx) r.flipped.at(i) = true;
        return r;
    }
};

inline void Mrf::validate_and_index(bool allow_disconnected) {
    const int n = size();
    if (n <= 0) throw ValidationError("model must have at least one node");
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(theta_[i]))
            throw ValidationError("theta " + std::to_string(i) + " is not finite");

    std::set<std::pair<int, int>> seen;
    for (Edge& e : edges_) {
        if (e.i > e.j) std::swap(e.i, e.j);
        if (e.i < 0 || e.j >= n)
            throw ValidationError("edge (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ") out of range");
        if (e.i == e.j)
            throw ValidationError("self-loop at node " + std::to_string(e.i));
        if (!seen.insert({e.i, e.j}).second)
            throw ValidationError("duplicate edge (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ")");
        if (!std::isfinite(e.w))
            throw ValidationError("edge (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ") weight is not finite");
        if (e.w == 0.0)
            throw ValidationError("edge (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) +
                                  ") has zero weight; delete it instead");
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });

    adj_.assign(n, {});
    pos_w_.assign(n, 0.0);
    neg_w_.assign(n, 0.0);
    for (const Edge& e : edges_) {
        adj_[e.i].push_back({e.j, e.w});
        adj_[e.j].push_back({e.i, e.w});
        if (e.w > 0) {
            pos_w_[e.i] += e.w;
            pos_w_[e.j] += e.w;
        } else {
            neg_w_[e.i] -= e.w;
            neg_w_[e.j] -= e.w;
        }
    }

    if (!allow_disconnected && n > 1) {
        std::vector<char> vis(n, 0);
        std::vector<int> stack{0};
        vis[0] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (auto [v, w] : adj_[u])
                if (!vis[v]) {
                    vis[v] = 1;
                    stack.push_back(v);
                }
        }
        for (int i = 0; i < n; ++i)
            if (!vis[i])
                throw ValidationError(
                    "graph is disconnected (node " + std::to_string(i) +
                    " unreachable from node 0); pass allow_disconnected to "
                    "process components independently");
    }
}

// Reparameterize so the energy of every configuration is preserved up to a
// constant when the variables in r are replaced by their complements:
//   v_ij = w_ij  if the edge has 0 or 2 ends in R,  -w_ij if exactly 1;
//   phi_i = theta_i + sum_{(i,j): j in R} w_ij      for i not in R,
//   phi_i = -theta_i - sum_{(i,j): both in R} w_ij  for i in R.
inline Mrf flip(const Mrf& m, const FlipSet& r, bool allow_disconnected = false) {
    const int n = m.size();
    if (static_cast<int>(r.flipped.size()) != n)
        throw ValidationError("flip set size does not match model");
    std::vector<double> phi(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        if (!r.flipped[i]) {
            for (auto [j, w] : m.neighbors(i))
                if (r.flipped[j]) acc += w;
            phi[i] = m.theta(i) + acc;
        } else {
            for (auto [j, w] : m.neighbors(i))
                if (r.flipped[j]) acc += w;
            phi[i] = -m.theta(i) - acc;
        }
    }
    std::vector<Edge> edges = m.edges();
    for (Edge& e : edges) {
        int ends = (r.flipped[e.i] ? 1 : 0) + (r.flipped[e.j] ? 1 : 0);
        if (ends == 1) e.w = -e.w;
    }
    return Mrf(std::move(phi), std::move(edges), allow_disconnected);
}

inline Mrf flip_all(const Mrf& m, bool allow_disconnected = false) {
    return flip(m, FlipSet::all(m.size()), allow_disconnected);
}

// theta_i <- theta_i - sum_{j in N(i)} w_ij / 2, removing the bias a raw
// (theta*, W) specification carries toward x_i = 1.
inline Mrf unbias_reparam(std::vector<double> thetas, std::vector<Edge> edges,
                          bool allow_disconnected = false) {
    Mrf raw(std::move(thetas), std::move(edges), allow_disconnected);
    std::vector<double> adj(raw.size());
    for (int i = 0; i < raw.size(); ++i) {
        double s = 0.0;
        for (auto [j, w] : raw.neighbors(i)) s += w;
        adj[i] = raw.theta(i) - 0.5 * s;
    }
    return Mrf(std::move(adj), raw.edges(), allow_disconnected);
}

// ---------------------------------------------------------------------------
// Model file format (line oriented, '#' comments, whitespace separated):
//   nodes <n>
//   theta <i> <float>     exactly one line per node
//   edge <i> <j> <float>  zero or more
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_double(const std::string& tok, int line_no) {
    try {
        size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": bad float literal '" + tok + "'");
    }
}

inline long parse_int(const std::string& tok, int line_no) {
    try {
        size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": bad integer literal '" + tok + "'");
    }
}

}  // namespace detail

inline Mrf parse_model(const std::string& text, bool allow_disconnected = false) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    long n = -1;
    std::vector<double> theta;
    std::vector<char> theta_seen;
    std::vector<Edge> edges;

    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;

        if (tok[0] == "nodes") {
            if (n >= 0) throw ParseError("line " + std::to_string(line_no) +
                                         ": repeated 'nodes' directive");
            if (tok.size() != 2)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected 'nodes <n>'");
            n = detail::parse_int(tok[1], line_no);
            if (n <= 0) throw ParseError("line " + std::to_string(line_no) +
                                         ": node count must be positive");
            theta.assign(n, 0.0);
            theta_seen.assign(n, 0);
        } else if (tok[0] == "theta") {
            if (n < 0) throw ParseError("line " + std::to_string(line_no) +
                                        ": 'theta' before 'nodes'");
            if (tok.size() != 3)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected 'theta <i> <float>'");
            long i = detail::parse_int(tok[1], line_no);
            if (i < 0 || i >= n)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": node index " + tok[1] + " out of range");
            if (theta_seen[i])
                throw ParseError("line " + std::to_string(line_no) +
                                 ": repeated theta for node " + tok[1]);
            theta_seen[i] = 1;
            theta[i] = detail::parse_double(tok[2], line_no);
        } else if (tok[0] == "edge") {
            if (n < 0) throw ParseError("line " + std::to_string(line_no) +
                                        ": 'edge' before 'nodes'");
            if (tok.size() != 4)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected 'edge <i> <j> <float>'");
            long i = detail::parse_int(tok[1], line_no);
            long j = detail::parse_int(tok[2], line_no);
            if (i < 0 || i >= n || j < 0 || j >= n)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": edge endpoint out of range");
            edges.push_back({static_cast<int>(i), static_cast<int>(j),
                             detail::parse_double(tok[3], line_no)});
        } else {
            throw ParseError("line " + std::to_string(line_no) +
                             ": unknown directive '" + tok[0] + "'");
        }
    }
    if (n < 0) throw ParseError("missing 'nodes' directive");
    for (long i = 0; i < n; ++i)
        if (!theta_seen[i])
            throw ValidationError("missing theta for node " + std::to_string(i));
    return Mrf(std::move(theta), std::move(edges), allow_disconnected);
}

// 17 significant digits: parse(serialize(m)) reproduces m bit for bit.
inline std::string serialize_model(const Mrf& m) {
    char buf[64];
    std::string out = "nodes " + std::to_string(m.size()) + "\n";
    for (int i = 0; i < m.size(); ++i) {
        std::snprintf(buf, sizeof buf, "theta %d %.17g\n", i, m.theta(i));
        out += buf;
    }
    for (const Edge& e : m.edges()) {
        std::snprintf(buf, sizeof buf, "edge %d %d %.17g\n", e.i, e.j, e.w);
        out += buf;
    }
    return out;
}

}  // namespace bethebox
