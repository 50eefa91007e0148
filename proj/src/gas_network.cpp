#include "pipegrid/gas_network.hpp"

#include <cmath>
#include <numbers>
#include <queue>
#include <unordered_map>

namespace pipegrid {

GasNetwork::GasNetwork(std::vector<GasNode> nodes, std::vector<Pipe> pipes, GasScaling scaling)
    : nodes_(std::move(nodes)), pipes_(std::move(pipes)), scaling_(scaling) {
    const int n = n_nodes();
    const int e = n_pipes();
    if (n == 0 || e == 0)
        throw InputError("gas network needs at least one node and one pipe");

    demand_pos_.assign(n, -1);
    slack_pos_.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        if (nodes_[i].slack) {
            slack_pos_[i] = static_cast<int>(slack_nodes_.size());
            slack_nodes_.push_back(i);
        } else {
            demand_pos_[i] = static_cast<int>(demand_nodes_.size());
            demand_nodes_.push_back(i);
        }
    }

    A_ = Eigen::MatrixXd::Zero(n, e);
    Lambda_.resize(e);
    K_.resize(e);
    X_.resize(e);
    for (int j = 0; j < e; ++j) {
        const Pipe& p = pipes_[j];
        if (p.from < 0 || p.from >= n || p.to < 0 || p.to >= n || p.from == p.to)
            throw InputError("pipe '" + p.id + "' has invalid endpoints");
        A_(p.from, j) = -1.0;
        A_(p.to, j) = 1.0;
        Lambda_(j) = p.length;
        K_(j) = scaling_.ell * p.friction / p.diameter;
        X_(j) = p.area;
        if (p.compressor)
            compressor_pipes_.push_back(j);
    }

    Ad_.resize(n_demand(), e);
    for (int i = 0; i < n_demand(); ++i)
        Ad_.row(i) = A_.row(demand_nodes_[i]);
    As_.resize(n_slack(), e);
    for (int i = 0; i < n_slack(); ++i)
        As_.row(i) = A_.row(slack_nodes_[i]);
}

int GasNetwork::pipe_index(const std::string& id) const {
    for (int j = 0; j < n_pipes(); ++j)
        if (pipes_[j].id == id)
            return j;
    throw InputError("unknown pipe '" + id + "'");
}

int GasNetwork::node_index(const std::string& id) const {
    for (int i = 0; i < n_nodes(); ++i)
        if (nodes_[i].id == id)
            return i;
    throw InputError("unknown gas node '" + id + "'");
}

int GasNetwork::compressor_index(const std::string& pipe_id) const {
    const int j = pipe_index(pipe_id);
    for (std::size_t k = 0; k < compressor_pipes_.size(); ++k)
        if (compressor_pipes_[k] == j)
            return static_cast<int>(k);
    throw InputError("pipe '" + pipe_id + "' is not a compressor");
}

Eigen::VectorXd GasNetwork::expand_alpha(const Eigen::VectorXd& alpha) const {
    if (alpha.size() != static_cast<Eigen::Index>(compressor_pipes_.size()))
        throw InputError("alpha vector size does not match compressor count");
    Eigen::VectorXd full = Eigen::VectorXd::Ones(n_pipes());
    for (std::size_t k = 0; k < compressor_pipes_.size(); ++k)
        full(compressor_pipes_[k]) = alpha(k);
    return full;
}

GasNetwork::WeightedIncidence GasNetwork::weighted_incidence(const Eigen::VectorXd& alpha) const {
    Eigen::VectorXd full = expand_alpha(alpha);
    for (std::size_t k = 0; k < compressor_pipes_.size(); ++k) {
        const Pipe& p = pipes_[compressor_pipes_[k]];
        const double a = alpha(static_cast<Eigen::Index>(k));
        if (a < 1.0 - 1e-12 || a > p.boost_max + 1e-12)
            throw InputError("boost ratio " + std::to_string(a) + " out of [1, " +
                             std::to_string(p.boost_max) + "] on pipe '" + p.id + "'");
    }

    WeightedIncidence w;
    w.B = Eigen::MatrixXd::Zero(n_nodes(), n_pipes());
    for (int j = 0; j < n_pipes(); ++j) {
        w.B(pipes_[j].from, j) = -full(j);
        w.B(pipes_[j].to, j) = 1.0;
    }
    w.Bd.resize(n_demand(), n_pipes());
    for (int i = 0; i < n_demand(); ++i)
        w.Bd.row(i) = w.B.row(demand_nodes_[i]);
    w.Bs.resize(n_slack(), n_pipes());
    for (int i = 0; i < n_slack(); ++i)
        w.Bs.row(i) = w.B.row(slack_nodes_[i]);
    return w;
}

std::vector<NetworkDefect> GasNetwork::validate() const {
    std::vector<NetworkDefect> defects;
    auto bad = [&](const std::string& where, const std::string& what) {
        defects.push_back({where, what});
    };

    if (scaling_.rho0 <= 0 || scaling_.c <= 0 || scaling_.ell <= 0 || scaling_.area_ref <= 0)
        bad("scaling", "non-positive scaling constant");

    for (const GasNode& nd : nodes_) {
        if (!(nd.rho_min < nd.rho_max))
            bad("node " + nd.id, "density bounds must satisfy min < max");
        if (nd.withdrawal_min > nd.withdrawal_max)
            bad("node " + nd.id, "withdrawal bounds inverted");
        if (nd.slack && nd.slack_density.empty())
            bad("node " + nd.id, "slack node without prescribed density");
    }
    for (const Pipe& p : pipes_) {
        if (p.length <= 0)
            bad("pipe " + p.id, "non-positive length");
        if (p.diameter <= 0)
            bad("pipe " + p.id, "non-positive diameter");
        if (p.friction <= 0)
            bad("pipe " + p.id, "non-positive friction factor");
        if (p.efficiency <= 0)
            bad("pipe " + p.id, "non-positive efficiency");
        if (p.compressor && p.boost_max < 1.0)
            bad("pipe " + p.id, "boost limit below 1");
        if (!p.compressor && p.boost_max != 1.0)
            bad("pipe " + p.id, "boost limit must be 1 on a plain pipe");
    }

    // connectivity and slack reachability
    std::vector<std::vector<int>> adj(n_nodes());
    for (const Pipe& p : pipes_) {
        if (p.from >= 0 && p.to >= 0 && p.from < n_nodes() && p.to < n_nodes()) {
            adj[p.from].push_back(p.to);
            adj[p.to].push_back(p.from);
        }
    }
    std::vector<char> seen(n_nodes(), 0);
    std::queue<int> q;
    for (int s : slack_nodes_) {
        seen[s] = 1;
        q.push(s);
    }
    if (slack_nodes_.empty()) {
        bad("network", "no pressure-specified node");
    } else {
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    q.push(v);
                }
        }
        for (int i = 0; i < n_nodes(); ++i)
            if (!seen[i])
                bad("node " + nodes_[i].id, "not connected to any slack node");
    }
    return defects;
}

std::vector<int> GasNetwork::downstream_of(int node) const {
    // BFS tree from the slack node(s); descendants of `node` in that tree.
    std::vector<std::vector<int>> adj(n_nodes());
    for (const Pipe& p : pipes_) {
        adj[p.from].push_back(p.to);
        adj[p.to].push_back(p.from);
    }
    std::vector<int> parent(n_nodes(), -2);
    std::queue<int> q;
    for (int s : slack_nodes_) {
        parent[s] = -1;
        q.push(s);
    }
    std::vector<int> order;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        order.push_back(u);
        for (int v : adj[u])
            if (parent[v] == -2) {
                parent[v] = u;
                q.push(v);
            }
    }
    std::vector<char> mark(n_nodes(), 0);
    mark[node] = 1;
    std::vector<int> out;
    for (int u : order) {
        if (u == node)
            continue;
        if (parent[u] >= 0 && mark[parent[u]]) {
            mark[u] = 1;
            out.push_back(u);
        }
    }
    return out;
}

GasNetwork nondimensionalize(const GasNetworkSI& raw) {
    const GasScaling& sc = raw.scaling;
    if (sc.rho0 <= 0 || sc.c <= 0 || sc.ell <= 0 || sc.area_ref <= 0)
        throw InputError("scaling constants must be positive");

    std::vector<GasNode> nodes;
    nodes.reserve(raw.nodes.size());
    std::unordered_map<std::string, int> idx;
    const double flow_unit = sc.massflow_unit();
    for (const auto& n : raw.nodes) {
        if (idx.count(n.id))
            throw InputError("duplicate gas node id '" + n.id + "'");
        idx[n.id] = static_cast<int>(nodes.size());
        GasNode nd;
        nd.id = n.id;
        nd.rho_min = n.rho_min / sc.rho0;
        nd.rho_max = n.rho_max / sc.rho0;
        nd.withdrawal_min = n.withdrawal_min / flow_unit;
        nd.withdrawal_max = n.withdrawal_max / flow_unit;
        nd.slack = n.slack;
        if (n.slack && !n.slack_density.empty()) {
            std::vector<PwlProfile::Knot> k;
            for (const auto& kn : n.slack_density.knots())
                k.push_back({kn.t, kn.v / sc.rho0});
            nd.slack_density = PwlProfile(std::move(k));
        }
        nodes.push_back(std::move(nd));
    }

    std::vector<Pipe> pipes;
    pipes.reserve(raw.pipes.size());
    for (const auto& p : raw.pipes) {
        if (!idx.count(p.from) || !idx.count(p.to))
            throw InputError("pipe '" + p.id + "' references unknown node");
        if (p.length <= 0 || p.diameter <= 0 || p.friction <= 0)
            throw InputError("pipe '" + p.id + "' has non-positive geometry");
        Pipe q;
        q.id = p.id;
        q.from = idx[p.from];
        q.to = idx[p.to];
        q.length = p.length / sc.ell;
        q.diameter = p.diameter;
        q.friction = p.friction;
        q.area = std::numbers::pi * p.diameter * p.diameter / 4.0 / sc.area_ref;
        q.compressor = p.compressor;
        q.boost_max = p.boost_max;
        q.efficiency = p.efficiency;
        pipes.push_back(std::move(q));
    }

    GasNetwork net(std::move(nodes), std::move(pipes), sc);
    net.set_heat_capacity_ratio(raw.gamma);
    return net;
}

} // namespace pipegrid
