#include "gridrl/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace gridrl {

namespace {

PhaseSet parse_phases(std::string_view s, int line_no) {
    PhaseSet p{false, false, false};
    s = trim(s);
    if (s.empty()) throw ParseError("phases must be non-empty", line_no);
    for (char c : s) {
        if (c < '1' || c > '3') throw ParseError("phases must be digits from {1,2,3}", line_no);
        p[c - '1'] = true;
    }
    return p;
}

std::string phases_to_string(const PhaseSet& p) {
    std::string s;
    for (int i = 0; i < 3; ++i)
        if (p[i]) s += char('1' + i);
    return s;
}

// A record is a comma-separated list of key=value fields.
std::map<std::string, std::string> parse_record(std::string_view body, int line_no) {
    std::map<std::string, std::string> fields;
    for (std::string_view part : split(body, ',')) {
        part = trim(part);
        if (part.empty()) throw ParseError("empty field", line_no);
        auto eq = part.find('=');
        if (eq == std::string_view::npos) throw ParseError("field is not key=value: '" + std::string(part) + "'", line_no);
        std::string key(trim(part.substr(0, eq)));
        std::string val(trim(part.substr(eq + 1)));
        if (key.empty()) throw ParseError("empty field name", line_no);
        if (!fields.emplace(key, val).second) throw ParseError("duplicate field '" + key + "'", line_no);
    }
    return fields;
}

std::string take(std::map<std::string, std::string>& fields, const std::string& key, int line_no) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError("missing field '" + key + "'", line_no);
    std::string v = it->second;
    fields.erase(it);
    return v;
}

void expect_drained(const std::map<std::string, std::string>& fields, int line_no) {
    if (!fields.empty()) throw ParseError("unknown field '" + fields.begin()->first + "'", line_no);
}

}  // namespace

NetworkGraph NetworkGraph::load(const std::string& text) {
    NetworkGraph g;
    std::string section;
    int line_no = 0;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view sv(raw);
        auto hash = sv.find('#');
        if (hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = trim(sv);
        if (sv.empty()) continue;
        if (sv.front() == '[') {
            if (sv.back() != ']') throw ParseError("unterminated section header", line_no);
            section = std::string(trim(sv.substr(1, sv.size() - 2)));
            if (section != "buses" && section != "lines" && section != "switches" &&
                section != "loads" && section != "ders")
                throw ParseError("unknown section [" + section + "]", line_no);
            continue;
        }
        if (section.empty()) throw ParseError("record before any section header", line_no);
        auto fields = parse_record(sv, line_no);
        if (section == "buses") {
            Bus b;
            b.id = static_cast<int>(parse_int(take(fields, "id", line_no), line_no));
            b.phases = parse_phases(take(fields, "phases", line_no), line_no);
            if (auto it = fields.find("name"); it != fields.end()) {
                b.name = it->second;
                fields.erase(it);
            } else {
                b.name = "bus" + std::to_string(b.id);
            }
            if (auto it = fields.find("substation"); it != fields.end()) {
                b.is_substation = parse_bool(it->second, line_no);
                fields.erase(it);
            }
            expect_drained(fields, line_no);
            g.buses_.push_back(std::move(b));
        } else if (section == "lines") {
            Line l;
            l.id = static_cast<int>(parse_int(take(fields, "id", line_no), line_no));
            l.from_bus = static_cast<int>(parse_int(take(fields, "from", line_no), line_no));
            l.to_bus = static_cast<int>(parse_int(take(fields, "to", line_no), line_no));
            l.r_pu = parse_double(take(fields, "r_pu", line_no), line_no);
            l.x_pu = parse_double(take(fields, "x_pu", line_no), line_no);
            expect_drained(fields, line_no);
            if (l.from_bus == l.to_bus) throw ParseError("line endpoints must differ", line_no);
            if (!(l.r_pu > 0.0)) throw ParseError("r_pu must be > 0", line_no);
            if (l.x_pu < 0.0) throw ParseError("x_pu must be >= 0", line_no);
            g.lines_.push_back(l);
        } else if (section == "switches") {
            Switch s;
            s.line_id = static_cast<int>(parse_int(take(fields, "line", line_no), line_no));
            std::string kind = take(fields, "kind", line_no);
            if (kind == "sectionalizing")
                s.kind = SwitchKind::Sectionalizing;
            else if (kind == "tie")
                s.kind = SwitchKind::Tie;
            else
                throw ParseError("switch kind must be sectionalizing or tie", line_no);
            // Standard feeder practice when unspecified: sectionalizing closed, tie open.
            s.default_closed = (s.kind == SwitchKind::Sectionalizing);
            if (auto it = fields.find("default"); it != fields.end()) {
                if (it->second == "open")
                    s.default_closed = false;
                else if (it->second == "closed")
                    s.default_closed = true;
                else
                    throw ParseError("switch default must be open or closed", line_no);
                fields.erase(it);
            }
            expect_drained(fields, line_no);
            g.switches_.push_back(s);
        } else if (section == "loads") {
            Load ld;
            ld.bus_id = static_cast<int>(parse_int(take(fields, "bus", line_no), line_no));
            ld.p_kw = parse_double(take(fields, "p_kw", line_no), line_no);
            ld.phases = parse_phases(take(fields, "phases", line_no), line_no);
            if (ld.p_kw < 0.0) throw ParseError("p_kw must be >= 0", line_no);
            if (auto it = fields.find("sheddable"); it != fields.end()) {
                ld.sheddable = parse_bool(it->second, line_no);
                fields.erase(it);
            }
            expect_drained(fields, line_no);
            g.loads_.push_back(ld);
        } else {  // ders
            Der d;
            d.bus_id = static_cast<int>(parse_int(take(fields, "bus", line_no), line_no));
            d.rating_kw = parse_double(take(fields, "kw", line_no), line_no);
            std::string mode = take(fields, "mode", line_no);
            if (mode == "grid_forming")
                d.mode = DerMode::GridForming;
            else if (mode == "grid_feeding")
                d.mode = DerMode::GridFeeding;
            else
                throw ParseError("der mode must be grid_forming or grid_feeding", line_no);
            expect_drained(fields, line_no);
            if (!(d.rating_kw > 0.0)) throw ParseError("der kw must be > 0", line_no);
            g.ders_.push_back(d);
        }
    }
    g.build_indexes(text);
    return g;
}

void NetworkGraph::build_indexes(const std::string& source_text) {
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (!bus_index_.emplace(buses_[i].id, static_cast<int>(i)).second)
            throw ParseError("duplicate bus id " + std::to_string(buses_[i].id));
        if (buses_[i].is_substation) {
            if (substation_index_ >= 0) throw ParseError("more than one substation");
            substation_index_ = static_cast<int>(i);
        }
    }
    if (substation_index_ < 0) throw ParseError("network has no substation");

    for (std::size_t i = 0; i < lines_.size(); ++i) {
        const Line& l = lines_[i];
        if (!line_index_.emplace(l.id, static_cast<int>(i)).second)
            throw ParseError("duplicate line id " + std::to_string(l.id));
        if (!bus_index_.count(l.from_bus))
            throw ParseError("line " + std::to_string(l.id) + " references unknown bus " + std::to_string(l.from_bus));
        if (!bus_index_.count(l.to_bus))
            throw ParseError("line " + std::to_string(l.id) + " references unknown bus " + std::to_string(l.to_bus));
    }

    switch_of_line_.assign(lines_.size(), -1);
    std::sort(switches_.begin(), switches_.end(),
              [](const Switch& a, const Switch& b) { return a.line_id < b.line_id; });
    for (std::size_t s = 0; s < switches_.size(); ++s) {
        auto it = line_index_.find(switches_[s].line_id);
        if (it == line_index_.end())
            throw ParseError("switch references unknown line " + std::to_string(switches_[s].line_id));
        if (switch_of_line_[it->second] >= 0)
            throw ParseError("line " + std::to_string(switches_[s].line_id) + " has more than one switch");
        switch_of_line_[it->second] = static_cast<int>(s);
        lines_[it->second].has_switch = true;
    }

    for (std::size_t i = 0; i < loads_.size(); ++i) {
        const Load& ld = loads_[i];
        auto it = bus_index_.find(ld.bus_id);
        if (it == bus_index_.end())
            throw ParseError("load references unknown bus " + std::to_string(ld.bus_id));
        const PhaseSet& bus_ph = buses_[it->second].phases;
        for (int p = 0; p < 3; ++p)
            if (ld.phases[p] && !bus_ph[p])
                throw ParseError("load at bus " + std::to_string(ld.bus_id) + " uses phase " +
                                 std::to_string(p + 1) + " absent from the bus");
        if (ld.sheddable) sheddable_loads_.push_back(static_cast<int>(i));
    }

    for (const Der& d : ders_)
        if (!bus_index_.count(d.bus_id))
            throw ParseError("der references unknown bus " + std::to_string(d.bus_id));

    content_hash_ = fnv1a64(source_text);
}

std::string NetworkGraph::serialize() const {
    std::ostringstream out;
    out << "[buses]\n";
    for (const Bus& b : buses_) {
        out << "id=" << b.id << ", name=" << b.name << ", phases=" << phases_to_string(b.phases)
            << ", substation=" << (b.is_substation ? "true" : "false") << "\n";
    }
    out << "[lines]\n";
    for (const Line& l : lines_) {
        out << "id=" << l.id << ", from=" << l.from_bus << ", to=" << l.to_bus
            << ", r_pu=" << format_double(l.r_pu) << ", x_pu=" << format_double(l.x_pu) << "\n";
    }
    out << "[switches]\n";
    for (const Switch& s : switches_) {
        out << "line=" << s.line_id
            << ", kind=" << (s.kind == SwitchKind::Sectionalizing ? "sectionalizing" : "tie")
            << ", default=" << (s.default_closed ? "closed" : "open") << "\n";
    }
    out << "[loads]\n";
    for (const Load& ld : loads_) {
        out << "bus=" << ld.bus_id << ", p_kw=" << format_double(ld.p_kw)
            << ", phases=" << phases_to_string(ld.phases)
            << ", sheddable=" << (ld.sheddable ? "true" : "false") << "\n";
    }
    out << "[ders]\n";
    for (const Der& d : ders_) {
        out << "bus=" << d.bus_id << ", kw=" << format_double(d.rating_kw)
            << ", mode=" << (d.mode == DerMode::GridForming ? "grid_forming" : "grid_feeding") << "\n";
    }
    return out.str();
}

int NetworkGraph::bus_index(int bus_id) const {
    auto it = bus_index_.find(bus_id);
    if (it == bus_index_.end()) throw std::out_of_range("unknown bus id " + std::to_string(bus_id));
    return it->second;
}

int NetworkGraph::line_index(int line_id) const {
    auto it = line_index_.find(line_id);
    if (it == line_index_.end()) throw std::out_of_range("unknown line id " + std::to_string(line_id));
    return it->second;
}

std::vector<bool> NetworkGraph::default_switch_states() const {
    std::vector<bool> st(switches_.size());
    for (std::size_t i = 0; i < switches_.size(); ++i) st[i] = switches_[i].default_closed;
    return st;
}

double NetworkGraph::total_demand_kw() const {
    double total = 0.0;
    for (const Load& ld : loads_) total += ld.total_kw();
    return total;
}

bool NetworkGraph::operator==(const NetworkGraph& o) const {
    auto bus_eq = [](const Bus& a, const Bus& b) {
        return a.id == b.id && a.name == b.name && a.phases == b.phases && a.is_substation == b.is_substation;
    };
    auto line_eq = [](const Line& a, const Line& b) {
        return a.id == b.id && a.from_bus == b.from_bus && a.to_bus == b.to_bus && a.r_pu == b.r_pu && a.x_pu == b.x_pu;
    };
    auto sw_eq = [](const Switch& a, const Switch& b) {
        return a.line_id == b.line_id && a.kind == b.kind && a.default_closed == b.default_closed;
    };
    auto load_eq = [](const Load& a, const Load& b) {
        return a.bus_id == b.bus_id && a.p_kw == b.p_kw && a.phases == b.phases && a.sheddable == b.sheddable;
    };
    auto der_eq = [](const Der& a, const Der& b) {
        return a.bus_id == b.bus_id && a.rating_kw == b.rating_kw && a.mode == b.mode;
    };
    return std::equal(buses_.begin(), buses_.end(), o.buses_.begin(), o.buses_.end(), bus_eq) &&
           std::equal(lines_.begin(), lines_.end(), o.lines_.begin(), o.lines_.end(), line_eq) &&
           std::equal(switches_.begin(), switches_.end(), o.switches_.begin(), o.switches_.end(), sw_eq) &&
           std::equal(loads_.begin(), loads_.end(), o.loads_.begin(), o.loads_.end(), load_eq) &&
           std::equal(ders_.begin(), ders_.end(), o.ders_.begin(), o.ders_.end(), der_eq);
}

Matrix effective_adjacency(const NetworkGraph& g, const std::vector<bool>& switch_states,
                           const std::set<int>& outage_line_ids) {
    if (switch_states.size() != g.switches().size())
        throw std::invalid_argument("switch state vector does not cover all switches");
    for (int id : outage_line_ids) g.line_index(id);  // throws on unknown line id

    Matrix adj(g.n(), g.n());
    for (std::size_t li = 0; li < g.lines().size(); ++li) {
        const Line& l = g.lines()[li];
        if (outage_line_ids.count(l.id)) continue;
        int sw = g.switch_of_line(static_cast<int>(li));
        if (sw >= 0 && !switch_states[sw]) continue;
        int a = g.bus_index(l.from_bus);
        int b = g.bus_index(l.to_bus);
        adj(a, b) = 1.0;
        adj(b, a) = 1.0;
    }
    return adj;
}

std::vector<std::vector<int>> islands(const Matrix& adjacency) {
    int n = adjacency.rows();
    std::vector<bool> seen(n, false);
    std::vector<std::vector<int>> comps;
    for (int start = 0; start < n; ++start) {
        if (seen[start]) continue;
        std::vector<int> comp;
        std::deque<int> queue{start};
        seen[start] = true;
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            comp.push_back(u);
            for (int v = 0; v < n; ++v) {
                if (adjacency(u, v) != 0.0 && !seen[v]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

std::vector<int> bfs_distances(const Matrix& adjacency, int source) {
    int n = adjacency.rows();
    std::vector<int> dist(n, -1);
    std::deque<int> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v = 0; v < n; ++v) {
            if (adjacency(u, v) != 0.0 && dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

AdjSubgraph k_hop_subgraph(const Matrix& adjacency, int node, int k) {
    if (node < 0 || node >= adjacency.rows()) throw std::out_of_range("unknown node");
    if (k < 0) throw std::invalid_argument("hop radius must be >= 0");
    std::vector<int> dist = bfs_distances(adjacency, node);
    AdjSubgraph sg;
    for (int v = 0; v < adjacency.rows(); ++v)
        if (dist[v] >= 0 && dist[v] <= k) sg.nodes.push_back(v);
    for (std::size_t a = 0; a < sg.nodes.size(); ++a)
        for (std::size_t b = a + 1; b < sg.nodes.size(); ++b)
            if (adjacency(sg.nodes[a], sg.nodes[b]) != 0.0)
                sg.edges.emplace_back(sg.nodes[a], sg.nodes[b]);
    return sg;
}

int graph_diameter(const Matrix& adjacency) {
    if (adjacency.rows() == 0) throw std::invalid_argument("empty graph");
    auto comps = islands(adjacency);
    const std::vector<int>* largest = &comps.front();
    for (const auto& c : comps)
        if (c.size() > largest->size()) largest = &c;
    int diam = 0;
    for (int u : *largest) {
        std::vector<int> dist = bfs_distances(adjacency, u);
        for (int v : *largest) diam = std::max(diam, dist[v]);
    }
    return diam;
}

}  // namespace gridrl
