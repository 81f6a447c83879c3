#include "pfcert/netmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>

namespace pfcert {

ParseError::ParseError(const std::string& what, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string_view to_string(BusKind kind) {
    switch (kind) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "pq";
}

namespace {

BusKind kind_from_string(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::PV;
    if (s == "pq") return BusKind::PQ;
    throw ModelError("unknown bus kind '" + s + "'");
}

// MATPOWER table: rows of numbers, each tagged with its source line.
struct Table {
    std::vector<std::vector<double>> rows;
    std::vector<int> lines;
};

struct MatpowerTables {
    std::optional<double> base_mva;
    std::map<std::string, Table> tables;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(std::string_view tok, int line) {
    tok = trim(tok);
    if (tok == "Inf" || tok == "inf") return kInf;
    if (tok == "-Inf" || tok == "-inf") return -kInf;
    double value = 0.0;
    const auto* begin = tok.data();
    const auto* end = tok.data() + tok.size();
    if (!tok.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || tok.empty())
        throw ParseError("malformed number '" + std::string(tok) + "'", line);
    return value;
}

void parse_row_tokens(std::string_view row, int line, Table& table) {
    std::vector<double> values;
    std::string_view rest = row;
    while (!rest.empty()) {
        const auto start = rest.find_first_not_of(" \t\r,");
        if (start == std::string_view::npos) break;
        rest = rest.substr(start);
        const auto stop = rest.find_first_of(" \t\r,");
        values.push_back(parse_number(rest.substr(0, stop), line));
        if (stop == std::string_view::npos) break;
        rest = rest.substr(stop);
    }
    if (!values.empty()) {
        table.rows.push_back(std::move(values));
        table.lines.push_back(line);
    }
}

MatpowerTables scan_matpower(std::string_view text) {
    MatpowerTables out;
    std::optional<std::string> open_table;
    int open_line = 0;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (auto pct = line.find('%'); pct != std::string_view::npos) line = line.substr(0, pct);
        line = trim(line);
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }

        if (open_table) {
            bool closes = false;
            if (auto br = line.find(']'); br != std::string_view::npos) {
                closes = true;
                if (trim(line.substr(br + 1)).find_first_not_of(";") != std::string_view::npos)
                    throw ParseError("unexpected text after ']'", line_no);
                line = line.substr(0, br);
            }
            // A physical line may hold several ';'-separated rows.
            std::size_t rp = 0;
            while (rp <= line.size()) {
                auto semi = line.find(';', rp);
                if (semi == std::string_view::npos) semi = line.size();
                parse_row_tokens(line.substr(rp, semi - rp), line_no, out.tables[*open_table]);
                rp = semi + 1;
            }
            if (closes) open_table.reset();
            continue;
        }

        if (line.starts_with("function")) continue;
        if (!line.starts_with("mpc.")) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected '=' in assignment", line_no);
        const std::string name(trim(line.substr(4, eq - 4)));
        std::string_view rhs = trim(line.substr(eq + 1));
        if (rhs.starts_with("[")) {
            open_table = name;
            open_line = line_no;
            out.tables[name];
            rhs = rhs.substr(1);
            if (!trim(rhs).empty()) {
                // Rows may start on the same line as '['.
                std::string_view body = rhs;
                bool closes = false;
                if (auto br = body.find(']'); br != std::string_view::npos) {
                    closes = true;
                    body = body.substr(0, br);
                }
                std::size_t rp = 0;
                while (rp <= body.size()) {
                    auto semi = body.find(';', rp);
                    if (semi == std::string_view::npos) semi = body.size();
                    parse_row_tokens(body.substr(rp, semi - rp), line_no, out.tables[name]);
                    rp = semi + 1;
                }
                if (closes) open_table.reset();
            }
        } else if (name == "baseMVA") {
            if (rhs.ends_with(";")) rhs = rhs.substr(0, rhs.size() - 1);
            out.base_mva = parse_number(rhs, line_no);
        }
        if (pos > text.size()) break;
    }
    if (open_table) throw ParseError("unterminated table mpc." + *open_table, open_line);
    return out;
}

const Table& require_table(const MatpowerTables& t, const std::string& name, std::size_t min_cols) {
    auto it = t.tables.find(name);
    if (it == t.tables.end()) throw ParseError("missing table mpc." + name, 0);
    for (std::size_t r = 0; r < it->second.rows.size(); ++r) {
        if (it->second.rows[r].size() < min_cols)
            throw ParseError("mpc." + name + " row has " + std::to_string(it->second.rows[r].size()) +
                                 " columns, expected at least " + std::to_string(min_cols),
                             it->second.lines[r]);
    }
    return it->second;
}

bool connected(int nb, const std::vector<Branch>& branches) {
    std::vector<int> parent(nb);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& br : branches) parent[find(br.from)] = find(br.to);
    for (int i = 1; i < nb; ++i)
        if (find(i) != find(0)) return false;
    return true;
}

double json_number(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<double>();
}

nlohmann::json number_or_null(double v) {
    if (std::isinf(v)) return nullptr;
    return v;
}

}  // namespace

int Network::internal_index(int ext) const {
    for (const auto& b : buses)
        if (b.external_id == ext) return b.index;
    throw ModelError("no bus with number " + std::to_string(ext));
}

int Network::pq_position(int i) const {
    auto it = std::lower_bound(pq.begin(), pq.end(), i);
    if (it == pq.end() || *it != i) return -1;
    return static_cast<int>(it - pq.begin());
}

int Network::branch_between(int a, int b) const {
    for (std::size_t e = 0; e < branches.size(); ++e) {
        const auto& br = branches[e];
        if ((br.from == a && br.to == b) || (br.from == b && br.to == a)) return static_cast<int>(e);
    }
    return -1;
}

Eigen::MatrixXcd build_admittance(const std::vector<Bus>& buses, const std::vector<Branch>& branches) {
    const auto nb = static_cast<Eigen::Index>(buses.size());
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(nb, nb);
    for (const auto& b : buses) Y(b.index, b.index) += b.y_shunt;
    for (const auto& br : branches) {
        const Complex t = std::polar(br.tap, br.shift);
        const Complex ytt = br.y_series + 0.5 * br.y_shunt;
        Y(br.to, br.to) += ytt;
        Y(br.from, br.from) += ytt / (br.tap * br.tap);
        Y(br.from, br.to) -= br.y_series / std::conj(t);
        Y(br.to, br.from) -= br.y_series / t;
    }
    return Y;
}

Network make_network(std::vector<Bus> buses, std::vector<Branch> branches, double base_mva, std::string name) {
    if (buses.empty()) throw ModelError("network has no buses");
    int slack_count = 0;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        auto& b = buses[i];
        if (b.index != static_cast<int>(i)) throw ModelError("bus indices must be 0..n in order");
        if (b.kind == BusKind::Slack) {
            ++slack_count;
            if (i != 0) throw ModelError("slack bus must be internal index 0");
        }
        if (b.v_min > b.v_max) throw ModelError("bus " + std::to_string(b.external_id) + ": v_min > v_max");
        if (b.kind == BusKind::PQ && !(b.v_min < b.v_max))
            throw ModelError("bus " + std::to_string(b.external_id) + ": v_min must be below v_max");
        if (b.q_min > b.q_max) throw ModelError("bus " + std::to_string(b.external_id) + ": q_min > q_max");
        if (b.kind != BusKind::PQ && !(b.v_set > 0.0))
            throw ModelError("bus " + std::to_string(b.external_id) + ": voltage set-point must be positive");
    }
    if (slack_count == 0) throw ModelError("no slack bus");
    if (slack_count > 1) throw ModelError("multiple slack buses");

    const int nb = static_cast<int>(buses.size());
    for (std::size_t e = 0; e < branches.size(); ++e) {
        const auto& br = branches[e];
        if (br.from < 0 || br.to < 0 || br.from >= nb || br.to >= nb)
            throw ModelError("branch " + std::to_string(e) + " references an unknown bus");
        if (br.from == br.to) throw ModelError("branch " + std::to_string(e) + " is a self-loop");
        if (!std::isfinite(br.y_series.real()) || !std::isfinite(br.y_series.imag()) || br.y_series == Complex{})
            throw ModelError("branch " + std::to_string(e) + " has zero impedance");
        if (!(br.flow_limit > 0.0)) throw ModelError("branch " + std::to_string(e) + " flow limit must be positive");
        if (!(br.tap > 0.0)) throw ModelError("branch " + std::to_string(e) + " tap ratio must be positive");
        for (std::size_t f = 0; f < e; ++f) {
            const auto& other = branches[f];
            if ((other.from == br.from && other.to == br.to) || (other.from == br.to && other.to == br.from))
                throw ModelError("parallel branches between the same bus pair must be merged");
        }
    }

    Network net;
    net.base_mva = base_mva;
    net.name = std::move(name);
    net.buses = std::move(buses);
    net.branches = std::move(branches);
    net.Y = build_admittance(net.buses, net.branches);
    net.G = net.Y.real();
    net.B = net.Y.imag();
    for (const auto& b : net.buses) {
        if (b.kind == BusKind::PV) net.pv.push_back(b.index);
        if (b.kind == BusKind::PQ) net.pq.push_back(b.index);
        if (b.kind != BusKind::Slack) net.nsb.push_back(b.index);
    }
    if (!connected(nb, net.branches)) net.warnings.emplace_back("network graph is disconnected");
    return net;
}

Network parse_matpower(std::string_view text, double default_flow_limit) {
    const auto t = scan_matpower(text);
    const double base = t.base_mva.value_or(100.0);
    if (!(base > 0.0)) throw ParseError("baseMVA must be positive", 0);
    const auto& bus_t = require_table(t, "bus", 13);
    const auto& gen_t = require_table(t, "gen", 10);
    const auto& br_t = require_table(t, "branch", 11);

    struct GenAgg {
        double pg = 0, qg = 0, qmax = 0, qmin = 0, pmax = 0, pmin = 0;
        double vg = 0;
        int count = 0;
    };
    std::map<int, GenAgg> gens;
    for (std::size_t r = 0; r < gen_t.rows.size(); ++r) {
        const auto& row = gen_t.rows[r];
        if (row[7] <= 0) continue;
        auto& g = gens[static_cast<int>(row[0])];
        g.pg += row[1];
        g.qg += row[2];
        g.qmax += row[3];
        g.qmin += row[4];
        g.pmax += row[8];
        g.pmin += row[9];
        if (g.count == 0) g.vg = row[5];
        ++g.count;
    }

    // Slack first, the rest in file order.
    std::vector<std::size_t> order;
    std::optional<std::size_t> slack_row;
    int slack_count = 0;
    for (std::size_t r = 0; r < bus_t.rows.size(); ++r) {
        const int type = static_cast<int>(bus_t.rows[r][1]);
        if (type == 3) {
            ++slack_count;
            slack_row = r;
        } else if (type == 4) {
            throw ModelError("isolated bus " + std::to_string(static_cast<int>(bus_t.rows[r][0])) + " is not supported");
        } else if (type != 1 && type != 2) {
            throw ParseError("unknown bus type " + std::to_string(type), bus_t.lines[r]);
        }
    }
    if (slack_count == 0) throw ModelError("no slack bus");
    if (slack_count > 1) throw ModelError("multiple slack buses");
    order.push_back(*slack_row);
    for (std::size_t r = 0; r < bus_t.rows.size(); ++r)
        if (r != *slack_row) order.push_back(r);

    std::map<int, int> ext_to_int;
    std::vector<Bus> buses;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& row = bus_t.rows[order[i]];
        Bus b;
        b.index = static_cast<int>(i);
        b.external_id = static_cast<int>(row[0]);
        if (ext_to_int.contains(b.external_id))
            throw ParseError("duplicate bus number " + std::to_string(b.external_id), bus_t.lines[order[i]]);
        ext_to_int[b.external_id] = b.index;
        const int type = static_cast<int>(row[1]);
        const auto git = gens.find(b.external_id);
        const bool has_gen = git != gens.end();
        if (type == 3)
            b.kind = BusKind::Slack;
        else if (type == 2 && has_gen)
            b.kind = BusKind::PV;
        else
            b.kind = BusKind::PQ;
        b.v_set = (has_gen && b.kind != BusKind::PQ) ? git->second.vg : row[7];
        b.v_max = row[11];
        b.v_min = row[12];
        b.y_shunt = Complex(row[4], row[5]) / base;
        const double pg = has_gen ? git->second.pg : 0.0;
        const double qg = has_gen ? git->second.qg : 0.0;
        b.p_nominal = (pg - row[2]) / base;
        b.q_nominal = (qg - row[3]) / base;
        if (b.kind != BusKind::PQ && has_gen) {
            b.q_min = git->second.qmin / base;
            b.q_max = git->second.qmax / base;
        }
        if (b.kind == BusKind::Slack && has_gen) {
            b.p_min = git->second.pmin / base;
            b.p_max = git->second.pmax / base;
        }
        buses.push_back(b);
    }

    std::vector<Branch> branches;
    for (std::size_t r = 0; r < br_t.rows.size(); ++r) {
        const auto& row = br_t.rows[r];
        if (row[10] <= 0) continue;
        const int f = static_cast<int>(row[0]);
        const int to = static_cast<int>(row[1]);
        if (!ext_to_int.contains(f) || !ext_to_int.contains(to))
            throw ParseError("branch references unknown bus", br_t.lines[r]);
        const Complex z(row[2], row[3]);
        if (z == Complex{}) throw ModelError("zero-impedance branch at line " + std::to_string(br_t.lines[r]));
        Branch br;
        br.from = ext_to_int[f];
        br.to = ext_to_int[to];
        br.y_series = 1.0 / z;
        br.y_shunt = Complex(0.0, row[4]);
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        br.shift = row[9] * std::numbers::pi / 180.0;
        br.flow_limit = default_flow_limit;

        bool merged = false;
        for (auto& other : branches) {
            const bool same = (other.from == br.from && other.to == br.to) || (other.from == br.to && other.to == br.from);
            if (!same) continue;
            if (other.tap != 1.0 || br.tap != 1.0 || other.shift != 0.0 || br.shift != 0.0)
                throw ModelError("parallel transformers between the same buses are not supported (line " +
                                 std::to_string(br_t.lines[r]) + ")");
            other.y_series += br.y_series;
            other.y_shunt += br.y_shunt;
            merged = true;
        }
        if (!merged) branches.push_back(br);
    }
    return make_network(std::move(buses), std::move(branches), base);
}

nlohmann::json to_json(const Network& net) {
    nlohmann::json j;
    j["schema_version"] = kNetworkSchema;
    j["name"] = net.name;
    j["base_mva"] = net.base_mva;
    auto& buses = j["buses"] = nlohmann::json::array();
    for (const auto& b : net.buses) {
        buses.push_back({{"index", b.index},
                         {"external_id", b.external_id},
                         {"kind", std::string(to_string(b.kind))},
                         {"v_set", b.v_set},
                         {"v_min", number_or_null(b.v_min)},
                         {"v_max", number_or_null(b.v_max)},
                         {"q_min", number_or_null(b.q_min)},
                         {"q_max", number_or_null(b.q_max)},
                         {"p_min", number_or_null(b.p_min)},
                         {"p_max", number_or_null(b.p_max)},
                         {"p_nominal", b.p_nominal},
                         {"q_nominal", b.q_nominal},
                         {"g_shunt", b.y_shunt.real()},
                         {"b_shunt", b.y_shunt.imag()}});
    }
    auto& branches = j["branches"] = nlohmann::json::array();
    for (const auto& br : net.branches) {
        branches.push_back({{"from", br.from},
                            {"to", br.to},
                            {"g_series", br.y_series.real()},
                            {"b_series", br.y_series.imag()},
                            {"g_shunt", br.y_shunt.real()},
                            {"b_shunt", br.y_shunt.imag()},
                            {"tap", br.tap},
                            {"shift", br.shift},
                            {"flow_limit", number_or_null(br.flow_limit)}});
    }
    return j;
}

Network network_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema_version", std::string{}) != kNetworkSchema)
            throw ParseError("unsupported network schema_version", 0);
        std::vector<Bus> buses;
        for (const auto& jb : j.at("buses")) {
            Bus b;
            b.index = jb.at("index").get<int>();
            b.external_id = jb.at("external_id").get<int>();
            b.kind = kind_from_string(jb.at("kind").get<std::string>());
            b.v_set = jb.at("v_set").get<double>();
            b.v_min = json_number(jb, "v_min", -kInf);
            b.v_max = json_number(jb, "v_max", kInf);
            b.q_min = json_number(jb, "q_min", -kInf);
            b.q_max = json_number(jb, "q_max", kInf);
            b.p_min = json_number(jb, "p_min", -kInf);
            b.p_max = json_number(jb, "p_max", kInf);
            b.p_nominal = json_number(jb, "p_nominal", 0.0);
            b.q_nominal = json_number(jb, "q_nominal", 0.0);
            b.y_shunt = Complex(json_number(jb, "g_shunt", 0.0), json_number(jb, "b_shunt", 0.0));
            buses.push_back(b);
        }
        std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.index < b.index; });
        std::vector<Branch> branches;
        for (const auto& jb : j.at("branches")) {
            Branch br;
            br.from = jb.at("from").get<int>();
            br.to = jb.at("to").get<int>();
            br.y_series = Complex(jb.at("g_series").get<double>(), jb.at("b_series").get<double>());
            br.y_shunt = Complex(json_number(jb, "g_shunt", 0.0), json_number(jb, "b_shunt", 0.0));
            br.tap = json_number(jb, "tap", 1.0);
            br.shift = json_number(jb, "shift", 0.0);
            br.flow_limit = json_number(jb, "flow_limit", kInf);
            branches.push_back(br);
        }
        return make_network(std::move(buses), std::move(branches), j.value("base_mva", 100.0),
                            j.value("name", std::string{}));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid network JSON: ") + e.what(), 0);
    }
}

Network parse_native_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Translate the byte offset into a line number.
        const auto offset = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
        throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    return network_from_json(j);
}

Network parse_case(std::string_view text, double default_flow_limit) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        auto net = parse_native_json(text);
        if (std::isfinite(default_flow_limit))
            for (auto& br : net.branches)
                if (std::isinf(br.flow_limit)) br.flow_limit = default_flow_limit;
        return net;
    }
    return parse_matpower(text, default_flow_limit);
}

Network load_case(const std::string& path, double default_flow_limit) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file '" + path + "'", 0);
    std::stringstream ss;
    ss << in.rdbuf();
    auto net = parse_case(ss.str(), default_flow_limit);
    if (net.name.empty()) {
        auto slash = path.find_last_of('/');
        auto stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
        if (auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
        net.name = stem;
    }
    return net;
}

Network with_uniform_flow_limit(Network net, double limit) {
    for (auto& br : net.branches) br.flow_limit = limit;
    return net;
}

}  // namespace pfcert
