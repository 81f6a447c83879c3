#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace pfcert {

using Complex = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown for malformed case text. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, int line);
    int line() const noexcept { return line_; }

  private:
    int line_;
};

/// Thrown when a parsed case violates a structural invariant (slack count,
/// zero-impedance branches, inconsistent limits).
class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class BusKind { Slack, PV, PQ };

std::string_view to_string(BusKind kind);

/// All quantities are per unit on the case MVA base.
struct Bus {
    int index = 0;        // internal, slack is 0
    int external_id = 0;  // bus number in the source case
    BusKind kind = BusKind::PQ;
    double v_set = 1.0;
    double v_min = 0.9;
    double v_max = 1.1;
    double q_min = -kInf;
    double q_max = kInf;
    double p_min = -kInf;
    double p_max = kInf;
    // Nominal net injection (generation minus load) from the case tables.
    double p_nominal = 0.0;
    double q_nominal = 0.0;
    Complex y_shunt{0.0, 0.0};

    bool operator==(const Bus&) const = default;
};

/// Pi-model branch with optional off-nominal tap and phase shift.
struct Branch {
    int from = 0;
    int to = 0;
    Complex y_series{0.0, 0.0};
    Complex y_shunt{0.0, 0.0};  // total line charging, split equally between ends
    double tap = 1.0;
    double shift = 0.0;  // radians
    double flow_limit = kInf;  // bound on |V_from - V_to|

    bool operator==(const Branch&) const = default;
};

struct Network {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    Eigen::MatrixXcd Y;
    Eigen::MatrixXd G;
    Eigen::MatrixXd B;
    std::vector<int> pv;   // internal indices, ascending
    std::vector<int> pq;
    std::vector<int> nsb;  // 1..n
    std::string name;
    std::vector<std::string> warnings;

    /// Number of non-slack buses.
    int n() const { return static_cast<int>(buses.size()) - 1; }
    /// Number of power flow unknowns, |nsb| + |pq|.
    int k() const { return static_cast<int>(nsb.size() + pq.size()); }
    int num_buses() const { return static_cast<int>(buses.size()); }

    /// Internal index of an external bus number; throws ModelError if absent.
    int internal_index(int external_id) const;
    int external_id(int internal) const { return buses.at(internal).external_id; }

    /// Position of bus `i` in the pq list, or -1.
    int pq_position(int i) const;
    /// Index of the branch joining a and b (either orientation), or -1.
    int branch_between(int a, int b) const;
};

/// Complex admittance matrix from bus shunts and pi-model branches.
Eigen::MatrixXcd build_admittance(const std::vector<Bus>& buses, const std::vector<Branch>& branches);

/// Assemble a Network: validates invariants, sorts the index sets and builds Y.
/// `buses` must already be renumbered with the slack at index 0.
Network make_network(std::vector<Bus> buses, std::vector<Branch> branches, double base_mva = 100.0,
                     std::string name = {});

/// Parse MATPOWER `.m` text or native JSON (detected by a leading '{').
/// `default_flow_limit` applies to every branch when the source has none.
Network parse_case(std::string_view text, double default_flow_limit = kInf);
Network parse_matpower(std::string_view text, double default_flow_limit = kInf);
Network parse_native_json(std::string_view text);

/// Read and parse a case file; the format is chosen from the content.
Network load_case(const std::string& path, double default_flow_limit = kInf);

/// Native JSON representation; `parse_native_json(to_json(n).dump())` reproduces `n`.
nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

/// Replace every branch flow limit by `limit`.
Network with_uniform_flow_limit(Network net, double limit);

inline constexpr const char* kNetworkSchema = "pfcert.network/1";

}  // namespace pfcert
