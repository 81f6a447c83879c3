#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pfcert/acpf.hpp"
#include "pfcert/region.hpp"

namespace pfcert {

/// Product of variables stored as a sorted multiset of variable indices.
/// Ordering is graded lexicographic: by degree, then by the sorted index list,
/// so x0^2 < x0*x1 < x1^2 and every monomial in x0 alone comes first.
class Monomial {
  public:
    static constexpr int kMaxDegree = 8;

    Monomial() = default;
    static Monomial var(int i);
    static Monomial from_indices(std::vector<int> idx);

    int degree() const { return deg_; }
    int operator[](int pos) const { return idx_[pos]; }
    int exponent(int var) const;
    bool contains(int var) const { return exponent(var) > 0; }
    /// Number of factors drawn from `vars` (with multiplicity).
    int degree_in(const std::vector<bool>& vars) const;

    Monomial operator*(const Monomial& o) const;
    double eval(const Eigen::VectorXd& x) const;
    std::string str(const std::vector<std::string>& names = {}) const;

    friend bool operator==(const Monomial& a, const Monomial& b) { return a.deg_ == b.deg_ && a.idx_ == b.idx_; }
    friend bool operator<(const Monomial& a, const Monomial& b) {
        if (a.deg_ != b.deg_) return a.deg_ < b.deg_;
        return a.idx_ < b.idx_;
    }

  private:
    std::array<std::uint16_t, kMaxDegree> idx_{};
    std::uint8_t deg_ = 0;
};

/// All monomials in `nvars` variables with degree <= max_degree, in graded lex order.
std::vector<Monomial> monomials_up_to(int nvars, int max_degree);

class Polynomial {
  public:
    using Terms = std::map<Monomial, double>;

    Polynomial() = default;
    Polynomial(double c);  // NOLINT: constants convert implicitly
    static Polynomial var(int i);
    static Polynomial term(const Monomial& m, double c);

    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;
    double coeff(const Monomial& m) const;
    bool involves(int var) const;
    /// c when the polynomial is c*x_var + (terms free of x_var) with constant c.
    std::optional<double> linear_coefficient(int var) const;

    Polynomial& operator+=(const Polynomial& o);
    Polynomial& operator-=(const Polynomial& o);
    Polynomial& operator*=(double c);
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
    friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
    friend Polynomial operator*(double c, Polynomial a) { return a *= c; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

    /// Replace x_var by `value`.
    Polynomial substitute(int var, const Polynomial& value) const;
    Polynomial derivative(int var) const;
    /// Renumber variables: index i becomes map[i] (which must be >= 0 for every variable present).
    Polynomial remap(const std::vector<int>& map) const;
    std::string str(const std::vector<std::string>& names = {}) const;

  private:
    void add_term(const Monomial& m, double c);
    Terms terms_;
};

double eval_poly(const Polynomial& p, const Eigen::VectorXd& x);

/// Polynomial equalities p = 0 and inequalities g >= 0 over a common variable vector.
struct PolySystem {
    std::vector<std::string> var_names;
    std::vector<Polynomial> equalities;
    std::vector<std::string> equality_labels;
    std::vector<Polynomial> inequalities;
    std::vector<std::string> inequality_labels;
    /// Variables whose joint sign flip leaves the system invariant (z in the Jacobian system).
    std::vector<int> sign_group;

    int nvars() const { return static_cast<int>(var_names.size()); }
    int max_degree() const;
    void add_equality(Polynomial p, std::string label);
    void add_inequality(Polynomial p, std::string label);

    /// Largest |p(x)| over equalities and largest max(0, -g(x)) over inequalities.
    double equality_residual(const Eigen::VectorXd& x) const;
    double inequality_violation(const Eigen::VectorXd& x) const;
};

nlohmann::json to_json(const PolySystem& sys);

/// Variable stacking (aux, Re V, Im V) where aux is z or s.
struct VarLayout {
    int n_aux = 0;
    int num_buses = 0;

    int aux(int i) const { return i; }
    int re(int bus) const { return n_aux + bus; }
    int im(int bus) const { return n_aux + num_buses + bus; }
    int size() const { return n_aux + 2 * num_buses; }
    std::vector<std::string> names(const Network& net, const char* aux_name) const;
    Eigen::VectorXd pack(const Eigen::VectorXd& aux, const Eigen::VectorXcd& v) const;
    Eigen::VectorXcd voltages(const Eigen::VectorXd& x) const;
    Eigen::VectorXd aux_part(const Eigen::VectorXd& x) const;
};

/// Active and reactive injection at `bus` as quadratics in (Re V, Im V).
Polynomial active_injection(const Network& net, const VarLayout& lay, int bus);
Polynomial reactive_injection(const Network& net, const VarLayout& lay, int bus);
/// h(V) for one operational constraint, matching eval_constraint.
Polynomial operational_polynomial(const Network& net, const OperationalLimits& lims, const OpConstraint& c,
                                  const VarLayout& lay);

/// Find (z, V): J_F(V) z = 0, z'z = 1, H^eq(V) = 0, H^op(V; gamma) >= 0.
/// The gamma in force is `lims.gamma`.
PolySystem build_jacobian_system(const Network& net, const OperationalLimits& lims);
/// Find (s, V): H^op_i(V) = 0, F(V) = s, H^eq(V) = 0, other H^op >= 0, s in region.
/// Throws std::out_of_range on an invalid constraint index.
PolySystem build_feasibility_system(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                    int active_index);

/// Result of eliminating variables that some equality pins down linearly.
struct ReducedSystem {
    PolySystem system;
    int full_nvars = 0;
    std::vector<int> kept;  // kept[j] = original index of reduced variable j
    /// Original variable expressed in reduced variables, one per original variable.
    std::vector<Polynomial> back;

    Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const;
    Eigen::VectorXd restrict(const Eigen::VectorXd& full) const;
};

/// Substitute x_v = -q/c for every equality c*x_v + q = 0 with q free of x_v, as long as
/// no inequality exceeds `max_ineq_degree` and no equality exceeds 4 afterwards.
ReducedSystem eliminate_linear(const PolySystem& sys, int max_ineq_degree = 2);

}  // namespace pfcert
