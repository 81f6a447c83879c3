#include "pfcert/poly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pfcert {

Monomial Monomial::var(int i) {
    Monomial m;
    m.idx_[0] = static_cast<std::uint16_t>(i);
    m.deg_ = 1;
    return m;
}

Monomial Monomial::from_indices(std::vector<int> idx) {
    if (idx.size() > kMaxDegree) throw std::length_error("monomial degree exceeds the supported maximum");
    std::sort(idx.begin(), idx.end());
    Monomial m;
    for (std::size_t p = 0; p < idx.size(); ++p) m.idx_[p] = static_cast<std::uint16_t>(idx[p]);
    m.deg_ = static_cast<std::uint8_t>(idx.size());
    return m;
}

int Monomial::exponent(int var) const {
    int e = 0;
    for (int p = 0; p < deg_; ++p) e += idx_[p] == var;
    return e;
}

int Monomial::degree_in(const std::vector<bool>& vars) const {
    int d = 0;
    for (int p = 0; p < deg_; ++p) d += vars[idx_[p]] ? 1 : 0;
    return d;
}

Monomial Monomial::operator*(const Monomial& o) const {
    if (deg_ + o.deg_ > kMaxDegree) throw std::length_error("monomial degree exceeds the supported maximum");
    Monomial m;
    std::merge(idx_.begin(), idx_.begin() + deg_, o.idx_.begin(), o.idx_.begin() + o.deg_, m.idx_.begin());
    m.deg_ = static_cast<std::uint8_t>(deg_ + o.deg_);
    return m;
}

double Monomial::eval(const Eigen::VectorXd& x) const {
    double v = 1.0;
    for (int p = 0; p < deg_; ++p) v *= x(idx_[p]);
    return v;
}

std::string Monomial::str(const std::vector<std::string>& names) const {
    if (deg_ == 0) return "1";
    std::ostringstream os;
    for (int p = 0; p < deg_;) {
        int q = p;
        while (q < deg_ && idx_[q] == idx_[p]) ++q;
        if (p > 0) os << '*';
        if (idx_[p] < names.size())
            os << names[idx_[p]];
        else
            os << 'x' << idx_[p];
        if (q - p > 1) os << '^' << (q - p);
        p = q;
    }
    return os.str();
}

std::vector<Monomial> monomials_up_to(int nvars, int max_degree) {
    std::vector<Monomial> out{Monomial{}};
    std::vector<Monomial> layer{Monomial{}};
    for (int d = 1; d <= max_degree; ++d) {
        std::vector<Monomial> next;
        for (const auto& m : layer) {
            const int start = m.degree() == 0 ? 0 : m[m.degree() - 1];
            for (int v = start; v < nvars; ++v) next.push_back(m * Monomial::var(v));
        }
        out.insert(out.end(), next.begin(), next.end());
        layer = std::move(next);
    }
    return out;
}

Polynomial::Polynomial(double c) {
    if (c != 0.0) terms_[Monomial{}] = c;
}

Polynomial Polynomial::var(int i) { return term(Monomial::var(i), 1.0); }

Polynomial Polynomial::term(const Monomial& m, double c) {
    Polynomial p;
    p.add_term(m, c);
    return p;
}

void Polynomial::add_term(const Monomial& m, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = terms_.emplace(m, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }
}

int Polynomial::degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }

double Polynomial::coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

bool Polynomial::involves(int var) const {
    return std::any_of(terms_.begin(), terms_.end(), [&](const auto& t) { return t.first.contains(var); });
}

std::optional<double> Polynomial::linear_coefficient(int var) const {
    std::optional<double> c;
    const Monomial x = Monomial::var(var);
    for (const auto& [m, v] : terms_) {
        if (!m.contains(var)) continue;
        if (!(m == x)) return std::nullopt;
        c = v;
    }
    return c;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(double c) {
    if (c == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& t : terms_) t.second *= c;
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial p;
    for (const auto& [ma, ca] : a.terms_)
        for (const auto& [mb, cb] : b.terms_) p.add_term(ma * mb, ca * cb);
    return p;
}

Polynomial Polynomial::substitute(int var, const Polynomial& value) const {
    Polynomial out;
    std::vector<Polynomial> powers{Polynomial(1.0)};
    for (const auto& [m, c] : terms_) {
        const int e = m.exponent(var);
        if (e == 0) {
            out.add_term(m, c);
            continue;
        }
        while (static_cast<int>(powers.size()) <= e) powers.push_back(powers.back() * value);
        std::vector<int> rest;
        for (int p = 0; p < m.degree(); ++p)
            if (m[p] != var) rest.push_back(m[p]);
        out += Polynomial::term(Monomial::from_indices(rest), c) * powers[e];
    }
    return out;
}

Polynomial Polynomial::derivative(int var) const {
    Polynomial out;
    for (const auto& [m, c] : terms_) {
        const int e = m.exponent(var);
        if (e == 0) continue;
        std::vector<int> rest;
        bool dropped = false;
        for (int p = 0; p < m.degree(); ++p) {
            if (m[p] == var && !dropped) {
                dropped = true;
                continue;
            }
            rest.push_back(m[p]);
        }
        out.add_term(Monomial::from_indices(rest), c * e);
    }
    return out;
}

Polynomial Polynomial::remap(const std::vector<int>& map) const {
    Polynomial out;
    for (const auto& [m, c] : terms_) {
        std::vector<int> idx;
        for (int p = 0; p < m.degree(); ++p) {
            const int t = map.at(m[p]);
            if (t < 0) throw std::logic_error("remap drops a variable that is still present");
            idx.push_back(t);
        }
        out.add_term(Monomial::from_indices(idx), c);
    }
    return out;
}

std::string Polynomial::str(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(12);
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (!first) os << (c < 0 ? " - " : " + ");
        else if (c < 0) os << '-';
        first = false;
        const double a = std::abs(c);
        if (m.degree() == 0) {
            os << a;
        } else {
            if (a != 1.0) os << a << '*';
            os << m.str(names);
        }
    }
    return os.str();
}

double eval_poly(const Polynomial& p, const Eigen::VectorXd& x) {
    double v = 0.0;
    for (const auto& [m, c] : p.terms()) v += c * m.eval(x);
    return v;
}

int PolySystem::max_degree() const {
    int d = 0;
    for (const auto& p : equalities) d = std::max(d, p.degree());
    for (const auto& p : inequalities) d = std::max(d, p.degree());
    return d;
}

void PolySystem::add_equality(Polynomial p, std::string label) {
    equalities.push_back(std::move(p));
    equality_labels.push_back(std::move(label));
}

void PolySystem::add_inequality(Polynomial p, std::string label) {
    inequalities.push_back(std::move(p));
    inequality_labels.push_back(std::move(label));
}

double PolySystem::equality_residual(const Eigen::VectorXd& x) const {
    double r = 0.0;
    for (const auto& p : equalities) r = std::max(r, std::abs(eval_poly(p, x)));
    return r;
}

double PolySystem::inequality_violation(const Eigen::VectorXd& x) const {
    double r = 0.0;
    for (const auto& p : inequalities) r = std::max(r, -eval_poly(p, x));
    return r;
}

namespace {

nlohmann::json poly_json(const Polynomial& p) {
    auto terms = nlohmann::json::array();
    for (const auto& [m, c] : p.terms()) {
        std::vector<int> idx;
        for (int q = 0; q < m.degree(); ++q) idx.push_back(m[q]);
        terms.push_back({{"vars", idx}, {"coef", c}});
    }
    return terms;
}

}  // namespace

nlohmann::json to_json(const PolySystem& sys) {
    nlohmann::json j;
    j["schema_version"] = "pfcert.polysystem/1";
    j["variables"] = sys.var_names;
    j["sign_group"] = sys.sign_group;
    auto eqs = nlohmann::json::array();
    for (std::size_t i = 0; i < sys.equalities.size(); ++i)
        eqs.push_back({{"label", sys.equality_labels[i]}, {"terms", poly_json(sys.equalities[i])}});
    auto ineqs = nlohmann::json::array();
    for (std::size_t i = 0; i < sys.inequalities.size(); ++i)
        ineqs.push_back({{"label", sys.inequality_labels[i]}, {"terms", poly_json(sys.inequalities[i])}});
    j["equalities"] = eqs;
    j["inequalities"] = ineqs;
    return j;
}

std::vector<std::string> VarLayout::names(const Network& net, const char* aux_name) const {
    std::vector<std::string> out;
    for (int i = 0; i < n_aux; ++i) out.push_back(std::string(aux_name) + std::to_string(i));
    for (int b = 0; b < num_buses; ++b) out.push_back("e" + std::to_string(net.external_id(b)));
    for (int b = 0; b < num_buses; ++b) out.push_back("f" + std::to_string(net.external_id(b)));
    return out;
}

Eigen::VectorXd VarLayout::pack(const Eigen::VectorXd& aux, const Eigen::VectorXcd& v) const {
    Eigen::VectorXd x(size());
    x.head(n_aux) = aux;
    x.segment(n_aux, num_buses) = v.real();
    x.tail(num_buses) = v.imag();
    return x;
}

Eigen::VectorXcd VarLayout::voltages(const Eigen::VectorXd& x) const {
    Eigen::VectorXcd v(num_buses);
    for (int b = 0; b < num_buses; ++b) v(b) = Complex(x(re(b)), x(im(b)));
    return v;
}

Eigen::VectorXd VarLayout::aux_part(const Eigen::VectorXd& x) const { return x.head(n_aux); }

namespace {

// e_a e_b + f_a f_b = Re(V_a conj V_b)
Polynomial re_product(const VarLayout& lay, int a, int b) {
    return Polynomial::var(lay.re(a)) * Polynomial::var(lay.re(b)) +
           Polynomial::var(lay.im(a)) * Polynomial::var(lay.im(b));
}

// f_a e_b - e_a f_b = Im(V_a conj V_b)
Polynomial im_product(const VarLayout& lay, int a, int b) {
    return Polynomial::var(lay.im(a)) * Polynomial::var(lay.re(b)) -
           Polynomial::var(lay.re(a)) * Polynomial::var(lay.im(b));
}

Polynomial magnitude_sq(const VarLayout& lay, int a) { return re_product(lay, a, a); }

}  // namespace

Polynomial active_injection(const Network& net, const VarLayout& lay, int i) {
    Polynomial p;
    for (int j = 0; j < net.num_buses(); ++j) {
        if (net.G(i, j) != 0.0) p += net.G(i, j) * re_product(lay, i, j);
        if (net.B(i, j) != 0.0) p += net.B(i, j) * im_product(lay, i, j);
    }
    return p;
}

Polynomial reactive_injection(const Network& net, const VarLayout& lay, int i) {
    Polynomial q;
    for (int j = 0; j < net.num_buses(); ++j) {
        if (net.G(i, j) != 0.0) q += net.G(i, j) * im_product(lay, i, j);
        if (net.B(i, j) != 0.0) q -= net.B(i, j) * re_product(lay, i, j);
    }
    return q;
}

Polynomial operational_polynomial(const Network& net, const OperationalLimits& lims, const OpConstraint& c,
                                  const VarLayout& lay) {
    switch (c.kind) {
        case ConstraintKind::VoltageMin: return magnitude_sq(lay, c.bus) - c.bound * c.bound;
        case ConstraintKind::VoltageMax: return c.bound * c.bound - magnitude_sq(lay, c.bus);
        case ConstraintKind::Flow: {
            const auto& br = net.branches[c.branch];
            const double f = lims.effective_flow_limit(c.branch);
            const Polynomial de = Polynomial::var(lay.re(br.from)) - Polynomial::var(lay.re(br.to));
            const Polynomial df = Polynomial::var(lay.im(br.from)) - Polynomial::var(lay.im(br.to));
            return f * f - de * de - df * df;
        }
        case ConstraintKind::ReactiveMinPV:
        case ConstraintKind::ReactiveMinSlack: return reactive_injection(net, lay, c.bus) - c.bound;
        case ConstraintKind::ReactiveMaxPV:
        case ConstraintKind::ReactiveMaxSlack: return c.bound - reactive_injection(net, lay, c.bus);
        case ConstraintKind::ActiveMinSlack: return active_injection(net, lay, 0) - c.bound;
        case ConstraintKind::ActiveMaxSlack: return c.bound - active_injection(net, lay, 0);
    }
    return {};
}

namespace {

void add_valid_voltage(PolySystem& sys, const Network& net, const VarLayout& lay) {
    for (int i : net.pv)
        sys.add_equality(magnitude_sq(lay, i) - net.buses[i].v_set * net.buses[i].v_set,
                         "Heq: |V| setpoint (bus " + std::to_string(net.external_id(i)) + ")");
    sys.add_equality(Polynomial::var(lay.re(0)) - net.buses[0].v_set, "Heq: slack Re V");
    sys.add_equality(Polynomial::var(lay.im(0)), "Heq: slack Im V");
}

}  // namespace

PolySystem build_jacobian_system(const Network& net, const OperationalLimits& lims) {
    lims.validate(net);
    const int k = net.k();
    const VarLayout lay{k, net.num_buses()};
    PolySystem sys;
    sys.var_names = lay.names(net, "z");

    const auto qf = jacobian_quadform(net);
    // Entry (r, c) of J_F(V) as a quadratic in (e, f).
    std::vector<Polynomial> entry(static_cast<std::size_t>(k) * k);
    auto at = [&](int r, int c) -> Polynomial& { return entry[static_cast<std::size_t>(r) * k + c]; };
    for (const auto& t : qf.diag) {
        const Polynomial mag = magnitude_sq(lay, t.bus);
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c)
                if (t.delta(r, c) != 0.0) at(r, c) += t.delta(r, c) * mag;
    }
    for (const auto& t : qf.edges) {
        const Polynomial re = re_product(lay, t.i, t.j);
        const Polynomial im = im_product(lay, t.i, t.j);
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c) {
                if (t.gamma(r, c) != 0.0) at(r, c) += t.gamma(r, c) * re;
                if (t.psi(r, c) != 0.0) at(r, c) += t.psi(r, c) * im;
            }
    }
    for (int r = 0; r < k; ++r) {
        Polynomial row;
        for (int c = 0; c < k; ++c)
            if (!at(r, c).is_zero()) row += at(r, c) * Polynomial::var(lay.aux(c));
        sys.add_equality(std::move(row), "J_F(V) z row " + std::to_string(r));
    }
    Polynomial norm(-1.0);
    for (int c = 0; c < k; ++c) norm += Polynomial::var(lay.aux(c)) * Polynomial::var(lay.aux(c));
    sys.add_equality(std::move(norm), "z'z = 1");
    add_valid_voltage(sys, net, lay);

    for (const auto& c : lims.constraints(net)) sys.add_inequality(operational_polynomial(net, lims, c, lay), "Hop: " + c.label);
    for (int c = 0; c < k; ++c) sys.sign_group.push_back(lay.aux(c));
    return sys;
}

PolySystem build_feasibility_system(const Network& net, const OperationalLimits& lims, const RegionSpec& region,
                                    int active_index) {
    lims.validate(net);
    region.validate();
    const int k = net.k();
    if (region.dim() != k) throw std::invalid_argument("region dimension does not match the injection vector");
    const auto cons = lims.constraints(net);
    if (active_index < 0 || active_index >= static_cast<int>(cons.size()))
        throw std::out_of_range("constraint index " + std::to_string(active_index) + " out of range");

    const VarLayout lay{k, net.num_buses()};
    PolySystem sys;
    sys.var_names = lay.names(net, "s");

    sys.add_equality(operational_polynomial(net, lims, cons[active_index], lay), "Hop active: " + cons[active_index].label);
    const int n = net.n();
    for (int i = 1; i <= n; ++i)
        sys.add_equality(active_injection(net, lay, i) - Polynomial::var(lay.aux(i - 1)),
                         "F(V) = s: P (bus " + std::to_string(net.external_id(i)) + ")");
    for (std::size_t p = 0; p < net.pq.size(); ++p)
        sys.add_equality(reactive_injection(net, lay, net.pq[p]) - Polynomial::var(lay.aux(n + static_cast<int>(p))),
                         "F(V) = s: Q (bus " + std::to_string(net.external_id(net.pq[p])) + ")");
    add_valid_voltage(sys, net, lay);

    for (std::size_t c = 0; c < cons.size(); ++c)
        if (static_cast<int>(c) != active_index)
            sys.add_inequality(operational_polynomial(net, lims, cons[c], lay), "Hop: " + cons[c].label);

    if (region.kind == RegionSpec::Kind::Box) {
        for (int r = 0; r < k; ++r) {
            const double lo = region.center(r) - region.delta * region.half_widths(r);
            const double hi = region.center(r) + region.delta * region.half_widths(r);
            sys.add_inequality(Polynomial::var(lay.aux(r)) - lo, "region: s" + std::to_string(r) + " lower");
            sys.add_inequality(hi - Polynomial::var(lay.aux(r)), "region: s" + std::to_string(r) + " upper");
        }
    } else {
        Polynomial g(region.delta * region.delta);
        std::vector<Polynomial> d;
        for (int r = 0; r < k; ++r) d.push_back(Polynomial::var(lay.aux(r)) - region.center(r));
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c)
                if (region.shape(r, c) != 0.0) g -= region.shape(r, c) * (d[r] * d[c]);
        sys.add_inequality(std::move(g), "region: ellipsoid");
    }
    return sys;
}

Eigen::VectorXd ReducedSystem::expand(const Eigen::VectorXd& reduced) const {
    Eigen::VectorXd full(full_nvars);
    for (int v = 0; v < full_nvars; ++v) full(v) = eval_poly(back[v], reduced);
    return full;
}

Eigen::VectorXd ReducedSystem::restrict(const Eigen::VectorXd& full) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) r(static_cast<Eigen::Index>(j)) = full(kept[j]);
    return r;
}

ReducedSystem eliminate_linear(const PolySystem& sys, int max_ineq_degree) {
    const int nv = sys.nvars();
    std::vector<bool> protected_var(nv, false);
    for (int v : sys.sign_group) protected_var[v] = true;

    std::vector<Polynomial> eqs = sys.equalities;
    std::vector<std::string> eq_labels = sys.equality_labels;
    std::vector<Polynomial> ineqs = sys.inequalities;
    std::vector<Polynomial> back;
    for (int v = 0; v < nv; ++v) back.push_back(Polynomial::var(v));
    std::vector<bool> eliminated(nv, false);

    for (std::size_t e = 0; e < eqs.size();) {
        bool done = false;
        for (int v = 0; v < nv && !done; ++v) {
            if (eliminated[v] || protected_var[v]) continue;
            const auto c = eqs[e].linear_coefficient(v);
            if (!c) continue;
            Polynomial rest = eqs[e] - Polynomial::var(v) * *c;
            const Polynomial value = rest * (-1.0 / *c);

            std::vector<Polynomial> new_eqs;
            std::vector<std::string> new_labels;
            bool ok = true;
            for (std::size_t q = 0; q < eqs.size() && ok; ++q) {
                if (q == e) continue;
                Polynomial p = eqs[q].substitute(v, value);
                ok = p.degree() <= 4;
                new_eqs.push_back(std::move(p));
                new_labels.push_back(eq_labels[q]);
            }
            std::vector<Polynomial> new_ineqs;
            for (std::size_t q = 0; q < ineqs.size() && ok; ++q) {
                Polynomial p = ineqs[q].substitute(v, value);
                ok = p.degree() <= max_ineq_degree;
                new_ineqs.push_back(std::move(p));
            }
            if (!ok) continue;
            for (auto& b : back) b = b.substitute(v, value);
            eqs = std::move(new_eqs);
            eq_labels = std::move(new_labels);
            ineqs = std::move(new_ineqs);
            eliminated[v] = true;
            done = true;
        }
        if (!done) ++e;
    }

    ReducedSystem out;
    out.full_nvars = nv;
    std::vector<int> map(nv, -1);
    for (int v = 0; v < nv; ++v) {
        if (eliminated[v]) continue;
        map[v] = static_cast<int>(out.kept.size());
        out.kept.push_back(v);
        out.system.var_names.push_back(sys.var_names[v]);
    }
    for (std::size_t q = 0; q < eqs.size(); ++q) {
        if (eqs[q].is_zero()) continue;
        out.system.add_equality(eqs[q].remap(map), eq_labels[q]);
    }
    for (std::size_t q = 0; q < ineqs.size(); ++q) out.system.add_inequality(ineqs[q].remap(map), sys.inequality_labels[q]);
    for (int v : sys.sign_group) out.system.sign_group.push_back(map[v]);
    for (int v = 0; v < nv; ++v) out.back.push_back(back[v].remap(map));
    return out;
}

}  // namespace pfcert
