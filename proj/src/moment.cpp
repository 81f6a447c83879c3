#include "pfcert/moment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pfcert {

MomentIndex::MomentIndex(std::vector<Monomial> monomials) : monos_(std::move(monomials)) {
    for (std::size_t j = 0; j < monos_.size(); ++j) {
        if (!pos_.emplace(monos_[j], static_cast<int>(j)).second)
            throw std::invalid_argument("duplicate monomial in moment index");
    }
}

int MomentIndex::find(const Monomial& m) const {
    auto it = pos_.find(m);
    return it == pos_.end() ? -1 : it->second;
}

int MomentIndex::at(const Monomial& m) const {
    const int j = find(m);
    if (j < 0) throw std::out_of_range("monomial " + m.str() + " is not in the moment index");
    return j;
}

Eigen::MatrixXd PsdBlock::evaluate(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& e : entries) {
        a(e.row, e.col) += e.coef * y(e.moment);
        if (e.row != e.col) a(e.col, e.row) += e.coef * y(e.moment);
    }
    return a;
}

void PsdBlock::add_adjoint(const Eigen::MatrixXd& z, Eigen::VectorXd& out) const {
    for (const auto& e : entries) out(e.moment) += e.coef * (e.row == e.col ? z(e.row, e.row) : 2.0 * z(e.row, e.col));
}

double MomentProblem::equality_residual(const Eigen::VectorXd& y) const {
    if (eq_matrix.rows() == 0) return 0.0;
    return (eq_matrix * y - eq_rhs).lpNorm<Eigen::Infinity>();
}

std::vector<double> MomentProblem::block_min_eigenvalues(const Eigen::VectorXd& y) const {
    std::vector<double> out;
    for (const auto& b : blocks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.evaluate(y), Eigen::EigenvaluesOnly);
        out.push_back(es.eigenvalues()(0));
    }
    return out;
}

double MomentProblem::min_eigenvalue(const Eigen::VectorXd& y) const {
    const auto e = block_min_eigenvalues(y);
    return e.empty() ? 0.0 : *std::min_element(e.begin(), e.end());
}

namespace {

struct Parity {
    std::vector<bool> group;
    bool active = false;

    int of(const Monomial& m) const { return active ? m.degree_in(group) % 2 : 0; }

    // Common parity of all terms, or -1 when mixed.
    int of(const Polynomial& p) const {
        int par = -2;
        for (const auto& [m, c] : p.terms()) {
            const int q = of(m);
            if (par == -2) par = q;
            else if (par != q) return -1;
        }
        return par < 0 ? 0 : par;
    }
};

std::vector<std::vector<Monomial>> split_basis(const std::vector<Monomial>& basis, const Parity& par) {
    if (!par.active) return {basis};
    std::vector<Monomial> even, odd;
    for (const auto& m : basis) (par.of(m) == 0 ? even : odd).push_back(m);
    std::vector<std::vector<Monomial>> out{even};
    if (!odd.empty()) out.push_back(odd);
    return out;
}

PsdBlock localizer(const Polynomial& g, const std::vector<Monomial>& basis, const MomentIndex& index, std::string label) {
    PsdBlock b;
    b.label = std::move(label);
    b.dim = static_cast<int>(basis.size());
    for (int r = 0; r < b.dim; ++r)
        for (int c = r; c < b.dim; ++c) {
            const Monomial uv = basis[r] * basis[c];
            for (const auto& [m, coef] : g.terms()) b.entries.push_back({r, c, index.at(m * uv), coef});
        }
    return b;
}

}  // namespace

MomentProblem relax(const PolySystem& sys, const RelaxOptions& opts) {
    constexpr int kOrder = 2;
    constexpr int kDegree = 2 * kOrder;
    const int nv = sys.nvars();

    Parity par;
    par.group.assign(nv, false);
    par.active = opts.exploit_sign_symmetry && !sys.sign_group.empty();
    for (int v : sys.sign_group) par.group.at(v) = true;

    for (std::size_t i = 0; i < sys.equalities.size(); ++i) {
        if (sys.equalities[i].degree() > kDegree)
            throw std::invalid_argument("equality '" + sys.equality_labels[i] + "' exceeds degree 4");
        if (par.active && par.of(sys.equalities[i]) < 0)
            throw std::invalid_argument("equality '" + sys.equality_labels[i] + "' breaks the sign symmetry");
    }
    for (std::size_t i = 0; i < sys.inequalities.size(); ++i) {
        if (sys.inequalities[i].degree() > kDegree)
            throw std::invalid_argument("inequality '" + sys.inequality_labels[i] + "' exceeds degree 4");
        if (par.active && par.of(sys.inequalities[i]) != 0)
            throw std::invalid_argument("inequality '" + sys.inequality_labels[i] + "' breaks the sign symmetry");
    }

    MomentProblem prob;
    prob.var_names = sys.var_names;
    if (par.active) prob.sign_group = sys.sign_group;

    std::vector<Monomial> all = monomials_up_to(nv, kDegree);
    if (par.active) std::erase_if(all, [&](const Monomial& m) { return par.of(m) != 0; });
    prob.index = MomentIndex(std::move(all));
    const int m = prob.m();

    // Equality rows: y_1 = 1, then every equality times every admissible multiplier.
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> rhs;
    trip.emplace_back(0, prob.index.at(Monomial{}), 1.0);
    rhs.push_back(1.0);
    prob.eq_labels.push_back("y_1 = 1");
    for (std::size_t i = 0; i < sys.equalities.size(); ++i) {
        const Polynomial& p = sys.equalities[i];
        if (p.is_zero()) continue;
        const int pp = par.of(p);
        for (const auto& mult : monomials_up_to(nv, kDegree - p.degree())) {
            if (par.active && par.of(mult) != pp) continue;
            const int row = static_cast<int>(rhs.size());
            for (const auto& [mono, coef] : p.terms()) trip.emplace_back(row, prob.index.at(mono * mult), coef);
            rhs.push_back(0.0);
            prob.eq_labels.push_back(sys.equality_labels[i] + " * " + mult.str(sys.var_names));
        }
    }
    prob.eq_matrix.resize(static_cast<Eigen::Index>(rhs.size()), m);
    prob.eq_matrix.setFromTriplets(trip.begin(), trip.end());
    prob.eq_rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

    const auto x2 = split_basis(monomials_up_to(nv, kOrder), par);
    for (std::size_t part = 0; part < x2.size(); ++part)
        prob.blocks.push_back(localizer(Polynomial(1.0), x2[part], prob.index,
                                        part == 0 ? "moment matrix" : "moment matrix (odd)"));
    prob.moment_blocks = static_cast<int>(x2.size());

    const auto x1 = split_basis(monomials_up_to(nv, 1), par);
    for (std::size_t i = 0; i < sys.inequalities.size(); ++i) {
        const Polynomial& g = sys.inequalities[i];
        const std::string& label = sys.inequality_labels[i];
        if (g.degree() <= kDegree - 2) {
            for (std::size_t part = 0; part < x1.size(); ++part)
                prob.blocks.push_back(localizer(g, x1[part], prob.index, part == 0 ? label : label + " (odd)"));
        } else {
            prob.blocks.push_back(localizer(g, {Monomial{}}, prob.index, label));
        }
    }
    return prob;
}

Eigen::VectorXd lift_point(const MomentProblem& prob, const Eigen::VectorXd& x) {
    if (x.size() != prob.nvars()) throw std::invalid_argument("point dimension does not match the moment problem");
    Eigen::VectorXd y(prob.m());
    for (int j = 0; j < prob.m(); ++j) y(j) = prob.index.monomial(j).eval(x);
    return y;
}

Candidate extract_candidate(const MomentProblem& prob, const Eigen::VectorXd& y) {
    Candidate out;
    const int nv = prob.nvars();
    out.x = Eigen::VectorXd::Zero(nv);
    std::vector<bool> in_group(nv, false);
    for (int v : prob.sign_group) in_group[v] = true;
    for (int v = 0; v < nv; ++v) {
        const int j = prob.index.find(Monomial::var(v));
        if (j >= 0) out.x(v) = y(j);
    }
    if (!prob.sign_group.empty()) {
        const int g = static_cast<int>(prob.sign_group.size());
        Eigen::MatrixXd second(g, g);
        for (int a = 0; a < g; ++a)
            for (int b = 0; b < g; ++b)
                second(a, b) = y(prob.index.at(Monomial::var(prob.sign_group[a]) * Monomial::var(prob.sign_group[b])));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second);
        const Eigen::VectorXd lead = es.eigenvectors().col(g - 1) * std::sqrt(std::max(0.0, es.eigenvalues()(g - 1)));
        for (int a = 0; a < g; ++a) out.x(prob.sign_group[a]) = lead(a);
    }

    std::vector<double> eig;
    for (int b = 0; b < prob.moment_blocks && b < static_cast<int>(prob.blocks.size()); ++b) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prob.blocks[b].evaluate(y), Eigen::EigenvaluesOnly);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) eig.push_back(es.eigenvalues()(i));
    }
    std::sort(eig.begin(), eig.end(), std::greater<>());
    out.moment_eigenvalues = Eigen::Map<const Eigen::VectorXd>(eig.data(), static_cast<Eigen::Index>(eig.size()));
    if (eig.size() >= 2 && eig[0] > 0.0) out.rank_ratio = std::max(0.0, eig[1]) / eig[0];
    return out;
}

nlohmann::json to_json(const MomentProblem& prob) {
    nlohmann::json j;
    j["schema_version"] = kMomentSchema;
    j["variables"] = prob.var_names;
    j["sign_group"] = prob.sign_group;
    auto moments = nlohmann::json::array();
    for (const auto& mono : prob.index.monomials()) {
        std::vector<int> idx;
        for (int p = 0; p < mono.degree(); ++p) idx.push_back(mono[p]);
        moments.push_back(idx);
    }
    j["moments"] = moments;
    auto trip = nlohmann::json::array();
    for (int r = 0; r < prob.eq_matrix.outerSize(); ++r)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(prob.eq_matrix, r); it; ++it)
            trip.push_back({r, it.col(), it.value()});
    j["equalities"] = {{"rows", prob.eq_matrix.rows()},
                       {"triplets", trip},
                       {"rhs", std::vector<double>(prob.eq_rhs.data(), prob.eq_rhs.data() + prob.eq_rhs.size())},
                       {"labels", prob.eq_labels}};
    auto blocks = nlohmann::json::array();
    for (const auto& b : prob.blocks) {
        auto entries = nlohmann::json::array();
        for (const auto& e : b.entries) entries.push_back({e.row, e.col, e.moment, e.coef});
        blocks.push_back({{"label", b.label}, {"dim", b.dim}, {"entries", entries}});
    }
    j["blocks"] = blocks;
    j["moment_blocks"] = prob.moment_blocks;
    return j;
}

MomentProblem moment_problem_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", "") != kMomentSchema)
        throw std::invalid_argument("unsupported moment problem schema");
    MomentProblem prob;
    prob.var_names = j.at("variables").get<std::vector<std::string>>();
    prob.sign_group = j.at("sign_group").get<std::vector<int>>();
    std::vector<Monomial> monos;
    for (const auto& idx : j.at("moments")) monos.push_back(Monomial::from_indices(idx.get<std::vector<int>>()));
    prob.index = MomentIndex(std::move(monos));
    const auto& eq = j.at("equalities");
    const auto rhs = eq.at("rhs").get<std::vector<double>>();
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& t : eq.at("triplets")) trip.emplace_back(t[0].get<int>(), t[1].get<int>(), t[2].get<double>());
    prob.eq_matrix.resize(eq.at("rows").get<Eigen::Index>(), prob.m());
    prob.eq_matrix.setFromTriplets(trip.begin(), trip.end());
    prob.eq_rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    prob.eq_labels = eq.value("labels", std::vector<std::string>{});
    for (const auto& bj : j.at("blocks")) {
        PsdBlock b;
        b.label = bj.value("label", "");
        b.dim = bj.at("dim").get<int>();
        for (const auto& e : bj.at("entries"))
            b.entries.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>(), e[3].get<double>()});
        prob.blocks.push_back(std::move(b));
    }
    prob.moment_blocks = j.value("moment_blocks", 1);
    return prob;
}

}  // namespace pfcert
