#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "pfcert/poly.hpp"

namespace pfcert {

/// Bijection between a list of monomials and positions in the moment vector y.
class MomentIndex {
  public:
    MomentIndex() = default;
    explicit MomentIndex(std::vector<Monomial> monomials);

    int size() const { return static_cast<int>(monos_.size()); }
    const Monomial& monomial(int j) const { return monos_.at(j); }
    const std::vector<Monomial>& monomials() const { return monos_; }
    /// Position of `m`, or -1 when it is not indexed.
    int find(const Monomial& m) const;
    /// Position of `m`; throws std::out_of_range when absent.
    int at(const Monomial& m) const;

  private:
    std::vector<Monomial> monos_;
    std::map<Monomial, int> pos_;
};

/// One term of a symmetric matrix-valued linear map: coef * y[moment] placed at (row, col) and (col, row).
struct PsdEntry {
    int row;
    int col;  // row <= col
    int moment;
    double coef;
};

struct PsdBlock {
    std::string label;
    int dim = 0;
    std::vector<PsdEntry> entries;

    Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;
    /// out[j] += <A_j, Z> for the coefficient matrix A_j of y[j].
    void add_adjoint(const Eigen::MatrixXd& z, Eigen::VectorXd& out) const;
};

/// Find y with eq_matrix * y = eq_rhs and every block(y) PSD.
struct MomentProblem {
    std::vector<std::string> var_names;
    std::vector<int> sign_group;
    MomentIndex index;
    Eigen::SparseMatrix<double, Eigen::RowMajor> eq_matrix;
    Eigen::VectorXd eq_rhs;
    std::vector<std::string> eq_labels;
    std::vector<PsdBlock> blocks;
    int moment_blocks = 1;  // leading blocks that together form L_y(X2)

    int m() const { return index.size(); }
    int nvars() const { return static_cast<int>(var_names.size()); }
    double equality_residual(const Eigen::VectorXd& y) const;
    double min_eigenvalue(const Eigen::VectorXd& y) const;
    std::vector<double> block_min_eigenvalues(const Eigen::VectorXd& y) const;
};

struct RelaxOptions {
    /// Keep only moments even in `sign_group` and split blocks by parity.
    bool exploit_sign_symmetry = false;
};

/// Order-2 moment relaxation. Equalities of degree d are multiplied by every
/// monomial of degree <= 4 - d; inequalities of degree <= 2 give L_y(g X1 X1') >= 0,
/// degree 3-4 give the scalar L_y(g) >= 0. Throws std::invalid_argument on degree overflow.
MomentProblem relax(const PolySystem& sys, const RelaxOptions& opts = {});

/// y_j = monomial_j(x).
Eigen::VectorXd lift_point(const MomentProblem& prob, const Eigen::VectorXd& x);

struct Candidate {
    Eigen::VectorXd x;
    double rank_ratio = 0.0;  // lambda_2 / lambda_1 of the moment matrix
    Eigen::VectorXd moment_eigenvalues;  // descending
};

/// First-order moments as the point; variables in a sign group are read from
/// the leading eigenvector of their second-moment matrix.
Candidate extract_candidate(const MomentProblem& prob, const Eigen::VectorXd& y);

nlohmann::json to_json(const MomentProblem& prob);
MomentProblem moment_problem_from_json(const nlohmann::json& j);

inline constexpr const char* kMomentSchema = "pfcert.moment/1";

}  // namespace pfcert
