#include "pfcert/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace pfcert {

ConicOptions ConicOptions::from_env() {
    ConicOptions o;
    if (const char* v = std::getenv("PFCERT_MAX_ITER")) {
        const int n = std::atoi(v);
        if (n > 0) o.max_iter = n;
    }
    return o;
}

std::string_view to_string(ConicStatus s) {
    switch (s) {
        case ConicStatus::Feasible: return "feasible";
        case ConicStatus::Infeasible: return "infeasible";
        case ConicStatus::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

double min_eig(const Mat& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(a), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

Vec adjoint(const MomentProblem& prob, const std::vector<Mat>& z) {
    Vec out = Vec::Zero(prob.m());
    for (std::size_t k = 0; k < prob.blocks.size(); ++k) prob.blocks[k].add_adjoint(sym(z[k]), out);
    return out;
}

}  // namespace

CertificateCheck check_certificate(const MomentProblem& prob, const InfeasCertificate& cert) {
    CertificateCheck chk;
    chk.residual = kNaN;
    chk.min_eig = kNaN;
    if (cert.mu.size() != prob.eq_matrix.rows() || cert.z.size() != prob.blocks.size()) return chk;
    for (std::size_t k = 0; k < prob.blocks.size(); ++k)
        if (cert.z[k].rows() != prob.blocks[k].dim || cert.z[k].cols() != prob.blocks[k].dim) return chk;
    chk.shapes_ok = true;
    chk.gap = prob.eq_rhs.dot(cert.mu);
    const Vec r = Vec(prob.eq_matrix.transpose() * cert.mu) + adjoint(prob, cert.z);
    double me = std::numeric_limits<double>::infinity();
    for (const auto& z : cert.z) me = std::min(me, min_eig(z));
    if (cert.z.empty()) me = 0.0;
    if (chk.gap > 0.0) {
        chk.residual = (r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0) / chk.gap;
        chk.min_eig = me / chk.gap;
    }
    return chk;
}

bool verify_certificate(const MomentProblem& prob, const InfeasCertificate& cert, double eps_psd, double eps_res) {
    const auto chk = check_certificate(prob, cert);
    return chk.shapes_ok && chk.gap > 0.0 && std::isfinite(chk.gap) && chk.residual <= eps_res &&
           chk.min_eig >= -eps_psd;
}

namespace {

// Conic program in the form: min c'x  s.t.  A x = b,  C_k + F_k(x) >= 0 (PSD).
struct ConeBlock {
    int dim = 0;
    std::vector<PsdEntry> entries;  // moment field is the x index
    Mat constant;
};

struct ConeProgram {
    int n = 0;
    Vec c;
    Mat a;
    Vec b;
    std::vector<ConeBlock> blocks;
};

Mat apply_f(const ConeBlock& blk, const Vec& x) {
    Mat m = Mat::Zero(blk.dim, blk.dim);
    for (const auto& e : blk.entries) {
        const double v = e.coef * x(e.moment);
        m(e.row, e.col) += v;
        if (e.row != e.col) m(e.col, e.row) += v;
    }
    return m;
}

void add_f_adjoint(const ConeBlock& blk, const Mat& z, Vec& out) {
    for (const auto& e : blk.entries) out(e.moment) += e.coef * (e.row == e.col ? z(e.row, e.row) : 2.0 * z(e.row, e.col));
}

// H_ij = sum_k tr(F_ki T_k F_kj T_k).
Mat schur_matrix(const ConeProgram& p, const std::vector<Mat>& t) {
    Mat h = Mat::Zero(p.n, p.n);
    for (std::size_t k = 0; k < p.blocks.size(); ++k) {
        const auto& ent = p.blocks[k].entries;
        const Mat& tk = t[k];
        const std::size_t ne = ent.size();
        for (std::size_t i = 0; i < ne; ++i) {
            const auto& e1 = ent[i];
            const double w1 = (e1.row == e1.col ? 0.5 : 1.0) * e1.coef * 2.0;
            for (std::size_t j = i; j < ne; ++j) {
                const auto& e2 = ent[j];
                const double w2 = (e2.row == e2.col ? 0.5 : 1.0) * e2.coef;
                const double v = w1 * w2 *
                                 (tk(e1.col, e2.row) * tk(e2.col, e1.row) + tk(e1.col, e2.col) * tk(e2.row, e1.row));
                h(e1.moment, e2.moment) += v;
                if (j != i) h(e2.moment, e1.moment) += v;
            }
        }
    }
    return h;
}

// Solves [H A'; A 0] [x; y] = [r1; r2] with H positive definite.
class SaddleSolver {
  public:
    bool factor(const Mat& h, const Mat& a) {
        h_ = &h;
        a_ = &a;
        const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
        for (double reg = 1e-14; reg <= 1e-6; reg *= 100.0) {
            Mat hr = h;
            hr.diagonal().array() += reg * scale;
            llt_.compute(hr);
            if (llt_.info() != Eigen::Success) continue;
            if (a.rows() == 0) return true;
            Mat l_inv_at = llt_.matrixL().solve(a.transpose());
            Mat s = l_inv_at.transpose() * l_inv_at;
            const double sscale = std::max(1e-300, s.diagonal().cwiseAbs().maxCoeff());
            s.diagonal().array() += 1e-14 * sscale;
            schur_.compute(s);
            if (schur_.info() == Eigen::Success) return true;
        }
        return false;
    }

    void solve(const Vec& r1, const Vec& r2, Vec& x, Vec& y) const {
        raw_solve(r1, r2, x, y);
        for (int it = 0; it < 2; ++it) {
            const Vec e1 = r1 - (*h_) * x - (a_->rows() ? Vec(a_->transpose() * y) : Vec::Zero(x.size()));
            const Vec e2 = a_->rows() ? Vec(r2 - (*a_) * x) : Vec();
            Vec dx, dy;
            raw_solve(e1, e2, dx, dy);
            x += dx;
            if (a_->rows()) y += dy;
        }
    }

  private:
    void raw_solve(const Vec& r1, const Vec& r2, Vec& x, Vec& y) const {
        if (a_->rows() == 0) {
            x = llt_.solve(r1);
            y = Vec();
            return;
        }
        const Vec u = llt_.solve(r1);
        y = schur_.solve((*a_) * u - r2);
        x = llt_.solve(r1 - a_->transpose() * y);
    }

    const Mat* h_ = nullptr;
    const Mat* a_ = nullptr;
    Eigen::LLT<Mat> llt_;
    Eigen::LLT<Mat> schur_;
};

struct Scaling {
    Mat r;      // W^T u = R u R'
    Mat r_inv;  // W^{-T} s = R^{-1} s R^{-T}
    Mat t;      // (R R')^{-1}
    Vec lambda;
};

bool nt_scaling(const Mat& s, const Mat& z, Scaling& out) {
    Eigen::LLT<Mat> ls(s), lz(z);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Mat lsm = ls.matrixL();
    const Mat lzm = lz.matrixL();
    Eigen::BDCSVD<Mat> svd(lzm.transpose() * lsm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec sig = svd.singularValues();
    if ((sig.array() <= 0.0).any() || !sig.allFinite()) return false;
    const Vec sq = sig.cwiseSqrt();
    out.lambda = sig;
    out.r = lsm * svd.matrixV() * sq.cwiseInverse().asDiagonal();
    out.r_inv = sq.cwiseInverse().asDiagonal() * svd.matrixU().transpose() * lzm.transpose();
    const Mat lu = lzm * svd.matrixU();
    out.t = lu * sig.cwiseInverse().asDiagonal() * lu.transpose();
    return true;
}

// Largest alpha with diag(lambda) + alpha*d >= 0.
double max_step(const Vec& lambda, const Mat& d) {
    const Vec il = lambda.cwiseSqrt().cwiseInverse();
    const Mat m = il.asDiagonal() * sym(d) * il.asDiagonal();
    const double ev = min_eig(m);
    return ev < 0.0 ? -1.0 / ev : std::numeric_limits<double>::infinity();
}

// X with (Lambda X + X Lambda)/2 = r.
Mat jordan_solve(const Vec& lambda, const Mat& r) {
    Mat x(r.rows(), r.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = 0; j < r.cols(); ++j) x(i, j) = 2.0 * r(i, j) / (lambda(i) + lambda(j));
    return x;
}

struct HsdeState {
    Vec x, y;
    std::vector<Mat> s, z;
    double tau = 1.0, kappa = 1.0;
};

struct Direction {
    Vec dx, dy;
    std::vector<Mat> ds_scaled, dz_scaled, dz;
    double dtau = 0.0, dkappa = 0.0;
};

// Homogeneous self-dual interior point method with NT scaling.
class Hsde {
  public:
    explicit Hsde(const ConeProgram& p) : p_(p) {
        for (const auto& b : p.blocks) nu_ += b.dim;
    }

    bool initialize() {
        const std::size_t nb = p_.blocks.size();
        std::vector<Mat> ident(nb);
        for (std::size_t k = 0; k < nb; ++k) ident[k] = Mat::Identity(p_.blocks[k].dim, p_.blocks[k].dim);
        h0_ = schur_matrix(p_, ident);
        SaddleSolver kkt;
        if (!kkt.factor(h0_, p_.a)) return false;

        Vec gth = Vec::Zero(p_.n);
        for (std::size_t k = 0; k < nb; ++k) add_f_adjoint(p_.blocks[k], p_.blocks[k].constant, gth);
        Vec x, y;
        kkt.solve(-gth, p_.b, x, y);
        st_.x = x;
        st_.s.resize(nb);
        for (std::size_t k = 0; k < nb; ++k) st_.s[k] = p_.blocks[k].constant + apply_f(p_.blocks[k], x);
        shift_interior(st_.s);

        kkt.solve(-p_.c, Vec::Zero(p_.a.rows()), x, y);
        st_.y = y;
        st_.z.resize(nb);
        for (std::size_t k = 0; k < nb; ++k) st_.z[k] = -apply_f(p_.blocks[k], x);
        shift_interior(st_.z);
        st_.tau = st_.kappa = 1.0;
        return true;
    }

    const HsdeState& state() const { return st_; }
    double mu() const {
        double g = st_.tau * st_.kappa;
        for (std::size_t k = 0; k < st_.s.size(); ++k) g += (st_.s[k].cwiseProduct(st_.z[k])).sum();
        return g / (nu_ + 1);
    }
    double last_step() const { return step_; }

    // One predictor-corrector iteration; false on numerical breakdown.
    bool iterate() {
        const std::size_t nb = p_.blocks.size();
        sc_.resize(nb);
        std::vector<Mat> t(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            if (!nt_scaling(st_.s[k], st_.z[k], sc_[k])) return false;
            t[k] = sc_[k].t;
        }
        h_ = schur_matrix(p_, t);
        if (!kkt_.factor(h_, p_.a)) return false;

        // Residuals of the embedding.
        r1_ = p_.a.transpose() * st_.y + p_.c * st_.tau;
        for (std::size_t k = 0; k < nb; ++k) add_f_adjoint(p_.blocks[k], -st_.z[k], r1_);
        r2_ = -p_.a * st_.x + p_.b * st_.tau;
        r3_.resize(nb);
        for (std::size_t k = 0; k < nb; ++k)
            r3_[k] = apply_f(p_.blocks[k], st_.x) + p_.blocks[k].constant * st_.tau - st_.s[k];
        double hz = 0.0;
        for (std::size_t k = 0; k < nb; ++k) hz += p_.blocks[k].constant.cwiseProduct(st_.z[k]).sum();
        r4_ = -p_.c.dot(st_.x) - p_.b.dot(st_.y) - hz - st_.kappa;

        // Direction for the tau column.
        std::vector<Mat> bz1(nb);
        for (std::size_t k = 0; k < nb; ++k) bz1[k] = p_.blocks[k].constant;
        kkt_solve(-p_.c, p_.b, bz1, x1_, y1_, z1_);

        const double mu0 = mu();
        std::vector<Mat> rc(nb);
        for (std::size_t k = 0; k < nb; ++k) rc[k] = -Mat(sc_[k].lambda.cwiseAbs2().asDiagonal());
        Direction aff;
        if (!direction(1.0, rc, -st_.tau * st_.kappa, aff)) return false;
        const double a_aff = std::min(1.0, step_length(aff));
        const double sigma = std::pow(1.0 - a_aff, 3);

        for (std::size_t k = 0; k < nb; ++k) {
            const Mat prod = 0.5 * (aff.ds_scaled[k] * aff.dz_scaled[k] + aff.dz_scaled[k] * aff.ds_scaled[k]);
            rc[k] = -Mat(sc_[k].lambda.cwiseAbs2().asDiagonal()) - prod;
            rc[k].diagonal().array() += sigma * mu0;
        }
        const double rct = -st_.tau * st_.kappa + sigma * mu0 - aff.dtau * aff.dkappa;
        Direction d;
        if (!direction(1.0 - sigma, rc, rct, d)) return false;
        step_ = std::min(1.0, 0.99 * step_length(d));

        st_.x += step_ * d.dx;
        st_.y += step_ * d.dy;
        for (std::size_t k = 0; k < nb; ++k) {
            st_.s[k] = sym(st_.s[k] + step_ * sc_[k].r * d.ds_scaled[k] * sc_[k].r.transpose());
            st_.z[k] = sym(st_.z[k] + step_ * d.dz[k]);
        }
        st_.tau += step_ * d.dtau;
        st_.kappa += step_ * d.dkappa;
        return std::isfinite(st_.tau) && std::isfinite(st_.kappa) && st_.x.allFinite();
    }

  private:
    void shift_interior(std::vector<Mat>& v) const {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& m : v) lo = std::min(lo, min_eig(m));
        if (v.empty()) return;
        const double a = -lo;
        if (a >= -1e-8) {
            for (auto& m : v) m.diagonal().array() += 1.0 + a;
        }
    }

    void kkt_solve(const Vec& bx, const Vec& by, const std::vector<Mat>& bz, Vec& dx, Vec& dy,
                   std::vector<Mat>& dz) const {
        const std::size_t nb = p_.blocks.size();
        // r1 = bx + G'(T bz T) with G = -F.
        Vec r1 = bx;
        for (std::size_t k = 0; k < nb; ++k) add_f_adjoint(p_.blocks[k], -(sc_[k].t * bz[k] * sc_[k].t), r1);
        kkt_.solve(r1, by, dx, dy);
        dz.resize(nb);
        for (std::size_t k = 0; k < nb; ++k) dz[k] = sc_[k].t * (-apply_f(p_.blocks[k], dx) - bz[k]) * sc_[k].t;
    }

    bool direction(double eta, const std::vector<Mat>& rc, double rct, Direction& d) {
        const std::size_t nb = p_.blocks.size();
        std::vector<Mat> lrc(nb), bz(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            lrc[k] = jordan_solve(sc_[k].lambda, rc[k]);
            bz[k] = eta * r3_[k] - sc_[k].r * lrc[k] * sc_[k].r.transpose();
        }
        Vec x2, y2;
        std::vector<Mat> z2;
        kkt_solve(-eta * r1_, eta * r2_, bz, x2, y2, z2);

        double hz1 = 0.0, hz2 = 0.0;
        for (std::size_t k = 0; k < nb; ++k) {
            hz1 += p_.blocks[k].constant.cwiseProduct(z1_[k]).sum();
            hz2 += p_.blocks[k].constant.cwiseProduct(z2[k]).sum();
        }
        const double den = st_.kappa / st_.tau - p_.c.dot(x1_) - p_.b.dot(y1_) - hz1;
        if (!(den > 0.0) || !std::isfinite(den)) return false;
        d.dtau = (-eta * r4_ + rct / st_.tau + p_.c.dot(x2) + p_.b.dot(y2) + hz2) / den;
        d.dx = x2 + d.dtau * x1_;
        d.dy = y2 + d.dtau * y1_;
        d.dz.resize(nb);
        d.dz_scaled.resize(nb);
        d.ds_scaled.resize(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            d.dz[k] = z2[k] + d.dtau * z1_[k];
            d.dz_scaled[k] = sym(sc_[k].r.transpose() * d.dz[k] * sc_[k].r);
            d.ds_scaled[k] = lrc[k] - d.dz_scaled[k];
        }
        d.dkappa = (rct - st_.kappa * d.dtau) / st_.tau;
        return d.dx.allFinite() && std::isfinite(d.dtau);
    }

    double step_length(const Direction& d) const {
        double a = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < p_.blocks.size(); ++k) {
            a = std::min(a, max_step(sc_[k].lambda, d.ds_scaled[k]));
            a = std::min(a, max_step(sc_[k].lambda, d.dz_scaled[k]));
        }
        if (d.dtau < 0.0) a = std::min(a, -st_.tau / d.dtau);
        if (d.dkappa < 0.0) a = std::min(a, -st_.kappa / d.dkappa);
        return a;
    }

    const ConeProgram& p_;
    int nu_ = 0;
    HsdeState st_;
    std::vector<Scaling> sc_;
    Mat h0_, h_;
    SaddleSolver kkt_;
    Vec r1_, r2_, x1_, y1_;
    std::vector<Mat> r3_, z1_;
    double r4_ = 0.0;
    double step_ = 0.0;
};

// Equality rows after scaling and removal of dependent rows.
struct Presolved {
    Mat a;                  // independent scaled rows
    Vec b;
    std::vector<int> rows;  // original row of each kept row
    Vec scale;              // original row r is multiplied by scale(r)
    bool consistent = true;
    Vec farkas;             // multiplier proving inconsistency (original rows)
    Eigen::LLT<Mat> aat;    // factorization of a a'
};

Presolved presolve(const MomentProblem& prob) {
    Presolved pre;
    const Mat e = Mat(prob.eq_matrix);
    const Eigen::Index rows = e.rows();
    pre.scale = Vec::Ones(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double nrm = e.row(r).norm();
        if (nrm > 0.0) pre.scale(r) = 1.0 / nrm;
    }
    const Mat es = pre.scale.asDiagonal() * e;
    const Vec bs = pre.scale.cwiseProduct(prob.eq_rhs);
    if (rows == 0) {
        pre.a = Mat(0, e.cols());
        pre.b = Vec(0);
        return pre;
    }

    Eigen::ColPivHouseholderQR<Mat> qr(es.transpose());
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    for (Eigen::Index i = 0; i < rank; ++i) pre.rows.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
    std::sort(pre.rows.begin(), pre.rows.end());
    pre.a.resize(static_cast<Eigen::Index>(pre.rows.size()), e.cols());
    pre.b.resize(static_cast<Eigen::Index>(pre.rows.size()));
    for (std::size_t i = 0; i < pre.rows.size(); ++i) {
        pre.a.row(static_cast<Eigen::Index>(i)) = es.row(pre.rows[i]);
        pre.b(static_cast<Eigen::Index>(i)) = bs(pre.rows[i]);
    }

    // Least-squares point of the full system; a nonzero residual proves inconsistency.
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(es);
    const Vec yls = cod.solve(bs);
    const Vec res = bs - es * yls;
    const double rr = res.squaredNorm();
    if (res.lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + bs.lpNorm<Eigen::Infinity>()) && rr > 0.0) {
        pre.consistent = false;
        pre.farkas = pre.scale.cwiseProduct(res) / rr;
    }
    pre.aat.compute(pre.a * pre.a.transpose());
    return pre;
}

// Orthogonal projection onto {y : a y = b}.
Vec project(const Presolved& pre, const Vec& y) {
    if (pre.a.rows() == 0) return y;
    const Vec r = pre.a * y - pre.b;
    return y - pre.a.transpose() * pre.aat.solve(r);
}

// Frobenius Gram matrix of the block maps: H0_ij = sum_k <A_ki, A_kj>.
Mat gram_matrix(const MomentProblem& prob) {
    Mat h = Mat::Zero(prob.m(), prob.m());
    for (const auto& b : prob.blocks) {
        std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> by_pos;
        for (const auto& e : b.entries) by_pos[{e.row, e.col}].emplace_back(e.moment, e.coef);
        for (const auto& [pos, list] : by_pos) {
            const double w = pos.first == pos.second ? 1.0 : 2.0;
            for (const auto& [i, ci] : list)
                for (const auto& [j, cj] : list) h(i, j) += w * ci * cj;
        }
    }
    return h;
}

// Drive E' mu + sum A_k^*(Z_k) to zero by adjusting mu and adding A_k(w) to Z, alternating
// with eigenvalue clipping of Z until both the residual and the PSD floor hold.
InfeasCertificate polish(const MomentProblem& prob, const Presolved& pre, const std::vector<Mat>& z0,
                         const ConicOptions& opts) {
    InfeasCertificate cert;
    cert.z = z0;
    for (auto& z : cert.z) z = sym(z);
    const Mat h0 = gram_matrix(prob);
    SaddleSolver kkt;
    const bool have_kkt = kkt.factor(h0, pre.a);

    auto best_mu = [&](const std::vector<Mat>& z) {
        const Vec adj = adjoint(prob, z);
        Vec mu_red = pre.a.rows() ? Vec(-pre.aat.solve(pre.a * adj)) : Vec();
        Vec mu = Vec::Zero(prob.eq_matrix.rows());
        for (std::size_t i = 0; i < pre.rows.size(); ++i)
            mu(pre.rows[i]) = mu_red(static_cast<Eigen::Index>(i)) * pre.scale(pre.rows[i]);
        return mu;
    };
    auto residual = [&] { return Vec(Vec(prob.eq_matrix.transpose() * cert.mu) + adjoint(prob, cert.z)); };
    auto affine_rounds = [&](int rounds) {
        cert.mu = best_mu(cert.z);
        for (int round = 0; round < rounds && have_kkt; ++round) {
            const Vec rho = residual();
            Vec w, nu;
            kkt.solve(-rho, Vec::Zero(pre.a.rows()), w, nu);
            for (std::size_t k = 0; k < prob.blocks.size(); ++k) cert.z[k] += prob.blocks[k].evaluate(w);
            cert.mu = best_mu(cert.z);
        }
    };
    auto normalize = [&] {
        const Vec r = residual();
        cert.gap = prob.eq_rhs.dot(cert.mu);
        if (cert.gap > 0.0) {
            cert.mu /= cert.gap;
            for (auto& z : cert.z) z /= cert.gap;
            cert.residual = r.lpNorm<Eigen::Infinity>() / cert.gap;
            cert.gap = 1.0;
        } else {
            cert.residual = r.lpNorm<Eigen::Infinity>();
        }
        cert.min_eig = cert.z.empty() ? 0.0 : std::numeric_limits<double>::infinity();
        for (const auto& z : cert.z) cert.min_eig = std::min(cert.min_eig, min_eig(z));
    };

    affine_rounds(3);
    normalize();
    for (int pass = 0; pass < 40 && cert.gap > 0.0; ++pass) {
        if (cert.min_eig >= -0.1 * opts.eps_psd && cert.residual <= 0.1 * opts.eps_res) break;
        for (auto& z : cert.z) {
            Eigen::SelfAdjointEigenSolver<Mat> es(z);
            z = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
        }
        affine_rounds(1);
        normalize();
    }
    return cert;
}

// Correction in the metric of the interior dual iterate: dZ_k = Z_k A_k(w) Z_k stays inside the
// Dikin ellipsoid of Z when ||Z^1/2 A(w) Z^1/2|| < 1, so PSD is kept while the residual vanishes.
std::optional<InfeasCertificate> dikin_polish(const MomentProblem& prob, const Presolved& pre,
                                              const std::vector<Mat>& z0) {
    ConeProgram view;
    view.n = prob.m();
    std::vector<Mat> z;
    for (std::size_t k = 0; k < prob.blocks.size(); ++k) {
        view.blocks.push_back({prob.blocks[k].dim, prob.blocks[k].entries, Mat()});
        z.push_back(sym(z0[k]));
    }
    const Mat h = schur_matrix(view, z);
    SaddleSolver kkt;
    if (!kkt.factor(h, pre.a)) return std::nullopt;

    Vec nu = Vec::Zero(pre.a.rows());
    auto mu_of = [&](const Vec& v) {
        Vec mu = Vec::Zero(prob.eq_matrix.rows());
        for (std::size_t i = 0; i < pre.rows.size(); ++i)
            mu(pre.rows[i]) = v(static_cast<Eigen::Index>(i)) * pre.scale(pre.rows[i]);
        return mu;
    };
    // Start from the least-squares multiplier for the given Z.
    if (pre.a.rows()) nu = -pre.aat.solve(pre.a * adjoint(prob, z));
    const std::vector<Mat> metric = z;
    for (int round = 0; round < 6; ++round) {
        const Vec r = Vec(prob.eq_matrix.transpose() * mu_of(nu)) + adjoint(prob, z);
        if (r.lpNorm<Eigen::Infinity>() < 1e-15 * (1.0 + nu.lpNorm<Eigen::Infinity>())) break;
        Vec w, dnu;
        kkt.solve(-r, Vec::Zero(pre.a.rows()), w, dnu);
        for (std::size_t k = 0; k < z.size(); ++k)
            z[k] = sym(z[k] + metric[k] * prob.blocks[k].evaluate(w) * metric[k]);
        if (pre.a.rows()) nu += dnu;
    }
    InfeasCertificate cert;
    cert.mu = mu_of(nu);
    cert.z = std::move(z);
    const auto chk = check_certificate(prob, cert);
    if (!(chk.gap > 0.0)) return std::nullopt;
    cert.mu /= chk.gap;
    for (auto& zk : cert.z) zk /= chk.gap;
    cert.gap = 1.0;
    cert.residual = chk.residual;
    cert.min_eig = chk.min_eig;
    return cert;
}

}  // namespace

ConicResult solve_feasibility(const MomentProblem& prob, const ConicOptions& opts) {
    ConicResult res;
    const int m = prob.m();
    const Presolved pre = presolve(prob);

    if (!pre.consistent) {
        InfeasCertificate cert;
        cert.mu = pre.farkas;
        for (const auto& b : prob.blocks) cert.z.push_back(Mat::Zero(b.dim, b.dim));
        const auto chk = check_certificate(prob, cert);
        cert.gap = chk.gap;
        cert.residual = chk.residual;
        cert.min_eig = 0.0;
        if (verify_certificate(prob, cert, opts.eps_psd, opts.eps_res)) {
            res.status = ConicStatus::Infeasible;
            res.certificate = std::move(cert);
            res.message = "inconsistent linear equalities";
            return res;
        }
        res.message = "equalities look inconsistent but the linear certificate failed verification";
        return res;
    }

    auto accept_point = [&](const Vec& y) {
        const Vec yp = project(pre, y);
        const double eq = prob.equality_residual(yp);
        if (eq > opts.feas_tol) return false;
        const double me = prob.blocks.empty() ? 0.0 : prob.min_eigenvalue(yp);
        if (me < -opts.feas_tol) return false;
        res.status = ConicStatus::Feasible;
        res.y = yp;
        res.eq_residual = eq;
        res.min_eig = me;
        return true;
    };

    if (prob.blocks.empty()) {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod{Mat(prob.eq_matrix)};
        if (!accept_point(cod.solve(prob.eq_rhs))) res.message = "least-squares point misses the tolerance";
        return res;
    }

    // Phase-1 program over x = (y, t): max t  s.t.  E y = e,  A_k(y) - t I >= 0,  t <= 1.
    ConeProgram cp;
    const int it = m;
    cp.n = m + 1;
    cp.c = Vec::Zero(cp.n);
    cp.c(it) = -1.0;
    cp.a = Mat::Zero(pre.a.rows(), cp.n);
    cp.a.leftCols(m) = pre.a;
    cp.b = pre.b;
    for (const auto& b : prob.blocks) {
        ConeBlock cb;
        cb.dim = b.dim;
        cb.entries = b.entries;
        for (int i = 0; i < b.dim; ++i) cb.entries.push_back({i, i, it, -1.0});
        cb.constant = Mat::Zero(b.dim, b.dim);
        cp.blocks.push_back(std::move(cb));
    }
    ConeBlock cap;
    cap.dim = 1;
    cap.entries.push_back({0, 0, it, -1.0});
    cap.constant = Mat::Ones(1, 1);
    cp.blocks.push_back(std::move(cap));
    const std::size_t nb = prob.blocks.size();

    Hsde solver(cp);
    if (!solver.initialize()) {
        res.message = "initial KKT factorization failed";
        return res;
    }

    auto dual_certificate = [&](const HsdeState& st) -> std::optional<InfeasCertificate> {
        std::vector<Mat> z(st.z.begin(), st.z.begin() + static_cast<std::ptrdiff_t>(nb));
        if (auto cert = dikin_polish(prob, pre, z)) {
            if (opts.verbose)
                std::fprintf(stderr, "  dikin: residual %.3e min_eig %.3e\n", cert->residual, cert->min_eig);
            if (verify_certificate(prob, *cert, opts.eps_psd, opts.eps_res)) return cert;
        }
        InfeasCertificate cert = polish(prob, pre, z, opts);
        if (opts.verbose)
            std::fprintf(stderr, "  polish: gap %.3e residual %.3e min_eig %.3e\n", cert.gap, cert.residual,
                         cert.min_eig);
        if (verify_certificate(prob, cert, opts.eps_psd, opts.eps_res)) return cert;
        return std::nullopt;
    };

    // Cheap screen before polishing: the unpolished normalized residual.
    auto dual_screen = [&](const HsdeState& st) {
        Vec mu = Vec::Zero(prob.eq_matrix.rows());
        for (std::size_t i = 0; i < pre.rows.size(); ++i)
            mu(pre.rows[i]) = -st.y(static_cast<Eigen::Index>(i)) * pre.scale(pre.rows[i]);
        const double g = prob.eq_rhs.dot(mu);
        if (!(g > 0.0)) return std::numeric_limits<double>::infinity();
        std::vector<Mat> z(st.z.begin(), st.z.begin() + static_cast<std::ptrdiff_t>(nb));
        const Vec r = Vec(prob.eq_matrix.transpose() * mu) + adjoint(prob, z);
        return r.lpNorm<Eigen::Infinity>() / g;
    };

    int stalls = 0;
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        res.iterations = iter;
        if (!solver.iterate()) {
            res.message = "numerical breakdown in the interior point iteration";
            break;
        }
        const auto& st = solver.state();
        res.margin = st.x(it) / st.tau;
        if (opts.verbose)
            std::fprintf(stderr, "  it %3d  mu %.3e  step %.3f  tau %.3e  kappa %.3e  t %.6e\n", iter, solver.mu(),
                         solver.last_step(), st.tau, st.kappa, res.margin);

        if (res.margin > -10.0 * opts.feas_tol && accept_point(st.x.head(m) / st.tau)) {
            res.iterations = iter;
            res.message = "feasible point found";
            return res;
        }
        const double screen = dual_screen(st);
        if (opts.verbose) std::fprintf(stderr, "  screen %.3e\n", screen);
        if (screen < 1e-4) {
            if (auto cert = dual_certificate(st)) {
                res.status = ConicStatus::Infeasible;
                res.certificate = std::move(*cert);
                res.message = "certificate verified";
                return res;
            }
        }
        if (solver.last_step() < 1e-8) {
            if (++stalls >= 3) {
                res.message = "step length collapsed";
                break;
            }
        } else {
            stalls = 0;
        }
        if (solver.mu() < 1e-14 * (1.0 + st.tau * st.tau)) {
            res.message = "converged without a verdict within tolerance";
            break;
        }
        if (iter == opts.max_iter) res.message = "iteration limit reached";
    }

    const auto& st = solver.state();
    if (std::isfinite(dual_screen(st))) {
        if (auto cert = dual_certificate(st)) {
            res.status = ConicStatus::Infeasible;
            res.certificate = std::move(*cert);
            res.message += "; certificate verified after polishing";
            return res;
        }
    }
    res.y = project(pre, st.x.head(m) / st.tau);
    res.eq_residual = prob.equality_residual(res.y);
    res.min_eig = prob.min_eigenvalue(res.y);
    return res;
}

}  // namespace pfcert

namespace pfcert {

namespace {

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

Eigen::MatrixXd json_mat(const nlohmann::json& j) {
    const Eigen::Index n = static_cast<Eigen::Index>(j.size());
    const Eigen::Index c = n ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != c) throw std::invalid_argument("ragged matrix in JSON");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
    }
    return m;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const InfeasCertificate& cert) {
    nlohmann::json j;
    j["schema_version"] = kCertificateSchema;
    j["mu"] = to_std(cert.mu);
    auto zs = nlohmann::json::array();
    for (const auto& z : cert.z) zs.push_back(mat_json(z));
    j["z"] = zs;
    j["gap"] = cert.gap;
    j["residual"] = cert.residual;
    j["min_eig"] = cert.min_eig;
    return j;
}

InfeasCertificate certificate_from_json(const nlohmann::json& j) {
    if (j.value("schema_version", "") != kCertificateSchema) throw std::invalid_argument("unsupported certificate schema");
    InfeasCertificate c;
    const auto mu = j.at("mu").get<std::vector<double>>();
    c.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    for (const auto& z : j.at("z")) c.z.push_back(json_mat(z));
    c.gap = j.value("gap", 0.0);
    c.residual = j.value("residual", 0.0);
    c.min_eig = j.value("min_eig", 0.0);
    return c;
}

nlohmann::json to_json(const ConicResult& r, bool include_point) {
    nlohmann::json j;
    j["status"] = std::string(to_string(r.status));
    j["iterations"] = r.iterations;
    j["margin"] = r.margin;
    j["message"] = r.message;
    if (r.status != ConicStatus::Infeasible) {
        j["eq_residual"] = r.eq_residual;
        j["min_eig"] = r.min_eig;
    }
    if (include_point && r.y.size()) j["y"] = to_std(r.y);
    if (r.certificate) j["certificate"] = to_json(*r.certificate);
    return j;
}

ConicResult import_external_result(const MomentProblem& prob, const nlohmann::json& status, const ConicOptions& opts) {
    ConicResult res;
    const auto s = status.at("status").get<std::string>();
    res.message = "external: " + s;
    if (s == "feasible") {
        const auto y = status.at("y").get<std::vector<double>>();
        if (static_cast<int>(y.size()) != prob.m()) throw std::invalid_argument("external point has the wrong length");
        res.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        res.eq_residual = prob.equality_residual(res.y);
        res.min_eig = prob.min_eigenvalue(res.y);
        if (res.eq_residual <= opts.feas_tol && res.min_eig >= -opts.feas_tol) res.status = ConicStatus::Feasible;
        else res.message += " (point rejected)";
    } else if (s == "infeasible") {
        auto cert = certificate_from_json(status.at("certificate"));
        const auto chk = check_certificate(prob, cert);
        cert.gap = chk.gap;
        cert.residual = chk.residual;
        cert.min_eig = chk.min_eig;
        if (verify_certificate(prob, cert, opts.eps_psd, opts.eps_res)) {
            res.status = ConicStatus::Infeasible;
            res.certificate = std::move(cert);
        } else {
            res.message += " (certificate rejected)";
        }
    }
    return res;
}

}  // namespace pfcert
