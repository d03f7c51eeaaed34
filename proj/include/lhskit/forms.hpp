#pragma once

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "lhskit/chart.hpp"
#include "lhskit/expr.hpp"
#include "lhskit/linalg.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// Multi-index combinatorics
//
// A degree-k form stores one coefficient per strictly increasing multi-index,
// so antisymmetry is structural. Index lists are lexicographic.
// ---------------------------------------------------------------------------

using MultiIndex = std::vector<int>;

inline const std::vector<MultiIndex>& multi_indices(int dim, int k) {
    static std::map<std::pair<int, int>, std::vector<MultiIndex>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_pair(dim, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<MultiIndex> out;
    MultiIndex cur;
    auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < dim; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return cache.emplace(key, std::move(out)).first->second;
}

inline int multi_index_rank(int dim, const MultiIndex& idx) {
    const auto& all = multi_indices(dim, static_cast<int>(idx.size()));
    for (std::size_t r = 0; r < all.size(); ++r)
        if (all[r] == idx) return static_cast<int>(r);
    throw Error("multi-index not strictly increasing");
}

// Sign of sorting the concatenation (I, J); 0 when they share an index.
inline int merge_sign(const MultiIndex& I, const MultiIndex& J, MultiIndex& sorted_out) {
    MultiIndex merged = I;
    merged.insert(merged.end(), J.begin(), J.end());
    int sign = 1;
    // insertion sort, counting swaps
    for (std::size_t i = 1; i < merged.size(); ++i) {
        std::size_t j = i;
        while (j > 0 && merged[j - 1] > merged[j]) {
            std::swap(merged[j - 1], merged[j]);
            sign = -sign;
            --j;
        }
        if (j > 0 && merged[j - 1] == merged[j]) return 0;
    }
    sorted_out = std::move(merged);
    return sign;
}

// ---------------------------------------------------------------------------
// KForm<R>: a degree-k form with coefficients in R (double for pointwise
// values, ExpressionTree for symbolic coefficients). The exterior algebra is
// ring-generic; only the exterior derivative requires trees.
// ---------------------------------------------------------------------------

inline double zero_like(const double&) { return 0.0; }
inline double one_like(const double&) { return 1.0; }
inline ExpressionTree zero_like(const ExpressionTree& t) {
    return ExpressionTree::constant(0.0, t.arity());
}
inline ExpressionTree one_like(const ExpressionTree& t) {
    return ExpressionTree::constant(1.0, t.arity());
}

template <class R>
struct KForm {
    int dim = 0;
    int degree = 0;
    std::vector<R> coeffs;  // one per increasing multi-index, lex order

    KForm() = default;
    KForm(int d, int k, std::vector<R> c) : dim(d), degree(k), coeffs(std::move(c)) {
        if (k < 0 || k > d) throw DegreeError("form degree outside [0, dim]");
        if (coeffs.size() != multi_indices(d, k).size())
            throw Error("coefficient count does not match degree");
    }

    const R& coeff(const MultiIndex& idx) const {
        return coeffs[static_cast<std::size_t>(multi_index_rank(dim, idx))];
    }
    R& coeff(const MultiIndex& idx) {
        return coeffs[static_cast<std::size_t>(multi_index_rank(dim, idx))];
    }
};

using DifferentialForm = KForm<ExpressionTree>;
using FormValue = KForm<double>;

template <class R>
KForm<R> zero_form(int dim, int degree, const R& proto) {
    std::vector<R> c(multi_indices(dim, degree).size(), zero_like(proto));
    return KForm<R>(dim, degree, std::move(c));
}

template <class R>
KForm<R> operator+(const KForm<R>& a, const KForm<R>& b) {
    if (a.dim != b.dim || a.degree != b.degree)
        throw DegreeError("form sum requires equal dimension and degree");
    KForm<R> out = a;
    for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] = a.coeffs[i] + b.coeffs[i];
    return out;
}

template <class R>
KForm<R> operator-(const KForm<R>& a) {
    KForm<R> out = a;
    for (auto& c : out.coeffs) c = -c;
    return out;
}

template <class R>
KForm<R> operator-(const KForm<R>& a, const KForm<R>& b) {
    return a + (-b);
}

template <class R, class S>
KForm<R> scale(const S& s, const KForm<R>& a) {
    KForm<R> out = a;
    for (auto& c : out.coeffs) c = s * c;
    return out;
}

template <class R>
KForm<R> wedge(const KForm<R>& a, const KForm<R>& b) {
    if (a.dim != b.dim) throw DegreeError("wedge requires a common chart dimension");
    int k = a.degree + b.degree;
    if (k > a.dim) throw DegreeError("wedge degree exceeds chart dimension");
    const R* proto = a.coeffs.empty() ? b.coeffs.data() : a.coeffs.data();
    KForm<R> out = zero_form(a.dim, k, *proto);
    const auto& Is = multi_indices(a.dim, a.degree);
    const auto& Js = multi_indices(a.dim, b.degree);
    for (std::size_t i = 0; i < Is.size(); ++i) {
        for (std::size_t j = 0; j < Js.size(); ++j) {
            MultiIndex merged;
            int sign = merge_sign(Is[i], Js[j], merged);
            if (sign == 0) continue;
            R term = a.coeffs[i] * b.coeffs[j];
            auto& slot = out.coeff(merged);
            slot = (sign > 0) ? (slot + term) : (slot - term);
        }
    }
    return out;
}

template <class R>
KForm<R> wedge_power(const KForm<R>& a, int m) {
    if (m == 0) return KForm<R>(a.dim, 0, {one_like(a.coeffs.front())});
    KForm<R> out = a;
    for (int i = 1; i < m; ++i) out = wedge(out, a);
    return out;
}

// Interior product with a vector whose components live in the same ring.
template <class R>
KForm<R> interior_product(const std::vector<R>& X, const KForm<R>& f) {
    if (static_cast<int>(X.size()) != f.dim)
        throw DegreeError("vector component count does not match chart dimension");
    if (f.degree < 1) throw DegreeError("interior product needs degree >= 1");
    KForm<R> out = zero_form(f.dim, f.degree - 1, f.coeffs.front());
    const auto& Js = multi_indices(f.dim, f.degree);
    for (std::size_t j = 0; j < Js.size(); ++j) {
        const MultiIndex& J = Js[j];
        // (iota_X f)(e_{J minus J[m]}) picks up (-1)^m X^{J[m]} f_J
        for (std::size_t m = 0; m < J.size(); ++m) {
            MultiIndex rest;
            for (std::size_t q = 0; q < J.size(); ++q)
                if (q != m) rest.push_back(J[q]);
            R term = X[static_cast<std::size_t>(J[m])] * f.coeffs[j];
            auto& slot = out.coeff(rest);
            slot = (m % 2 == 0) ? (slot + term) : (slot - term);
        }
    }
    return out;
}

// Exterior derivative; coefficients of the result are symbolic derivative
// trees, so iterating d keeps residuals at machine precision.
inline DifferentialForm exterior_derivative(const DifferentialForm& f) {
    if (f.degree >= f.dim) throw DegreeError("exterior derivative of a top form");
    DifferentialForm out = zero_form(f.dim, f.degree + 1, f.coeffs.front());
    const auto& Js = multi_indices(f.dim, f.degree + 1);
    for (std::size_t j = 0; j < Js.size(); ++j) {
        const MultiIndex& J = Js[j];
        ExpressionTree acc = ExpressionTree::constant(0.0, f.coeffs.front().arity());
        for (std::size_t m = 0; m < J.size(); ++m) {
            MultiIndex rest;
            for (std::size_t q = 0; q < J.size(); ++q)
                if (q != m) rest.push_back(J[q]);
            ExpressionTree term = f.coeff(rest).derivative(J[m]);
            acc = (m % 2 == 0) ? (acc + term) : (acc - term);
        }
        out.coeffs[j] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation and pointwise helpers
// ---------------------------------------------------------------------------

inline FormValue eval_form(const DifferentialForm& f, const Chart& chart, const Point& p) {
    Point q = chart.reduce(p);
    std::vector<double> vals(f.coeffs.size());
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) vals[i] = f.coeffs[i].eval(q);
    return FormValue(f.dim, f.degree, std::move(vals));
}

// Antisymmetric matrix M with M(i,j) = f(e_i, e_j) of a 2-form value.
inline MatrixXd form_matrix(const FormValue& f) {
    if (f.degree != 2) throw DegreeError("form_matrix needs a 2-form");
    MatrixXd M = MatrixXd::Zero(f.dim, f.dim);
    const auto& Is = multi_indices(f.dim, 2);
    for (std::size_t r = 0; r < Is.size(); ++r) {
        M(Is[r][0], Is[r][1]) = f.coeffs[r];
        M(Is[r][1], Is[r][0]) = -f.coeffs[r];
    }
    return M;
}

inline VectorXd covector(const FormValue& f) {
    if (f.degree != 1) throw DegreeError("covector needs a 1-form");
    VectorXd v(f.dim);
    for (int i = 0; i < f.dim; ++i) v(i) = f.coeffs[static_cast<std::size_t>(i)];
    return v;
}

// f(X, Y) for a 2-form value
inline double two_form_apply(const FormValue& f, const VectorXd& X, const VectorXd& Y) {
    MatrixXd M = form_matrix(f);
    return X.dot(M * Y);
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

struct VectorField {
    int dim = 0;
    std::vector<ExpressionTree> components;

    VectorField() = default;
    VectorField(int d, std::vector<ExpressionTree> comps)
        : dim(d), components(std::move(comps)) {
        if (static_cast<int>(components.size()) != dim)
            throw Error("vector field component count does not match chart dimension");
    }

    static VectorField zero(int d, int arity) {
        std::vector<ExpressionTree> c(static_cast<std::size_t>(d),
                                      ExpressionTree::constant(0.0, arity));
        return VectorField(d, std::move(c));
    }

    VectorXd eval(const Chart& chart, const Point& p) const {
        Point q = chart.reduce(p);
        VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v(i) = components[static_cast<std::size_t>(i)].eval(q);
        return v;
    }

    MatrixXd jacobian(const Chart& chart, const Point& p) const {
        Point q = chart.reduce(p);
        MatrixXd J(dim, dim);
        for (int i = 0; i < dim; ++i) {
            Jet1 jet = components[static_cast<std::size_t>(i)].eval_jet(q);
            for (int j = 0; j < dim; ++j) J(i, j) = jet.partials[static_cast<std::size_t>(j)];
        }
        return J;
    }
};

// Symbolic interior product of a tree field with a tree form.
inline DifferentialForm interior_product(const VectorField& X, const DifferentialForm& f) {
    return interior_product(X.components, f);
}

// ---------------------------------------------------------------------------
// Pullback along an affine map  x -> A x + c, acting on pointwise form values
// at the image point: (Phi^* w)_I = sum_J w_J det A[J, I].
// ---------------------------------------------------------------------------

inline FormValue pullback_along_linear(const MatrixXd& A, const FormValue& value_at_image) {
    int dim = value_at_image.dim;
    if (A.rows() != dim || A.cols() != dim)
        throw Error("pullback map dimension does not match form dimension");
    if (std::abs(A.determinant()) < 1e-300) throw SingularMap("pullback map is singular");
    int k = value_at_image.degree;
    if (k == 0) return value_at_image;
    FormValue out = zero_form(dim, k, 0.0);
    const auto& Is = multi_indices(dim, k);
    for (std::size_t i = 0; i < Is.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < Is.size(); ++j) {
            MatrixXd minor(k, k);
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < k; ++c) minor(r, c) = A(Is[j][static_cast<std::size_t>(r)],
                                                            Is[i][static_cast<std::size_t>(c)]);
            acc += value_at_image.coeffs[j] * minor.determinant();
        }
        out.coeffs[i] = acc;
    }
    return out;
}

}  // namespace lhskit
