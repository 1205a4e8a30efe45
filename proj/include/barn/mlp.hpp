#pragma once

// Single-hidden-layer perceptron used as the ensemble member: forward pass,
// L1/L2-regularized squared loss with analytic gradients, two solvers
// (full-batch L-BFGS and mini-batch Adam), and weight donation for
// grow/shrink proposals.

#include "barn/core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace barn {

enum class Activation { relu, tanh };
enum class Solver { adam, quasi_newton, automatic };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw InputError("unknown activation: " + s);
}

inline std::string to_string(Solver s) {
    switch (s) {
        case Solver::adam: return "adam";
        case Solver::quasi_newton: return "lbfgs-like";
        case Solver::automatic: return "auto";
    }
    return "auto";
}

inline Solver solver_from_string(const std::string& s) {
    if (s == "adam") return Solver::adam;
    if (s == "lbfgs-like" || s == "lbfgs" || s == "quasi_newton") return Solver::quasi_newton;
    if (s == "auto") return Solver::automatic;
    throw InputError("unknown solver: " + s);
}

/// One hidden layer network: f(x) = b2 + sum_h w2[h] * act(W1[h] . x + b1[h]).
struct SmallNet {
    Matrix W1;  // k x d
    Vector b1;  // k
    Vector w2;  // k
    double b2 = 0.0;
    Activation activation = Activation::relu;

    int k() const { return static_cast<int>(W1.rows()); }
    int d() const { return static_cast<int>(W1.cols()); }
    Eigen::Index num_params() const { return W1.size() + b1.size() + w2.size() + 1; }

    static SmallNet zeros(int k, int d, Activation act = Activation::relu) {
        require(k >= 1 && d >= 1, "SmallNet: k and d must be >= 1");
        SmallNet net;
        net.W1 = Matrix::Zero(k, d);
        net.b1 = Vector::Zero(k);
        net.w2 = Vector::Zero(k);
        net.activation = act;
        return net;
    }

    void validate() const {
        require(W1.rows() >= 1 && W1.cols() >= 1, "SmallNet: empty weight matrix");
        require(b1.size() == W1.rows() && w2.size() == W1.rows(),
                "SmallNet: bias/output sizes inconsistent with k");
    }

    bool finite() const { return W1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2); }

    /// Flat layout: W1 row-major, then b1, w2, b2.
    Vector params() const {
        Vector p(num_params());
        Eigen::Index i = 0;
        for (Eigen::Index h = 0; h < W1.rows(); ++h) {
            for (Eigen::Index j = 0; j < W1.cols(); ++j) {
                p[i++] = W1(h, j);
            }
        }
        p.segment(i, b1.size()) = b1;
        i += b1.size();
        p.segment(i, w2.size()) = w2;
        i += w2.size();
        p[i] = b2;
        return p;
    }

    void set_params(const Vector& p) {
        require(p.size() == num_params(), "SmallNet::set_params: size mismatch");
        Eigen::Index i = 0;
        for (Eigen::Index h = 0; h < W1.rows(); ++h) {
            for (Eigen::Index j = 0; j < W1.cols(); ++j) {
                W1(h, j) = p[i++];
            }
        }
        b1 = p.segment(i, b1.size());
        i += b1.size();
        w2 = p.segment(i, w2.size());
        i += w2.size();
        b2 = p[i];
    }

    friend bool operator==(const SmallNet& a, const SmallNet& b) {
        return a.activation == b.activation && a.W1.rows() == b.W1.rows() && a.W1.cols() == b.W1.cols() &&
               a.W1 == b.W1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

struct TrainConfig {
    Solver solver = Solver::automatic;
    double learning_rate = 0.01;
    double reg_l1 = 0.01;
    double reg_l2 = 0.01;
    int max_epochs = 200;
    double tol = 1e-6;

    void validate() const {
        require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
        require(reg_l1 >= 0.0 && reg_l2 >= 0.0, "TrainConfig: regularization must be >= 0");
        require(max_epochs >= 1, "TrainConfig: max_epochs must be >= 1");
        require(tol > 0.0, "TrainConfig: tol must be > 0");
    }
};

/// Thrown when training meets a non-finite loss; carries the last finite iterate.
class TrainingError : public std::runtime_error {
  public:
    TrainingError(const std::string& what, SmallNet last) : std::runtime_error(what), last_(std::move(last)) {}
    const SmallNet& last_finite() const { return last_; }

  private:
    SmallNet last_;
};

namespace detail {

inline void apply_activation(Activation act, Matrix& z) {
    if (act == Activation::relu) {
        z = z.cwiseMax(0.0);
    } else {
        z = z.array().tanh().matrix();
    }
}

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Loss and (optionally) gradient on a flat parameter vector. The data term
/// is the mean squared error; the penalty covers W1, b1 and w2 but not b2.
inline double flat_loss(const Vector& p, int k, int d, Activation act, const Eigen::Ref<const Matrix>& X,
                        const Eigen::Ref<const Vector>& y, double l1, double l2, Vector* grad) {
    const Eigen::Index n = X.rows();
    const Eigen::Index kd = static_cast<Eigen::Index>(k) * d;
    RowMajorMap W1(p.data(), k, d);
    const auto b1 = p.segment(kd, k);
    const auto w2 = p.segment(kd + k, k);
    const double b2 = p[kd + 2 * k];

    Matrix z = X * W1.transpose();
    z.rowwise() += b1.transpose();
    Matrix h = z;
    apply_activation(act, h);
    Vector out = h * w2;
    out.array() += b2;
    const Vector err = out - y;

    const auto weights = p.head(kd + 2 * k);
    const double data_term = err.squaredNorm() / static_cast<double>(n);
    const double loss = data_term + l1 * weights.cwiseAbs().sum() + l2 * weights.squaredNorm();
    if (grad == nullptr) {
        return loss;
    }

    grad->resize(p.size());
    const Vector dout = (2.0 / static_cast<double>(n)) * err;
    Matrix dz = dout * w2.transpose();  // n x k, dL/dh
    if (act == Activation::relu) {
        dz.array() *= (z.array() > 0.0).cast<double>();
    } else {
        dz.array() *= 1.0 - h.array().square();
    }
    const Matrix gW1 = dz.transpose() * X;  // k x d
    Eigen::Index i = 0;
    for (int r = 0; r < k; ++r) {
        for (int c = 0; c < d; ++c) {
            (*grad)[i++] = gW1(r, c);
        }
    }
    grad->segment(kd, k) = dz.colwise().sum().transpose();
    grad->segment(kd + k, k) = h.transpose() * dout;
    (*grad)[kd + 2 * k] = dout.sum();

    auto gw = grad->head(kd + 2 * k);
    gw += 2.0 * l2 * weights;
    if (l1 > 0.0) {
        gw += l1 * weights.unaryExpr([](double w) { return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0); });
    }
    return loss;
}

inline void check_shapes(const SmallNet& net, const Eigen::Ref<const Matrix>& X) {
    net.validate();
    if (X.cols() != net.W1.cols()) {
        throw InputError("forward: X has " + std::to_string(X.cols()) + " columns, net expects " +
                         std::to_string(net.W1.cols()));
    }
}

}  // namespace detail

inline Vector forward(const SmallNet& net, const Eigen::Ref<const Matrix>& X) {
    detail::check_shapes(net, X);
    Matrix h = X * net.W1.transpose();
    h.rowwise() += net.b1.transpose();
    detail::apply_activation(net.activation, h);
    Vector out = h * net.w2;
    out.array() += net.b2;
    return out;
}

struct LossGrad {
    double loss;
    SmallNet grad;  // same shapes as the net; activation copied
};

inline LossGrad loss_and_grad(const SmallNet& net, const Eigen::Ref<const Matrix>& X,
                              const Eigen::Ref<const Vector>& y, const TrainConfig& cfg) {
    detail::check_shapes(net, X);
    require(X.rows() >= 1, "loss_and_grad: need at least one row");
    require(y.size() == X.rows(), "loss_and_grad: y length does not match X rows");
    Vector g;
    const double loss =
        detail::flat_loss(net.params(), net.k(), net.d(), net.activation, X, y, cfg.reg_l1, cfg.reg_l2, &g);
    LossGrad out{loss, net};
    out.grad.set_params(g);
    return out;
}

/// Auto solver rule: quasi-Newton for parameter count k(d+2)+1 <= 1000 and
/// n <= 10000, Adam otherwise.
inline Solver select_solver(int k, int d, Eigen::Index n) {
    const long long params = static_cast<long long>(k) * (d + 2) + 1;
    return (params <= 1000 && n <= 10000) ? Solver::quasi_newton : Solver::adam;
}

namespace detail {

struct Objective {
    int k;
    int d;
    Activation act;
    Eigen::Ref<const Matrix> X;
    Eigen::Ref<const Vector> y;
    double l1;
    double l2;

    double operator()(const Vector& p, Vector* g) const { return flat_loss(p, k, d, act, X, y, l1, l2, g); }
};

/// Limited-memory BFGS (memory 10) with Armijo backtracking (c = 1e-4).
/// Every accepted step strictly lowers the objective.
inline Vector lbfgs(const Objective& f, Vector x, const TrainConfig& cfg, const SmallNet& shape) {
    constexpr std::size_t memory = 10;
    constexpr double armijo = 1e-4;
    constexpr int max_backtracks = 40;

    Vector g;
    double fx = f(x, &g);
    if (!std::isfinite(fx)) {
        throw TrainingError("lbfgs: non-finite loss at starting point", shape);
    }
    std::deque<Vector> s_hist;
    std::deque<Vector> y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < cfg.max_epochs; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() <= cfg.tol) {
            break;
        }
        // two-loop recursion
        Vector q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Vector dir = -q;
        double slope = g.dot(dir);
        double step = 1.0;
        if (s_hist.empty() || !(slope < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -g;
            slope = -g.squaredNorm();
            step = std::min(1.0, 1.0 / g.norm());
        }

        Vector x_new;
        Vector g_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int bt = 0; bt < max_backtracks; ++bt) {
            x_new = x + step * dir;
            f_new = f(x_new, &g_new);
            if (std::isfinite(f_new) && f_new <= fx + armijo * step * slope && f_new < fx) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (s_hist.empty()) {
                break;  // steepest descent made no progress either
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            continue;
        }

        const Vector s = x_new - x;
        const Vector yv = g_new - g;
        const double sy = s.dot(yv);
        const double decrease = fx - f_new;
        x = std::move(x_new);
        g = std::move(g_new);
        fx = f_new;
        if (sy > 1e-12 * yv.squaredNorm() && sy > 0.0) {
            if (s_hist.size() == memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
        }
        if (decrease <= cfg.tol * std::max(1.0, std::abs(fx))) {
            break;
        }
    }
    return x;
}

/// Mini-batch Adam (batch min(200, n)); returns the best full-data iterate,
/// so the result never scores worse than the starting point.
template <class G>
Vector adam(const Objective& f, Vector x, const TrainConfig& cfg, const SmallNet& shape, G& rng) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    constexpr int patience = 10;

    const Eigen::Index n = f.X.rows();
    const Eigen::Index batch = std::min<Eigen::Index>(200, n);

    double best_f = f(x, nullptr);
    if (!std::isfinite(best_f)) {
        throw TrainingError("adam: non-finite loss at starting point", shape);
    }
    Vector best = x;
    Vector m = Vector::Zero(x.size());
    Vector v = Vector::Zero(x.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Matrix xb(batch, f.X.cols());
    Vector yb(batch);
    Vector g;
    long long t = 0;
    int stale = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index len = std::min(batch, n - start);
            xb.resize(len, f.X.cols());
            yb.resize(len);
            for (Eigen::Index i = 0; i < len; ++i) {
                const auto row = order[static_cast<std::size_t>(start + i)];
                xb.row(i) = f.X.row(row);
                yb[i] = f.y[row];
            }
            Objective fb{f.k, f.d, f.act, xb, yb, f.l1, f.l2};
            fb(x, &g);
            ++t;
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
            x.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        }
        const double fx = f(x, nullptr);
        if (!std::isfinite(fx) || !x.allFinite()) {
            SmallNet last = shape;
            last.set_params(best);
            throw TrainingError("adam: non-finite loss during training", last);
        }
        if (fx < best_f - cfg.tol * std::max(1.0, std::abs(best_f))) {
            stale = 0;
        } else if (++stale >= patience) {
            if (fx < best_f) {
                best_f = fx;
                best = x;
            }
            break;
        }
        if (fx < best_f) {
            best_f = fx;
            best = x;
        }
    }
    return best;
}

}  // namespace detail

/// Fits `net` to (X, y) starting from its current weights.
template <class G>
SmallNet train(SmallNet net, const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
               const TrainConfig& cfg, G& rng) {
    cfg.validate();
    detail::check_shapes(net, X);
    require(X.rows() >= 1, "train: need at least one row");
    require(y.size() == X.rows(), "train: y length does not match X rows");
    require(X.allFinite() && y.allFinite(), "train: non-finite training data");

    Solver solver = cfg.solver;
    if (solver == Solver::automatic) {
        solver = select_solver(net.k(), net.d(), X.rows());
    }
    const detail::Objective f{net.k(), net.d(), net.activation, X, y, cfg.reg_l1, cfg.reg_l2};
    Vector p = solver == Solver::quasi_newton ? detail::lbfgs(f, net.params(), cfg, net)
                                              : detail::adam(f, net.params(), cfg, net, rng);
    net.set_params(p);
    return net;
}

/// Glorot-uniform hidden layer, zero output layer, given output bias.
template <class G>
SmallNet init_net(int k, int d, Activation act, double b2, G& rng) {
    SmallNet net = SmallNet::zeros(k, d, act);
    const double limit = std::sqrt(6.0 / static_cast<double>(d + k));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (Eigen::Index i = 0; i < net.W1.size(); ++i) {
        net.W1.data()[i] = unif(rng);
    }
    for (Eigen::Index i = 0; i < net.b1.size(); ++i) {
        net.b1[i] = unif(rng);
    }
    net.b2 = b2;
    return net;
}

/// Standard deviation of the weights given to a freshly grown neuron.
inline constexpr double kNewNeuronScale = 0.01;

/// Builds a size-`new_k` net from `old`. Growing keeps every old neuron and
/// appends new ones drawn N(0, 0.01); shrinking repeatedly drops the neuron
/// with the smallest |w2| (lowest index on ties). b2 is kept.
template <class G>
SmallNet donate_weights(const SmallNet& old, int new_k, G& rng) {
    old.validate();
    require(new_k >= 1, "donate_weights: new_k must be >= 1");
    SmallNet net = old;
    std::normal_distribution<double> noise(0.0, kNewNeuronScale);
    while (net.k() < new_k) {
        const int k = net.k();
        const int d = net.d();
        Matrix W1(k + 1, d);
        W1.topRows(k) = net.W1;
        for (int j = 0; j < d; ++j) {
            W1(k, j) = noise(rng);
        }
        Vector b1(k + 1);
        b1.head(k) = net.b1;
        b1[k] = noise(rng);
        Vector w2(k + 1);
        w2.head(k) = net.w2;
        w2[k] = noise(rng);
        net.W1 = std::move(W1);
        net.b1 = std::move(b1);
        net.w2 = std::move(w2);
    }
    while (net.k() > new_k) {
        const int k = net.k();
        int drop = 0;
        for (int h = 1; h < k; ++h) {
            if (std::abs(net.w2[h]) < std::abs(net.w2[drop])) {
                drop = h;
            }
        }
        Matrix W1(k - 1, net.d());
        Vector b1(k - 1);
        Vector w2(k - 1);
        for (int h = 0, o = 0; h < k; ++h) {
            if (h == drop) continue;
            W1.row(o) = net.W1.row(h);
            b1[o] = net.b1[h];
            w2[o] = net.w2[h];
            ++o;
        }
        net.W1 = std::move(W1);
        net.b1 = std::move(b1);
        net.w2 = std::move(w2);
    }
    return net;
}

}  // namespace barn
