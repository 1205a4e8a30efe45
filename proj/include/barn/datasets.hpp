#pragma once

// Data plumbing for experiments: CSV in/out, splits, synthetic generators
// and the two baselines (least squares and one large network).

#include "barn/core.hpp"
#include "barn/ensemble.hpp"
#include "barn/mlp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace barn::data {

struct Dataset {
    Matrix X;
    Vector y;
    std::vector<std::string> feature_names;
    std::string target_name = "y";

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
};

class DataError : public InputError {
  public:
    using InputError::InputError;
};

namespace detail {

/// Splits one CSV record; handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

/// Parses CSV text. `target` names the target column (a header name, or a
/// zero-based column index when there is no header). Remaining columns
/// become features in file order.
inline Dataset parse_csv(std::istream& in, const std::string& target, bool header = true) {
    std::string line;
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_record(line);
        if (first && header) {
            for (auto& f : fields) names.emplace_back(detail::trim(f));
            width = names.size();
            first = false;
            continue;
        }
        if (first) {
            width = fields.size();
            for (std::size_t j = 0; j < width; ++j) names.push_back(std::to_string(j));
            first = false;
        }
        if (fields.size() != width) {
            throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " cells, found " + std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(width);
        for (std::size_t j = 0; j < width; ++j) {
            const auto v = detail::parse_number(fields[j]);
            if (!v) {
                throw DataError("csv line " + std::to_string(line_no) + ", column '" + names[j] +
                                "': non-numeric or empty cell");
            }
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("csv: no data rows");

    std::size_t tcol = names.size();
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (names[j] == target) tcol = j;
    }
    if (tcol == names.size()) throw DataError("csv: target column '" + target + "' not found");
    if (width < 2) throw DataError("csv: need at least one feature column besides the target");

    Dataset ds;
    ds.target_name = names[tcol];
    for (std::size_t j = 0; j < width; ++j) {
        if (j != tcol) ds.feature_names.push_back(header ? names[j] : "x" + names[j]);
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    ds.X.resize(n, static_cast<Eigen::Index>(width - 1));
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        Eigen::Index c = 0;
        for (std::size_t j = 0; j < width; ++j) {
            if (j == tcol) {
                ds.y[i] = row[j];
            } else {
                ds.X(i, c++) = row[j];
            }
        }
    }
    return ds;
}

inline Dataset load_csv(const std::string& path, const std::string& target, bool header = true) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return parse_csv(in, target, header);
}

/// Parses a feature-only CSV (no target column), e.g. inputs to predict.
/// A column named `drop` is ignored if present.
inline Matrix parse_features_csv(std::istream& in, bool header = true, const std::string& drop = "") {
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    std::size_t line_no = 0;
    std::size_t drop_col = static_cast<std::size_t>(-1);
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_record(line);
        if (first) {
            width = fields.size();
            first = false;
            if (header) {
                for (std::size_t j = 0; j < fields.size(); ++j) {
                    if (!drop.empty() && detail::trim(fields[j]) == drop) drop_col = j;
                }
                continue;
            }
        }
        if (fields.size() != width) {
            throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " cells, found " + std::to_string(fields.size()));
        }
        std::vector<double> row;
        for (std::size_t j = 0; j < width; ++j) {
            if (j == drop_col) continue;
            const auto v = detail::parse_number(fields[j]);
            if (!v) throw DataError("csv line " + std::to_string(line_no) + ": non-numeric or empty cell");
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("csv: no data rows");
    Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return X;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes features then the target, with a header row.
inline void write_csv(std::ostream& out, const Dataset& ds) {
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) out << ds.feature_names[j] << ',';
    out << ds.target_name << '\n';
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) out << format_double(ds.X(i, j)) << ',';
        out << format_double(ds.y[i]) << '\n';
    }
}

inline void save_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_csv(out, ds);
}

inline Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
    Dataset out;
    out.feature_names = ds.feature_names;
    out.target_name = ds.target_name;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]);
        out.y[static_cast<Eigen::Index>(i)] = ds.y[rows[i]];
    }
    return out;
}

struct Split {
    Dataset train;
    Dataset test;
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows;
};

/// Seeded shuffle split; the test set gets round(n * test_fraction) rows,
/// clamped so both sides are nonempty.
inline Split train_test_split(const Dataset& ds, double test_fraction = 0.2, std::uint64_t seed = 0) {
    require(test_fraction > 0.0 && test_fraction < 1.0, "train_test_split: fraction must be in (0,1)");
    const Eigen::Index n = ds.rows();
    require(n >= 2, "train_test_split: need at least two rows");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_test = static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<Eigen::Index>(n_test, 1, n - 1);
    Split s;
    s.test_rows.assign(order.begin(), order.begin() + n_test);
    s.train_rows.assign(order.begin() + n_test, order.end());
    std::sort(s.test_rows.begin(), s.test_rows.end());
    std::sort(s.train_rows.begin(), s.train_rows.end());
    s.train = subset(ds, s.train_rows);
    s.test = subset(ds, s.test_rows);
    return s;
}

inline std::vector<std::string> default_names(Eigen::Index d) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j));
    return names;
}

/// y = X beta + eps, X ~ U(0,1)^d, beta ~ N(0,1) (all zero when
/// `zero_beta`, giving a pure-noise target), eps ~ N(0, noise_sd).
inline Dataset gen_linear(Eigen::Index n, Eigen::Index d, double noise_sd, std::uint64_t seed,
                          bool zero_beta = false) {
    require(n >= 2 && d >= 1, "gen_linear: need n >= 2 and d >= 1");
    require(noise_sd >= 0.0, "gen_linear: noise_sd must be >= 0");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector beta(d);
    for (Eigen::Index j = 0; j < d; ++j) beta[j] = zero_beta ? 0.0 : normal(rng);
    Dataset ds;
    ds.X.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) ds.X(i, j) = unif(rng);
    }
    ds.y = ds.X * beta;
    for (Eigen::Index i = 0; i < n; ++i) ds.y[i] += noise_sd * normal(rng);
    ds.feature_names = default_names(d);
    return ds;
}

enum class Friedman { F1, F2, F3 };

inline Friedman friedman_from_string(const std::string& s) {
    if (s == "F1" || s == "f1" || s == "friedman1") return Friedman::F1;
    if (s == "F2" || s == "f2" || s == "friedman2") return Friedman::F2;
    if (s == "F3" || s == "f3" || s == "friedman3") return Friedman::F3;
    throw InputError("unknown Friedman variant: " + s);
}

/// Noise-free Friedman response at one point.
inline double friedman_target(Friedman variant, std::span<const double> x) {
    using std::numbers::pi;
    switch (variant) {
        case Friedman::F1:
            require(x.size() >= 5, "friedman F1 needs 5 inputs");
            return 10.0 * std::sin(pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] + 5.0 * x[4];
        case Friedman::F2: {
            require(x.size() >= 4, "friedman F2 needs 4 inputs");
            const double t = x[1] * x[2] - 1.0 / (x[1] * x[3]);
            return std::sqrt(x[0] * x[0] + t * t);
        }
        case Friedman::F3: {
            require(x.size() >= 4, "friedman F3 needs 4 inputs");
            const double t = x[1] * x[2] - 1.0 / (x[1] * x[3]);
            return std::atan(t / x[0]);
        }
    }
    return 0.0;
}

/// Friedman benchmarks. F1 draws 10 U(0,1) inputs (the last five are pure
/// noise features). F2/F3 draw x1 in [0,100], x2 in [40pi,560pi],
/// x3 in [0,1], x4 in [1,11]; F3 shifts x1 to [0.01,100] to stay clear of
/// the division by zero.
inline Dataset gen_friedman(Friedman variant, Eigen::Index n, double noise_sd, std::uint64_t seed) {
    using std::numbers::pi;
    require(n >= 2, "gen_friedman: need n >= 2");
    require(noise_sd >= 0.0, "gen_friedman: noise_sd must be >= 0");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::Index d = variant == Friedman::F1 ? 10 : 4;
    Dataset ds;
    ds.X.resize(n, d);
    ds.y.resize(n);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (variant == Friedman::F1) {
            for (auto& v : x) v = unif(rng);
        } else {
            const double x1_lo = variant == Friedman::F3 ? 0.01 : 0.0;
            x[0] = x1_lo + (100.0 - x1_lo) * unif(rng);
            x[1] = 40.0 * pi + 520.0 * pi * unif(rng);
            x[2] = unif(rng);
            x[3] = 1.0 + 10.0 * unif(rng);
        }
        for (Eigen::Index j = 0; j < d; ++j) ds.X(i, j) = x[static_cast<std::size_t>(j)];
        ds.y[i] = friedman_target(variant, x) + noise_sd * normal(rng);
    }
    ds.feature_names = default_names(d);
    return ds;
}

/// Least-squares fit with intercept; coef[0] is the intercept.
struct OlsModel {
    Vector coef;

    Vector predict(const Eigen::Ref<const Matrix>& X) const {
        require(X.cols() + 1 == coef.size(), "ols predict: feature count mismatch");
        Vector out = X * coef.tail(coef.size() - 1);
        out.array() += coef[0];
        return out;
    }
};

/// Normal equations via LDLT; a 1e-10 ridge is added when the Gram matrix
/// is singular.
inline OlsModel ols_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
    require(X.rows() >= 1 && X.rows() == y.size(), "ols_fit: shape mismatch");
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    Matrix A(n, d + 1);
    A.col(0).setOnes();
    A.rightCols(d) = X;
    Matrix gram = A.transpose() * A;
    const Vector rhs = A.transpose() * y;
    Eigen::LDLT<Matrix> ldlt(gram);
    const double scale = std::max(1.0, gram.diagonal().maxCoeff());
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13 || !ldlt.isPositive()) {
        gram.diagonal().array() += 1e-10 * scale;
        ldlt.compute(gram);
    }
    return {ldlt.solve(rhs)};
}

inline OlsModel ols_fit(const Dataset& ds) { return ols_fit(ds.X, ds.y); }

/// One wide network trained on standardized data, the "big NN" baseline.
struct BigNN {
    SmallNet net;
    Standardization scaling;

    Vector predict(const Eigen::Ref<const Matrix>& X) const {
        return scaling.invert_y(forward(net, scaling.apply_x(X)));
    }
};

inline BigNN bignn_fit(const Dataset& ds, int k = 100, const TrainConfig& cfg = {}, std::uint64_t seed = 0,
                       Activation act = Activation::relu) {
    require(k >= 1, "bignn_fit: k must be >= 1");
    const Eigen::Ref<const Vector> yref(ds.y);
    BigNN model;
    model.scaling = fit_standardization(ds.X, &yref, true);
    const Matrix Xs = model.scaling.apply_x(ds.X);
    const Vector ys = model.scaling.apply_y(ds.y);
    Rng rng(seed);
    SmallNet net = init_net(k, static_cast<int>(ds.cols()), act, 0.0, rng);
    // Output layer starts small but nonzero so every hidden unit gets gradient.
    std::uniform_real_distribution<double> unif(-std::sqrt(6.0 / (k + 1.0)), std::sqrt(6.0 / (k + 1.0)));
    for (Eigen::Index h = 0; h < net.w2.size(); ++h) net.w2[h] = unif(rng);
    model.net = train(std::move(net), Xs, ys, cfg, rng);
    return model;
}

inline double rmse(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    require(a.size() == b.size() && a.size() > 0, "rmse: length mismatch");
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

inline double stddev(const Eigen::Ref<const Vector>& v) {
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().mean());
}

/// 64-bit FNV-1a over the shape and raw bytes of X and y.
inline std::uint64_t fingerprint(const Dataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::int64_t shape[2] = {ds.rows(), ds.cols()};
    feed(shape, sizeof shape);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.cols(); ++j) {
            const double v = ds.X(i, j);
            feed(&v, sizeof v);
        }
        const double t = ds.y[i];
        feed(&t, sizeof t);
    }
    return h;
}

}  // namespace barn::data
