#pragma once

// Neural proposal for predictive-switching control: density features, a
// small tanh MLP, Levenberg-Marquardt training with cross-validation, and
// the accept-or-fall-back window loop.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "psc/controller.hpp"
#include "psc/errors.hpp"
#include "psc/grid.hpp"

namespace psc {

// ---------------------------------------------------------------------------
// Features.

/// Narrow Gaussian at the target, used as the KL reference.
struct TargetReference {
    std::vector<double> target;
    double width_cells = 2.0;  // standard deviation in cells along each axis
    DensityGrid density;

    static TargetReference make(const DomainSpec& d, std::vector<double> target, double width_cells = 2.0) {
        if (!(width_cells > 0.0)) throw ConfigError("accelerator.reference_width", "must be positive");
        TargetReference r;
        const auto snapped = snap_to_cell(d, target);
        r.target = snapped.center;
        r.width_cells = width_cells;
        std::vector<double> sigma(d.dims());
        for (std::size_t i = 0; i < d.dims(); ++i) sigma[i] = width_cells * d.spacing(i);
        r.density = truncated_gaussian(d, r.target, sigma);
        return r;
    }
};

/// z = (s_{m-1}, x_mode, p(x*), |x_mode - x*|, KL(p || ref)).
struct FeatureVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

inline std::size_t feature_count(std::size_t inputs, std::size_t dims) { return inputs + dims + 3; }

inline FeatureVector extract_features(const DensityGrid& p, const Bits& prev, const TargetReference& ref) {
    const auto& d = p.domain;
    const double peak = *std::max_element(p.values.begin(), p.values.end());
    if (!(peak > 0.0)) throw NumericalError("features of an all-zero density");
    FeatureVector z;
    for (int b : prev) z.values.push_back(b ? 1.0 : 0.0);
    const auto mode = cell_center(d, argmax_cell(p));
    z.values.insert(z.values.end(), mode.begin(), mode.end());
    const auto snapped = snap_to_cell(d, ref.target);
    z.values.push_back(p[snapped.cell]);
    double dist2 = 0.0;
    for (std::size_t i = 0; i < d.dims(); ++i) dist2 += (mode[i] - ref.target[i]) * (mode[i] - ref.target[i]);
    z.values.push_back(std::sqrt(dist2));
    z.values.push_back(kl_divergence(p, ref.density));
    for (double v : z.values)
        if (!std::isfinite(v)) throw NumericalError("non-finite feature");
    return z;
}

// ---------------------------------------------------------------------------
// Network.

/// Round half-up and read the bits as a binary-counting row index.
inline std::size_t propose_row(const std::vector<double>& s_hat) {
    std::size_t r = 0;
    for (double v : s_hat) r = (r << 1) | static_cast<std::size_t>(v >= 0.5);
    return r;
}

class Mlp {
public:
    static constexpr std::uint32_t kVersion = 1;

    Mlp() = default;

    /// Layer sizes [in, h1, h2, out]; weights drawn from a seeded Glorot-uniform law.
    Mlp(std::size_t in, std::size_t out, std::uint64_t seed, std::size_t h1 = 20, std::size_t h2 = 10) {
        sizes_ = {in, h1, h2, out};
        mean_.assign(in, 0.0);
        scale_.assign(in, 1.0);
        used_.assign(in, 1);
        std::mt19937_64 rng(seed);
        for (std::size_t l = 0; l < 3; ++l) {
            const double a = std::sqrt(6.0 / static_cast<double>(sizes_[l] + sizes_[l + 1]));
            std::uniform_real_distribution<double> U(-a, a);
            Eigen::MatrixXd w(sizes_[l + 1], sizes_[l]);
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = U(rng);
            weights_.push_back(w);
            biases_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes_[l + 1])));
        }
    }

    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    std::size_t inputs() const noexcept { return sizes_.empty() ? 0 : sizes_.front(); }
    std::size_t outputs() const noexcept { return sizes_.empty() ? 0 : sizes_.back(); }

    std::size_t parameter_count() const noexcept {
        std::size_t c = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) c += sizes_[l + 1] * (sizes_[l] + 1);
        return c;
    }

    Eigen::MatrixXd& weight(std::size_t l) { return weights_.at(l); }
    Eigen::VectorXd& bias(std::size_t l) { return biases_.at(l); }
    const Eigen::MatrixXd& weight(std::size_t l) const { return weights_.at(l); }
    const Eigen::VectorXd& bias(std::size_t l) const { return biases_.at(l); }

    const std::vector<double>& feature_mean() const noexcept { return mean_; }
    const std::vector<double>& feature_scale() const noexcept { return scale_; }
    const std::vector<char>& feature_used() const noexcept { return used_; }

    /// Z-score statistics over `rows`; features with zero spread are dropped (input held at 0).
    std::vector<std::string> fit_normalization(const std::vector<std::vector<double>>& rows) {
        std::vector<std::string> warnings;
        const std::size_t k = inputs();
        if (rows.empty()) throw ConfigError("dataset", "no training rows");
        for (std::size_t j = 0; j < k; ++j) {
            double m = 0.0;
            for (const auto& r : rows) m += r.at(j);
            m /= static_cast<double>(rows.size());
            double v = 0.0;
            for (const auto& r : rows) v += (r[j] - m) * (r[j] - m);
            v /= static_cast<double>(rows.size());
            const double sd = std::sqrt(v);
            mean_[j] = m;
            if (sd > 1e-12 * (std::abs(m) + 1e-300) && sd > 0.0) {
                scale_[j] = sd;
                used_[j] = 1;
            } else {
                scale_[j] = 1.0;
                used_[j] = 0;
                warnings.push_back("feature " + std::to_string(j) + " is constant on the training split and was dropped");
            }
        }
        return warnings;
    }

    Eigen::VectorXd normalize(const std::vector<double>& z) const {
        if (z.size() != inputs()) throw ConfigError("features", "dimension mismatch: expected " + std::to_string(inputs()));
        Eigen::VectorXd a(static_cast<Eigen::Index>(z.size()));
        for (std::size_t j = 0; j < z.size(); ++j) a[static_cast<Eigen::Index>(j)] = used_[j] ? (z[j] - mean_[j]) / scale_[j] : 0.0;
        return a;
    }

    /// s_hat in [0,1]^n: tanh, tanh, saturating linear, then (y + 1) / 2.
    std::vector<double> forward(const std::vector<double>& z) const {
        Eigen::VectorXd a = normalize(z);
        for (std::size_t l = 0; l < 2; ++l) a = (weights_[l] * a + biases_[l]).array().tanh().matrix();
        const Eigen::VectorXd y = (weights_[2] * a + biases_[2]).cwiseMax(-1.0).cwiseMin(1.0);
        std::vector<double> s(static_cast<std::size_t>(y.size()));
        for (Eigen::Index k = 0; k < y.size(); ++k) s[static_cast<std::size_t>(k)] = 0.5 * (y[k] + 1.0);
        return s;
    }

    std::vector<double> forward(const FeatureVector& z) const { return forward(z.values); }

    // Flat parameter vector: W1, b1, W2, b2, W3, b3 (column-major weights).
    Eigen::VectorXd parameters() const {
        Eigen::VectorXd th(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index o = 0;
        for (std::size_t l = 0; l < 3; ++l) {
            th.segment(o, weights_[l].size()) = Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
            o += weights_[l].size();
            th.segment(o, biases_[l].size()) = biases_[l];
            o += biases_[l].size();
        }
        return th;
    }

    void set_parameters(const Eigen::VectorXd& th) {
        if (static_cast<std::size_t>(th.size()) != parameter_count()) throw ConfigError("parameters", "size mismatch");
        Eigen::Index o = 0;
        for (std::size_t l = 0; l < 3; ++l) {
            Eigen::Map<Eigen::VectorXd>(weights_[l].data(), weights_[l].size()) = th.segment(o, weights_[l].size());
            o += weights_[l].size();
            biases_[l] = th.segment(o, biases_[l].size());
            o += biases_[l].size();
        }
    }

    void save(std::ostream& os) const {
        os.write("PSCMLP\0\0", 8);
        auto u64 = [&](std::uint64_t v) { detail::write_le(os, v); };
        auto f64 = [&](double v) { detail::write_le(os, v); };
        u64(kVersion);
        u64(sizes_.size());
        for (auto s : sizes_) u64(s);
        u64(1);  // activation tag: tanh, tanh, satlins
        for (std::size_t j = 0; j < inputs(); ++j) {
            f64(mean_[j]);
            f64(scale_[j]);
            u64(used_[j] ? 1 : 0);
        }
        const auto th = parameters();
        for (Eigen::Index i = 0; i < th.size(); ++i) f64(th[i]);
        if (!os) throw std::runtime_error("failed to write network");
    }

    static Mlp load(std::istream& is) {
        char magic[8];
        is.read(magic, 8);
        if (!is || std::string(magic, 6) != "PSCMLP") throw ConfigError("model", "not a network file");
        auto u64 = [&] { return detail::read_le<std::uint64_t>(is); };
        auto f64 = [&] { return detail::read_le<double>(is); };
        if (u64() != kVersion) throw ConfigError("model", "unsupported network version");
        const auto nl = u64();
        if (nl != 4) throw ConfigError("model", "expected four layer sizes");
        std::vector<std::size_t> s(nl);
        for (auto& v : s) v = u64();
        if (u64() != 1) throw ConfigError("model", "unknown activation tag");
        Mlp net(s[0], s[3], 0, s[1], s[2]);
        for (std::size_t j = 0; j < s[0]; ++j) {
            net.mean_[j] = f64();
            net.scale_[j] = f64();
            net.used_[j] = u64() != 0;
        }
        Eigen::VectorXd th(static_cast<Eigen::Index>(net.parameter_count()));
        for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = f64();
        if (!is) throw ConfigError("model", "truncated network file");
        net.set_parameters(th);
        return net;
    }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + path);
        save(os);
    }
    static Mlp load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ConfigError("model", "cannot open " + path);
        return load(is);
    }

private:
    std::vector<std::size_t> sizes_;
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
    std::vector<double> mean_, scale_;
    std::vector<char> used_;
};

// ---------------------------------------------------------------------------
// Dataset.

struct TrainingSample {
    std::vector<double> features;
    Bits label;
    std::size_t run = 0;
    std::size_t window = 0;
};

struct Dataset {
    std::size_t inputs = 0;  // label width
    std::size_t dims = 0;
    std::vector<TrainingSample> samples;

    std::vector<std::size_t> label_histogram() const {
        std::vector<std::size_t> h(std::size_t{1} << inputs, 0);
        for (const auto& s : samples) ++h[row_index(s.label)];
        return h;
    }

    void write_csv(std::ostream& os) const {
        os << "run,window";
        for (std::size_t j = 0; j < inputs; ++j) os << ",prev" << j;
        for (std::size_t i = 0; i < dims; ++i) os << ",mode" << i;
        os << ",p_target,d_target,kl";
        for (std::size_t j = 0; j < inputs; ++j) os << ",label" << j;
        os << '\n' << std::setprecision(17);
        for (const auto& s : samples) {
            os << s.run << ',' << s.window;
            for (double v : s.features) os << ',' << v;
            for (int b : s.label) os << ',' << b;
            os << '\n';
        }
    }

    static Dataset read_csv(std::istream& is) {
        std::string line;
        if (!std::getline(is, line)) throw ConfigError("dataset", "empty file");
        std::size_t prev = 0, labels = 0, modes = 0;
        std::stringstream hs(line);
        for (std::string col; std::getline(hs, col, ',');) {
            if (col.rfind("prev", 0) == 0) ++prev;
            if (col.rfind("label", 0) == 0) ++labels;
            if (col.rfind("mode", 0) == 0) ++modes;
        }
        if (prev != labels) throw ConfigError("dataset", "prev and label column counts differ");
        Dataset d;
        d.inputs = labels;
        d.dims = modes;
        const std::size_t nf = feature_count(labels, modes);
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::stringstream ls(line);
            std::vector<double> v;
            for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
            if (v.size() != 2 + nf + labels) throw ConfigError("dataset", "wrong column count in row");
            TrainingSample s;
            s.run = static_cast<std::size_t>(v[0]);
            s.window = static_cast<std::size_t>(v[1]);
            s.features.assign(v.begin() + 2, v.begin() + 2 + static_cast<std::ptrdiff_t>(nf));
            for (std::size_t j = 0; j < labels; ++j) s.label.push_back(v[2 + nf + j] != 0.0 ? 1 : 0);
            d.samples.push_back(std::move(s));
        }
        return d;
    }
};

/// Runs exhaustive PSC and records (features at window start, chosen bits) for every window.
inline PscResult collect_samples(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p0,
                                 const StepConfig& cfg, const TargetReference& ref, std::size_t run, Dataset& out) {
    const auto& plan = engine.plan();
    out.inputs = plan.inputs();
    out.dims = p0.domain.dims();
    Bits prev(plan.inputs(), 0);
    // Features depend on the density entering the window, so the loop runs here.
    PscResult res;
    res.trace = detail::start_trace(engine, j, p0, cfg, "exhaustive");
    DensityGrid p = p0;
    std::size_t evals = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t m = 0; m < plan.windows; ++m) {
        TrainingSample s;
        s.features = extract_features(p, prev, ref).values;
        s.run = run;
        s.window = m;
        auto w = psc_window(engine, j, p);
        evals += w.evaluations;
        s.label = plan.matrix[w.row];
        out.samples.push_back(std::move(s));
        WindowRecord rec;
        rec.m = m;
        rec.t = p.time;
        rec.row = w.row;
        rec.bits = plan.matrix[w.row];
        rec.cost = w.cost;
        rec.candidates = std::move(w.candidates);
        rec.evaluations = evals;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.trace.stats.merge(w.stats);
        prev = rec.bits;
        p = std::move(w.density);
        res.trace.windows.push_back(std::move(rec));
    }
    res.trace.snapshots.push_back({plan.windows, p});
    res.final_density = std::move(p);
    return res;
}

// ---------------------------------------------------------------------------
// Training.

struct Scores {
    double exact_match = 0.0;
    double bit_accuracy = 0.0;
    std::size_t samples = 0;
};

inline Scores score(const Mlp& net, const std::vector<TrainingSample>& data) {
    Scores s;
    s.samples = data.size();
    if (data.empty()) return s;
    std::size_t exact = 0, bits = 0, total = 0;
    for (const auto& d : data) {
        const auto sh = net.forward(d.features);
        bool all = true;
        for (std::size_t k = 0; k < sh.size(); ++k) {
            const int b = sh[k] >= 0.5 ? 1 : 0;
            if (b == d.label[k]) ++bits;
            else all = false;
            ++total;
        }
        exact += all ? 1 : 0;
    }
    s.exact_match = static_cast<double>(exact) / static_cast<double>(data.size());
    s.bit_accuracy = static_cast<double>(bits) / static_cast<double>(total);
    return s;
}

struct TrainOptions {
    std::size_t folds = 5;
    double holdout = 0.15;
    double validation = 0.15;  // of each training split, for early stopping
    std::size_t max_epochs = 150;
    std::size_t max_fail = 6;
    double mu = 1e-3;
    double mu_decrease = 0.1;
    double mu_increase = 10.0;
    double mu_max = 1e10;
    double goal = 0.0;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

struct FitReport {
    std::size_t epochs = 0;
    double train_mse = 0.0;
    double validation_mse = 0.0;
    bool converged = true;  // false: stopped on mu_max or epochs and returned best-so-far
    std::vector<std::string> warnings;
};

namespace detail {

// Residuals r (rows: sample x output) and Jacobian dr/dtheta for MSE on s_hat.
inline void residuals(const Mlp& net, const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::VectorXd>& t,
                      Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const std::size_t n_out = net.outputs();
    const auto& W1 = net.weight(0);
    const auto& W2 = net.weight(1);
    const auto& W3 = net.weight(2);
    const Eigen::Index in = W1.cols(), h1 = W1.rows(), h2 = W2.rows();
    r.resize(static_cast<Eigen::Index>(x.size() * n_out));
    if (jac) jac->resize(r.size(), static_cast<Eigen::Index>(net.parameter_count()));
    const Eigen::Index o_w1 = 0, o_b1 = o_w1 + h1 * in, o_w2 = o_b1 + h1, o_b2 = o_w2 + h2 * h1, o_w3 = o_b2 + h2,
                       o_b3 = o_w3 + static_cast<Eigen::Index>(n_out) * h2;
    for (std::size_t s = 0; s < x.size(); ++s) {
        const Eigen::VectorXd a1 = (W1 * x[s] + net.bias(0)).array().tanh().matrix();
        const Eigen::VectorXd a2 = (W2 * a1 + net.bias(1)).array().tanh().matrix();
        const Eigen::VectorXd z3 = W3 * a2 + net.bias(2);
        for (std::size_t k = 0; k < n_out; ++k) {
            const Eigen::Index row = static_cast<Eigen::Index>(s * n_out + k);
            const double zk = z3[static_cast<Eigen::Index>(k)];
            const double y = std::clamp(zk, -1.0, 1.0);
            r[row] = 0.5 * (y + 1.0) - t[s][static_cast<Eigen::Index>(k)];
            if (!jac) continue;
            auto J = jac->row(row);
            J.setZero();
            const double g3 = (zk > -1.0 && zk < 1.0) ? 0.5 : 0.0;
            if (g3 == 0.0) continue;
            for (Eigen::Index j = 0; j < h2; ++j) J[o_w3 + j * static_cast<Eigen::Index>(n_out) + static_cast<Eigen::Index>(k)] = g3 * a2[j];
            J[o_b3 + static_cast<Eigen::Index>(k)] = g3;
            const Eigen::VectorXd d2 =
                (g3 * W3.row(static_cast<Eigen::Index>(k)).transpose()).cwiseProduct((1.0 - a2.array().square()).matrix());
            for (Eigen::Index c = 0; c < h1; ++c)
                for (Eigen::Index rr = 0; rr < h2; ++rr) J[o_w2 + c * h2 + rr] = d2[rr] * a1[c];
            J.segment(o_b2, h2) = d2.transpose();
            const Eigen::VectorXd d1 = (W2.transpose() * d2).cwiseProduct((1.0 - a1.array().square()).matrix());
            for (Eigen::Index c = 0; c < in; ++c)
                for (Eigen::Index rr = 0; rr < h1; ++rr) J[o_w1 + c * h1 + rr] = d1[rr] * x[s][c];
            J.segment(o_b1, h1) = d1.transpose();
        }
    }
}

inline double mse(const Mlp& net, const std::vector<Eigen::VectorXd>& x, const std::vector<Eigen::VectorXd>& t) {
    if (x.empty()) return 0.0;
    Eigen::VectorXd r;
    residuals(net, x, t, r, nullptr);
    return r.squaredNorm() / static_cast<double>(r.size());
}

}  // namespace detail

/// Levenberg-Marquardt on the mean squared error of s_hat, with early stopping on a
/// validation split carved out of `train`. Normalisation statistics come from the fitting split.
inline FitReport fit_lm(Mlp& net, const std::vector<TrainingSample>& train, const TrainOptions& opt) {
    FitReport rep;
    if (train.empty()) throw ConfigError("dataset", "no training samples");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::floor(opt.validation * static_cast<double>(train.size())));
    if (train.size() < 10) n_val = 0;
    std::vector<std::vector<double>> fit_rows;
    for (std::size_t i = n_val; i < order.size(); ++i) fit_rows.push_back(train[order[i]].features);
    rep.warnings = net.fit_normalization(fit_rows);

    auto encode = [&](std::size_t lo, std::size_t hi, std::vector<Eigen::VectorXd>& x, std::vector<Eigen::VectorXd>& t) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& s = train[order[i]];
            x.push_back(net.normalize(s.features));
            Eigen::VectorXd y(static_cast<Eigen::Index>(s.label.size()));
            for (std::size_t k = 0; k < s.label.size(); ++k) y[static_cast<Eigen::Index>(k)] = s.label[k];
            t.push_back(y);
        }
    };
    std::vector<Eigen::VectorXd> xv, tv, xf, tf;
    encode(0, n_val, xv, tv);
    encode(n_val, order.size(), xf, tf);

    double mu = opt.mu;
    Eigen::VectorXd r, r_try;
    Eigen::MatrixXd J;
    detail::residuals(net, xf, tf, r, &J);
    double sse = r.squaredNorm();
    Eigen::VectorXd best = net.parameters();
    double best_val = n_val ? detail::mse(net, xv, tv) : sse / static_cast<double>(r.size());
    std::size_t fails = 0;
    for (rep.epochs = 0; rep.epochs < opt.max_epochs; ++rep.epochs) {
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        const Eigen::VectorXd theta = net.parameters();
        bool improved = false;
        while (mu <= opt.mu_max) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal().array() += mu;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success) {
                mu *= opt.mu_increase;
                continue;
            }
            net.set_parameters(theta - llt.solve(g));
            detail::residuals(net, xf, tf, r_try, nullptr);
            const double sse_try = r_try.squaredNorm();
            if (std::isfinite(sse_try) && sse_try < sse) {
                sse = sse_try;
                mu = std::max(mu * opt.mu_decrease, 1e-20);
                improved = true;
                break;
            }
            mu *= opt.mu_increase;
        }
        if (!improved) {
            net.set_parameters(theta);
            rep.converged = false;
            break;
        }
        detail::residuals(net, xf, tf, r, &J);
        const double val = n_val ? detail::mse(net, xv, tv) : sse / static_cast<double>(r.size());
        if (val < best_val) {
            best_val = val;
            best = net.parameters();
            fails = 0;
        } else if (++fails >= opt.max_fail) {
            ++rep.epochs;
            break;
        }
        if (sse / static_cast<double>(r.size()) <= opt.goal) {
            ++rep.epochs;
            break;
        }
    }
    if (rep.epochs >= opt.max_epochs) rep.converged = false;
    net.set_parameters(best);
    rep.train_mse = detail::mse(net, xf, tf);
    rep.validation_mse = n_val ? detail::mse(net, xv, tv) : rep.train_mse;
    return rep;
}

struct FoldMetrics {
    Scores train, test;
    FitReport fit;
};

struct TrainReport {
    std::size_t parameters = 0;
    std::size_t samples = 0;
    std::size_t holdout_samples = 0;
    std::vector<FoldMetrics> folds;
    Scores cv_mean, cv_std;  // over folds (test side)
    Scores holdout;
    FitReport final_fit;
    std::vector<std::size_t> label_histogram;
    std::vector<std::string> warnings;

    void write_text(std::ostream& os) const {
        os << std::setprecision(6);
        os << "parameters " << parameters << "\nsamples " << samples << "\nholdout_samples " << holdout_samples << '\n';
        os << "label_histogram";
        for (auto c : label_histogram) os << ' ' << c;
        os << '\n';
        for (std::size_t f = 0; f < folds.size(); ++f)
            os << "fold " << f << " epochs " << folds[f].fit.epochs << " exact_match " << folds[f].test.exact_match
               << " bit_accuracy " << folds[f].test.bit_accuracy << " train_exact_match " << folds[f].train.exact_match
               << '\n';
        os << "cv_exact_match " << cv_mean.exact_match << " +- " << cv_std.exact_match << '\n';
        os << "cv_bit_accuracy " << cv_mean.bit_accuracy << " +- " << cv_std.bit_accuracy << '\n';
        os << "holdout_exact_match " << holdout.exact_match << '\n';
        os << "holdout_bit_accuracy " << holdout.bit_accuracy << '\n';
        os << "final_epochs " << final_fit.epochs << " converged " << (final_fit.converged ? 1 : 0) << '\n';
        for (const auto& w : warnings) os << "warning " << w << '\n';
    }
};

/// 15% hold-out, k-fold cross-validation on the rest, then a final fit on the full
/// non-hold-out part scored on the hold-out.
inline Mlp train(const Dataset& data, const TrainOptions& opt, TrainReport& report) {
    if (data.samples.empty()) throw ConfigError("dataset", "no samples");
    if (opt.folds < 2) throw ConfigError("train.folds", "need at least two folds");
    const std::size_t n_in = feature_count(data.inputs, data.dims);
    for (const auto& s : data.samples)
        if (s.features.size() != n_in || s.label.size() != data.inputs)
            throw ConfigError("dataset", "inconsistent sample width");
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opt.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_hold = static_cast<std::size_t>(std::round(opt.holdout * static_cast<double>(order.size())));
    std::vector<TrainingSample> hold, rest;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_hold ? hold : rest).push_back(data.samples[order[i]]);

    report = TrainReport{};
    report.samples = data.samples.size();
    report.holdout_samples = hold.size();
    report.label_histogram = data.label_histogram();
    report.parameters = Mlp(n_in, data.inputs, 0).parameter_count();
    if (rest.size() < 10 * report.parameters)
        report.warnings.push_back("dataset has fewer than 10 samples per parameter (" + std::to_string(rest.size()) + " for " +
                                  std::to_string(report.parameters) + ")");

    report.folds.resize(opt.folds);
    parallel_for(opt.folds, opt.threads, [&](std::size_t f) {
        std::vector<TrainingSample> tr, te;
        for (std::size_t i = 0; i < rest.size(); ++i) (i % opt.folds == f ? te : tr).push_back(rest[i]);
        Mlp net(n_in, data.inputs, opt.seed + 1000 + f);
        TrainOptions o = opt;
        o.seed = opt.seed + 2000 + f;
        report.folds[f].fit = fit_lm(net, tr, o);
        report.folds[f].train = score(net, tr);
        report.folds[f].test = score(net, te);
    });
    for (const auto& f : report.folds) {
        report.cv_mean.exact_match += f.test.exact_match / static_cast<double>(opt.folds);
        report.cv_mean.bit_accuracy += f.test.bit_accuracy / static_cast<double>(opt.folds);
    }
    for (const auto& f : report.folds) {
        report.cv_std.exact_match += std::pow(f.test.exact_match - report.cv_mean.exact_match, 2) / static_cast<double>(opt.folds);
        report.cv_std.bit_accuracy += std::pow(f.test.bit_accuracy - report.cv_mean.bit_accuracy, 2) / static_cast<double>(opt.folds);
    }
    report.cv_std.exact_match = std::sqrt(report.cv_std.exact_match);
    report.cv_std.bit_accuracy = std::sqrt(report.cv_std.bit_accuracy);

    Mlp net(n_in, data.inputs, opt.seed + 1);
    report.final_fit = fit_lm(net, rest, opt);
    for (const auto& w : report.final_fit.warnings) report.warnings.push_back(w);
    report.holdout = score(net, hold);
    return net;
}

// ---------------------------------------------------------------------------
// Accelerated loop.

/// Returns the proposed row for the density entering window m.
using Proposer = std::function<std::size_t(const DensityGrid& p, const Bits& prev, std::size_t m)>;

inline Proposer mlp_proposer(const Mlp& net, const TargetReference& ref) {
    return [&net, &ref](const DensityGrid& p, const Bits& prev, std::size_t) {
        return propose_row(net.forward(extract_features(p, prev, ref)));
    };
}

struct AcceleratedWindow {
    WindowResult result;
    std::size_t proposal = 0;
    bool accepted = false;
};

/// One propagation under the proposal; accepted when its cost does not fall below J_prev,
/// otherwise the remaining configurations are propagated and the best of all is taken.
inline AcceleratedWindow accelerated_window(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p,
                                            std::size_t proposal, double j_prev) {
    const std::size_t nr = engine.plan().configurations();
    if (proposal >= nr) throw ConfigError("proposal", "row index out of range");
    std::vector<DensityGrid> dens(nr);
    std::vector<double> costs(nr, std::numeric_limits<double>::quiet_NaN());
    std::vector<RunStats> stats(nr);
    AcceleratedWindow aw;
    aw.proposal = proposal;
    evaluate_rows(engine, j, p, {proposal}, dens, costs, stats);
    if (costs[proposal] >= j_prev) {
        aw.accepted = true;
        aw.result.row = proposal;
        aw.result.evaluations = 1;
    } else {
        std::vector<std::size_t> rest;
        for (std::size_t r = 0; r < nr; ++r)
            if (r != proposal) rest.push_back(r);
        evaluate_rows(engine, j, p, rest, dens, costs, stats);
        aw.result.row = select_best(costs);
        aw.result.evaluations = nr;
    }
    aw.result.cost = costs[aw.result.row];
    aw.result.density = std::move(dens[aw.result.row]);
    aw.result.candidates = std::move(costs);
    for (const auto& s : stats) aw.result.stats.merge(s);
    return aw;
}

struct ShadowCheck {
    std::size_t window = 0;
    bool accepted = false;
    std::size_t exhaustive_row = 0;
    double exhaustive_cost = 0.0;
    bool fallback_matches = true;  // rejected windows: same row and bitwise-equal cost
};

struct AcceleratedOptions {
    RunOptions run;
    bool shadow = false;  // also run the exhaustive window on the same density for every window
};

struct AcceleratedResult {
    PscResult psc;
    std::vector<ShadowCheck> shadow;
};

inline AcceleratedResult run_accelerated(const PscEngine& engine, const CostFunctional& j, const DensityGrid& p0,
                                         const StepConfig& cfg, const Proposer& propose,
                                         const AcceleratedOptions& opts = {}) {
    const auto& plan = engine.plan();
    AcceleratedResult out;
    auto& res = out.psc;
    res.trace = detail::start_trace(engine, j, p0, cfg, "accelerated");
    DensityGrid p = p0;
    double j_prev = res.trace.initial_cost;
    Bits prev(plan.inputs(), 0);
    std::size_t evals = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t m = 0; m < plan.windows; ++m) {
        const std::size_t proposal = propose(p, prev, m);
        std::optional<WindowResult> shadow;
        if (opts.shadow) shadow = psc_window(engine, j, p);
        auto aw = accelerated_window(engine, j, p, proposal, j_prev);
        if (shadow) {
            ShadowCheck sc;
            sc.window = m;
            sc.accepted = aw.accepted;
            sc.exhaustive_row = shadow->row;
            sc.exhaustive_cost = shadow->cost;
            sc.fallback_matches = aw.accepted || (aw.result.row == shadow->row && aw.result.cost == shadow->cost &&
                                                  aw.result.density.values == shadow->density.values);
            out.shadow.push_back(sc);
        }
        evals += aw.result.evaluations;
        WindowRecord rec;
        rec.m = m;
        rec.t = p.time;
        rec.row = aw.result.row;
        rec.bits = plan.matrix[rec.row];
        rec.cost = aw.result.cost;
        rec.candidates = std::move(aw.result.candidates);
        rec.evaluations = evals;
        rec.accepted = aw.accepted;
        rec.proposal = proposal;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.trace.stats.merge(aw.result.stats);
        j_prev = rec.cost;
        prev = rec.bits;
        p = std::move(aw.result.density);
        detail::maybe_snapshot(res.trace, opts.run, m, plan.windows, p);
        if (opts.run.on_window) opts.run.on_window(rec);
        res.trace.windows.push_back(std::move(rec));
    }
    res.final_density = std::move(p);
    return out;
}

}  // namespace psc
