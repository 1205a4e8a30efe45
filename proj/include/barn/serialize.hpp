#pragma once

// JSON model documents and JSONL traces. Doubles are written with
// shortest round-trip formatting, so a save/load cycle is bit-exact.

#include "barn/ensemble.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace barn::io {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline json vec_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector json_to_vec(const json& j) {
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace detail

inline json to_json(const BarnConfig& c) {
    json j;
    j["num_nets"] = c.num_nets;
    j["n_iter"] = c.n_iter;
    j["seed"] = c.seed;
    j["burn_in"] = c.resolved_burn_in();
    j["evidence_split"] = to_string(c.evidence_split);
    j["heldout_fraction"] = c.heldout_fraction;
    j["activation"] = to_string(c.activation);
    j["standardize_x"] = c.standardize_x;
    j["prior"] = {{"lambda", c.prior.lambda},
                  {"p_grow", c.prior.p_grow},
                  {"sigma_nu", c.prior.sigma_nu},
                  {"sigma_lambda", c.prior.sigma_lambda},
                  {"custom_log_pmf", static_cast<bool>(c.prior.custom_log_pmf)}};
    j["train"] = {{"solver", to_string(c.train.solver)},
                  {"learning_rate", c.train.learning_rate},
                  {"reg_l1", c.train.reg_l1},
                  {"reg_l2", c.train.reg_l2},
                  {"max_epochs", c.train.max_epochs},
                  {"tol", c.train.tol}};
    return j;
}

/// A custom prior function cannot be stored; it is dropped on load.
inline BarnConfig config_from_json(const json& j) {
    BarnConfig c;
    c.num_nets = j.at("num_nets").get<int>();
    c.n_iter = j.at("n_iter").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.burn_in = j.at("burn_in").get<int>();
    c.evidence_split = j.at("evidence_split").get<std::string>() == "heldout" ? EvidenceSplit::heldout
                                                                               : EvidenceSplit::train;
    c.heldout_fraction = j.at("heldout_fraction").get<double>();
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.standardize_x = j.value("standardize_x", true);
    const json& p = j.at("prior");
    c.prior.lambda = p.at("lambda").get<double>();
    c.prior.p_grow = p.at("p_grow").get<double>();
    c.prior.sigma_nu = p.at("sigma_nu").get<double>();
    c.prior.sigma_lambda = p.at("sigma_lambda").get<double>();
    const json& t = j.at("train");
    c.train.solver = solver_from_string(t.at("solver").get<std::string>());
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.reg_l1 = t.at("reg_l1").get<double>();
    c.train.reg_l2 = t.at("reg_l2").get<double>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.tol = t.at("tol").get<double>();
    return c;
}

inline json to_json(const SmallNet& net) {
    const Vector p = net.params();
    const Eigen::Index kd = net.W1.size();
    return {{"k", net.k()},
            {"d", net.d()},
            {"W1", std::vector<double>(p.data(), p.data() + kd)},
            {"b1", detail::vec_to_json(net.b1)},
            {"w2", detail::vec_to_json(net.w2)},
            {"b2", net.b2},
            {"activation", to_string(net.activation)}};
}

inline SmallNet net_from_json(const json& j) {
    const int k = j.at("k").get<int>();
    const auto w1 = j.at("W1").get<std::vector<double>>();
    require(k >= 1, "model json: k must be >= 1");
    require(!w1.empty() && w1.size() % static_cast<std::size_t>(k) == 0, "model json: W1 size not a multiple of k");
    const int d = j.contains("d") ? j.at("d").get<int>() : static_cast<int>(w1.size()) / k;
    require(w1.size() == static_cast<std::size_t>(k) * static_cast<std::size_t>(d), "model json: W1 shape mismatch");
    SmallNet net = SmallNet::zeros(k, d, activation_from_string(j.at("activation").get<std::string>()));
    for (int h = 0; h < k; ++h) {
        for (int c = 0; c < d; ++c) net.W1(h, c) = w1[static_cast<std::size_t>(h * d + c)];
    }
    net.b1 = detail::json_to_vec(j.at("b1"));
    net.w2 = detail::json_to_vec(j.at("w2"));
    net.b2 = j.at("b2").get<double>();
    net.validate();
    return net;
}

inline json to_json(const Model& m) {
    json j;
    j["version"] = kModelFormatVersion;
    j["task"] = to_string(m.task);
    j["config"] = to_json(m.config);
    j["standardization"] = {{"y_mean", m.scaling.y_mean},
                            {"y_sd", m.scaling.y_sd},
                            {"x_means", detail::vec_to_json(m.scaling.x_means)},
                            {"x_sds", detail::vec_to_json(m.scaling.x_sds)}};
    j["sigma"] = m.sigma;
    json nets = json::array();
    for (const auto& net : m.nets) nets.push_back(to_json(net));
    j["nets"] = std::move(nets);
    return j;
}

inline Model model_from_json(const json& j) {
    const int version = j.at("version").get<int>();
    require(version == kModelFormatVersion, "model json: unsupported version " + std::to_string(version));
    Model m;
    const std::string task = j.at("task").get<std::string>();
    require(task == "regression" || task == "binary", "model json: unknown task " + task);
    m.task = task == "binary" ? Task::binary : Task::regression;
    m.config = config_from_json(j.at("config"));
    const json& s = j.at("standardization");
    m.scaling.y_mean = s.at("y_mean").get<double>();
    m.scaling.y_sd = s.at("y_sd").get<double>();
    m.scaling.x_means = detail::json_to_vec(s.at("x_means"));
    m.scaling.x_sds = detail::json_to_vec(s.at("x_sds"));
    m.sigma = j.at("sigma").get<double>();
    for (const auto& nj : j.at("nets")) {
        m.nets.push_back(net_from_json(nj));
        require(m.nets.back().d() == m.scaling.x_means.size(), "model json: net input size mismatch");
    }
    require(!m.nets.empty(), "model json: no nets");
    return m;
}

inline void save_model(const std::string& path, const Model& m) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << to_json(m).dump(2) << '\n';
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(std::string("model json: ") + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const json::exception& e) {
        throw InputError(std::string("model json: ") + e.what());
    }
}

inline json to_json(const TraceRecord& r) {
    json j = {{"iter", r.iter},
              {"neuron_counts", r.neuron_counts},
              {"ntrans", r.ntrans},
              {"sigma", r.sigma},
              {"train_rmse", r.train_rmse}};
    j["val_rmse"] = r.val_rmse ? json(*r.val_rmse) : json(nullptr);
    return j;
}

inline TraceRecord trace_from_json(const json& j) {
    TraceRecord r;
    r.iter = j.at("iter").get<int>();
    r.neuron_counts = j.at("neuron_counts").get<std::vector<int>>();
    r.ntrans = j.at("ntrans").get<int>();
    r.sigma = j.at("sigma").get<double>();
    r.train_rmse = j.at("train_rmse").get<double>();
    if (!j.at("val_rmse").is_null()) r.val_rmse = j.at("val_rmse").get<double>();
    return r;
}

/// One record per line.
inline void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace) {
    for (const auto& r : trace) out << to_json(r).dump() << '\n';
}

inline std::vector<TraceRecord> read_trace(std::istream& in) {
    std::vector<TraceRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(trace_from_json(json::parse(line)));
    }
    return out;
}

}  // namespace barn::io
