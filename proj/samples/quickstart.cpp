// Fits an ensemble to Friedman #1 data and compares it with least squares.

#include <barn/barn.hpp>

#include <iostream>

int main() {
    const auto ds = barn::data::gen_friedman(barn::data::Friedman::F1, 500, 1.0, 7);
    const auto split = barn::data::train_test_split(ds, 0.2, 7);

    barn::BarnConfig cfg;
    cfg.num_nets = 10;
    cfg.n_iter = 100;
    cfg.seed = 7;

    const std::vector<barn::Callback> stop = {barn::callbacks::make_trans_enough()};
    const auto result = barn::fit(split.train.X, split.train.y, cfg, stop);
    const auto pred = barn::predict(result.model, split.test.X);
    const auto ols = barn::data::ols_fit(split.train);

    std::cout << "iterations: " << result.trace.size() << '\n';
    std::cout << "neurons per net:";
    for (const auto& net : result.model.nets) std::cout << ' ' << net.k();
    std::cout << "\nBARN test RMSE: " << barn::data::rmse(pred, split.test.y) << '\n';
    std::cout << "OLS  test RMSE: " << barn::data::rmse(ols.predict(split.test.X), split.test.y) << '\n';
}
