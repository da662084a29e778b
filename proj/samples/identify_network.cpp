// Simulate a small sparse plus rank-one network, identify it and print the
// recovered structure next to the true one.

#include "slnet/slnet.hpp"

#include <cstdio>

int main()
{
    using namespace slnet;

    const int p = 4;
    const GroundTruthModel model = gen_sl_model(p, /*n=*/1, /*s=*/4, /*seed=*/7);
    const TimeSeries Y = simulate(model, 300, 11);

    SLRConfig cfg;
    cfg.T = 30;
    const IdentResult res = run_algorithm1(Y, KernelType::TypeII, cfg);

    std::printf("true rank %d, selected rank %d\n", model.n(), res.n);
    std::printf("true sparse entries:");
    for (auto [i, j] : model.support)
        std::printf(" %d->%d", j + 1, i + 1);
    std::printf("\nidentified edges:   ");
    for (auto [j, i] : res.network.sparse_edges)
        std::printf(" %d->%d", j + 1, i + 1);
    std::printf("\n");
    if (res.n > 0) {
        const double cosang = std::abs(res.U.col(0).dot(model.F.col(0)));
        std::printf("|cos| between estimated and true loading: %.3f\n", cosang);
    }

    const CoefficientTensor G_hat = res.estimate.predictor().resized(model.T_true);
    std::printf("AIRF %.1f\n", airf(model.G(), G_hat));
    const TimeSeries test = simulate(model, 1000, 12);
    std::printf("COD1 %.3f (true model %.3f)\n", cod1(test, predict_one_step(G_hat, test)),
                cod1(test, predict_one_step(model.G(), test)));
    return 0;
}
