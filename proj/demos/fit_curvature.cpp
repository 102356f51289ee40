// Fit the id model to an observation CSV and print curvature and Box bias.
//   demo_fit_curvature tests/data/appendix_a1.csv
#include <cstdio>
#include <fstream>
#include <iostream>

#include "pm25/data.hpp"
#include "pm25/diagnostics.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: " << argv[0] << " observations.csv\n";
        return 1;
    }
    try {
        std::ifstream in(argv[1]);
        if (!in) throw pm25::DataError(std::string("cannot open ") + argv[1]);
        const auto frame = pm25::build_frame(pm25::parse_observations(in)).frame;

        const auto spec = pm25::ModelSpec::with_id();
        const pm25::FrameModel model(spec, frame);
        const auto fit = pm25::gauss_newton(model, spec.default_start());
        const auto names = spec.parameter_names();

        std::printf("n=%zu steps=%zu rss=%.4f %s\n", fit.n, fit.steps, fit.rss, fit.converged ? "" : "(not converged)");
        const auto bias = pm25::box_bias(model, fit);
        for (std::size_t j = 0; j < names.size(); ++j) {
            std::printf("  %-4s % .6f  bias % .3e", names[j].c_str(), fit.theta_hat[j], bias.bias[j]);
            if (bias.percent_bias[j]) std::printf("  (%.3f%%)", *bias.percent_bias[j]);
            std::printf("\n");
        }
        const auto c = pm25::bates_curvature(model, fit);
        std::printf("rho*K^N=%.4f rho*K^P=%.4f critical=%.4f\n", c.rho_k_n, c.rho_k_p, c.critical);
    } catch (const pm25::Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
