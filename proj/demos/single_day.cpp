// One day through the frozen model: id, concentration, both interval profiles.
//   demo_single_day trg w t pc ep [prev_pm]
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "pm25/forecast.hpp"

int main(int argc, char** argv) {
    if (argc < 6) {
        std::cerr << "usage: " << argv[0] << " trg w t pc ep [prev_pm]\n";
        return 1;
    }
    const pm25::Predictors x{std::atof(argv[1]), std::atof(argv[2]), std::atof(argv[3]), std::atof(argv[4]),
                             std::atof(argv[5])};
    const auto model = pm25::FrozenModel::thesis_2018();
    try {
        const int id = argc > 6 ? pm25::predict_id_algo1(std::atof(argv[6])) : pm25::predict_id_algo2(model, x);
        const double pm = pm25::predict_pm(model, x, id);
        std::printf("id=%d pm_hat=%.1f\n", id, pm);
        for (const auto& p : pm25::IntervalProfile::presets()) {
            const auto f = pm25::interval(pm, p);
            std::printf("  %-12s %-4s [%.1f, %.1f]\n", p.name.c_str(), pm25::to_string(f.arm).c_str(), f.lo, f.hi);
        }
        for (const auto& flag : pm25::hazard_flags(x, pm)) std::printf("  %s\n", flag.c_str());
    } catch (const pm25::Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
