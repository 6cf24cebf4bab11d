#include "fedsysid/scaling.hpp"

#include <cmath>
#include <map>

namespace fedsysid {

namespace {

double column_value(const ExperimentRecord& r, const std::string& column) {
    if (column == "M") return static_cast<double>(r.M);
    if (column == "N_i") return static_cast<double>(r.N_i);
    if (column == "epsilon") return r.epsilon;
    if (column == "K_i") return static_cast<double>(r.K_i);
    throw ConfigError("group_by", "cannot group by '" + column + "' (expected M|N_i|epsilon|K_i)");
}

}  // namespace

std::vector<FinalErrorPoint> final_errors(const std::vector<ExperimentRecord>& records,
                                          const std::string& column) {
    // value -> seed -> (round, error) at the latest round seen.
    std::map<double, std::map<Seed, std::pair<Index, double>>> last;
    for (const ExperimentRecord& r : records) {
        auto& slot = last[column_value(r, column)][r.seed];
        if (r.round >= slot.first) slot = {r.round, r.max_error};
    }
    std::vector<FinalErrorPoint> points;
    for (const auto& [value, seeds] : last) {
        FinalErrorPoint p;
        p.value = value;
        p.seeds = static_cast<Index>(seeds.size());
        for (const auto& [seed, entry] : seeds) p.mean += entry.second;
        p.mean /= static_cast<double>(p.seeds);
        if (p.seeds > 1) {
            double var = 0.0;
            for (const auto& [seed, entry] : seeds) var += (entry.second - p.mean) * (entry.second - p.mean);
            var /= static_cast<double>(p.seeds - 1);
            p.std_error = std::sqrt(var / static_cast<double>(p.seeds));
        }
        points.push_back(p);
    }
    return points;
}

ScalingReport sqrtM_scaling(const std::vector<ExperimentRecord>& records) {
    const std::vector<FinalErrorPoint> points = final_errors(records, "M");
    if (points.size() < 3)
        throw InsufficientDataError("sqrtM_scaling needs at least 3 distinct M values, got " +
                                    std::to_string(points.size()));
    ScalingReport report;
    std::vector<double> xs, ys;
    for (const FinalErrorPoint& p : points) {
        if (!(p.mean > 0.0)) throw InsufficientDataError("sqrtM_scaling: non-positive error");
        xs.push_back(std::log(p.value));
        ys.push_back(std::log(p.mean));
        report.rows.push_back({static_cast<Index>(p.value), 1.0 / std::sqrt(p.value), p.mean});
    }
    report.fit = fit_line(xs, ys);
    return report;
}

}  // namespace fedsysid
