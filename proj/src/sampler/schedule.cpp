#include "strata/sampler/schedule.hpp"

#include "strata/core/errors.hpp"

#include <cmath>

namespace strata::sampler {

NoiseSchedule schedule_from_betas(const std::vector<double>& betas, double eta)
{
    if (betas.empty())
        throw DomainError("schedule: need at least one step");
    if (!(eta >= 0.0 && eta <= 1.0))
        throw DomainError("schedule: eta must lie in [0, 1]");
    NoiseSchedule s;
    s.kind = "explicit";
    s.T = static_cast<int>(betas.size());
    s.eta = eta;
    s.beta.assign(s.T + 1, 0.0);
    s.alpha_bar.assign(s.T + 1, 1.0);
    s.sigma.assign(s.T + 1, 0.0);
    for (int t = 1; t <= s.T; ++t) {
        const double b = betas[t - 1];
        if (!(b > 0.0 && b < 1.0))
            throw DomainError("schedule: beta must lie in (0, 1)");
        s.beta[t] = b;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - b);
        const double posterior = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * b;
        s.sigma[t] = eta * std::sqrt(posterior);
    }
    return s;
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end, double eta)
{
    if (T < 1)
        throw DomainError("schedule: T must be >= 1");
    std::vector<double> betas(T);
    for (int t = 1; t <= T; ++t)
        betas[t - 1] = T == 1 ? beta_start
                              : beta_start + (beta_end - beta_start) * (t - 1) / static_cast<double>(T - 1);
    NoiseSchedule s = schedule_from_betas(betas, eta);
    s.kind = "linear";
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    return s;
}

nlohmann::json schedule_to_json(const NoiseSchedule& s)
{
    nlohmann::ordered_json j;
    j["kind"] = s.kind;
    j["T"] = s.T;
    j["beta_start"] = s.beta_start;
    j["beta_end"] = s.beta_end;
    j["eta"] = s.eta;
    if (s.kind != "linear")
        j["betas"] = std::vector<double>(s.beta.begin() + 1, s.beta.end());
    return j;
}

NoiseSchedule schedule_from_json(const nlohmann::json& j)
{
    try {
        const std::string kind = j.value("kind", std::string("linear"));
        const double eta = j.value("eta", 1.0);
        if (kind == "linear")
            return linear_schedule(j.value("T", kDefaultT), j.value("beta_start", kDefaultBetaStart),
                                   j.value("beta_end", kDefaultBetaEnd), eta);
        if (kind == "explicit")
            return schedule_from_betas(j.at("betas").get<std::vector<double>>(), eta);
        throw ConfigError("schedule: unknown kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
}

StepList make_step_list(int T, int count)
{
    if (T < 1 || count < 1)
        throw DomainError("make_step_list: T and count must be >= 1");
    if (count > T)
        count = T;
    StepList steps;
    steps.reserve(count + 1);
    for (int k = 0; k < count; ++k) {
        // Integer arithmetic keeps the list platform-independent.
        const long long num = static_cast<long long>(T) * (count - k);
        steps.push_back(static_cast<int>((2 * num + count) / (2LL * count)));
    }
    steps.push_back(0);
    return steps;
}

StepList normalize_step_list(const StepList& steps, int T)
{
    if (steps.empty())
        throw DomainError("step list is empty");
    StepList out = steps;
    if (out.back() != 0)
        out.push_back(0);
    if (out.front() > T)
        throw DomainError("step list exceeds schedule length");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] < out[i - 1]))
            throw DomainError("step list must be strictly decreasing");
    if (out.back() < 0)
        throw DomainError("step list has negative timestep");
    return out;
}

} // namespace strata::sampler
