#include "ivrepro/diagnostics/diagnostics.hpp"

#include "ivrepro/error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

namespace ivrepro::diagnostics {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Runs body(i) for i in [0, count) on up to `workers` threads. Each index
// writes only its own output slot.
void parallel_for(int count, int workers, const std::function<void(int)>& body) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::vector<std::vector<Index>> rows_by_cluster(const DesignMatrixBundle& b) {
    const auto& g = b.clusters.front();
    std::vector<std::vector<Index>> rows(static_cast<std::size_t>(g.levels()));
    for (Index i = 0; i < b.n(); ++i) rows[static_cast<std::size_t>(g.codes[i])].push_back(i);
    return rows;
}

struct Replicate {
    double tau = 0;
    double se = 0;
    VectorXd pi;
    int redraws = 0;
    bool ok = false;
};

}  // namespace

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap_suite(const DesignMatrixBundle& bundle, int iters, std::uint64_t seed, int workers) {
    if (iters < 2) fail(ErrorCode::ValidationError, "bootstrap needs at least two iterations");
    const auto full = estimate::fit_2sls(bundle);
    const double tau = full.second.coefficient;
    const double se = full.second.std_error;

    const bool clustered = bundle.clustered();
    const auto clusters = clustered ? rows_by_cluster(bundle) : std::vector<std::vector<Index>>{};
    const int max_attempts = 100;

    std::vector<Replicate> reps(static_cast<std::size_t>(iters));
    parallel_for(iters, workers, [&](int r) {
        detail::Stream stream(seed ^ static_cast<std::uint64_t>(r));
        Replicate& rep = reps[static_cast<std::size_t>(r)];
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            std::vector<Index> rows;
            std::vector<int> draw_of_row;
            if (clustered) {
                const auto G = clusters.size();
                for (std::size_t k = 0; k < G; ++k) {
                    const auto& c = clusters[stream.below(G)];
                    rows.insert(rows.end(), c.begin(), c.end());
                    draw_of_row.insert(draw_of_row.end(), c.size(), static_cast<int>(k));
                }
            } else {
                const auto n = static_cast<std::uint64_t>(bundle.n());
                for (std::uint64_t k = 0; k < n; ++k) rows.push_back(static_cast<Index>(stream.below(n)));
            }
            try {
                const auto sub = estimate::subset_rows(bundle, rows, clustered ? &draw_of_row : nullptr);
                const auto fit = estimate::fit_2sls(sub);
                if (!std::isfinite(fit.second.coefficient) || !std::isfinite(fit.second.std_error)) throw Error(ErrorCode::SingularVcov, "non-finite replicate");
                rep.tau = fit.second.coefficient;
                rep.se = fit.second.std_error;
                rep.pi = fit.first.pi;
                rep.ok = true;
                return;
            } catch (const Error&) {
                ++rep.redraws;
            }
        }
    });

    BootstrapResult out;
    out.iters = iters;
    out.seed = seed;
    out.unit = clustered ? "cluster" : "observation";
    for (const auto& rep : reps) {
        out.redraws += rep.redraws;
        if (!rep.ok) fail(ErrorCode::TooManyDegenerateReplicates, "a replicate stayed degenerate after redraws");
    }
    if (out.redraws > iters / 10) {
        fail(ErrorCode::TooManyDegenerateReplicates, std::to_string(out.redraws) + " redraws for " + std::to_string(iters) + " replicates");
    }

    std::vector<double> abs_t;
    for (const auto& rep : reps) {
        out.taus.push_back(rep.tau);
        double t = 0;
        if (rep.se > 0) t = (rep.tau - tau) / rep.se;
        else if (rep.tau != tau) t = std::numeric_limits<double>::infinity();
        out.t_stats.push_back(t);
        abs_t.push_back(std::abs(t));
    }
    out.boot_c = {quantile_type7(out.taus, 0.025), quantile_type7(out.taus, 0.975)};
    const double q = quantile_type7(abs_t, 0.95);
    out.boot_t = {tau - q * se, tau + q * se};
    if (se == 0) out.boot_t = {tau, tau};

    // bootstrap variance of the first-stage coefficients
    const Index m = full.first.pi.size();
    VectorXd mean = VectorXd::Zero(m);
    for (const auto& rep : reps) mean += rep.pi;
    mean /= static_cast<double>(iters);
    MatrixXd V = MatrixXd::Zero(m, m);
    for (const auto& rep : reps) V += (rep.pi - mean) * (rep.pi - mean).transpose();
    V /= static_cast<double>(iters - 1);
    out.bootstrap_F = effective_f(full.first.pi, V, full.first.Qzz);
    return out;
}

JackknifeResult jackknife(const DesignMatrixBundle& bundle, double tau, int cluster_limit, int obs_sample, std::uint64_t seed,
                          int workers) {
    JackknifeResult out;
    std::vector<std::vector<Index>> left_out;
    if (bundle.clustered() && bundle.G() <= cluster_limit) {
        out.unit = "cluster";
        const auto groups = rows_by_cluster(bundle);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            out.ids.push_back(bundle.clusters.front().labels[g]);
            left_out.push_back(groups[g]);
        }
    } else {
        out.unit = "observation";
        const Index n = bundle.n();
        std::vector<Index> pick(static_cast<std::size_t>(n));
        std::iota(pick.begin(), pick.end(), 0);
        if (n > obs_sample) {
            detail::Stream stream(seed);
            for (std::size_t i = 0; i < static_cast<std::size_t>(obs_sample); ++i) {
                const auto j = i + stream.below(static_cast<std::uint64_t>(n) - i);
                std::swap(pick[i], pick[j]);
            }
            pick.resize(static_cast<std::size_t>(obs_sample));
            std::sort(pick.begin(), pick.end());
        }
        for (auto i : pick) {
            const Index source = bundle.source_rows.empty() ? i : bundle.source_rows[static_cast<std::size_t>(i)];
            out.ids.push_back("row " + std::to_string(source + 1));
            left_out.push_back({i});
        }
    }

    const int count = static_cast<int>(left_out.size());
    std::vector<double> est(static_cast<std::size_t>(count), std::numeric_limits<double>::quiet_NaN());
    parallel_for(count, workers, [&](int k) {
        const auto& drop = left_out[static_cast<std::size_t>(k)];
        std::vector<Index> rows;
        rows.reserve(static_cast<std::size_t>(bundle.n()));
        std::size_t p = 0;
        for (Index i = 0; i < bundle.n(); ++i) {
            if (p < drop.size() && drop[p] == i) {
                ++p;
                continue;
            }
            rows.push_back(i);
        }
        try {
            est[static_cast<std::size_t>(k)] = estimate::fit_2sls(estimate::subset_rows(bundle, rows)).second.coefficient;
        } catch (const Error&) {
        }
    });

    std::vector<std::string> ids;
    bool any = false;
    for (int k = 0; k < count; ++k) {
        const double e = est[static_cast<std::size_t>(k)];
        if (!std::isfinite(e)) {
            ++out.skipped;
            continue;
        }
        ids.push_back(out.ids[static_cast<std::size_t>(k)]);
        out.estimates.push_back(e);
        const double dev = std::abs(e - tau);
        if (!any) {
            out.min = out.max = e;
            out.delta = dev;
            out.most_influential = ids.back();
            any = true;
        } else {
            out.min = std::min(out.min, e);
            out.max = std::max(out.max, e);
            if (dev > out.delta) {
                out.delta = dev;
                out.most_influential = ids.back();
            }
        }
    }
    out.ids = ids;
    if (!any) fail(ErrorCode::RankDeficient, "every jackknife replicate failed");
    out.relative_shift = tau != 0 ? out.delta / std::abs(tau) : std::numeric_limits<double>::infinity();
    return out;
}

CapResult cap_sample(const DesignMatrixBundle& bundle, Index max_obs, std::uint64_t seed) {
    CapResult out;
    out.original_n = bundle.n();
    if (bundle.n() <= max_obs) {
        out.bundle = bundle;
        return out;
    }
    detail::Stream stream(seed);
    std::vector<Index> rows;
    if (bundle.clustered()) {
        const auto groups = rows_by_cluster(bundle);
        std::vector<std::size_t> order(groups.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const auto j = i + stream.below(order.size() - i);
            std::swap(order[i], order[j]);
        }
        for (auto g : order) {
            if (static_cast<Index>(rows.size() + groups[g].size()) > max_obs) continue;
            rows.insert(rows.end(), groups[g].begin(), groups[g].end());
        }
    } else {
        std::vector<Index> all(static_cast<std::size_t>(bundle.n()));
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(max_obs); ++i) {
            const auto j = i + stream.below(all.size() - i);
            std::swap(all[i], all[j]);
        }
        rows.assign(all.begin(), all.begin() + max_obs);
    }
    std::sort(rows.begin(), rows.end());
    out.bundle = estimate::subset_rows(bundle, rows);
    out.capped = true;
    return out;
}

}  // namespace ivrepro::diagnostics
