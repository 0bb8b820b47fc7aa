// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spix/coherence.hpp"
#include "spix/error.hpp"
#include "spix/trainer.hpp"

namespace spix {

struct SweepRow {
    double rate = 0;
    std::size_t measurements = 0;
    double psnr = 0, ssim = 0, selectivity = 0;
    double mu = 0, welch_lower = 0;
};

struct SweepReport {
    std::vector<SweepRow> rows; // rates descending

    std::string csv() const {
        std::ostringstream os;
        os << "rate,M,psnr,ssim,selectivity,mu,welch\n";
        for (const auto& r : rows) {
            os << format_double(r.rate) << ',' << r.measurements << ',' << format_double(r.psnr) << ','
               << format_double(r.ssim) << ',' << format_double(r.selectivity) << ',' << format_double(r.mu) << ','
               << format_double(r.welch_lower) << '\n';
        }
        return os.str();
    }
};

// One training per rate with the same config and seed; each model is scored
// on the validation split and its binarized stack analyzed for coherence.
// `on_model` sees every trained checkpoint (e.g. to save it), in row order
// on the calling thread. Up to `workers` rates train concurrently; rows do
// not depend on the worker count.
inline SweepReport rate_sweep(const Dataset& data, std::vector<double> rates, const TrainConfig& config,
                              const std::function<void(double, const TrainResult&)>& on_model = {},
                              std::size_t workers = 1) {
    if (rates.empty()) throw ParameterError("rate_sweep: no rates given");
    if (workers == 0) throw ParameterError("rate_sweep: workers must be >= 1");
    std::sort(rates.begin(), rates.end(), std::greater<>());
    if (std::adjacent_find(rates.begin(), rates.end()) != rates.end()) throw ParameterError("rate_sweep: duplicate rate");

    struct Slot {
        std::optional<TrainResult> model;
        SweepRow row;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(rates.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < rates.size();) {
            try {
                TrainConfig cfg = config;
                cfg.rate = rates[k];
                TrainResult res = train(data, cfg);
                const EvalReport ev = evaluate(res.checkpoint, data, Split::validation);
                const CoherenceReport coh = mutual_coherence(binarize(res.checkpoint.model.latent));
                slots[k].row = {rates[k], res.checkpoint.model.measurements(), ev.mean_psnr, ev.mean_ssim,
                                ev.mean_selectivity, coh.mu, coh.welch_lower};
                if (on_model) slots[k].model = std::move(res);
            } catch (...) {
                slots[k].error = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, rates.size()); ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    SweepReport rep;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (slots[k].error) {
            try {
                std::rethrow_exception(slots[k].error);
            } catch (const std::exception& e) {
                throw Error("rate_sweep at rate " + format_double(rates[k]) + ": " + e.what());
            }
        }
        rep.rows.push_back(slots[k].row);
        if (on_model) on_model(rates[k], *slots[k].model);
    }
    return rep;
}

} // namespace spix
