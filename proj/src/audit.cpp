#include "plat/audit.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "plat/csv.hpp"
#include "plat/energy_flow.hpp"

namespace plat {

std::vector<HeadAudit> audit_hooks(const ModelSpec& model, const TokenSequence& x) {
    const ForwardCache cache = forward(model, x);
    std::vector<double> ramp(x.rows());
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);

    std::vector<HeadAudit> out;
    for (std::size_t l = 0; l < cache.layers.size(); ++l) {
        const LayerCache& lc = cache.layers[l];
        for (std::size_t h = 0; h < lc.heads.size(); ++h) {
            const HeadCache& hc = lc.heads[h];
            HeadAudit a;
            a.layer = l;
            a.head = h;
            a.p = model.layers[l].heads[h].p;
            try {
                const EnergyKernel kernel = make_kernel(KernelMode::symmetric_keys, hc.q, hc.k);
                a.energy_in = energy_functional(cache.states[l], kernel, a.p);
                a.energy_out = energy_functional(cache.states[l + 1], kernel, a.p);
            } catch (const std::invalid_argument&) {
                a.energy_in = a.energy_out = std::numeric_limits<double>::quiet_NaN();
            }
            a.spectral = build_spectral_report(hc.weights, ramp, kAuditRatioSteps,
                                               x.rows() >= 2 ? &hc.v : nullptr);
            out.push_back(std::move(a));
        }
    }
    return out;
}

std::vector<ExampleAudit> audit_hooks(const ModelSpec& model, const std::vector<Example>& examples) {
    std::vector<ExampleAudit> out;
    out.reserve(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) out.push_back({i, audit_hooks(model, examples[i].tokens)});
    return out;
}

void write_audit_csv(std::ostream& out, const std::vector<ExampleAudit>& audits) {
    out << "example,layer,head,p,energy_in,energy_out,lambda_max,lambda_converged,final_ratio,regime\n";
    for (const auto& ex : audits) {
        for (const auto& h : ex.heads) {
            const auto& s = h.spectral;
            const double final_ratio = s.ratio_trajectory.empty() ? 0.0 : s.ratio_trajectory.back().ratio;
            out << ex.example << ',' << h.layer << ',' << h.head << ',' << format_real(h.p) << ','
                << format_real(h.energy_in) << ',' << format_real(h.energy_out) << ','
                << format_real(s.lambda_max) << ',' << (s.lambda_max_converged ? 1 : 0) << ','
                << format_real(final_ratio) << ',' << (s.regime ? to_string(*s.regime) : "") << '\n';
        }
    }
}

}  // namespace plat
