// Energy and spectral diagnostics on live activations of the toy model.
//
// Per layer l and head h:
//   energy_in / energy_out  J(U^l) and J(U^{l+1}) under the head's
//                           symmetric-keys kernel exp(k(x).k(y)/sqrt(d_qk))
//                           and the head's p
//   spectral                report on the head's combined operator A (.) P
//                           (row-renormalized if the head does so), probed
//                           with the ramp z_i = i; regime from the head's V

#ifndef PLAT_AUDIT_HPP
#define PLAT_AUDIT_HPP

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "plat/dataset.hpp"
#include "plat/model.hpp"
#include "plat/spectral.hpp"

namespace plat {

struct HeadAudit {
    std::size_t layer = 0;
    std::size_t head = 0;
    double p = 2.0;
    double energy_in = 0.0;   // NaN if the kernel overflows
    double energy_out = 0.0;
    SpectralReport spectral;
};

inline constexpr std::size_t kAuditRatioSteps = 100;

std::vector<HeadAudit> audit_hooks(const ModelSpec& model, const TokenSequence& x);

struct ExampleAudit {
    std::size_t example = 0;
    std::vector<HeadAudit> heads;
};

std::vector<ExampleAudit> audit_hooks(const ModelSpec& model, const std::vector<Example>& examples);

/// Header: example,layer,head,p,energy_in,energy_out,lambda_max,lambda_converged,final_ratio,regime
void write_audit_csv(std::ostream& out, const std::vector<ExampleAudit>& audits);

}  // namespace plat

#endif  // PLAT_AUDIT_HPP
