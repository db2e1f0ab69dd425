// Simulates a block-treatment panel and compares DID with synthetic DID.
#include <iostream>

#include "sdidkit/sdidkit.hpp"

int main() {
  sdidkit::PanelSpec spec;
  spec.n_co = 30;
  spec.n_tr = 5;
  spec.t_pre = 30;
  spec.t_post = 10;
  spec.tau = 0.05;
  spec.treated_loading_shift = 0.02;
  spec.seed = 7;
  const auto g = sdidkit::generate_panel(spec);

  const auto did = sdidkit::twfe_did(g.panel, g.assignment, {});
  sdidkit::SdidOptions opt;
  opt.n_boot = 200;
  const auto sdid = sdidkit::sdid_estimate(g.panel, g.assignment, opt);

  std::cout << "true tau  " << g.true_tau << "\n"
            << "DID       " << did.tau_hat << " (se " << did.se << ")\n"
            << "SDID      " << sdid.att.tau_hat << " (se " << sdid.att.se << ")\n"
            << "zeta      " << sdid.weights.zeta << "\n";
}
