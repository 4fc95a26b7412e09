#pragma once

#include "bidca/core.hpp"
#include "bidca/ip.hpp"

namespace bidca {

class SubproblemFailure : public Error {
 public:
  using Error::Error;
};

/// Penalty parameter grew past the configured ceiling. Diagnostic of a
/// constraint-qualification failure on the problem instance.
class PenaltyUnbounded : public Error {
 public:
  using Error::Error;
};

enum class InexactRule { summable, step_proportional };
enum class DcaVariant { ip_dca, ipl_dca };
enum class StoppingRule { algorithm, paper };
enum class Termination { running, converged };

/// min g0(z) - h0(z) over the convex set {z in sigma : coupling_A z <= coupling_b}
/// subject to g1(z) - h1(z) <= 0. All four functions convex; h0 and h1 enter
/// only through value/subgradient oracles. The structural descriptors of g0
/// and g1 (smooth + hinges-of-affine + linear) enable the slack
/// reformulation of the convex subproblems.
struct DcProblem {
  Eigen::Index dim = 0;
  ConvexOracle g0, h0, g1, h1;
  Box sigma;
  std::optional<ConvexStructure> g0_structure;
  std::optional<ConvexStructure> g1_structure;
  RowSpMat coupling_A;
  Vec coupling_b;

  Eigen::Index coupling_count() const { return coupling_A.rows(); }
};

struct DcaParams {
  double rho = 1e-2;         // prox modulus (iP-DCA)
  double sigma = 1e-2;       // strong-convexity margin (iPL-DCA)
  double beta0 = 1.0;
  double delta_beta = 5.0;
  double beta_max = 1e6;
  InexactRule criterion = InexactRule::summable;
  double zeta0 = 1e-2;       // zeta_k = zeta0 / (k+1), square-summable
  double tol = 1e-4;
  int max_iter = 1000;
  StoppingRule stopping = StoppingRule::algorithm;
  double paper_t_threshold = 1e-4;  // t cutoff of the relative-step rule
  double subproblem_tol = 1e-8;
  bool check_decrease = true;
  double decrease_slack = 1e-8;

  void validate() const;
  double zeta(int k) const { return zeta0 / static_cast<double>(k + 1); }
};

struct IterationRecord {
  int k = 0;
  double beta = 0.0;
  double rho = 0.0;
  double t = 0.0;
  double step_norm = 0.0;
  double merit = 0.0;        // phi_k(z^k) = f0 + beta_k max(f1, 0)
  double e_norm = 0.0;       // residual of the inexactness certificate
  double criterion_bound = 0.0;
  bool penalty_increased = false;
  double decrease_violation = 0.0;
};

struct KktResidual {
  double stationarity = std::numeric_limits<double>::quiet_NaN();
  double complementarity = std::numeric_limits<double>::quiet_NaN();
  double feasibility = std::numeric_limits<double>::quiet_NaN();
};

struct Trace {
  std::vector<IterationRecord> iterations;
  std::string termination;  // "converged"
  KktResidual final_kkt;
  int decrease_violations = 0;
  double beta_final = 0.0;
};

struct DcResult {
  Vec z;
  double lambda = 0.0;
  Trace trace;
};

/// Bookkeeping attached to a slack-reformulated subproblem; everything
/// needed to reconstruct an explicit element of the subdifferential of the
/// subproblem objective (plus normal cone) from an ip certificate.
struct SlackMap {
  Eigen::Index dim_z = 0;
  Eigen::Index n_obj_hinges = 0;
  Eigen::Index n_cons_hinges = 0;
  bool linearized = false;
  double beta = 0.0;
  double rho = 0.0;
  Vec z_k, xi0, xi1;
  double h0_zk = 0.0, h1_zk = 0.0;
  std::vector<HingeTerm> obj_hinges;
  std::vector<HingeTerm> cons_hinges;
  std::optional<SmoothFn> g0_smooth;
  AffineFn g0_linear;
  std::optional<SmoothFn> g1_smooth;
  AffineFn g1_linear;
  Vec g1_grad_zk;        // gradient of the smooth g1 part at z_k (linearized mode)
  double g1_smooth_zk = 0.0;
  Eigen::Index coupling_rows = 0;

  Eigen::Index var_count() const { return dim_z + n_obj_hinges + n_cons_hinges + 1; }
  Eigen::Index u_offset() const { return dim_z; }
  Eigen::Index v_offset() const { return dim_z + n_obj_hinges; }
  Eigen::Index s_offset() const { return dim_z + n_obj_hinges + n_cons_hinges; }
  Eigen::Index row_u_begin() const { return 0; }
  Eigen::Index row_v_begin() const { return n_obj_hinges; }
  Eigen::Index row_coupling_begin() const { return n_obj_hinges + n_cons_hinges; }
  /// Linear row index of the max-term gap when it is affine, else -1
  /// (the gap then lives in the single smooth convex row).
  Eigen::Index gap_linear_row() const;

  bool gap_is_convex_row() const { return !linearized && g1_smooth.has_value(); }
  /// Gap value g1(z) - h1(z_k) - <xi1, z - z_k> (linearized variant when
  /// the map was built for it) evaluated from the structural pieces.
  double gap_value(const Vec& z) const;
  /// Gradient of the smooth+linear share of the gap at z.
  Vec gap_smooth_gradient(const Vec& z) const;
};

struct SlackProgram {
  SmoothConvexProgram program;
  SlackMap map;
  Vec start;
};

/// Details of the subgradient certificate extracted from a solved
/// subproblem: the (bound-snapped) primal point, an explicit element e of
/// d(phi_k)(z) + N(z), and the max-term multiplier in [0, 1].
struct SubgradientCertificate {
  Vec z;
  Vec e;
  double lambda_tilde = 0.0;
  double gap = 0.0;
};

/// Proximal linearized subproblem of iP-DCA: hinges of g0/g1 become slack
/// rows, the positive part of the constraint gap becomes a single slack s
/// with objective weight beta.
SlackProgram build_subproblem(const DcProblem& p, const Vec& z_k, const Vec& xi0,
                              const Vec& xi1, double beta, double rho);

/// Variant with the smooth convex part of g1 replaced by its gradient plane
/// at z_k; requires g1 to carry a smoothness modulus and no hinge terms.
SlackProgram build_linearized_subproblem(const DcProblem& p, const Vec& z_k,
                                         const Vec& xi0, const Vec& xi1,
                                         double beta, double rho_k);

double compute_t(double gap);

/// beta_k + delta iff max(beta_k, 1/t) < 1/step, with 1/0 = +inf on both
/// sides: a feasible step (t = 0) never escalates, a zero step with
/// infeasibility does.
double update_penalty(double beta_k, double t_next, double step_norm,
                      double delta_beta);

SubgradientCertificate extract_certificate_details(const KktCertificate& cert,
                                                   const SlackProgram& sp);
std::pair<Vec, Vec> extract_subgradient_certificate(const KktCertificate& cert,
                                                    const SlackProgram& sp);

/// Stationarity report for the original DC program at z with multiplier
/// lambda: distance from 0 to the assembled element of
/// dg0 - dh0 + lambda (dg1 - dh1) + N at z, plus complementarity and
/// constraint violation.
KktResidual dc_kkt_residual(const DcProblem& p, const KktCertificate& cert,
                            const SlackProgram& sp, const Vec& z, double lambda);

DcResult run_dca(const DcProblem& p, const DcaParams& params, DcaVariant variant,
                 const Vec& z0);

}  // namespace bidca
